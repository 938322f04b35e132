#include "locdiff/graph.hpp"

#include <algorithm>
#include <cmath>
#include <deque>
#include <istream>
#include <ostream>
#include <sstream>
#include <string>

#include "locdiff/errors.hpp"

namespace locdiff {

DependencyGraph::DependencyGraph(std::vector<int> block_dims,
                                 const std::vector<std::pair<int, int>>& edges)
    : b_(static_cast<int>(block_dims.size())), block_dims_(std::move(block_dims)) {
  if (b_ == 0) throw ArgumentError("graph: vertex count must be positive");
  block_offsets_.resize(b_);
  for (int v = 0; v < b_; ++v) {
    if (block_dims_[v] < 1) throw ArgumentError("graph: block dimensions must be >= 1");
    block_offsets_[v] = total_dim_;
    total_dim_ += block_dims_[v];
  }

  adj_.assign(b_, {});
  std::vector<bool> has_self(b_, false);
  for (auto [i, j] : edges) {
    if (i < 1 || i > b_ || j < 1 || j > b_)
      throw ArgumentError("graph: edge endpoint out of range");
    if (i == j) {
      has_self[i - 1] = true;
      adj_[i - 1].push_back(i - 1);
    } else {
      adj_[i - 1].push_back(j - 1);
      adj_[j - 1].push_back(i - 1);
    }
  }
  for (int v = 0; v < b_; ++v) {
    if (!has_self[v])
      throw ArgumentError("graph: vertex " + std::to_string(v + 1) +
                          " lacks a self-loop; use with_self_loops to add them");
    auto& row = adj_[v];
    std::sort(row.begin(), row.end());
    row.erase(std::unique(row.begin(), row.end()), row.end());
  }
}

DependencyGraph DependencyGraph::with_self_loops(std::vector<int> block_dims,
                                                 std::vector<std::pair<int, int>> edges) {
  const int b = static_cast<int>(block_dims.size());
  std::vector<bool> has_self(b, false);
  for (auto [i, j] : edges)
    if (i == j && i >= 1 && i <= b) has_self[i - 1] = true;
  for (int v = 1; v <= b; ++v)
    if (!has_self[v - 1]) edges.emplace_back(v, v);
  return DependencyGraph(std::move(block_dims), edges);
}

DependencyGraph DependencyGraph::path(int b, std::vector<int> block_dims) {
  if (block_dims.empty()) block_dims.assign(static_cast<std::size_t>(b), 1);
  std::vector<std::pair<int, int>> edges;
  for (int v = 1; v < b; ++v) edges.emplace_back(v, v + 1);
  return with_self_loops(std::move(block_dims), std::move(edges));
}

DependencyGraph DependencyGraph::banded(int d, int r0) {
  if (r0 < 1) throw ArgumentError("banded graph: r0 must be >= 1");
  std::vector<std::pair<int, int>> edges;
  for (int i = 1; i <= d; ++i)
    for (int j = i + 1; j <= std::min(d, i + r0); ++j) edges.emplace_back(i, j);
  return with_self_loops(std::vector<int>(static_cast<std::size_t>(d), 1), std::move(edges));
}

DependencyGraph DependencyGraph::lattice(int side, int nu) {
  if (side < 1 || nu < 1) throw ArgumentError("lattice: side and nu must be >= 1");
  int b = 1;
  for (int k = 0; k < nu; ++k) b *= side;
  std::vector<int> strides(nu);
  strides[0] = 1;
  for (int k = 1; k < nu; ++k) strides[k] = strides[k - 1] * side;
  std::vector<std::pair<int, int>> edges;
  for (int v = 0; v < b; ++v) {
    for (int k = 0; k < nu; ++k) {
      int coord = (v / strides[k]) % side;
      if (coord + 1 < side) edges.emplace_back(v + 1, v + strides[k] + 1);
    }
  }
  return with_self_loops(std::vector<int>(static_cast<std::size_t>(b), 1), std::move(edges));
}

int DependencyGraph::block_dim(int j) const {
  check_vertex(j, "block_dim");
  return block_dims_[j - 1];
}

int DependencyGraph::block_offset(int j) const {
  check_vertex(j, "block_offset");
  return block_offsets_[j - 1];
}

bool DependencyGraph::adjacent(int i, int j) const {
  check_vertex(i, "adjacent");
  check_vertex(j, "adjacent");
  const auto& row = adj_[i - 1];
  return std::binary_search(row.begin(), row.end(), j - 1);
}

const std::vector<int>& DependencyGraph::neighbors(int j) const {
  check_vertex(j, "neighbors");
  return adj_[j - 1];
}

std::vector<int> DependencyGraph::distances_from(int j) const {
  check_vertex(j, "distances_from");
  std::vector<int> dist(b_, kUnreachable);
  std::deque<int> queue;
  dist[j - 1] = 0;
  queue.push_back(j - 1);
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (int w : adj_[v]) {
      if (dist[w] == kUnreachable) {
        dist[w] = dist[v] + 1;
        queue.push_back(w);
      }
    }
  }
  return dist;
}

int DependencyGraph::distance(int i, int j) const {
  check_vertex(i, "distance");
  check_vertex(j, "distance");
  if (i == j) return 0;
  // truncated BFS from i
  std::vector<int> dist(b_, kUnreachable);
  std::deque<int> queue;
  dist[i - 1] = 0;
  queue.push_back(i - 1);
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    for (int w : adj_[v]) {
      if (dist[w] == kUnreachable) {
        dist[w] = dist[v] + 1;
        if (w == j - 1) return dist[w];
        queue.push_back(w);
      }
    }
  }
  return kUnreachable;
}

std::vector<int> DependencyGraph::neighborhood(int j, int r) const {
  check_vertex(j, "neighborhood");
  if (r < 0) throw ArgumentError("neighborhood: radius must be >= 0");
  std::vector<int> dist(b_, kUnreachable);
  std::deque<int> queue;
  dist[j - 1] = 0;
  queue.push_back(j - 1);
  std::vector<int> members{j};
  while (!queue.empty()) {
    int v = queue.front();
    queue.pop_front();
    if (dist[v] == r) continue;
    for (int w : adj_[v]) {
      if (dist[w] == kUnreachable) {
        dist[w] = dist[v] + 1;
        members.push_back(w + 1);
        queue.push_back(w);
      }
    }
  }
  std::sort(members.begin(), members.end());
  return members;
}

std::vector<int> DependencyGraph::flatten_window(const std::vector<int>& idx_set) const {
  std::vector<int> coords;
  for (int v : idx_set) {
    check_vertex(v, "flatten_window");
    for (int c = 0; c < block_dims_[v - 1]; ++c) coords.push_back(block_offsets_[v - 1] + c);
  }
  return coords;
}

LocalityCertificate DependencyGraph::certify_locality(double S, double nu, int r_max) const {
  if (!(S > 0.0) || !(nu > 0.0)) throw ArgumentError("certify_locality: S and nu must be positive");
  if (r_max < 1) throw ArgumentError("certify_locality: r_max must be >= 1");
  LocalityCertificate cert;
  cert.S = S;
  cert.nu = nu;
  cert.worst_ratio = 0.0;
  for (int j = 1; j <= b_; ++j) {
    auto dist = distances_from(j);
    std::vector<int> count_at(static_cast<std::size_t>(r_max) + 1, 0);
    for (int v = 0; v < b_; ++v)
      if (dist[v] != kUnreachable && dist[v] <= r_max) ++count_at[dist[v]];
    int cumulative = 0;
    for (int r = 0; r <= r_max; ++r) {
      cumulative += count_at[r];
      if (r == 0) continue;
      double bound = 1.0 + S * std::pow(static_cast<double>(r), nu);
      double ratio = static_cast<double>(cumulative) / bound;
      if (ratio > cert.worst_ratio) {
        cert.worst_ratio = ratio;
        cert.worst_vertex = j;
        cert.worst_radius = r;
      }
    }
  }
  cert.holds = cert.worst_ratio <= 1.0;
  return cert;
}

DependencyGraph DependencyGraph::parse(std::istream& in) {
  std::string line;
  int b = -1;
  std::vector<int> dims;
  std::vector<std::pair<int, int>> edges;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string tag;
    if (!(ls >> tag) || tag[0] == '#') continue;
    if (tag == "b") {
      if (!(ls >> b) || b < 1)
        throw ArgumentError("graph parse: bad vertex count at line " + std::to_string(line_no));
    } else if (tag == "dims") {
      int d;
      while (ls >> d) dims.push_back(d);
      if (static_cast<int>(dims.size()) != b)
        throw ArgumentError("graph parse: dims count does not match b");
    } else if (tag == "edge") {
      int i, j;
      if (!(ls >> i >> j))
        throw ArgumentError("graph parse: bad edge at line " + std::to_string(line_no));
      // file ids are 0-based
      edges.emplace_back(i + 1, j + 1);
    } else {
      throw ArgumentError("graph parse: unknown record '" + tag + "' at line " +
                          std::to_string(line_no));
    }
  }
  if (b < 1) throw ArgumentError("graph parse: missing 'b' header");
  if (dims.empty()) dims.assign(static_cast<std::size_t>(b), 1);
  return with_self_loops(std::move(dims), std::move(edges));
}

void DependencyGraph::serialize(std::ostream& out) const {
  out << "b " << b_ << "\n";
  out << "dims";
  for (int d : block_dims_) out << ' ' << d;
  out << "\n";
  for (int v = 0; v < b_; ++v)
    for (int w : adj_[v])
      if (w > v) out << "edge " << v << ' ' << w << "\n";
}

std::uint64_t DependencyGraph::content_hash() const {
  std::ostringstream os;
  serialize(os);
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : os.str()) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

bool DependencyGraph::operator==(const DependencyGraph& other) const {
  return block_dims_ == other.block_dims_ && adj_ == other.adj_;
}

void DependencyGraph::check_vertex(int j, const char* where) const {
  if (j < 1 || j > b_)
    throw ArgumentError(std::string(where) + ": vertex " + std::to_string(j) +
                        " out of range [1, " + std::to_string(b_) + "]");
}

}  // namespace locdiff
