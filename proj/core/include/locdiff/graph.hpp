#pragma once

#include <cstdint>
#include <iosfwd>
#include <limits>
#include <utility>
#include <vector>

namespace locdiff {

struct LocalityCertificate {
  double S = 0.0;
  double nu = 0.0;
  bool holds = false;
  int worst_vertex = 0;   // 1-based
  int worst_radius = 0;
  double worst_ratio = 0.0;  // max over (j,r) of |N_j^r| / (1 + S r^nu)
};

/// Undirected dependency graph over block-valued vertices. Vertices are 1..b
/// in this API (matching the usual math indexing); flat coordinate indices are
/// 0-based. Immutable after construction, safe for concurrent reads.
///
/// Construction requires every vertex to carry a self-loop; use with_self_loops
/// to add them explicitly to an edge list that lacks them.
class DependencyGraph {
 public:
  static constexpr int kUnreachable = std::numeric_limits<int>::max();

  /// edges are 1-based (i, j) pairs; self-loops (j, j) must all be present.
  DependencyGraph(std::vector<int> block_dims, const std::vector<std::pair<int, int>>& edges);

  /// Same, but inserts any missing self-loops first.
  static DependencyGraph with_self_loops(std::vector<int> block_dims,
                                         std::vector<std::pair<int, int>> edges);

  /// Path graph 1-2-...-b with the given per-vertex dimensions (default all 1).
  static DependencyGraph path(int b, std::vector<int> block_dims = {});

  /// Coordinates 0..d-1 as unit-dim vertices, i adjacent to j iff |i-j| <= r0.
  /// This is the dependency graph of a banded precision matrix of bandwidth r0.
  static DependencyGraph banded(int d, int r0);

  /// nu-dimensional cubic lattice of side `side` (unit blocks, nearest-neighbor edges).
  static DependencyGraph lattice(int side, int nu);

  int vertex_count() const { return b_; }
  int total_dim() const { return total_dim_; }
  const std::vector<int>& block_dims() const { return block_dims_; }
  int block_dim(int j) const;     // 1-based
  int block_offset(int j) const;  // first flat coordinate of vertex j

  bool adjacent(int i, int j) const;
  const std::vector<int>& neighbors(int j) const;  // sorted, includes j

  /// BFS shortest-path length; kUnreachable for disconnected pairs.
  int distance(int i, int j) const;

  /// BFS distances from j to every vertex (kUnreachable where disconnected).
  std::vector<int> distances_from(int j) const;

  /// Extended neighborhood N_j^r = { i : d_G(i,j) <= r }, sorted ascending.
  std::vector<int> neighborhood(int j, int r) const;

  /// Concatenated 0-based flat coordinates of the blocks in idx_set, in vertex order.
  std::vector<int> flatten_window(const std::vector<int>& idx_set) const;

  /// Checks |N_j^r| <= 1 + S r^nu for all j and 1 <= r <= r_max.
  LocalityCertificate certify_locality(double S, double nu, int r_max) const;

  /// Line-oriented text format; vertex ids in the file are 0-based.
  static DependencyGraph parse(std::istream& in);
  void serialize(std::ostream& out) const;

  /// FNV-1a hash of the canonical serialization.
  std::uint64_t content_hash() const;

  bool operator==(const DependencyGraph& other) const;

 private:
  void check_vertex(int j, const char* where) const;

  int b_ = 0;
  int total_dim_ = 0;
  std::vector<int> block_dims_;
  std::vector<int> block_offsets_;
  std::vector<std::vector<int>> adj_;  // 0-based internal storage, sorted rows
};

}  // namespace locdiff
