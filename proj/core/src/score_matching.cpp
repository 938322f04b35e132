#include "locdiff/score_matching.hpp"

#include <algorithm>
#include <cmath>
#include <istream>
#include <numeric>
#include <ostream>
#include <sstream>

#include "locdiff/csv.hpp"
#include "locdiff/errors.hpp"
#include "locdiff/parallel.hpp"
#include "stream_ids.hpp"

namespace locdiff {

double OutputClamp::bound(double sigma_t) const {
  const double logn = std::log(static_cast<double>(std::max(n_train, 2)));
  return c * logn * logn / sigma_t;
}

TimeGrid TimeGrid::from_schedule(const NoiseSchedule& s) {
  TimeGrid g{.times = {}, .alphas = {}, .sigmas = {}, .schedule = s};
  for (int k = 1; k <= s.n_steps(); ++k) {
    const double t = s.early_stop_time() + s.forward_time(k);
    auto [alpha, sigma] = ou_moments(t);
    g.times.push_back(t);
    g.alphas.push_back(alpha);
    g.sigmas.push_back(sigma);
  }
  return g;
}

TimeGrid TimeGrid::ddpm_linear(double T, double beta_0, double beta_T, double step) {
  if (!(T > 0.0) || !(step > 0.0)) throw ArgumentError("ddpm_linear: T and step must be positive");
  const int n = static_cast<int>(std::llround(T / step));
  if (n < 1 || std::abs(n * step - T) > 1e-9 * T)
    throw ArgumentError("ddpm_linear: T must be an integer multiple of step");
  std::vector<double> betas(static_cast<std::size_t>(n));
  for (int j = 1; j <= n; ++j)
    betas[static_cast<std::size_t>(j - 1)] = beta_0 + (beta_T - beta_0) * (j * step) / T;
  NoiseSchedule schedule(std::move(betas));
  TimeGrid g{.times = {}, .alphas = {}, .sigmas = {}, .schedule = schedule};
  for (int j = 1; j <= n; ++j) {
    const double tau = schedule.forward_time(j);
    g.times.push_back(j * step);
    g.alphas.push_back(std::exp(-tau));  // sqrt of the cumulative product
    g.sigmas.push_back(std::sqrt(-std::expm1(-2.0 * tau)));
  }
  return g;
}

LocalizedHypothesis::LocalizedHypothesis(DependencyGraph graph, int radius,
                                         std::vector<int> hidden_dims, std::uint64_t init_seed,
                                         std::vector<int> group_map)
    : graph_(std::move(graph)), radius_(radius), hidden_dims_(std::move(hidden_dims)) {
  if (radius_ < 0) throw ArgumentError("hypothesis: radius must be >= 0");
  const int b = graph_.vertex_count();
  if (group_map.empty()) {
    group_map.resize(static_cast<std::size_t>(b));
    std::iota(group_map.begin(), group_map.end(), 0);
  }
  if (static_cast<int>(group_map.size()) != b)
    throw ArgumentError("hypothesis: group map size must equal vertex count");
  group_map_ = std::move(group_map);
  const int n_groups = *std::max_element(group_map_.begin(), group_map_.end()) + 1;

  windows_.resize(static_cast<std::size_t>(b));
  window_coords_.resize(static_cast<std::size_t>(b));
  block_coords_.resize(static_cast<std::size_t>(b));
  for (int j = 1; j <= b; ++j) {
    windows_[j - 1] = graph_.neighborhood(j, radius_);
    window_coords_[j - 1] = graph_.flatten_window(windows_[j - 1]);
    block_coords_[j - 1] = graph_.flatten_window({j});
  }

  std::vector<int> group_in(static_cast<std::size_t>(n_groups), -1);
  std::vector<int> group_out(static_cast<std::size_t>(n_groups), -1);
  for (int j = 1; j <= b; ++j) {
    const int g = group_map_[j - 1];
    if (g < 0) throw ArgumentError("hypothesis: negative group id");
    const int in = static_cast<int>(window_coords_[j - 1].size()) + 1;
    const int out = static_cast<int>(block_coords_[j - 1].size());
    if (group_in[static_cast<std::size_t>(g)] == -1) {
      group_in[static_cast<std::size_t>(g)] = in;
      group_out[static_cast<std::size_t>(g)] = out;
    } else if (group_in[static_cast<std::size_t>(g)] != in ||
               group_out[static_cast<std::size_t>(g)] != out) {
      throw ArgumentError("hypothesis: weight-sharing group " + std::to_string(g) +
                          " mixes incompatible window shapes");
    }
  }
  for (int g = 0; g < n_groups; ++g) {
    if (group_in[static_cast<std::size_t>(g)] == -1)
      throw ArgumentError("hypothesis: empty weight-sharing group");
    std::vector<int> dims{group_in[static_cast<std::size_t>(g)]};
    dims.insert(dims.end(), hidden_dims_.begin(), hidden_dims_.end());
    dims.push_back(group_out[static_cast<std::size_t>(g)]);
    MlpScoreNet net(dims);
    SequentialRng rng(init_seed, streams::kWeightInit, static_cast<std::uint64_t>(g));
    net.init_weights(rng);
    nets_.push_back(std::move(net));
  }
}

int LocalizedHypothesis::effective_dimension() const {
  std::size_t best = 0;
  for (const auto& wc : window_coords_) best = std::max(best, wc.size());
  return static_cast<int>(best);
}

int LocalizedHypothesis::group_of(int j) const {
  if (j < 1 || j > graph_.vertex_count()) throw ArgumentError("hypothesis: vertex out of range");
  return group_map_[static_cast<std::size_t>(j - 1)];
}

void LocalizedHypothesis::set_net(int group, MlpScoreNet net) {
  if (group < 0 || group >= n_groups()) throw ArgumentError("hypothesis: group out of range");
  const MlpScoreNet& cur = nets_[static_cast<std::size_t>(group)];
  if (net.input_dim() != cur.input_dim() || net.output_dim() != cur.output_dim())
    throw ArgumentError("hypothesis: replacement net has incompatible dimensions");
  nets_[static_cast<std::size_t>(group)] = std::move(net);
}

const std::vector<int>& LocalizedHypothesis::window(int j) const {
  if (j < 1 || j > graph_.vertex_count()) throw ArgumentError("hypothesis: vertex out of range");
  return windows_[static_cast<std::size_t>(j - 1)];
}

const std::vector<int>& LocalizedHypothesis::window_coords(int j) const {
  if (j < 1 || j > graph_.vertex_count()) throw ArgumentError("hypothesis: vertex out of range");
  return window_coords_[static_cast<std::size_t>(j - 1)];
}

const std::vector<int>& LocalizedHypothesis::block_coords(int j) const {
  if (j < 1 || j > graph_.vertex_count()) throw ArgumentError("hypothesis: vertex out of range");
  return block_coords_[static_cast<std::size_t>(j - 1)];
}

int ComposedScoreField::dimension() const { return h_->graph().total_dim(); }

Eigen::VectorXd ComposedScoreField::evaluate(const Eigen::VectorXd& x, double t) const {
  const auto& graph = h_->graph();
  if (x.size() != graph.total_dim())
    throw ArgumentError("composed score: input dimension mismatch");
  Eigen::VectorXd out(graph.total_dim());
  MlpScoreNet::Workspace ws;
  for (int j = 1; j <= graph.vertex_count(); ++j) {
    const auto& coords = h_->window_coords(j);
    Eigen::VectorXd in(static_cast<Eigen::Index>(coords.size()) + 1);
    for (std::size_t c = 0; c < coords.size(); ++c)
      in[static_cast<Eigen::Index>(c)] = x[coords[c]];
    in[static_cast<Eigen::Index>(coords.size())] = t;
    Eigen::VectorXd u = h_->net(h_->group_of(j)).forward(in, ws);
    if (h_->clamp().enabled()) {
      const double sigma = ou_moments(t).sigma;
      if (sigma > 0.0) {
        const double bound = h_->clamp().bound(sigma);
        u = u.cwiseMax(-bound).cwiseMin(bound);
      }
    }
    const auto& block = h_->block_coords(j);
    for (std::size_t c = 0; c < block.size(); ++c)
      out[block[c]] = u[static_cast<Eigen::Index>(c)];
  }
  return out;
}

namespace {

// noise counter for (grid index, draw, flat coordinate); hi carries the sample
inline std::uint64_t noise_lo(int k, int n_mc, int q, int coord) {
  return ((static_cast<std::uint64_t>(k) * static_cast<std::uint64_t>(n_mc) +
           static_cast<std::uint64_t>(q))
          << 24) |
         static_cast<std::uint64_t>(coord);
}

void validate_grid(const TimeGrid& grid) {
  if (grid.size() == 0) throw ArgumentError("dsm loss: empty time grid");
  for (double s : grid.sigmas)
    if (!(s > 0.0)) throw ArgumentError("dsm loss: grid contains sigma = 0 (t = 0?)");
}

std::vector<int> positions_in(const std::vector<int>& window, const std::vector<int>& block) {
  std::vector<int> pos;
  for (int c : block) {
    auto it = std::find(window.begin(), window.end(), c);
    if (it == window.end()) throw ArgumentError("dsm loss: block coordinate not in window");
    pos.push_back(static_cast<int>(it - window.begin()));
  }
  return pos;
}

}  // namespace

double dsm_component_loss(const MlpScoreNet& net, const Eigen::MatrixXd& samples,
                          const std::vector<int>& window_coords,
                          const std::vector<int>& block_coords, const TimeGrid& grid,
                          const CounterRng& rng, int n_mc, const OutputClamp& clamp) {
  validate_grid(grid);
  if (n_mc < 1) throw ArgumentError("dsm loss: n_mc must be >= 1");
  const int wsize = static_cast<int>(window_coords.size());
  if (net.input_dim() != wsize + 1)
    throw ArgumentError("dsm loss: net input does not match window size + 1");
  const std::vector<int> pos = positions_in(window_coords, block_coords);
  const Eigen::Index n = samples.rows();

  MlpScoreNet::Workspace ws;
  Eigen::VectorXd eps(wsize), in(wsize + 1);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < n; ++i) {
    for (int k = 0; k < grid.size(); ++k) {
      const double alpha = grid.alphas[static_cast<std::size_t>(k)];
      const double sigma = grid.sigmas[static_cast<std::size_t>(k)];
      for (int q = 0; q < n_mc; ++q) {
        for (int c = 0; c < wsize; ++c)
          eps[c] = rng.normal_at(static_cast<std::uint64_t>(i),
                                 noise_lo(k, n_mc, q, window_coords[static_cast<std::size_t>(c)]));
        for (int c = 0; c < wsize; ++c)
          in[c] = alpha * samples(i, window_coords[static_cast<std::size_t>(c)]) + sigma * eps[c];
        in[wsize] = grid.times[static_cast<std::size_t>(k)];
        Eigen::VectorXd u = net.forward(in, ws);
        if (clamp.enabled()) {
          const double bound = clamp.bound(sigma);
          u = u.cwiseMax(-bound).cwiseMin(bound);
        }
        double sq = 0.0;
        for (std::size_t r = 0; r < pos.size(); ++r) {
          const double v = u[static_cast<Eigen::Index>(r)] + eps[pos[r]] / sigma;
          sq += v * v;
        }
        acc += sq;
      }
    }
  }
  return acc / (static_cast<double>(n) * grid.size() * n_mc);
}

double dsm_total_loss(const LocalizedHypothesis& h, const Eigen::MatrixXd& samples,
                      const TimeGrid& grid, const CounterRng& rng, int n_mc) {
  validate_grid(grid);
  const int d = h.graph().total_dim();
  if (samples.cols() != d) throw ArgumentError("dsm loss: sample dimension mismatch");
  ComposedScoreField field(h);
  Eigen::VectorXd eps(d), xt(d);
  double acc = 0.0;
  for (Eigen::Index i = 0; i < samples.rows(); ++i) {
    for (int k = 0; k < grid.size(); ++k) {
      const double alpha = grid.alphas[static_cast<std::size_t>(k)];
      const double sigma = grid.sigmas[static_cast<std::size_t>(k)];
      for (int q = 0; q < n_mc; ++q) {
        for (int c = 0; c < d; ++c)
          eps[c] = rng.normal_at(static_cast<std::uint64_t>(i), noise_lo(k, n_mc, q, c));
        xt = alpha * samples.row(i).transpose() + sigma * eps;
        const Eigen::VectorXd s = field.evaluate(xt, grid.times[static_cast<std::size_t>(k)]);
        acc += (s + eps / sigma).squaredNorm();
      }
    }
  }
  return acc / (static_cast<double>(samples.rows()) * grid.size() * n_mc);
}

namespace {

struct TrainPoint {
  int sample;
  int vertex_slot;
  int grid_idx;
};

ComponentTrainResult train_group(const std::vector<int>& vertices, const SampleBatch& data,
                                 const LocalizedHypothesis& h, const TrainConfig& cfg) {
  if (vertices.empty()) throw ArgumentError("train: empty vertex list");
  if (data.dimension() != h.graph().total_dim())
    throw ArgumentError("train: data dimension does not match graph");
  if (data.n_samples() < 1) throw ArgumentError("train: empty data");
  if (cfg.n_train_points < 1) throw ArgumentError("train: n_train_points must be >= 1");
  if (cfg.batch_size < 1) throw ArgumentError("train: batch_size must be >= 1");
  if (!(cfg.learning_rate >= 0.0)) throw ArgumentError("train: learning rate must be >= 0");
  if (!cfg.grid) throw ConfigError("train: cfg.grid is not set");
  const TimeGrid& grid = *cfg.grid;
  validate_grid(grid);

  const int group = h.group_of(vertices.front());
  for (int j : vertices)
    if (h.group_of(j) != group) throw ArgumentError("train: vertices span multiple groups");

  MlpScoreNet net = h.net(group);
  OutputClamp clamp = h.clamp();
  if (cfg.clamp_c > 0.0) clamp = OutputClamp{cfg.clamp_c, cfg.n_train_points};

  // training tuples: (data index, member vertex, grid time)
  SequentialRng point_rng(cfg.seed, streams::kTrainPoints, static_cast<std::uint64_t>(group));
  std::vector<TrainPoint> points(static_cast<std::size_t>(cfg.n_train_points));
  for (auto& p : points) {
    p.sample = static_cast<int>(point_rng.uniform_int(static_cast<std::uint64_t>(data.n_samples())));
    p.vertex_slot = static_cast<int>(point_rng.uniform_int(vertices.size()));
    p.grid_idx = static_cast<int>(point_rng.uniform_int(static_cast<std::uint64_t>(grid.size())));
  }

  // per-vertex window layout (shapes match across the group; positions may not)
  std::vector<const std::vector<int>*> coords(vertices.size());
  std::vector<std::vector<int>> bpos(vertices.size());
  for (std::size_t v = 0; v < vertices.size(); ++v) {
    coords[v] = &h.window_coords(vertices[v]);
    bpos[v] = positions_in(*coords[v], h.block_coords(vertices[v]));
  }
  const int wsize = static_cast<int>(coords.front()->size());
  const int out_dim = net.output_dim();

  SequentialRng noise_rng(cfg.seed, streams::kTrainNoise, static_cast<std::uint64_t>(group));
  AdamState adam(net.parameter_count());
  std::vector<double> grad(net.parameter_count());
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  MlpScoreNet::Workspace ws;
  Eigen::VectorXd eps(wsize), in(wsize + 1), resid(out_dim), upstream(out_dim);

  ComponentTrainResult result{std::move(net), {}};
  long global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    point_rng.shuffle(order.data(), order.size());
    double epoch_loss = 0.0;
    long epoch_batches = 0;
    for (std::size_t start = 0; start < points.size(); start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop = std::min(points.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t idx = start; idx < stop; ++idx) {
        const TrainPoint& p = points[order[idx]];
        const auto& wc = *coords[static_cast<std::size_t>(p.vertex_slot)];
        const auto& pos = bpos[static_cast<std::size_t>(p.vertex_slot)];
        const double alpha = grid.alphas[static_cast<std::size_t>(p.grid_idx)];
        const double sigma = grid.sigmas[static_cast<std::size_t>(p.grid_idx)];
        for (int c = 0; c < wsize; ++c) eps[c] = noise_rng.normal();  // fresh noise per encounter
        for (int c = 0; c < wsize; ++c)
          in[c] = alpha * data.data(p.sample, wc[static_cast<std::size_t>(c)]) + sigma * eps[c];
        in[wsize] = grid.times[static_cast<std::size_t>(p.grid_idx)];
        const Eigen::VectorXd& u = result.net.forward(in, ws);
        double bound = 0.0;
        if (clamp.enabled()) bound = clamp.bound(sigma);
        for (int r = 0; r < out_dim; ++r) {
          double ur = u[r];
          bool clamped = false;
          if (clamp.enabled() && std::abs(ur) > bound) {
            ur = std::copysign(bound, ur);
            clamped = true;
          }
          const double v = ur + eps[pos[static_cast<std::size_t>(r)]] / sigma;
          resid[r] = v;
          upstream[r] = clamped ? 0.0 : 2.0 * inv_b * v;
          batch_loss += v * v;
        }
        result.net.backward(ws, upstream, grad);
      }
      batch_loss *= inv_b;
      if (!std::isfinite(batch_loss))
        throw TrainingDivergedError(static_cast<std::size_t>(global_step), "non-finite loss");
      adam.step(result.net.parameters(), grad, cfg.adam());
      ++global_step;
      epoch_loss += batch_loss;
      ++epoch_batches;
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(epoch_batches));
  }
  return result;
}

}  // namespace

ComponentTrainResult train_component(int j, const SampleBatch& data, const LocalizedHypothesis& h,
                                     const TrainConfig& cfg) {
  return train_group({j}, data, h, cfg);
}

LocalizedHypothesis train_all_parallel(const SampleBatch& data, LocalizedHypothesis h,
                                       const TrainConfig& cfg, int n_threads) {
  const int b = h.graph().vertex_count();
  std::vector<std::vector<int>> members(static_cast<std::size_t>(h.n_groups()));
  for (int j = 1; j <= b; ++j) members[static_cast<std::size_t>(h.group_of(j))].push_back(j);

  std::vector<std::optional<ComponentTrainResult>> results(members.size());
  std::vector<std::string> failures(members.size());
  parallel_for(members.size(), n_threads, [&](std::size_t g) {
    try {
      results[g] = train_group(members[g], data, h, cfg);
    } catch (const std::exception& e) {
      failures[g] = e.what();
    }
  });

  std::string failed;
  for (std::size_t g = 0; g < failures.size(); ++g)
    if (!failures[g].empty())
      failed += (failed.empty() ? "" : "; ") + ("group " + std::to_string(g) + ": " + failures[g]);
  if (!failed.empty()) throw TrainingDivergedError(0, "component failures: " + failed);

  for (std::size_t g = 0; g < results.size(); ++g)
    h.set_net(static_cast<int>(g), std::move(results[g]->net));
  if (cfg.clamp_c > 0.0) h.set_clamp(OutputClamp{cfg.clamp_c, cfg.n_train_points});
  return h;
}

void save_hypothesis(std::ostream& out, const LocalizedHypothesis& h, const TrainConfig* cfg) {
  out << "hypothesis 1\n";
  out << "radius " << h.radius() << "\n";
  out << "graph_hash " << std::hex << h.graph().content_hash() << std::dec << "\n";
  out << "groups";
  for (int g : h.group_map()) out << ' ' << g;
  out << "\n";
  out << "hidden";
  for (int d : h.hidden_dims()) out << ' ' << d;
  out << "\n";
  out << "clamp " << format_double(h.clamp().c) << ' ' << h.clamp().n_train << "\n";
  if (cfg) {
    out << "traincfg " << format_double(cfg->learning_rate) << ' '
        << format_double(cfg->adam_beta1) << ' ' << format_double(cfg->adam_beta2) << ' '
        << format_double(cfg->adam_eps) << ' ' << cfg->n_train_points << ' ' << cfg->batch_size
        << ' ' << cfg->epochs << ' ' << cfg->seed << ' ' << cfg->n_mc_noise << "\n";
  } else {
    out << "traincfg none\n";
  }
  out << "nets " << h.n_groups() << "\n";
  for (int g = 0; g < h.n_groups(); ++g) h.net(g).save(out);
}

LocalizedHypothesis load_hypothesis(std::istream& in, DependencyGraph graph) {
  std::string tag;
  int version;
  if (!(in >> tag >> version) || tag != "hypothesis" || version != 1)
    throw ArgumentError("load_hypothesis: bad header");
  int radius;
  if (!(in >> tag >> radius) || tag != "radius") throw ArgumentError("load_hypothesis: radius");
  std::uint64_t hash;
  if (!(in >> tag >> std::hex >> hash >> std::dec) || tag != "graph_hash")
    throw ArgumentError("load_hypothesis: graph_hash");
  if (hash != graph.content_hash())
    throw ArgumentError("load_hypothesis: graph hash mismatch (model was trained on a different graph)");

  if (!(in >> tag) || tag != "groups") throw ArgumentError("load_hypothesis: groups");
  std::vector<int> group_map(static_cast<std::size_t>(graph.vertex_count()));
  for (auto& g : group_map)
    if (!(in >> g)) throw ArgumentError("load_hypothesis: truncated groups");

  if (!(in >> tag) || tag != "hidden") throw ArgumentError("load_hypothesis: hidden");
  std::string line;
  std::getline(in, line);
  std::istringstream hs(line);
  std::vector<int> hidden;
  int hd;
  while (hs >> hd) hidden.push_back(hd);

  double clamp_c;
  int clamp_n;
  if (!(in >> tag >> clamp_c >> clamp_n) || tag != "clamp")
    throw ArgumentError("load_hypothesis: clamp");
  if (!(in >> tag) || tag != "traincfg") throw ArgumentError("load_hypothesis: traincfg");
  std::getline(in, line);  // config snapshot is informational on load

  int n_nets;
  if (!(in >> tag >> n_nets) || tag != "nets") throw ArgumentError("load_hypothesis: nets");

  LocalizedHypothesis h(std::move(graph), radius, hidden, 0, group_map);
  if (h.n_groups() != n_nets) throw ArgumentError("load_hypothesis: group/net count mismatch");
  for (int g = 0; g < n_nets; ++g) h.set_net(g, MlpScoreNet::load(in));
  h.set_clamp(OutputClamp{clamp_c, clamp_n});
  return h;
}

}  // namespace locdiff
