#pragma once

#include <cstdint>
#include <iosfwd>
#include <optional>
#include <vector>

#include "locdiff/diffusion.hpp"
#include "locdiff/graph.hpp"
#include "locdiff/mlp.hpp"
#include "locdiff/schedule.hpp"

namespace locdiff {

/// Diffusion-time grid shared by loss evaluation, training, and generation.
/// Entry k carries the label time fed to the nets and the forward moments
/// (alpha_k, sigma_k) used to perturb data at that grid point.
struct TimeGrid {
  std::vector<double> times;
  std::vector<double> alphas;
  std::vector<double> sigmas;
  NoiseSchedule schedule;

  /// Labels are the schedule's physical OU grid times (ascending);
  /// alpha = e^{-t}, sigma = sqrt(1 - e^{-2t}).
  static TimeGrid from_schedule(const NoiseSchedule& s);

  /// DDPM-style grid: beta(t) = (beta_T - beta_0) t / T + beta_0 sampled at
  /// t = step, 2 step, ..., T; labels are those t, and alpha_k follows the
  /// cumulative-product convention alpha_k^2 = prod_{j<=k} (1 - beta(t_j)).
  static TimeGrid ddpm_linear(double T, double beta_0, double beta_T, double step);

  int size() const { return static_cast<int>(times.size()); }
};

/// Truncated-hypothesis output bound |u| <= c log^2(N) / sigma_t.
struct OutputClamp {
  double c = 0.0;
  int n_train = 0;
  bool enabled() const { return c > 0.0; }
  double bound(double sigma_t) const;
};

struct TrainConfig {
  double learning_rate = 5e-5;
  double adam_beta1 = 0.9;
  double adam_beta2 = 0.999;
  double adam_eps = 1e-8;
  int n_train_points = 5000;
  int batch_size = 100;
  int epochs = 400;
  std::uint64_t seed = 0;
  int n_mc_noise = 1;
  double clamp_c = 0.0;  // output clamp scale; 0 disables
  std::optional<TimeGrid> grid;

  AdamConfig adam() const { return {learning_rate, adam_beta1, adam_beta2, adam_eps}; }
};

/// Localized hypothesis: one score component per vertex, each a ReLU MLP on
/// the flattened window x_{N_j^r} plus the diffusion time. Vertices may share
/// weights through a group map (members need equal window and block sizes).
class LocalizedHypothesis {
 public:
  LocalizedHypothesis(DependencyGraph graph, int radius, std::vector<int> hidden_dims,
                      std::uint64_t init_seed, std::vector<int> group_map = {});

  const DependencyGraph& graph() const { return graph_; }
  int radius() const { return radius_; }
  const std::vector<int>& hidden_dims() const { return hidden_dims_; }
  int effective_dimension() const;  // max_j sum_{i in N_j^r} d_i

  int n_groups() const { return static_cast<int>(nets_.size()); }
  int group_of(int j) const;  // 1-based vertex
  const std::vector<int>& group_map() const { return group_map_; }
  MlpScoreNet& net(int group) { return nets_[static_cast<std::size_t>(group)]; }
  const MlpScoreNet& net(int group) const { return nets_[static_cast<std::size_t>(group)]; }
  void set_net(int group, MlpScoreNet net);

  const std::vector<int>& window(int j) const;         // N_j^r, 1-based vertices
  const std::vector<int>& window_coords(int j) const;  // flat coordinates
  const std::vector<int>& block_coords(int j) const;   // vertex j's flat coordinates

  const OutputClamp& clamp() const { return clamp_; }
  void set_clamp(OutputClamp c) { clamp_ = c; }

 private:
  DependencyGraph graph_;
  int radius_;
  std::vector<int> hidden_dims_;
  std::vector<int> group_map_;  // per vertex slot (0-based), group index
  std::vector<MlpScoreNet> nets_;
  std::vector<std::vector<int>> windows_;
  std::vector<std::vector<int>> window_coords_;
  std::vector<std::vector<int>> block_coords_;
  OutputClamp clamp_;
};

/// Composed localized score field s(x,t)_j = u_{group(j)}(x_{N_j^r}, t).
class ComposedScoreField : public ScoreField {
 public:
  explicit ComposedScoreField(const LocalizedHypothesis& h) : h_(&h) {}
  int dimension() const override;
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x, double t) const override;

 private:
  const LocalizedHypothesis* h_;
};

/// Monte Carlo estimate of the localized DSM component loss: the mean over
/// samples, grid times, and n_mc noise draws of
///   || u(alpha_k x_w + sigma_k eps_w, t_k) + eps_block / sigma_k ||^2.
/// Noise is keyed by (sample, grid index, draw, flat coordinate), so the same
/// rng reproduces identical draws inside dsm_total_loss.
double dsm_component_loss(const MlpScoreNet& net, const Eigen::MatrixXd& samples,
                          const std::vector<int>& window_coords,
                          const std::vector<int>& block_coords, const TimeGrid& grid,
                          const CounterRng& rng, int n_mc, const OutputClamp& clamp = {});

/// Loss of the composed field under the same draws; equals the sum of the
/// per-component losses up to floating-point association.
double dsm_total_loss(const LocalizedHypothesis& h, const Eigen::MatrixXd& samples,
                      const TimeGrid& grid, const CounterRng& rng, int n_mc);

struct ComponentTrainResult {
  MlpScoreNet net;
  std::vector<double> loss_trace;  // per-epoch mean minibatch loss
};

/// Adam on minibatch estimates of vertex j's component loss, training a copy
/// of its group's net. Deterministic given cfg.seed; throws
/// TrainingDivergedError (with the step index) on a non-finite loss.
ComponentTrainResult train_component(int j, const SampleBatch& data,
                                     const LocalizedHypothesis& h, const TrainConfig& cfg);

/// Trains every weight-sharing group independently (one optimization per
/// group, training points drawn across member vertices); the result is
/// independent of n_threads. Failures are aggregated naming the groups.
LocalizedHypothesis train_all_parallel(const SampleBatch& data, LocalizedHypothesis h,
                                       const TrainConfig& cfg, int n_threads = 1);

/// Text serialization, round-trips bit-exactly; loading validates the graph hash.
void save_hypothesis(std::ostream& out, const LocalizedHypothesis& h,
                     const TrainConfig* cfg = nullptr);
LocalizedHypothesis load_hypothesis(std::istream& in, DependencyGraph graph);

}  // namespace locdiff
