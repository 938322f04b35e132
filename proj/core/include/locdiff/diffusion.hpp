#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <string>

#include "locdiff/rng.hpp"
#include "locdiff/schedule.hpp"

namespace locdiff {

/// Score field s(x, t); implementations must return finite values of the same
/// dimension as the input within the sampler's operating range.
class ScoreField {
 public:
  virtual ~ScoreField() = default;
  virtual int dimension() const = 0;
  virtual Eigen::VectorXd evaluate(const Eigen::VectorXd& x, double t) const = 0;

  /// Column-wise batch evaluation; the default loops over columns.
  virtual void evaluate_batch(const Eigen::Ref<const Eigen::MatrixXd>& xs, double t,
                              Eigen::Ref<Eigen::MatrixXd> out) const;
};

struct SampleBatch {
  Eigen::MatrixXd data;  // n_samples x d, one sample per row
  std::uint64_t seed = 0;
  std::string schedule_id;

  int n_samples() const { return static_cast<int>(data.rows()); }
  int dimension() const { return static_cast<int>(data.cols()); }
};

/// Draws eps ~ N(0,I) from rng and returns (x_t, eps) with
/// x_t = alpha_t x0 + sigma_t eps.
std::pair<Eigen::VectorXd, Eigen::VectorXd> forward_perturb(const Eigen::VectorXd& x0, double t,
                                                            SequentialRng& rng);

/// One Euler-Maruyama step of the reverse SDE with the noise xi given:
/// y + (y + 2 score) dt + sqrt(2 dt) xi.
Eigen::VectorXd reverse_em_step(const Eigen::VectorXd& y, double dt,
                                const Eigen::VectorXd& score_at_y, const Eigen::VectorXd& xi);

/// Same, drawing xi ~ N(0,I) from rng.
Eigen::VectorXd reverse_em_step(const Eigen::VectorXd& y, double dt,
                                const Eigen::VectorXd& score_at_y, SequentialRng& rng);

/// Reverse sampler: each sample starts from N(0,I) and runs the schedule,
/// evaluating the score at schedule.score_time(n) for step n. Noise is keyed
/// per (sample, step), so the output is bit-identical for any worker count.
/// Throws SamplingDivergedError naming the step if a coordinate goes non-finite.
SampleBatch sample_reverse(const ScoreField& score, const NoiseSchedule& schedule, int n_samples,
                           std::uint64_t seed, int n_threads = 1);

}  // namespace locdiff
