#include "locdiff/diffusion.hpp"

#include <cmath>

#include "locdiff/errors.hpp"
#include "locdiff/parallel.hpp"
#include "stream_ids.hpp"

namespace locdiff {

void ScoreField::evaluate_batch(const Eigen::Ref<const Eigen::MatrixXd>& xs, double t,
                                Eigen::Ref<Eigen::MatrixXd> out) const {
  for (Eigen::Index c = 0; c < xs.cols(); ++c) out.col(c) = evaluate(xs.col(c), t);
}

std::pair<Eigen::VectorXd, Eigen::VectorXd> forward_perturb(const Eigen::VectorXd& x0, double t,
                                                            SequentialRng& rng) {
  auto [alpha, sigma] = ou_moments(t);
  Eigen::VectorXd eps(x0.size());
  for (Eigen::Index i = 0; i < eps.size(); ++i) eps[i] = rng.normal();
  return {alpha * x0 + sigma * eps, std::move(eps)};
}

Eigen::VectorXd reverse_em_step(const Eigen::VectorXd& y, double dt,
                                const Eigen::VectorXd& score_at_y, const Eigen::VectorXd& xi) {
  if (!(dt > 0.0)) throw ArgumentError("reverse_em_step: dt must be positive");
  return y + (y + 2.0 * score_at_y) * dt + std::sqrt(2.0 * dt) * xi;
}

Eigen::VectorXd reverse_em_step(const Eigen::VectorXd& y, double dt,
                                const Eigen::VectorXd& score_at_y, SequentialRng& rng) {
  Eigen::VectorXd xi(y.size());
  for (Eigen::Index i = 0; i < xi.size(); ++i) xi[i] = rng.normal();
  return reverse_em_step(y, dt, score_at_y, xi);
}

SampleBatch sample_reverse(const ScoreField& score, const NoiseSchedule& schedule, int n_samples,
                           std::uint64_t seed, int n_threads) {
  if (n_samples < 0) throw ArgumentError("sample_reverse: n_samples must be >= 0");
  const int d = score.dimension();
  const int n_steps = schedule.n_steps();

  SampleBatch batch;
  batch.seed = seed;
  batch.schedule_id = schedule.id();
  batch.data.resize(n_samples, d);
  if (n_samples == 0) return batch;

  const CounterRng rng(seed, streams::kReverseSampler);
  // counter layout per sample: segment 0 holds the N(0,I) start, segment n+1
  // holds step n's noise; four normals per block
  const std::uint64_t blocks_per_segment = (static_cast<std::uint64_t>(d) + 3) / 4;

  constexpr int kChunk = 1024;
  const std::size_t n_chunks = (static_cast<std::size_t>(n_samples) + kChunk - 1) / kChunk;

  parallel_for(n_chunks, n_threads, [&](std::size_t chunk) {
    const int s0 = static_cast<int>(chunk) * kChunk;
    const int s1 = std::min(n_samples, s0 + kChunk);
    const int cols = s1 - s0;

    Eigen::MatrixXd y(d, cols);
    Eigen::MatrixXd sc(d, cols);
    Eigen::VectorXd xi(d);
    for (int c = 0; c < cols; ++c)
      rng.fill_normals(static_cast<std::uint64_t>(s0 + c), 0, {y.col(c).data(), static_cast<std::size_t>(d)});

    for (int n = 0; n < n_steps; ++n) {
      const double dt = schedule.reverse_dt(n);
      const double t = schedule.score_time(n);
      const double root = std::sqrt(2.0 * dt);
      score.evaluate_batch(y, t, sc);
      for (int c = 0; c < cols; ++c) {
        rng.fill_normals(static_cast<std::uint64_t>(s0 + c),
                         (static_cast<std::uint64_t>(n) + 1) * blocks_per_segment,
                         {xi.data(), static_cast<std::size_t>(d)});
        y.col(c) = (1.0 + dt) * y.col(c) + (2.0 * dt) * sc.col(c) + root * xi;
        if (!y.col(c).allFinite())
          throw SamplingDivergedError(static_cast<std::size_t>(n),
                                      "sample " + std::to_string(s0 + c));
      }
    }
    batch.data.middleRows(s0, cols) = y.transpose();
  });

  return batch;
}

}  // namespace locdiff
