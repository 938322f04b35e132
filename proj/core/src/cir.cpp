#include "locdiff/cir.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "locdiff/errors.hpp"
#include "locdiff/parallel.hpp"
#include "stream_ids.hpp"

namespace locdiff {

double CirExactLaw::c(double t) const {
  if (!(t > 0.0)) throw ArgumentError("cir law: t must be positive");
  return sigma * sigma / (8.0 * a) * -std::expm1(-2.0 * a * t);
}

double CirExactLaw::noncentrality(double t, double x0) const {
  return std::exp(-2.0 * a * t) * x0 / c(t);
}

double CirExactLaw::mean(double t, double x0) const {
  return c(t) * (dof() + noncentrality(t, x0));
}

double CirExactLaw::variance(double t, double x0) const {
  const double ct = c(t);
  return ct * ct * (2.0 * dof() + 4.0 * noncentrality(t, x0));
}

Eigen::MatrixXd simulate_cir(const CirParams& p, std::uint64_t seed, int n_threads,
                             std::optional<double> x0_override) {
  if (!(p.a > 0.0) || !(p.b > 0.0) || p.sigma < 0.0)
    throw ArgumentError("simulate_cir: need a, b > 0 and sigma >= 0");
  if (!(p.em_step > 0.0) || !(p.record_interval > 0.0))
    throw ArgumentError("simulate_cir: steps must be positive");
  const double ratio = p.record_interval / p.em_step;
  const long spr = std::lround(ratio);
  if (spr < 1 || std::abs(ratio - static_cast<double>(spr)) > 1e-9)
    throw ArgumentError("simulate_cir: record_interval must be an integer multiple of em_step");
  if (p.series_length < 1 || p.n_trajectories < 1)
    throw ArgumentError("simulate_cir: series_length and n_trajectories must be >= 1");
  if (p.sigma == 0.0 && !x0_override)
    throw ArgumentError("simulate_cir: sigma = 0 requires an explicit x0");

  const double h = p.em_step;
  const double sqrt_h = std::sqrt(h);
  Eigen::MatrixXd out(p.n_trajectories, p.series_length);
  const CirExactLaw law{p.a, p.b, p.sigma};

  parallel_for(static_cast<std::size_t>(p.n_trajectories), n_threads, [&](std::size_t m) {
    SequentialRng rng(seed, streams::kCirSimulate, m);
    double x;
    if (x0_override) {
      x = *x0_override;
    } else {
      // stationary start: c(inf) * chi^2_{dof}
      x = law.c_stationary() * rng.chi_squared(law.dof());
    }
    for (int rec = 0; rec < p.series_length; ++rec) {
      for (long s = 0; s < spr; ++s) {
        const double diff = p.sigma * std::sqrt(std::max(x, 0.0)) * sqrt_h;
        x += 2.0 * p.a * (p.b - x) * h + diff * rng.normal();
      }
      if (!std::isfinite(x))
        throw NumericalError("simulate_cir: non-finite state in trajectory " + std::to_string(m));
      out(static_cast<Eigen::Index>(m), rec) = x;
    }
  });
  return out;
}

namespace {

inline void reflect_pad_into(const double* x, int n, int i, int r, double* out) {
  // i is 1-based; offset m in [-r, r] maps to x_{i+m} or the reflection x_{i-m}
  for (int m = -r; m <= r; ++m) {
    int idx = i + m;
    if (idx < 1 || idx > n) idx = i - m;
    if (idx < 1 || idx > n)
      throw ArgumentError("reflect_pad_window: reflection out of range (r >= series length?)");
    out[m + r] = x[idx - 1];
  }
}

}  // namespace

Eigen::VectorXd reflect_pad_window(const Eigen::VectorXd& x, int i, int r) {
  const int n = static_cast<int>(x.size());
  if (i < 1 || i > n) throw ArgumentError("reflect_pad_window: index out of range");
  if (r < 0) throw ArgumentError("reflect_pad_window: r must be >= 0");
  Eigen::VectorXd out(2 * r + 1);
  reflect_pad_into(x.data(), n, i, r, out.data());
  return out;
}

CirTrainResult cir_train(const Eigen::MatrixXd& data, int r, const TrainConfig& cfg,
                         const TimeGrid& grid) {
  const int n_traj = static_cast<int>(data.rows());
  const int len = static_cast<int>(data.cols());
  if (r < 0) throw ArgumentError("cir_train: r must be >= 0");
  if (len <= 4 * r + 2) throw ArgumentError("cir_train: series too short for radius (need N > 4r+2)");
  if (grid.size() < 1) throw ArgumentError("cir_train: empty time grid");
  if (cfg.n_train_points < 1 || cfg.batch_size < 1 || cfg.epochs < 1)
    throw ArgumentError("cir_train: bad training sizes");

  const int wsize = 2 * r + 1;
  MlpScoreNet net({wsize + 1, 2 * r + 2, 6, 3, 1});
  {
    SequentialRng init(cfg.seed, streams::kWeightInit);
    net.init_weights(init);
  }

  // training tuples: (trajectory, interior position in [2r+1, len-2r-1], grid index)
  const int pos_lo = 2 * r + 1;
  const int pos_hi = len - 2 * r - 1;
  SequentialRng point_rng(cfg.seed, streams::kTrainPoints);
  struct Point {
    int traj, pos, k;
  };
  std::vector<Point> points(static_cast<std::size_t>(cfg.n_train_points));
  for (auto& p : points) {
    p.traj = static_cast<int>(point_rng.uniform_int(static_cast<std::uint64_t>(n_traj)));
    p.pos = pos_lo + static_cast<int>(point_rng.uniform_int(
                         static_cast<std::uint64_t>(pos_hi - pos_lo + 1)));
    p.k = static_cast<int>(point_rng.uniform_int(static_cast<std::uint64_t>(grid.size())));
  }

  SequentialRng noise_rng(cfg.seed, streams::kTrainNoise);
  AdamState adam(net.parameter_count());
  std::vector<double> grad(net.parameter_count());
  std::vector<std::size_t> order(points.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  MlpScoreNet::Workspace ws;
  Eigen::VectorXd eps(wsize), in(wsize + 1), upstream(1);

  CirTrainResult result{std::move(net), {}, 0.0};
  for (double s : grid.sigmas) result.zero_predictor_loss += 1.0 / (s * s);
  result.zero_predictor_loss /= grid.size();

  long global_step = 0;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    point_rng.shuffle(order.data(), order.size());
    double epoch_loss = 0.0;
    long batches = 0;
    for (std::size_t start = 0; start < points.size();
         start += static_cast<std::size_t>(cfg.batch_size)) {
      const std::size_t stop =
          std::min(points.size(), start + static_cast<std::size_t>(cfg.batch_size));
      const double inv_b = 1.0 / static_cast<double>(stop - start);
      std::fill(grad.begin(), grad.end(), 0.0);
      double batch_loss = 0.0;
      for (std::size_t idx = start; idx < stop; ++idx) {
        const Point& p = points[order[idx]];
        const double alpha = grid.alphas[static_cast<std::size_t>(p.k)];
        const double sigma = grid.sigmas[static_cast<std::size_t>(p.k)];
        for (int c = 0; c < wsize; ++c) eps[c] = noise_rng.normal();
        for (int c = 0; c < wsize; ++c) {
          const int col = p.pos - r + c - 1;  // interior, no padding needed
          in[c] = alpha * data(p.traj, col) + sigma * eps[c];
        }
        in[wsize] = grid.times[static_cast<std::size_t>(p.k)];
        const Eigen::VectorXd& u = result.net.forward(in, ws);
        const double v = u[0] + eps[r] / sigma;
        upstream[0] = 2.0 * inv_b * v;
        batch_loss += v * v;
        result.net.backward(ws, upstream, grad);
      }
      batch_loss *= inv_b;
      if (!std::isfinite(batch_loss))
        throw TrainingDivergedError(static_cast<std::size_t>(global_step), "non-finite loss");
      adam.step(result.net.parameters(), grad, cfg.adam());
      ++global_step;
      epoch_loss += batch_loss;
      ++batches;
    }
    result.loss_trace.push_back(epoch_loss / static_cast<double>(batches));
  }
  return result;
}

Eigen::MatrixXd cir_generate(const MlpScoreNet& net, int r, int series_length, int n_series,
                             const TimeGrid& grid, std::uint64_t seed, bool shared_noise,
                             int n_threads) {
  const int wsize = 2 * r + 1;
  if (net.input_dim() != wsize + 1)
    throw ArgumentError("cir_generate: net input dimension must be 2r+2");
  if (net.output_dim() != 1) throw ArgumentError("cir_generate: net output dimension must be 1");
  if (series_length < 1 || n_series < 0) throw ArgumentError("cir_generate: bad sizes");
  const int n_steps = grid.size();
  const NoiseSchedule& schedule = grid.schedule;

  Eigen::MatrixXd out(n_series, series_length);
  const CounterRng rng(seed, streams::kCirGenerate);
  const std::uint64_t blocks = (static_cast<std::uint64_t>(series_length) + 3) / 4;

  parallel_for(static_cast<std::size_t>(n_series), n_threads, [&](std::size_t s) {
    Eigen::VectorXd y(series_length), score(series_length), xi(series_length);
    Eigen::VectorXd in(wsize + 1);
    MlpScoreNet::Workspace ws;
    rng.fill_normals(s, 0, {y.data(), static_cast<std::size_t>(series_length)});
    for (int n = 0; n < n_steps; ++n) {
      const int k = n_steps - n;  // forward grid index, 1-based
      const double dt = schedule.reverse_dt(n);
      const double t_label = grid.times[static_cast<std::size_t>(k - 1)];
      for (int i = 1; i <= series_length; ++i) {
        reflect_pad_into(y.data(), series_length, i, r, in.data());
        in[wsize] = t_label;
        score[i - 1] = net.forward(in, ws)[0];
      }
      rng.fill_normals(s, (static_cast<std::uint64_t>(n) + 1) * blocks,
                       {xi.data(), static_cast<std::size_t>(series_length)});
      if (shared_noise) xi.setConstant(xi[0]);
      y = (1.0 + dt) * y + (2.0 * dt) * score + std::sqrt(2.0 * dt) * xi;
      if (!y.allFinite())
        throw SamplingDivergedError(static_cast<std::size_t>(n), "series " + std::to_string(s));
    }
    out.row(static_cast<Eigen::Index>(s)) = y.transpose();
  });
  return out;
}

AcfResult ensemble_acf(const Eigen::MatrixXd& series, int max_lag) {
  const int n_series = static_cast<int>(series.rows());
  const int len = static_cast<int>(series.cols());
  if (max_lag < 0 || max_lag >= len) throw ArgumentError("ensemble_acf: max_lag must be < length");
  std::vector<Eigen::VectorXd> acfs;
  acfs.reserve(static_cast<std::size_t>(n_series));
  int excluded = 0;
  for (int s = 0; s < n_series; ++s) {
    Eigen::VectorXd x = series.row(s).transpose();
    const double scale = x.cwiseAbs().maxCoeff();
    x.array() -= x.mean();
    const double denom = x.squaredNorm();
    // numerically constant series carry no correlation information
    const double tiny = 16.0 * std::numeric_limits<double>::epsilon() * (1.0 + scale);
    if (denom <= static_cast<double>(len) * tiny * tiny) {
      ++excluded;
      continue;
    }
    Eigen::VectorXd acf(max_lag + 1);
    for (int lag = 0; lag <= max_lag; ++lag) {
      double acc = 0.0;
      for (int tt = 0; tt + lag < len; ++tt) acc += x[tt] * x[tt + lag];
      acf[lag] = acc / denom;
    }
    acfs.push_back(std::move(acf));
  }
  AcfResult res;
  res.n_excluded = excluded;
  res.mean = Eigen::VectorXd::Zero(max_lag + 1);
  res.stddev = Eigen::VectorXd::Zero(max_lag + 1);
  if (acfs.empty()) return res;
  for (const auto& a : acfs) res.mean += a;
  res.mean /= static_cast<double>(acfs.size());
  if (acfs.size() > 1) {
    for (const auto& a : acfs) res.stddev += (a - res.mean).cwiseAbs2();
    res.stddev = (res.stddev / static_cast<double>(acfs.size() - 1)).cwiseSqrt();
  }
  return res;
}

HistogramPair shared_histogram(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int n_bins) {
  if (a.size() == 0 || b.size() == 0) throw ArgumentError("histogram: empty sample");
  if (n_bins < 1) throw ArgumentError("histogram: need at least one bin");
  const double lo = std::min(a.minCoeff(), b.minCoeff());
  const double hi = std::max(a.maxCoeff(), b.maxCoeff());
  const double width = (hi > lo) ? (hi - lo) / n_bins : 1.0;

  HistogramPair h;
  h.bin_width = width;
  h.centers.resize(n_bins);
  for (int i = 0; i < n_bins; ++i) h.centers[i] = lo + (i + 0.5) * width;
  h.density_a = Eigen::VectorXd::Zero(n_bins);
  h.density_b = Eigen::VectorXd::Zero(n_bins);
  auto bin_of = [&](double v) {
    int k = static_cast<int>((v - lo) / width);
    return std::clamp(k, 0, n_bins - 1);
  };
  for (Eigen::Index i = 0; i < a.size(); ++i) h.density_a[bin_of(a[i])] += 1.0;
  for (Eigen::Index i = 0; i < b.size(); ++i) h.density_b[bin_of(b[i])] += 1.0;
  h.density_a /= static_cast<double>(a.size()) * width;
  h.density_b /= static_cast<double>(b.size()) * width;
  return h;
}

double histogram_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int n_bins) {
  const HistogramPair h = shared_histogram(a, b, n_bins);
  // back to probability masses
  return 0.5 * ((h.density_a - h.density_b) * h.bin_width).cwiseAbs().sum();
}

}  // namespace locdiff
