#include "locdiff/gaussian.hpp"

#include <algorithm>
#include <cmath>

#include "locdiff/errors.hpp"
#include "locdiff/oracles.hpp"
#include "locdiff/parallel.hpp"
#include "stream_ids.hpp"

namespace locdiff {

namespace {

void check_banded(const Eigen::MatrixXd& A, int r0, const char* what) {
  const int d = static_cast<int>(A.rows());
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j)
      if (std::abs(i - j) > r0 && A(i, j) != 0.0)
        throw ArgumentError(std::string(what) + ": entry outside bandwidth " +
                            std::to_string(r0) + " at (" + std::to_string(i) + "," +
                            std::to_string(j) + ")");
}

}  // namespace

void GaussianTarget::finalize() {
  const int d = dimension();
  llt_P0_.compute(P0_);
  if (llt_P0_.info() != Eigen::Success)
    throw NumericalError("gaussian target: precision is not positive definite");
  C0_ = llt_P0_.solve(Eigen::MatrixXd::Identity(d, d));
  C0_ = ((C0_ + C0_.transpose()) * 0.5).eval();
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P0_, Eigen::EigenvaluesOnly);
  m_ = es.eigenvalues().minCoeff();
  M_ = es.eigenvalues().maxCoeff();
  if (!(m_ > 0.0)) throw NumericalError("gaussian target: nonpositive eigenvalue");
}

GaussianTarget GaussianTarget::from_banded_factor(const Eigen::MatrixXd& L, int r0) {
  const int d = static_cast<int>(L.rows());
  if (L.cols() != d) throw ArgumentError("from_banded_factor: L must be square");
  if (r0 < 0 || r0 >= d) throw ArgumentError("from_banded_factor: need 0 <= r0 < d");
  for (int i = 0; i < d; ++i) {
    if (!(L(i, i) > 0.0)) throw ArgumentError("from_banded_factor: diagonal must be positive");
    for (int j = i + 1; j < d; ++j)
      if (L(i, j) != 0.0) throw ArgumentError("from_banded_factor: L must be lower triangular");
  }
  check_banded(L, r0, "from_banded_factor");
  GaussianTarget t;
  t.P0_ = L * L.transpose();
  t.P0_ = ((t.P0_ + t.P0_.transpose()) * 0.5).eval();
  t.r0_ = r0;
  t.finalize();
  return t;
}

GaussianTarget GaussianTarget::from_precision(const Eigen::MatrixXd& P0, int r0) {
  const int d = static_cast<int>(P0.rows());
  if (P0.cols() != d) throw ArgumentError("from_precision: matrix must be square");
  if (r0 < 0 || r0 >= d) throw ArgumentError("from_precision: need 0 <= r0 < d");
  const double scale = std::max(1.0, P0.cwiseAbs().maxCoeff());
  if ((P0 - P0.transpose()).cwiseAbs().maxCoeff() > 1e-12 * scale)
    throw ArgumentError("from_precision: matrix not symmetric within 1e-12");
  check_banded(P0, r0, "from_precision");
  GaussianTarget t;
  t.P0_ = P0;
  t.r0_ = r0;
  t.finalize();
  return t;
}

GaussianTarget GaussianTarget::random_banded(int d, int r0, double diag_base,
                                             double offdiag_scale, std::uint64_t seed) {
  if (d < 2) throw ArgumentError("random_banded: d must be >= 2");
  if (r0 < 1 || r0 >= d) throw ArgumentError("random_banded: need 1 <= r0 < d");
  if (!(diag_base > 0.0)) throw ArgumentError("random_banded: diag_base must be positive");
  if (offdiag_scale < 0.0) throw ArgumentError("random_banded: offdiag_scale must be >= 0");
  SequentialRng rng(seed, streams::kBandedFactor);
  Eigen::MatrixXd L = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    L(i, i) = diag_base + std::abs(rng.normal());
    for (int k = 1; k <= std::min(i, r0); ++k) L(i, i - k) = offdiag_scale * rng.normal();
  }
  return from_banded_factor(L, r0);
}

GaussianTarget GaussianTarget::random_banded_kappa(int d, int r0, double kappa_target,
                                                   double rel_tol, std::uint64_t seed) {
  if (!(kappa_target > 1.0)) throw ArgumentError("random_banded_kappa: target must exceed 1");
  if (!(rel_tol > 0.0)) throw ArgumentError("random_banded_kappa: rel_tol must be positive");
  SequentialRng rng(seed, streams::kBandedFactor);
  Eigen::VectorXd diag_raw(d);
  Eigen::MatrixXd off_raw = Eigen::MatrixXd::Zero(d, d);
  for (int i = 0; i < d; ++i) {
    diag_raw[i] = 1.0 + std::abs(rng.normal());
    for (int k = 1; k <= std::min(i, r0); ++k) off_raw(i, i - k) = rng.normal();
  }
  auto kappa_of = [&](double s) {
    Eigen::MatrixXd L = s * off_raw;
    L.diagonal() = diag_raw;
    Eigen::MatrixXd P = L * L.transpose();
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(P, Eigen::EigenvaluesOnly);
    return es.eigenvalues().maxCoeff() / es.eigenvalues().minCoeff();
  };

  double lo = 0.0, hi = 0.25;
  int guard = 0;
  while (kappa_of(hi) < kappa_target) {
    lo = hi;
    hi *= 2.0;
    if (++guard > 40) throw NumericalError("random_banded_kappa: bracket expansion failed");
  }
  double s = hi;
  for (int it = 0; it < 60; ++it) {
    s = 0.5 * (lo + hi);
    double k = kappa_of(s);
    if (std::abs(k - kappa_target) <= rel_tol * kappa_target) break;
    (k < kappa_target ? lo : hi) = s;
  }
  Eigen::MatrixXd L = s * off_raw;
  L.diagonal() = diag_raw;
  return from_banded_factor(L, r0);
}

GaussianTarget GaussianTarget::discretized_ou(int d, double h) {
  if (d < 2) throw ArgumentError("discretized_ou: d must be >= 2");
  if (!(h > 0.0)) throw ArgumentError("discretized_ou: h must be positive");
  const double a = std::exp(-h);
  const double s2 = -std::expm1(-2.0 * h);  // 1 - a^2
  Eigen::MatrixXd P = Eigen::MatrixXd::Zero(d, d);
  P(0, 0) = 1.0 + a * a / s2;
  for (int i = 1; i + 1 < d; ++i) P(i, i) = (1.0 + a * a) / s2;
  P(d - 1, d - 1) = 1.0 / s2;
  for (int i = 0; i + 1 < d; ++i) {
    P(i, i + 1) = -a / s2;
    P(i + 1, i) = -a / s2;
  }
  return from_precision(P, 1);
}

Eigen::MatrixXd GaussianTarget::precision_at(double t) const {
  auto [alpha, sigma] = ou_moments(t);
  const int d = dimension();
  Eigen::MatrixXd blend = (alpha * alpha) * C0_;
  blend.diagonal().array() += sigma * sigma;
  Eigen::LLT<Eigen::MatrixXd> llt(blend);
  if (llt.info() != Eigen::Success) throw NumericalError("precision_at: factorization failed");
  Eigen::MatrixXd P = llt.solve(Eigen::MatrixXd::Identity(d, d));
  return ((P + P.transpose()) * 0.5).eval();
}

Eigen::VectorXd GaussianTarget::exact_score(const Eigen::VectorXd& x, double t) const {
  return -(precision_at(t) * x);
}

int GaussianTarget::band_graph_distance(int i, int j) const {
  const int gap = std::abs(i - j);
  return (gap + r0_ - 1) / r0_;
}

SampleBatch GaussianTarget::sample_exact(int n, std::uint64_t seed) const {
  if (n < 0) throw ArgumentError("sample_exact: n must be >= 0");
  const int d = dimension();
  SampleBatch batch;
  batch.seed = seed;
  batch.schedule_id = "exact";
  batch.data.resize(n, d);
  const CounterRng rng(seed, streams::kGaussianData);
  Eigen::VectorXd z(d);
  for (int s = 0; s < n; ++s) {
    rng.fill_normals(static_cast<std::uint64_t>(s), 0, {z.data(), static_cast<std::size_t>(d)});
    // P0 = L L^T, so L^{-T} z ~ N(0, C0)
    batch.data.row(s) = llt_P0_.matrixU().solve(z).transpose();
  }
  return batch;
}

Eigen::VectorXd GaussianScoreField::evaluate(const Eigen::VectorXd& x, double t) const {
  return -(precision_cached(t) * x);
}

void GaussianScoreField::evaluate_batch(const Eigen::Ref<const Eigen::MatrixXd>& xs, double t,
                                        Eigen::Ref<Eigen::MatrixXd> out) const {
  out.noalias() = -(precision_cached(t) * xs);
}

const Eigen::MatrixXd& GaussianScoreField::precision_cached(double t) const {
  std::lock_guard<std::mutex> lock(mu_);
  auto it = cache_.find(t);
  if (it == cache_.end())
    it = cache_.emplace(t, std::make_unique<Eigen::MatrixXd>(target_.precision_at(t))).first;
  return *it->second;
}

int effective_localization_radius(const Eigen::MatrixXd& P, double eps) {
  if (!(eps > 0.0)) throw ArgumentError("effective_localization_radius: eps must be positive");
  const int d = static_cast<int>(P.rows());
  const double threshold = eps * P.trace() / d;
  int best = 0;
  for (int r = 1; r < d; ++r) {
    double acc = 0.0;
    for (int i = 0; i + r < d; ++i) acc += std::abs(P(i, i + r));
    if (acc / (d - r) >= threshold) best = r;
  }
  return best;
}

BoundCheckReport locality_bound_check(const GaussianTarget& target, double t) {
  return locality_bound_check(target, t, target.precision_at(t));
}

BoundCheckReport locality_bound_check(const GaussianTarget& target, double t,
                                      const Eigen::MatrixXd& Pt, double slack_tol) {
  if (!(t > 0.0)) throw ArgumentError("locality_bound_check: t must be positive");
  const int d = static_cast<int>(Pt.rows());
  const double m = target.spectral_min();
  const double M = target.spectral_max();
  BoundCheckReport rep;
  rep.min_slack = std::numeric_limits<double>::infinity();
  // rhs depends on (i, j) only through the graph distance; cache per distance
  const int max_dist = target.band_graph_distance(0, d - 1);
  std::vector<double> rhs(static_cast<std::size_t>(max_dist) + 1);
  for (int k = 1; k <= max_dist; ++k) rhs[k] = theorem23_bound_rhs(m, M, t, k);
  for (int i = 0; i < d; ++i) {
    for (int j = i + 1; j < d; ++j) {
      const double slack = rhs[target.band_graph_distance(i, j)] - std::abs(Pt(i, j));
      if (slack < rep.min_slack) {
        rep.min_slack = slack;
        rep.worst_i = i;
        rep.worst_j = j;
      }
    }
  }
  rep.ok = rep.min_slack >= -slack_tol;
  return rep;
}

Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& samples) {
  const Eigen::Index n = samples.rows();
  if (n < 1) throw ArgumentError("sample_covariance: need at least one sample");
  Eigen::RowVectorXd mean = samples.colwise().mean();
  Eigen::MatrixXd centered = samples.rowwise() - mean;
  return (centered.transpose() * centered) / static_cast<double>(n);
}

Eigen::MatrixXd shrunk_precision(const Eigen::MatrixXd& C, double t) {
  auto [alpha, sigma] = ou_moments(t);
  const int d = static_cast<int>(C.rows());
  Eigen::MatrixXd blend = (alpha * alpha) * C;
  blend.diagonal().array() += sigma * sigma;
  Eigen::LLT<Eigen::MatrixXd> llt(blend);
  if (llt.info() != Eigen::Success)
    throw NumericalError("shrunk_precision: singular matrix (rank-deficient covariance at t=0?)");
  Eigen::MatrixXd P = llt.solve(Eigen::MatrixXd::Identity(d, d));
  return ((P + P.transpose()) * 0.5).eval();
}

Eigen::MatrixXd empirical_precision(const SampleBatch& samples, double t) {
  return shrunk_precision(sample_covariance(samples.data), t);
}

Eigen::MatrixXd localize_matrix(const Eigen::MatrixXd& P, int r) {
  if (r < 0) throw ArgumentError("localize_matrix: r must be >= 0");
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(P.rows(), P.cols());
  const int d = static_cast<int>(P.rows());
  for (int j = 0; j < d; ++j) {
    const int lo = std::max(0, j - r);
    const int hi = std::min(d - 1, j + r);
    out.col(j).segment(lo, hi - lo + 1) = P.col(j).segment(lo, hi - lo + 1);
  }
  return out;
}

double spectral_norm(const Eigen::MatrixXd& A) {
  const double scale = A.cwiseAbs().maxCoeff();
  if (scale == 0.0) return 0.0;
  if (A.rows() == A.cols() &&
      (A - A.transpose()).cwiseAbs().maxCoeff() <= 1e-10 * std::max(1.0, scale)) {
    Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> es(A, Eigen::EigenvaluesOnly);
    return es.eigenvalues().cwiseAbs().maxCoeff();
  }
  Eigen::BDCSVD<Eigen::MatrixXd> svd(A);
  return svd.singularValues()(0);
}

double covariance_rel_error(const Eigen::MatrixXd& C_hat, const Eigen::MatrixXd& C) {
  if (C_hat.rows() != C.rows() || C_hat.cols() != C.cols())
    throw ArgumentError("covariance_rel_error: shape mismatch");
  const double denom = spectral_norm(C);
  if (denom == 0.0) throw ArgumentError("covariance_rel_error: zero reference matrix");
  return spectral_norm(C_hat - C) / denom;
}

namespace {

// One covariance-propagation step Sigma -> A Sigma A^T + 2 dt I with
// A = (1 + dt) I - 2 dt Ploc.
void propagate_step(Eigen::MatrixXd& sigma, const Eigen::MatrixXd& Ploc, double dt,
                    Eigen::MatrixXd& scratch) {
  Eigen::MatrixXd A = -2.0 * dt * Ploc;
  A.diagonal().array() += 1.0 + dt;
  scratch.noalias() = A * sigma;
  sigma.noalias() = scratch * A.transpose();
  sigma.diagonal().array() += 2.0 * dt;
}

}  // namespace

Eigen::MatrixXd propagate_reverse_covariance(const Eigen::MatrixXd& C0_hat,
                                             const NoiseSchedule& schedule, int radius) {
  const int d = static_cast<int>(C0_hat.rows());
  Eigen::MatrixXd sigma = Eigen::MatrixXd::Identity(d, d);
  Eigen::MatrixXd scratch(d, d);
  for (int n = 0; n < schedule.n_steps(); ++n) {
    Eigen::MatrixXd P = shrunk_precision(C0_hat, schedule.score_time(n));
    if (radius >= 0) P = localize_matrix(P, radius);
    propagate_step(sigma, P, schedule.reverse_dt(n), scratch);
  }
  return ((sigma + sigma.transpose()) * 0.5).eval();
}

Eigen::VectorXd TradeoffResult::mean_err() const {
  return per_rep_err.colwise().mean();
}

Eigen::VectorXd TradeoffResult::std_err() const {
  const Eigen::Index n = per_rep_err.rows();
  Eigen::VectorXd mean = per_rep_err.colwise().mean();
  Eigen::VectorXd out(per_rep_err.cols());
  for (Eigen::Index c = 0; c < per_rep_err.cols(); ++c)
    out[c] = n > 1 ? std::sqrt((per_rep_err.col(c).array() - mean[c]).square().sum() / (n - 1))
                   : 0.0;
  return out;
}

double TradeoffResult::ref_mean() const { return per_rep_ref.mean(); }

double TradeoffResult::ref_std() const {
  const Eigen::Index n = per_rep_ref.size();
  if (n < 2) return 0.0;
  return std::sqrt((per_rep_ref.array() - per_rep_ref.mean()).square().sum() / (n - 1));
}

TradeoffResult tradeoffresult_init(const TradeoffConfig& cfg) {
  TradeoffResult res;
  res.radii = cfg.radii;
  res.heatmap_radii = cfg.heatmap_radii;
  res.per_rep_err.resize(cfg.reps, static_cast<Eigen::Index>(cfg.radii.size()));
  res.per_rep_ref.resize(cfg.reps);
  return res;
}

TradeoffResult tradeoff_experiment(const TradeoffConfig& cfg) {
  if (cfg.radii.empty()) throw ArgumentError("tradeoff: radii list must not be empty");
  if (cfg.reps < 1) throw ArgumentError("tradeoff: reps must be >= 1");
  for (int r : cfg.heatmap_radii)
    if (std::find(cfg.radii.begin(), cfg.radii.end(), r) == cfg.radii.end())
      throw ArgumentError("tradeoff: heatmap radius " + std::to_string(r) + " not in radii");

  const GaussianTarget target = GaussianTarget::discretized_ou(cfg.d, cfg.h);
  const NoiseSchedule schedule = NoiseSchedule::linear_beta(cfg.n_steps, cfg.beta_1, cfg.beta_N);
  const int d = cfg.d;
  const std::size_t n_radii = cfg.radii.size();
  const double c_norm = spectral_norm(target.covariance());

  TradeoffResult res = tradeoffresult_init(cfg);
  std::vector<std::vector<Eigen::MatrixXd>> entrywise(
      static_cast<std::size_t>(cfg.reps));  // per rep, parallel to heatmap_radii

  parallel_for(static_cast<std::size_t>(cfg.reps), cfg.n_threads, [&](std::size_t rep) {
    // data covariance for this repetition
    Eigen::MatrixXd C0_hat;
    if (cfg.inject_exact_cov) {
      C0_hat = target.covariance();
    } else {
      SampleBatch data = target.sample_exact(cfg.n_data, derive_seed(cfg.seed, rep, 1));
      C0_hat = sample_covariance(data.data);
    }

    // propagate the exact chain covariance for every radius plus the dense reference
    std::vector<Eigen::MatrixXd> sigmas(n_radii + 1, Eigen::MatrixXd::Identity(d, d));
    Eigen::MatrixXd scratch(d, d);
    for (int n = 0; n < schedule.n_steps(); ++n) {
      const double dt = schedule.reverse_dt(n);
      const Eigen::MatrixXd P = shrunk_precision(C0_hat, schedule.score_time(n));
      for (std::size_t k = 0; k < n_radii; ++k) {
        Eigen::MatrixXd Ploc = localize_matrix(P, cfg.radii[k]);
        propagate_step(sigmas[k], Ploc, dt, scratch);
      }
      propagate_step(sigmas[n_radii], P, dt, scratch);
    }

    // generated-sample covariance per radius; the chain's output is exactly
    // N(0, sigma), so n_gen iid draws from it have the same law as running
    // the sampler trajectory-by-trajectory
    const CounterRng gen_rng(derive_seed(cfg.seed, rep, 2), streams::kTradeoffRep);
    entrywise[rep].resize(cfg.heatmap_radii.size());
    Eigen::VectorXd z(d);
    for (std::size_t k = 0; k <= n_radii; ++k) {
      Eigen::MatrixXd sym = ((sigmas[k] + sigmas[k].transpose()) * 0.5).eval();
      Eigen::MatrixXd C_hat;
      if (cfg.exact_generated_cov) {
        C_hat = sym;
      } else {
        Eigen::LLT<Eigen::MatrixXd> llt(sym);
        if (llt.info() != Eigen::Success)
          throw NumericalError("tradeoff: propagated covariance not positive definite");
        Eigen::MatrixXd gen(cfg.n_gen, d);
        const std::uint64_t blocks = (static_cast<std::uint64_t>(d) + 3) / 4;
        for (int s = 0; s < cfg.n_gen; ++s) {
          gen_rng.fill_normals(static_cast<std::uint64_t>(k), blocks * s,
                               {z.data(), static_cast<std::size_t>(d)});
          gen.row(s) = (llt.matrixL() * z).transpose();
        }
        C_hat = sample_covariance(gen);
      }
      const double err = covariance_rel_error(C_hat, target.covariance());
      if (k < n_radii) {
        res.per_rep_err(static_cast<Eigen::Index>(rep), static_cast<Eigen::Index>(k)) = err;
        auto it = std::find(cfg.heatmap_radii.begin(), cfg.heatmap_radii.end(), cfg.radii[k]);
        if (it != cfg.heatmap_radii.end())
          entrywise[rep][static_cast<std::size_t>(it - cfg.heatmap_radii.begin())] =
              (C_hat - target.covariance()).cwiseAbs() / c_norm;
      } else {
        res.per_rep_ref(static_cast<Eigen::Index>(rep)) = err;
      }
    }
  });

  // ordered reduction keeps the result independent of the worker count
  for (std::size_t h = 0; h < cfg.heatmap_radii.size(); ++h) {
    Eigen::MatrixXd acc = Eigen::MatrixXd::Zero(d, d);
    for (int rep = 0; rep < cfg.reps; ++rep) acc += entrywise[static_cast<std::size_t>(rep)][h];
    res.mean_entrywise.push_back(acc / cfg.reps);
  }
  return res;
}

RlocCurve rloc_scan(const GaussianTarget& target, const std::vector<double>& times, double eps) {
  RlocCurve curve;
  curve.times = times;
  curve.rloc.reserve(times.size());
  for (double t : times) curve.rloc.push_back(effective_localization_radius(target.precision_at(t), eps));
  return curve;
}

std::vector<double> log_spaced(double lo, double hi, int n) {
  if (!(lo > 0.0) || !(hi > lo) || n < 2) throw ArgumentError("log_spaced: bad range");
  std::vector<double> out(static_cast<std::size_t>(n));
  const double llo = std::log(lo), lhi = std::log(hi);
  for (int i = 0; i < n; ++i)
    out[static_cast<std::size_t>(i)] = std::exp(llo + (lhi - llo) * i / (n - 1));
  return out;
}

}  // namespace locdiff
