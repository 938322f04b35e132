#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <map>
#include <memory>
#include <mutex>
#include <vector>

#include "locdiff/diffusion.hpp"
#include "locdiff/schedule.hpp"

namespace locdiff {

/// Centered Gaussian target N(0, C0) with banded precision P0 = C0^{-1} of
/// bandwidth r0. Holds the extreme eigenvalues m <= M of P0 (so kappa = M/m)
/// and the closed-form time-t precision P_t = (alpha_t^2 C0 + sigma_t^2 I)^{-1}.
class GaussianTarget {
 public:
  /// P0 = L L^T from an explicit banded lower-triangular factor.
  static GaussianTarget from_banded_factor(const Eigen::MatrixXd& L, int r0);

  /// Validates symmetry (1e-12), strict bandedness, and positive definiteness.
  static GaussianTarget from_precision(const Eigen::MatrixXd& P0, int r0);

  /// L_ii = diag_base + |N(0,1)|, L_ij = offdiag_scale * N(0,1) for 0 < i-j <= r0.
  static GaussianTarget random_banded(int d, int r0, double diag_base, double offdiag_scale,
                                      std::uint64_t seed);

  /// Rescales the off-diagonal factor magnitude until kappa lands within
  /// rel_tol of kappa_target (bisection over the scale on fixed raw draws).
  static GaussianTarget random_banded_kappa(int d, int r0, double kappa_target, double rel_tol,
                                            std::uint64_t seed);

  /// Exact precision of the stationary AR(1) chain X_{n+1} = alpha_h X_n + sigma_h xi
  /// with alpha_h = e^{-h}; tridiagonal, unit marginal variances.
  static GaussianTarget discretized_ou(int d, double h);

  int dimension() const { return static_cast<int>(P0_.rows()); }
  int bandwidth() const { return r0_; }
  const Eigen::MatrixXd& precision() const { return P0_; }
  const Eigen::MatrixXd& covariance() const { return C0_; }
  double spectral_min() const { return m_; }
  double spectral_max() const { return M_; }
  double kappa() const { return M_ / m_; }

  /// P_t = (alpha_t^2 C0 + sigma_t^2 I)^{-1}.
  Eigen::MatrixXd precision_at(double t) const;

  /// s(x, t) = -P_t x.
  Eigen::VectorXd exact_score(const Eigen::VectorXd& x, double t) const;

  /// Graph distance ceil(|i-j| / r0) of the banded dependency graph
  /// (0-based matrix coordinates).
  int band_graph_distance(int i, int j) const;

  /// n iid draws from N(0, C0); noise keyed by (seed, sample index).
  SampleBatch sample_exact(int n, std::uint64_t seed) const;

 private:
  GaussianTarget() = default;
  void finalize();  // computes C0, eigenvalue extremes, factorization

  Eigen::MatrixXd P0_;
  Eigen::MatrixXd C0_;
  Eigen::LLT<Eigen::MatrixXd> llt_P0_;
  int r0_ = 0;
  double m_ = 0.0;
  double M_ = 0.0;
};

/// ScoreField adapter around a GaussianTarget with a per-time precision cache
/// (safe for concurrent reads after the first evaluation at each time).
class GaussianScoreField : public ScoreField {
 public:
  explicit GaussianScoreField(const GaussianTarget& target) : target_(target) {}
  int dimension() const override { return target_.dimension(); }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x, double t) const override;
  void evaluate_batch(const Eigen::Ref<const Eigen::MatrixXd>& xs, double t,
                      Eigen::Ref<Eigen::MatrixXd> out) const override;

 private:
  const Eigen::MatrixXd& precision_cached(double t) const;

  const GaussianTarget& target_;
  mutable std::mutex mu_;
  mutable std::map<double, std::unique_ptr<Eigen::MatrixXd>> cache_;
};

/// Largest r in [1, d) whose r-th off-diagonal average of |P| stays above
/// eps * tr(P)/d; 0 when no r qualifies.
int effective_localization_radius(const Eigen::MatrixXd& P, double eps);

/// Entrywise approximate-locality bound report at time t (pairs i != j).
/// For the Gaussian, the bounded quantity at distinct coordinates equals
/// |P_t(i,j)|; the diagonal is excluded since there the mixed-derivative
/// identity picks up the extra sigma_t^{-2} shift (|sigma_t^{-2} - P_t(i,i)|).
struct BoundCheckReport {
  bool ok = true;
  double min_slack = 0.0;  // min over pairs of (rhs - lhs); negative = violation
  int worst_i = -1;
  int worst_j = -1;
};
BoundCheckReport locality_bound_check(const GaussianTarget& target, double t);
BoundCheckReport locality_bound_check(const GaussianTarget& target, double t,
                                      const Eigen::MatrixXd& Pt, double slack_tol = 1e-10);

/// Biased (1/N) sample covariance of centered rows.
Eigen::MatrixXd sample_covariance(const Eigen::MatrixXd& samples);

/// (alpha_t^2 C + sigma_t^2 I)^{-1} for a given covariance estimate C.
Eigen::MatrixXd shrunk_precision(const Eigen::MatrixXd& C, double t);

/// shrunk_precision over the batch's sample covariance.
Eigen::MatrixXd empirical_precision(const SampleBatch& samples, double t);

/// Entrywise band truncation P(i,j) 1_{|i-j| <= r}; idempotent.
Eigen::MatrixXd localize_matrix(const Eigen::MatrixXd& P, int r);

double spectral_norm(const Eigen::MatrixXd& A);

/// ||Chat - C||_2 / ||C||_2 in the spectral norm.
double covariance_rel_error(const Eigen::MatrixXd& C_hat, const Eigen::MatrixXd& C);

/// Exact covariance of the discretized reverse chain driven by the (optionally
/// band-truncated) estimated precision: Y_{n+1} = A_n Y_n + sqrt(2 dt_n) xi,
/// A_n = (1 + dt_n) I - 2 dt_n P_hat(t_n), Y_0 ~ N(0, I). radius < 0 disables
/// truncation (the non-localized reference).
Eigen::MatrixXd propagate_reverse_covariance(const Eigen::MatrixXd& C0_hat,
                                             const NoiseSchedule& schedule, int radius);

/// Localization/statistical tradeoff experiment over a radius list.
struct TradeoffConfig {
  int d = 101;
  double h = 0.2;
  int n_data = 1000;
  int n_gen = 10000;
  int n_steps = 1000;
  double beta_1 = 1e-4;
  double beta_N = 0.05;
  std::vector<int> radii;
  std::vector<int> heatmap_radii;  // subset for entrywise error maps
  int reps = 30;
  std::uint64_t seed = 0;
  bool inject_exact_cov = false;     // use C0 in place of the data sample covariance
  bool exact_generated_cov = false;  // skip generation sampling noise entirely
  int n_threads = 1;
};

struct TradeoffResult {
  std::vector<int> radii;
  Eigen::MatrixXd per_rep_err;  // reps x |radii|
  Eigen::VectorXd per_rep_ref;  // reps
  std::vector<Eigen::MatrixXd> mean_entrywise;  // parallel to heatmap_radii
  std::vector<int> heatmap_radii;

  Eigen::VectorXd mean_err() const;
  Eigen::VectorXd std_err() const;
  double ref_mean() const;
  double ref_std() const;
};

TradeoffResult tradeoff_experiment(const TradeoffConfig& cfg);

/// r_loc(t) over a time grid.
struct RlocCurve {
  std::vector<double> times;
  std::vector<int> rloc;
};
RlocCurve rloc_scan(const GaussianTarget& target, const std::vector<double>& times, double eps);

std::vector<double> log_spaced(double lo, double hi, int n);

}  // namespace locdiff
