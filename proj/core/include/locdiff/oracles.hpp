#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <vector>

#include "locdiff/gaussian.hpp"
#include "locdiff/schedule.hpp"

namespace locdiff {

/// Linear localized score u(x_w) = -coeff x_w over a flat coordinate window.
/// `block` holds the target block's flat coordinates (a subset of window).
struct LinearLocalScore {
  std::vector<int> window;
  std::vector<int> block;
  Eigen::MatrixXd coeff;  // |block| x |window|

  Eigen::VectorXd evaluate(const Eigen::VectorXd& x_window) const { return -coeff * x_window; }
};

/// Optimal localized score by Gaussian conditioning of the full score:
/// coeff = P[block,w] + P[block,w_perp] C[w_perp,w] C[w,w]^{-1}, with P = Ct^{-1}.
LinearLocalScore optimal_localized_score_conditional(const Eigen::MatrixXd& Ct,
                                                     const std::vector<int>& window,
                                                     const std::vector<int>& block);

/// Optimal localized score as the score of the window marginal:
/// coeff = rows of C[w,w]^{-1} at the block's positions. Agrees with the
/// conditional-expectation formula; the two are computed through disjoint
/// arithmetic so either can check the other.
LinearLocalScore optimal_localized_score_marginal(const Eigen::MatrixXd& Ct,
                                                  const std::vector<int>& window,
                                                  const std::vector<int>& block);

/// E || u*(x_w) - s_block(x) ||^2 under N(0, Ct), in closed form.
double localization_error_exact(const Eigen::MatrixXd& Ct, const std::vector<int>& window,
                                const std::vector<int>& block);
double localization_error_exact(const Eigen::MatrixXd& Ct, const Eigen::MatrixXd& Pt,
                                const std::vector<int>& window, const std::vector<int>& block);

/// Max over trials of | E||u-s||^2 - E||u-u*||^2 - E||u*-s||^2 |, all three
/// terms evaluated exactly from Gaussian moments.
double pythagorean_residual(const Eigen::MatrixXd& Ct, const std::vector<int>& window,
                            const std::vector<int>& block,
                            const std::vector<Eigen::MatrixXd>& trial_coeffs);

/// Monte Carlo check that DSM loss differences between localized trial scores
/// equal the closed-form L2(p_t) differences (the DSM constant cancels).
/// The last row/column of the report refers to the optimal score u*.
struct DsmEquivalenceReport {
  Eigen::VectorXd loss;         // MC loss per trial, u* appended last
  Eigen::MatrixXd diff;         // diff(i,j) = loss_i - loss_j
  Eigen::MatrixXd diff_se;      // MC standard error of diff(i,j) (common draws)
  Eigen::MatrixXd closed_form;  // exact integral of E||u_i-u*||^2 - E||u_j-u*||^2
  double max_sigma_dev = 0.0;   // max |diff - closed| / se
  bool consistent = false;      // all pairwise deviations within 3 se
  bool optimal_is_min = false;  // loss(u*) <= loss(u_i) + 3 se for all i
};
DsmEquivalenceReport dsm_equivalence_check(const GaussianTarget& target,
                                           const std::vector<int>& window,
                                           const std::vector<int>& block,
                                           const std::vector<Eigen::MatrixXd>& trial_coeffs,
                                           const NoiseSchedule& schedule, long n_mc,
                                           std::uint64_t seed);

/// |C0(i,j)| <= (1/m)(1 - m/M)^{d_G(i,j)} at every pair (identity observables
/// are 1-Lipschitz). Diagonal pairs are included (variance bound 1/m).
struct DecaySlackReport {
  bool ok = true;
  double min_slack = 0.0;
  int worst_i = -1;
  int worst_j = -1;
};
DecaySlackReport correlation_decay_check(const GaussianTarget& target, double slack_tol = 1e-10);

/// Numerical check of the time-integral bound
///   int_0^inf alpha^4 / (sigma^2 (m sigma^2 + alpha^2)^3) * decay^{2k} dt
///     <= max{1, 1/m} log(kappa) (1 - 1/kappa)^{2k},
/// quadrature performed in the variable lambda = alpha^2 / sigma^2.
struct IntegralBoundResult {
  double lhs = 0.0;
  double rhs = 0.0;
  bool holds = false;
};
IntegralBoundResult integral_bound_check(double m, double M, int k);

/// alpha_t^2 / (sigma_t^2 (m sigma_t^2 + alpha_t^2)) *
///   (1 - (m sigma_t^2 + alpha_t^2)/(M sigma_t^2 + alpha_t^2))^{graph_dist}.
double theorem23_bound_rhs(double m, double M, double t, int graph_dist);

/// Exact localization error of the center coordinate integrated over the
/// schedule's time grid (composite two-point Gauss-Legendre), one value per
/// requested radius. Windows are band windows |i - center| <= r * r0.
std::vector<double> localization_error_curve(const GaussianTarget& target, int center_coord,
                                             const std::vector<int>& radii,
                                             const NoiseSchedule& schedule);

struct LinearFit {
  double slope = 0.0;
  double intercept = 0.0;
  double r_squared = 0.0;
};
/// Least squares on (x, log y); y must be positive.
LinearFit fit_log_linear(const std::vector<double>& x, const std::vector<double>& y);

}  // namespace locdiff
