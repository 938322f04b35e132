#include "locdiff/oracles.hpp"

#include <algorithm>
#include <cmath>

#include "locdiff/errors.hpp"
#include "locdiff/rng.hpp"
#include "stream_ids.hpp"

namespace locdiff {

namespace {

Eigen::MatrixXd submatrix(const Eigen::MatrixXd& A, const std::vector<int>& rows,
                          const std::vector<int>& cols) {
  Eigen::MatrixXd out(rows.size(), cols.size());
  for (std::size_t i = 0; i < rows.size(); ++i)
    for (std::size_t j = 0; j < cols.size(); ++j) out(i, j) = A(rows[i], cols[j]);
  return out;
}

std::vector<int> complement(int d, const std::vector<int>& window) {
  std::vector<int> out;
  std::size_t k = 0;
  for (int i = 0; i < d; ++i) {
    if (k < window.size() && window[k] == i)
      ++k;
    else
      out.push_back(i);
  }
  return out;
}

void validate_window(int d, const std::vector<int>& window, const std::vector<int>& block) {
  if (window.empty()) throw ArgumentError("localized score: empty window");
  for (std::size_t i = 0; i < window.size(); ++i) {
    if (window[i] < 0 || window[i] >= d) throw ArgumentError("localized score: window out of range");
    if (i > 0 && window[i] <= window[i - 1])
      throw ArgumentError("localized score: window must be strictly ascending");
  }
  for (int c : block)
    if (!std::binary_search(window.begin(), window.end(), c))
      throw ArgumentError("localized score: block coordinate not inside window");
}

std::vector<int> positions_in_window(const std::vector<int>& window, const std::vector<int>& block) {
  std::vector<int> pos;
  for (int c : block) {
    auto it = std::lower_bound(window.begin(), window.end(), c);
    pos.push_back(static_cast<int>(it - window.begin()));
  }
  return pos;
}

// Embeds a |block| x |window| coefficient matrix into |block| x d columns.
Eigen::MatrixXd embed_columns(const Eigen::MatrixXd& A, const std::vector<int>& window, int d) {
  Eigen::MatrixXd out = Eigen::MatrixXd::Zero(A.rows(), d);
  for (std::size_t j = 0; j < window.size(); ++j) out.col(window[j]) = A.col(static_cast<Eigen::Index>(j));
  return out;
}

}  // namespace

LinearLocalScore optimal_localized_score_conditional(const Eigen::MatrixXd& Ct,
                                                     const std::vector<int>& window,
                                                     const std::vector<int>& block) {
  const int d = static_cast<int>(Ct.rows());
  validate_window(d, window, block);
  Eigen::LLT<Eigen::MatrixXd> llt_full(Ct);
  if (llt_full.info() != Eigen::Success)
    throw NumericalError("optimal_localized_score_conditional: covariance not SPD");
  const Eigen::MatrixXd Pt = llt_full.solve(Eigen::MatrixXd::Identity(d, d));

  const std::vector<int> comp = complement(d, window);
  const Eigen::MatrixXd Ww = submatrix(Ct, window, window);
  Eigen::LLT<Eigen::MatrixXd> llt_w(Ww);
  if (llt_w.info() != Eigen::Success)
    throw NumericalError("optimal_localized_score_conditional: singular window block");

  LinearLocalScore score;
  score.window = window;
  score.block = block;
  Eigen::MatrixXd coeff = submatrix(Pt, block, window);
  if (!comp.empty()) {
    const Eigen::MatrixXd P_bc = submatrix(Pt, block, comp);
    const Eigen::MatrixXd C_cw = submatrix(Ct, comp, window);
    // E[x_comp | x_w] = C[comp,w] C[w,w]^{-1} x_w
    coeff += P_bc * llt_w.solve(C_cw.transpose()).transpose();
  }
  score.coeff = std::move(coeff);
  return score;
}

LinearLocalScore optimal_localized_score_marginal(const Eigen::MatrixXd& Ct,
                                                  const std::vector<int>& window,
                                                  const std::vector<int>& block) {
  const int d = static_cast<int>(Ct.rows());
  validate_window(d, window, block);
  const Eigen::MatrixXd Ww = submatrix(Ct, window, window);
  Eigen::LLT<Eigen::MatrixXd> llt_w(Ww);
  if (llt_w.info() != Eigen::Success)
    throw NumericalError("optimal_localized_score_marginal: singular window block");
  const Eigen::MatrixXd Winv =
      llt_w.solve(Eigen::MatrixXd::Identity(Ww.rows(), Ww.cols()));

  LinearLocalScore score;
  score.window = window;
  score.block = block;
  const std::vector<int> pos = positions_in_window(window, block);
  score.coeff.resize(block.size(), window.size());
  for (std::size_t r = 0; r < pos.size(); ++r)
    score.coeff.row(static_cast<Eigen::Index>(r)) = Winv.row(pos[r]);
  return score;
}

double localization_error_exact(const Eigen::MatrixXd& Ct, const std::vector<int>& window,
                                const std::vector<int>& block) {
  const int d = static_cast<int>(Ct.rows());
  Eigen::LLT<Eigen::MatrixXd> llt(Ct);
  if (llt.info() != Eigen::Success)
    throw NumericalError("localization_error_exact: covariance not SPD");
  return localization_error_exact(Ct, llt.solve(Eigen::MatrixXd::Identity(d, d)), window, block);
}

double localization_error_exact(const Eigen::MatrixXd& Ct, const Eigen::MatrixXd& Pt,
                                const std::vector<int>& window, const std::vector<int>& block) {
  const int d = static_cast<int>(Ct.rows());
  validate_window(d, window, block);
  const LinearLocalScore opt = optimal_localized_score_marginal(Ct, window, block);
  // u*(x_w) - s_block(x) = (P[block,:] - embed(A)) x
  Eigen::MatrixXd B = -embed_columns(opt.coeff, window, d);
  for (std::size_t r = 0; r < block.size(); ++r)
    B.row(static_cast<Eigen::Index>(r)) += Pt.row(block[r]);
  return (B * Ct * B.transpose()).trace();
}

double pythagorean_residual(const Eigen::MatrixXd& Ct, const std::vector<int>& window,
                            const std::vector<int>& block,
                            const std::vector<Eigen::MatrixXd>& trial_coeffs) {
  const int d = static_cast<int>(Ct.rows());
  validate_window(d, window, block);
  Eigen::LLT<Eigen::MatrixXd> llt(Ct);
  if (llt.info() != Eigen::Success) throw NumericalError("pythagorean_residual: covariance not SPD");
  const Eigen::MatrixXd Pt = llt.solve(Eigen::MatrixXd::Identity(d, d));
  const Eigen::MatrixXd Ww = submatrix(Ct, window, window);
  const LinearLocalScore opt = optimal_localized_score_marginal(Ct, window, block);
  const double loc_err = localization_error_exact(Ct, Pt, window, block);

  double worst = 0.0;
  for (const auto& A : trial_coeffs) {
    if (A.rows() != static_cast<Eigen::Index>(block.size()) ||
        A.cols() != static_cast<Eigen::Index>(window.size()))
      throw ArgumentError("pythagorean_residual: trial coefficient shape mismatch");
    Eigen::MatrixXd B = -embed_columns(A, window, d);
    for (std::size_t r = 0; r < block.size(); ++r)
      B.row(static_cast<Eigen::Index>(r)) += Pt.row(block[r]);
    const double total = (B * Ct * B.transpose()).trace();         // E||u - s||^2
    const Eigen::MatrixXd D = A - opt.coeff;
    const double estim = (D * Ww * D.transpose()).trace();         // E||u - u*||^2
    worst = std::max(worst, std::abs(total - estim - loc_err));
  }
  return worst;
}

namespace {

struct GlGrid {
  std::vector<double> nodes;
  std::vector<double> weights;
};

// Composite two-point Gauss-Legendre over the schedule's reverse-time grid,
// integrating over physical time [early_stop, horizon].
GlGrid schedule_quadrature(const NoiseSchedule& schedule) {
  GlGrid g;
  const double off = 0.5 / std::sqrt(3.0);
  for (int k = 1; k <= schedule.n_steps(); ++k) {
    const double a = schedule.early_stop_time() + schedule.forward_time(k - 1);
    const double b = schedule.early_stop_time() + schedule.forward_time(k);
    const double mid = 0.5 * (a + b);
    const double h = b - a;
    g.nodes.push_back(mid - off * h);
    g.nodes.push_back(mid + off * h);
    g.weights.push_back(0.5 * h);
    g.weights.push_back(0.5 * h);
  }
  return g;
}

}  // namespace

DsmEquivalenceReport dsm_equivalence_check(const GaussianTarget& target,
                                           const std::vector<int>& window,
                                           const std::vector<int>& block,
                                           const std::vector<Eigen::MatrixXd>& trial_coeffs,
                                           const NoiseSchedule& schedule, long n_mc,
                                           std::uint64_t seed) {
  const int d = target.dimension();
  validate_window(d, window, block);
  if (n_mc < 2) throw ArgumentError("dsm_equivalence_check: n_mc must be >= 2");
  const int n_trials = static_cast<int>(trial_coeffs.size());
  const int total = n_trials + 1;  // trailing slot holds u*
  const int wsize = static_cast<int>(window.size());
  const int bsize = static_cast<int>(block.size());
  const std::vector<int> pos = positions_in_window(window, block);

  // common random numbers across trials and time nodes
  const SampleBatch x0 = target.sample_exact(static_cast<int>(n_mc), derive_seed(seed, 1));
  Eigen::MatrixXd X0w(wsize, n_mc);
  for (int i = 0; i < wsize; ++i) X0w.row(i) = x0.data.col(window[i]).transpose();
  const CounterRng rng(derive_seed(seed, 2), streams::kOracleMc);
  Eigen::MatrixXd Ew(wsize, n_mc);
  {
    const std::uint64_t blocks = (static_cast<std::uint64_t>(wsize) + 3) / 4;
    Eigen::VectorXd z(wsize);
    for (long q = 0; q < n_mc; ++q) {
      rng.fill_normals(static_cast<std::uint64_t>(q), blocks * 0,
                       {z.data(), static_cast<std::size_t>(wsize)});
      Ew.col(q) = z;
    }
  }
  Eigen::MatrixXd Eb(bsize, n_mc);
  for (int r = 0; r < bsize; ++r) Eb.row(r) = Ew.row(pos[r]);

  const GlGrid grid = schedule_quadrature(schedule);
  Eigen::MatrixXd Z = Eigen::MatrixXd::Zero(n_mc, total);  // per-draw integrated loss
  Eigen::VectorXd closed = Eigen::VectorXd::Zero(total);   // integral of E||u_i - u*||^2

  Eigen::MatrixXd Xt(wsize, n_mc), V(bsize, n_mc);
  for (std::size_t g = 0; g < grid.nodes.size(); ++g) {
    const double t = grid.nodes[g];
    const double w = grid.weights[g];
    auto [alpha, sigma] = ou_moments(t);
    Eigen::MatrixXd Ct = (alpha * alpha) * target.covariance();
    Ct.diagonal().array() += sigma * sigma;
    const LinearLocalScore opt = optimal_localized_score_marginal(Ct, window, block);
    const Eigen::MatrixXd Ww = submatrix(Ct, window, window);

    Xt.noalias() = alpha * X0w + sigma * Ew;
    for (int i = 0; i < total; ++i) {
      const Eigen::MatrixXd& A = (i < n_trials) ? trial_coeffs[static_cast<std::size_t>(i)]
                                                : opt.coeff;
      V.noalias() = -(A * Xt);
      V.noalias() += (1.0 / sigma) * Eb;
      Z.col(i) += w * V.colwise().squaredNorm().transpose();
      const Eigen::MatrixXd D = A - opt.coeff;
      closed[i] += w * (D * Ww * D.transpose()).trace();
    }
  }

  DsmEquivalenceReport rep;
  rep.loss = Z.colwise().mean();
  rep.diff.resize(total, total);
  rep.diff_se.resize(total, total);
  rep.closed_form.resize(total, total);
  rep.consistent = true;
  rep.optimal_is_min = true;
  for (int i = 0; i < total; ++i) {
    for (int j = 0; j < total; ++j) {
      rep.diff(i, j) = rep.loss[i] - rep.loss[j];
      rep.closed_form(i, j) = closed[i] - closed[j];
      const Eigen::VectorXd delta = Z.col(i) - Z.col(j);
      const double mean = delta.mean();
      const double var = (delta.array() - mean).square().sum() / (n_mc - 1);
      rep.diff_se(i, j) = std::sqrt(var / n_mc);
      if (i != j) {
        const double dev = std::abs(rep.diff(i, j) - rep.closed_form(i, j));
        const double se = std::max(rep.diff_se(i, j), 1e-300);
        rep.max_sigma_dev = std::max(rep.max_sigma_dev, dev / se);
        if (dev > 3.0 * se) rep.consistent = false;
      }
    }
  }
  for (int i = 0; i < n_trials; ++i) {
    // loss(u*) <= loss(u_i) + 3 se
    if (rep.diff(total - 1, i) > 3.0 * rep.diff_se(total - 1, i)) rep.optimal_is_min = false;
  }
  return rep;
}

DecaySlackReport correlation_decay_check(const GaussianTarget& target, double slack_tol) {
  const int d = target.dimension();
  const double m = target.spectral_min();
  const double base = 1.0 - m / target.spectral_max();
  const Eigen::MatrixXd& C = target.covariance();
  DecaySlackReport rep;
  rep.min_slack = std::numeric_limits<double>::infinity();
  for (int i = 0; i < d; ++i) {
    for (int j = i; j < d; ++j) {
      const double bound = std::pow(base, target.band_graph_distance(i, j)) / m;
      const double slack = bound - std::abs(C(i, j));
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

namespace {

double adaptive_simpson(const std::function<double(double)>& f, double a, double b, double fa,
                        double fm, double fb, double whole, double tol, int depth) {
  const double m = 0.5 * (a + b);
  const double lm = 0.5 * (a + m), rm = 0.5 * (m + b);
  const double flm = f(lm), frm = f(rm);
  const double left = (m - a) / 6.0 * (fa + 4.0 * flm + fm);
  const double right = (b - m) / 6.0 * (fm + 4.0 * frm + fb);
  const double delta = left + right - whole;
  if (depth <= 0) throw NumericalError("integral_bound_check: quadrature did not converge");
  if (std::abs(delta) <= 15.0 * tol) return left + right + delta / 15.0;
  return adaptive_simpson(f, a, m, fa, flm, fm, left, 0.5 * tol, depth - 1) +
         adaptive_simpson(f, m, b, fm, frm, fb, right, 0.5 * tol, depth - 1);
}

double integrate(const std::function<double(double)>& f, double a, double b, double tol) {
  const double m = 0.5 * (a + b);
  const double fa = f(a), fm = f(m), fb = f(b);
  const double whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb);
  return adaptive_simpson(f, a, b, fa, fm, fb, whole, tol, 60);
}

}  // namespace

IntegralBoundResult integral_bound_check(double m, double M, int k) {
  if (!(m > 0.0) || !(M >= m)) throw ArgumentError("integral_bound_check: need 0 < m <= M");
  if (k < 1) throw ArgumentError("integral_bound_check: k must be >= 1");
  const double kappa = M / m;

  IntegralBoundResult res;
  res.rhs = std::max(1.0, 1.0 / m) * std::log(kappa) * std::pow(1.0 - 1.0 / kappa, 2 * k);
  if (M == m) {
    // decay factor vanishes identically
    res.lhs = 0.0;
    res.holds = true;
    return res;
  }

  // substitute lambda = alpha^2/sigma^2:
  //   integrand = lambda (1 + lambda) / (2 (m + lambda)^3) * ((M - m)/(M + lambda))^{2k}
  auto f = [&](double lam) {
    const double decay = (M - m) / (M + lam);
    return lam * (1.0 + lam) / (2.0 * std::pow(m + lam, 3)) * std::pow(decay, 2 * k);
  };
  // tail beyond L is below (M-m)^{2k} L^{-2k} / (2k); grow L until negligible
  double L = 10.0 * std::max(1.0, M);
  double head = integrate(f, 0.0, L, 1e-15);
  for (int it = 0; it < 60; ++it) {
    const double tail_bound = std::pow((M - m) / L, 2 * k) / (2.0 * k);
    if (tail_bound <= 1e-12 * std::max(head, 1e-300)) break;
    const double L2 = 4.0 * L;
    head += integrate(f, L, L2, 1e-15 * std::max(head, 1.0));
    L = L2;
  }
  res.lhs = head;
  res.holds = res.lhs <= res.rhs + 1e-10;
  return res;
}

double theorem23_bound_rhs(double m, double M, double t, int graph_dist) {
  if (!(t > 0.0)) throw ArgumentError("theorem23_bound_rhs: t must be positive");
  if (!(m > 0.0) || !(M >= m)) throw ArgumentError("theorem23_bound_rhs: need 0 < m <= M");
  if (graph_dist < 0) throw ArgumentError("theorem23_bound_rhs: graph_dist must be >= 0");
  auto [alpha, sigma] = ou_moments(t);
  const double a2 = alpha * alpha;
  const double s2 = sigma * sigma;
  const double low = m * s2 + a2;
  const double high = M * s2 + a2;
  return a2 / (s2 * low) * std::pow(1.0 - low / high, graph_dist);
}

std::vector<double> localization_error_curve(const GaussianTarget& target, int center_coord,
                                             const std::vector<int>& radii,
                                             const NoiseSchedule& schedule) {
  const int d = target.dimension();
  if (center_coord < 0 || center_coord >= d)
    throw ArgumentError("localization_error_curve: center out of range");
  const GlGrid grid = schedule_quadrature(schedule);
  std::vector<double> err(radii.size(), 0.0);
  const std::vector<int> block{center_coord};
  for (std::size_t g = 0; g < grid.nodes.size(); ++g) {
    auto [alpha, sigma] = ou_moments(grid.nodes[g]);
    Eigen::MatrixXd Ct = (alpha * alpha) * target.covariance();
    Ct.diagonal().array() += sigma * sigma;
    Eigen::LLT<Eigen::MatrixXd> llt(Ct);
    const Eigen::MatrixXd Pt = llt.solve(Eigen::MatrixXd::Identity(d, d));
    for (std::size_t k = 0; k < radii.size(); ++k) {
      const int reach = radii[k] * target.bandwidth();
      std::vector<int> window;
      for (int i = std::max(0, center_coord - reach); i <= std::min(d - 1, center_coord + reach); ++i)
        window.push_back(i);
      err[k] += grid.weights[g] * localization_error_exact(Ct, Pt, window, block);
    }
  }
  return err;
}

LinearFit fit_log_linear(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size() || x.size() < 3) throw ArgumentError("fit_log_linear: need >= 3 points");
  const std::size_t n = x.size();
  double sx = 0, sy = 0;
  std::vector<double> ly(n);
  for (std::size_t i = 0; i < n; ++i) {
    if (!(y[i] > 0.0)) throw ArgumentError("fit_log_linear: y must be positive");
    ly[i] = std::log(y[i]);
    sx += x[i];
    sy += ly[i];
  }
  const double mx = sx / n, my = sy / n;
  double sxx = 0, sxy = 0, syy = 0;
  for (std::size_t i = 0; i < n; ++i) {
    sxx += (x[i] - mx) * (x[i] - mx);
    sxy += (x[i] - mx) * (ly[i] - my);
    syy += (ly[i] - my) * (ly[i] - my);
  }
  LinearFit fit;
  fit.slope = sxy / sxx;
  fit.intercept = my - fit.slope * mx;
  double ss_res = 0;
  for (std::size_t i = 0; i < n; ++i) {
    const double pred = fit.intercept + fit.slope * x[i];
    ss_res += (ly[i] - pred) * (ly[i] - pred);
  }
  fit.r_squared = syy > 0 ? 1.0 - ss_res / syy : 1.0;
  return fit;
}

}  // namespace locdiff
