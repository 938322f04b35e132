#include "locdiff/schedule.hpp"

#include <cmath>
#include <sstream>

#include "locdiff/errors.hpp"

namespace locdiff {

OuMoments ou_moments(double t) {
  if (t < 0.0) throw ArgumentError("ou_moments: t must be >= 0");
  // 1 - e^{-2t} via expm1 keeps sigma accurate near t = 0
  return {std::exp(-t), std::sqrt(-std::expm1(-2.0 * t))};
}

NoiseSchedule::NoiseSchedule(std::vector<double> betas, double early_stop)
    : betas_(std::move(betas)), early_stop_(early_stop) {
  const int n = static_cast<int>(betas_.size());
  if (n < 1) throw ArgumentError("schedule: needs at least one beta");
  if (early_stop_ < 0.0) throw ArgumentError("schedule: early stop must be >= 0");
  for (double b : betas_)
    if (!(b > 0.0) || !(b < 1.0)) throw ArgumentError("schedule: betas must lie in (0,1)");

  forward_.resize(n + 1);
  forward_[0] = 0.0;
  for (int k = 1; k <= n; ++k) forward_[k] = forward_[k - 1] - 0.5 * std::log1p(-betas_[k - 1]);
  dts_.resize(n);
  for (int i = 0; i < n; ++i) dts_[i] = forward_[n - i] - forward_[n - i - 1];
  total_ = forward_[n];

  std::ostringstream os;
  os << "betas(N=" << n << ",b1=" << betas_.front() << ",bN=" << betas_.back()
     << ",es=" << early_stop_ << ")";
  id_ = os.str();
}

NoiseSchedule NoiseSchedule::linear_beta(int n_steps, double beta_1, double beta_N,
                                         double early_stop) {
  if (n_steps < 2) throw ArgumentError("linear_beta: n_steps must be >= 2");
  if (!(beta_1 > 0.0) || !(beta_1 <= beta_N) || !(beta_N < 1.0))
    throw ArgumentError("linear_beta: need 0 < beta_1 <= beta_N < 1");
  std::vector<double> betas(static_cast<std::size_t>(n_steps));
  for (int n = 1; n <= n_steps; ++n)
    betas[n - 1] = (beta_N - beta_1) * static_cast<double>(n - 1) / (n_steps - 1) + beta_1;
  NoiseSchedule s(std::move(betas), early_stop);
  std::ostringstream os;
  os << "linear_beta(N=" << n_steps << ",b1=" << beta_1 << ",bN=" << beta_N << ",es=" << early_stop
     << ")";
  s.id_ = os.str();
  return s;
}

double NoiseSchedule::beta(int n) const {
  if (n < 1 || n > n_steps()) throw ArgumentError("schedule: beta index out of range");
  return betas_[n - 1];
}

double NoiseSchedule::reverse_dt(int n) const {
  if (n < 0 || n >= n_steps()) throw ArgumentError("schedule: dt index out of range");
  return dts_[n];
}

double NoiseSchedule::grid_time(int n) const {
  if (n < 0 || n > n_steps()) throw ArgumentError("schedule: grid index out of range");
  return total_ - forward_[n_steps() - n];
}

double NoiseSchedule::score_time(int n) const {
  if (n < 0 || n >= n_steps()) throw ArgumentError("schedule: step index out of range");
  return early_stop_ + forward_[n_steps() - n];
}

double NoiseSchedule::forward_time(int k) const {
  if (k < 0 || k > n_steps()) throw ArgumentError("schedule: forward index out of range");
  return forward_[k];
}

}  // namespace locdiff
