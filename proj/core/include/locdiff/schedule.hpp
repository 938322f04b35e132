#pragma once

#include <string>
#include <vector>

namespace locdiff {

/// Forward OU moments at time t: alpha = e^{-t}, sigma = sqrt(1 - e^{-2t}).
/// alpha^2 + sigma^2 = 1 for all t >= 0.
struct OuMoments {
  double alpha;
  double sigma;
};
OuMoments ou_moments(double t);

/// Discrete reverse-time grid derived from a variance schedule beta_1..beta_N.
///
/// Step n (0-based, n = 0..N-1) has size dt_n = -1/2 log(1 - beta_{N-n}); the
/// reverse grid is t_0 = 0 < t_1 < ... < t_N = sum of the dt_n. Equivalently,
/// forward_time(k) = -1/2 sum_{j<=k} log(1 - beta_j) is the physical time of
/// chain index k, and e^{-forward_time(k)} equals the cumulative product
/// sqrt(prod_{j<=k}(1 - beta_j)).
///
/// A score consumer evaluates at score_time(n) = early_stop + forward_time(N-n),
/// so the smallest time ever queried is early_stop + dt_{N-1} > 0.
class NoiseSchedule {
 public:
  explicit NoiseSchedule(std::vector<double> betas, double early_stop = 0.0);

  /// Linear schedule beta_n = (beta_N - beta_1)(n-1)/(N-1) + beta_1, n = 1..N.
  static NoiseSchedule linear_beta(int n_steps, double beta_1, double beta_N,
                                   double early_stop = 0.0);

  int n_steps() const { return static_cast<int>(betas_.size()); }
  double beta(int n) const;        // 1-based, n in [1, N]
  double reverse_dt(int n) const;  // 0-based, n in [0, N)
  const std::vector<double>& reverse_dts() const { return dts_; }

  double total_time() const { return total_; }  // sum of reverse_dts
  double early_stop_time() const { return early_stop_; }
  double horizon() const { return total_ + early_stop_; }

  double grid_time(int n) const;     // t_n, n in [0, N]
  double score_time(int n) const;    // horizon - t_n, n in [0, N)
  double forward_time(int k) const;  // tau_k, k in [0, N]

  /// Stable identifier embedding the construction parameters.
  const std::string& id() const { return id_; }

 private:
  std::vector<double> betas_;
  std::vector<double> dts_;      // dts_[n] = -1/2 log(1 - beta_{N-n})
  std::vector<double> forward_;  // forward_[k] = tau_k, size N+1
  double total_ = 0.0;
  double early_stop_ = 0.0;
  std::string id_;
};

}  // namespace locdiff
