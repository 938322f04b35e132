#pragma once

#include <Eigen/Dense>
#include <cstdint>
#include <optional>

#include "locdiff/mlp.hpp"
#include "locdiff/score_matching.hpp"

namespace locdiff {

/// Cox-Ingersoll-Ross process dX = 2a(b - X) dt + sigma sqrt(X) dW.
struct CirParams {
  double a = 1.136;
  double b = 1.1;
  double sigma = 0.4205;
  double em_step = 0.01;         // Euler-Maruyama step h
  double record_interval = 1.0;  // record every record_interval time units
  int series_length = 50;        // N records per trajectory
  int n_trajectories = 50;       // M

  bool feller_satisfied() const { return 4.0 * a * b >= sigma * sigma; }
};

/// Exact transition law: X(t)/c(t) follows a noncentral chi-squared with
/// 8ab/sigma^2 degrees of freedom and noncentrality e^{-2at} x0 / c(t),
/// c(t) = sigma^2/(8a) (1 - e^{-2at}).
struct CirExactLaw {
  double a, b, sigma;

  double dof() const { return 8.0 * a * b / (sigma * sigma); }
  double c(double t) const;
  double c_stationary() const { return sigma * sigma / (8.0 * a); }
  double noncentrality(double t, double x0) const;
  double mean(double t, double x0) const;
  double variance(double t, double x0) const;
  double stationary_mean() const { return c_stationary() * dof(); }  // = b identically
  double stationary_variance() const { return 2.0 * c_stationary() * c_stationary() * dof(); }
};

/// Euler-Maruyama trajectories (M x N), sqrt(max(X,0)) in the diffusion term.
/// X(0) is drawn from the stationary law (or fixed to x0_override) and is not
/// itself recorded. Trajectories are independent and keyed per index.
Eigen::MatrixXd simulate_cir(const CirParams& p, std::uint64_t seed, int n_threads = 1,
                             std::optional<double> x0_override = {});

/// Window of half-width r around position i (1-based) with out-of-range
/// entries reflected around i: entry at offset m is x_{i+m} when valid,
/// else x_{i-m}. Throws when the reflection also falls outside.
Eigen::VectorXd reflect_pad_window(const Eigen::VectorXd& x, int i, int r);

struct CirTrainResult {
  MlpScoreNet net;
  std::vector<double> loss_trace;
  double zero_predictor_loss;  // analytic loss of u = 0 on the grid
};

/// Trains the single weight-shared score net (input 2r+2 = window + time,
/// hidden 2r+2, 6, 3, output 1) on the localized DSM objective. Training
/// points sample (trajectory, interior position in [2r+1, N-2r-1], grid time).
CirTrainResult cir_train(const Eigen::MatrixXd& data, int r, const TrainConfig& cfg,
                         const TimeGrid& grid);

/// Reverse diffusion from N(0, I) series; each coordinate's score is the
/// shared net on its reflect-padded window at the step's grid time. When
/// shared_noise is set, one noise draw per step is broadcast to every
/// coordinate; otherwise noise is independent per coordinate.
Eigen::MatrixXd cir_generate(const MlpScoreNet& net, int r, int series_length, int n_series,
                             const TimeGrid& grid, std::uint64_t seed, bool shared_noise = false,
                             int n_threads = 1);

/// Per-series sample ACF (mean-removed, lag-0 normalized), then ensemble mean
/// and standard deviation per lag. Constant series are excluded and counted.
struct AcfResult {
  Eigen::VectorXd mean;    // lags 0..max_lag
  Eigen::VectorXd stddev;  // sample std across series
  int n_excluded = 0;
};
AcfResult ensemble_acf(const Eigen::MatrixXd& series, int max_lag);

/// Total-variation distance between normalized histograms on a shared
/// equal-width grid spanning the pooled range.
double histogram_distance(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int n_bins);

/// The shared-grid histogram densities behind histogram_distance.
struct HistogramPair {
  Eigen::VectorXd centers;
  Eigen::VectorXd density_a;
  Eigen::VectorXd density_b;
  double bin_width = 0.0;
};
HistogramPair shared_histogram(const Eigen::VectorXd& a, const Eigen::VectorXd& b, int n_bins);

}  // namespace locdiff
