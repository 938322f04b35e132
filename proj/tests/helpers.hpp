#pragma once

#include <Eigen/Dense>
#include <cmath>

#include "locdiff/rng.hpp"

namespace locdiff::test {

/// Random SPD matrix with eigenvalues in [lo, hi]: Q diag(lambda) Q^T from a
/// QR of a Gaussian matrix.
inline Eigen::MatrixXd random_spd(int d, double lo, double hi, SequentialRng& rng) {
  Eigen::MatrixXd g(d, d);
  for (int i = 0; i < d; ++i)
    for (int j = 0; j < d; ++j) g(i, j) = rng.normal();
  Eigen::HouseholderQR<Eigen::MatrixXd> qr(g);
  Eigen::MatrixXd q = qr.householderQ();
  Eigen::VectorXd lambda(d);
  for (int i = 0; i < d; ++i) lambda[i] = lo + (hi - lo) * rng.uniform();
  return q * lambda.asDiagonal() * q.transpose();
}

/// Standard error of a sample covariance entry of N(0, C) with n draws.
inline double cov_entry_se(const Eigen::MatrixXd& C, int i, int j, long n) {
  return std::sqrt((C(i, i) * C(j, j) + C(i, j) * C(i, j)) / static_cast<double>(n));
}

inline double sample_mean(const Eigen::VectorXd& v) { return v.mean(); }

inline double sample_var(const Eigen::VectorXd& v) {
  return (v.array() - v.mean()).square().sum() / (v.size() - 1);
}

}  // namespace locdiff::test
