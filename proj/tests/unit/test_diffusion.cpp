#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "locdiff/diffusion.hpp"
#include "locdiff/errors.hpp"
#include "locdiff/gaussian.hpp"

using namespace locdiff;

namespace {

class IsotropicScore : public ScoreField {
 public:
  explicit IsotropicScore(int d) : d_(d) {}
  int dimension() const override { return d_; }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x, double) const override { return -x; }

 private:
  int d_;
};

class PoisonScore : public ScoreField {
 public:
  int dimension() const override { return 2; }
  Eigen::VectorXd evaluate(const Eigen::VectorXd& x, double t) const override {
    Eigen::VectorXd out = -x;
    if (t < 1.0) out[0] = std::numeric_limits<double>::quiet_NaN();
    return out;
  }
};

}  // namespace

TEST_CASE("forward_perturb endpoints") {
  SequentialRng rng(1, 50);
  Eigen::VectorXd x0(3);
  x0 << 1.0, -2.0, 0.5;

  auto [xt0, eps0] = forward_perturb(x0, 0.0, rng);
  CHECK((xt0 - x0).norm() == 0.0);  // alpha=1, sigma=0

  // mean path: xt = alpha x0 when eps = 0 (checked through the identity)
  auto [a, s] = ou_moments(0.7);
  auto [xt, eps] = forward_perturb(x0, 0.7, rng);
  CHECK((xt - (a * x0 + s * eps)).norm() == 0.0);
}

TEST_CASE("forward_perturb moment check") {
  SequentialRng rng(9, 51);
  Eigen::VectorXd x0(2);
  x0 << 2.0, -1.0;
  const double t = 0.4;
  auto [a, s] = ou_moments(t);
  const long n = 100000;
  Eigen::Vector2d mean = Eigen::Vector2d::Zero();
  Eigen::Matrix2d second = Eigen::Matrix2d::Zero();
  for (long i = 0; i < n; ++i) {
    auto [xt, eps] = forward_perturb(x0, t, rng);
    mean += xt;
    second += (xt - a * x0) * (xt - a * x0).transpose();
  }
  mean /= n;
  second /= n;
  const double se_mean = s / std::sqrt(static_cast<double>(n));
  CHECK(std::abs(mean[0] - a * x0[0]) < 3 * se_mean);
  CHECK(std::abs(mean[1] - a * x0[1]) < 3 * se_mean);
  const double se_var = s * s * std::sqrt(2.0 / n);
  CHECK(std::abs(second(0, 0) - s * s) < 3 * se_var);
  CHECK(std::abs(second(1, 1) - s * s) < 3 * se_var);
  CHECK(std::abs(second(0, 1)) < 3 * s * s / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("reverse_em_step hand value and small-dt behavior") {
  Eigen::VectorXd y(1), score(1), xi(1);
  y << 1.0;
  score << -1.0;  // standard normal target at y=1
  xi << 0.0;
  auto out = reverse_em_step(y, 0.1, score, xi);
  CHECK(out[0] == doctest::Approx(0.9).epsilon(1e-15));

  // with xi fixed, output - y = O(sqrt(dt)) -> vanishes as dt -> 0
  xi << 1.0;
  double prev = 1e9;
  for (double dt : {1e-2, 1e-4, 1e-6, 1e-8}) {
    const double diff = std::abs(reverse_em_step(y, dt, score, xi)[0] - y[0]);
    CHECK(diff < prev);
    CHECK(diff <= dt * std::abs(y[0] + 2 * score[0]) + std::sqrt(2 * dt) * 1.0 + 1e-15);
    prev = diff;
  }
  CHECK_THROWS_AS(reverse_em_step(y, 0.0, score, xi), ArgumentError);
}

TEST_CASE("reverse_em_step stationarity under the exact standard normal score") {
  // initialize at N(0,1), run a full schedule; variance stays near 1
  auto schedule = NoiseSchedule::linear_beta(400, 1e-4, 0.02);
  SequentialRng rng(4, 52);
  const int n = 20000;
  Eigen::VectorXd y(n);
  for (int i = 0; i < n; ++i) y[i] = rng.normal();
  Eigen::VectorXd score(1), yi(1), xi(1);
  for (int s = 0; s < schedule.n_steps(); ++s) {
    const double dt = schedule.reverse_dt(s);
    for (int i = 0; i < n; ++i) {
      yi << y[i];
      score << -y[i];
      xi << rng.normal();
      y[i] = reverse_em_step(yi, dt, score, xi)[0];
    }
  }
  const double var = test::sample_var(y);
  const double se = std::sqrt(2.0 / n);
  CHECK(std::abs(var - 1.0) < 3 * se);
  CHECK(std::abs(test::sample_mean(y)) < 3.0 / std::sqrt(static_cast<double>(n)));
}

TEST_CASE("sample_reverse standard normal target") {
  IsotropicScore score(2);
  auto schedule = NoiseSchedule::linear_beta(300, 1e-4, 0.03);
  auto batch = sample_reverse(score, schedule, 40000, 7);
  REQUIRE(batch.n_samples() == 40000);
  REQUIRE(batch.dimension() == 2);
  CHECK(batch.data.allFinite());

  Eigen::MatrixXd cov = sample_covariance(batch.data);
  const double se_mean = 1.0 / std::sqrt(40000.0);
  CHECK(std::abs(batch.data.col(0).mean()) < 3 * se_mean);
  CHECK(std::abs(batch.data.col(1).mean()) < 3 * se_mean);
  // stationary-variance bias of the discrete chain is far below this band
  const double se_var = std::sqrt(2.0 / 40000.0);
  CHECK(std::abs(cov(0, 0) - 1.0) < 3 * se_var + 0.01);
  CHECK(std::abs(cov(1, 1) - 1.0) < 3 * se_var + 0.01);
  CHECK(std::abs(cov(0, 1)) < 3 * se_mean);
}

TEST_CASE("sample_reverse empty batch") {
  IsotropicScore score(3);
  auto schedule = NoiseSchedule::linear_beta(10, 1e-3, 0.02);
  auto batch = sample_reverse(score, schedule, 0, 1);
  CHECK(batch.n_samples() == 0);
  CHECK(batch.dimension() == 3);
}

TEST_CASE("sample_reverse determinism and worker-count independence") {
  GaussianTarget target = GaussianTarget::discretized_ou(5, 0.3);
  GaussianScoreField f1(target), f2(target);
  auto schedule = NoiseSchedule::linear_beta(50, 1e-3, 0.04);
  auto b1 = sample_reverse(f1, schedule, 1500, 99, /*n_threads=*/1);
  auto b2 = sample_reverse(f2, schedule, 1500, 99, /*n_threads=*/4);
  CHECK(b1.data == b2.data);  // bit identical
  auto b3 = sample_reverse(f1, schedule, 1500, 100, 1);
  CHECK(b1.data != b3.data);
}

TEST_CASE("sample_reverse divergence guard names the step") {
  PoisonScore score;
  auto schedule = NoiseSchedule::linear_beta(60, 1e-3, 0.5);
  try {
    sample_reverse(score, schedule, 4, 3);
    FAIL("expected SamplingDivergedError");
  } catch (const SamplingDivergedError& e) {
    CHECK(e.step() > 0);
    CHECK(std::string(e.what()).find("step") != std::string::npos);
  }
}
