#include <doctest.h>

#include <cmath>

#include "locdiff/errors.hpp"
#include "locdiff/schedule.hpp"

using namespace locdiff;

TEST_CASE("ou moments") {
  auto [a0, s0] = ou_moments(0.0);
  CHECK(a0 == 1.0);
  CHECK(s0 == 0.0);

  auto [a_inf, s_inf] = ou_moments(50.0);
  CHECK(std::abs(a_inf) < 1e-15);
  CHECK(std::abs(s_inf - 1.0) < 1e-15);

  auto [a, s] = ou_moments(std::log(2.0));
  CHECK(a == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(s == doctest::Approx(0.8660254037844386).epsilon(1e-14));

  CHECK_THROWS_AS(ou_moments(-0.1), ArgumentError);
}

TEST_CASE("alpha^2 + sigma^2 = 1 across times") {
  for (double t : {1e-8, 1e-3, 0.1, 0.5, 1.0, 3.0, 10.0, 40.0}) {
    auto [a, s] = ou_moments(t);
    CHECK(std::abs(a * a + s * s - 1.0) < 1e-15);
  }
}

TEST_CASE("linear beta schedule, paper parameters") {
  auto s = NoiseSchedule::linear_beta(1000, 1e-4, 0.05);
  CHECK(s.n_steps() == 1000);
  CHECK(s.beta(1) == doctest::Approx(1e-4).epsilon(1e-15));
  CHECK(s.beta(1000) == doctest::Approx(0.05).epsilon(1e-15));
  CHECK(s.beta(500) == doctest::Approx((0.05 - 1e-4) * 499.0 / 999.0 + 1e-4).epsilon(1e-14));

  // dt_n = -1/2 log(1 - beta_{N-n})
  CHECK(s.reverse_dt(999) == doctest::Approx(5.000250016667917e-05).epsilon(1e-13));
  CHECK(s.reverse_dt(0) == doctest::Approx(0.025646647193775268).epsilon(1e-13));

  double total = 0.0;
  for (int n = 0; n < s.n_steps(); ++n) {
    CHECK(s.reverse_dt(n) > 0.0);
    total += s.reverse_dt(n);
  }
  CHECK(std::abs(total - s.total_time()) <= 1e-12 * s.total_time());
  CHECK(s.early_stop_time() == 0.0);
  CHECK(s.horizon() == s.total_time());
}

TEST_CASE("constant schedule from beta_1 = beta_N") {
  auto s = NoiseSchedule::linear_beta(10, 0.02, 0.02);
  for (int n = 0; n < 10; ++n)
    CHECK(s.reverse_dt(n) == doctest::Approx(-0.5 * std::log1p(-0.02)).epsilon(1e-15));
}

TEST_CASE("schedule argument validation") {
  CHECK_THROWS_AS(NoiseSchedule::linear_beta(1, 0.1, 0.2), ArgumentError);
  CHECK_THROWS_AS(NoiseSchedule::linear_beta(10, 0.0, 0.2), ArgumentError);
  CHECK_THROWS_AS(NoiseSchedule::linear_beta(10, 0.1, 1.0), ArgumentError);
  CHECK_THROWS_AS(NoiseSchedule::linear_beta(10, 0.3, 0.2), ArgumentError);
  CHECK_THROWS_AS(NoiseSchedule({0.1, 1.5}), ArgumentError);
}

TEST_CASE("grid and score times are consistent") {
  auto s = NoiseSchedule::linear_beta(100, 1e-3, 0.08, /*early_stop=*/0.01);
  CHECK(s.grid_time(0) == 0.0);
  CHECK(s.grid_time(100) == doctest::Approx(s.total_time()).epsilon(1e-14));
  CHECK(s.horizon() == doctest::Approx(s.total_time() + 0.01).epsilon(1e-14));
  for (int n = 0; n < s.n_steps(); ++n) {
    CHECK(s.score_time(n) == doctest::Approx(s.horizon() - s.grid_time(n)).epsilon(1e-12));
    CHECK(s.grid_time(n + 1) - s.grid_time(n) == doctest::Approx(s.reverse_dt(n)).epsilon(1e-12));
  }
  // last score evaluation stays strictly above the early stop
  CHECK(s.score_time(s.n_steps() - 1) > s.early_stop_time());
  // forward times are the cumulative-product convention
  for (int k = 1; k <= s.n_steps(); ++k) {
    double acc = 0.0;
    for (int j = 1; j <= k; ++j) acc += -0.5 * std::log1p(-s.beta(j));
    CHECK(s.forward_time(k) == doctest::Approx(acc).epsilon(1e-12));
  }
}
