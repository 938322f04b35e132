#include <doctest.h>

#include <cmath>

#include "helpers.hpp"
#include "locdiff/cir.hpp"
#include "locdiff/errors.hpp"

using namespace locdiff;

TEST_CASE("exact law constants for the paper parameters") {
  CirExactLaw law{1.136, 1.1, 0.4205};
  CHECK(law.dof() == doctest::Approx(56.53651094826527).epsilon(1e-12));
  CHECK(law.c_stationary() == doctest::Approx(0.019456453565140846).epsilon(1e-12));
  CHECK(law.stationary_mean() == doctest::Approx(1.1).epsilon(1e-12));
  CHECK(law.stationary_variance() == doctest::Approx(0.04280419784330986).epsilon(1e-12));
  CHECK(CirParams{}.feller_satisfied());
}

TEST_CASE("c(inf) * dof = b identically") {
  SequentialRng rng(4, 90);
  for (int trial = 0; trial < 20; ++trial) {
    const double a = 0.1 + 3.0 * rng.uniform();
    const double b = 0.2 + 2.0 * rng.uniform();
    const double sigma = 0.05 + rng.uniform();
    CirExactLaw law{a, b, sigma};
    CHECK(law.c_stationary() * law.dof() == doctest::Approx(b).epsilon(1e-12));
    // c(t) increases in t and approaches c(inf)
    CHECK(law.c(0.5) < law.c(1.5));
    CHECK(law.c(80.0) == doctest::Approx(law.c_stationary()).epsilon(1e-10));
    // noncentrality decays
    CHECK(law.noncentrality(10.0, 1.0) < law.noncentrality(0.5, 1.0));
  }
}

TEST_CASE("exact law small-t limit concentrates at x0") {
  CirExactLaw law{1.136, 1.1, 0.4205};
  const double x0 = 0.9;
  CHECK(law.mean(1e-8, x0) == doctest::Approx(x0).epsilon(1e-6));
  CHECK(law.variance(1e-8, x0) < 1e-7);
  CHECK(law.noncentrality(1e-8, x0) > 1e6);
}

TEST_CASE("cir simulation shape and stationary mean") {
  CirParams p;  // paper parameters: a=1.136, b=1.1, sigma=0.4205, M=N=50
  auto data = simulate_cir(p, 7);
  REQUIRE(data.rows() == 50);
  REQUIRE(data.cols() == 50);
  CHECK(data.minCoeff() > 0.0);

  // per-trajectory means are iid; standard error from their spread
  Eigen::VectorXd tm = data.rowwise().mean();
  const double mean = tm.mean();
  const double se = std::sqrt(test::sample_var(tm) / data.rows());
  CHECK(std::abs(mean - p.b) < 3 * se);

  // stationary variance (sigma^2 b / 4a = 0.0428 for the paper constants)
  Eigen::MatrixXd centered = data.array() - mean;
  const double var = centered.array().square().mean();
  CHECK(var == doctest::Approx(0.04280419784330986).epsilon(0.10));
}

TEST_CASE("sigma = 0 relaxes deterministically") {
  CirParams p;
  p.sigma = 0.0;
  p.series_length = 5;
  p.n_trajectories = 2;
  auto data = simulate_cir(p, 1, 1, /*x0_override=*/2.0);
  CHECK(data.row(0) == data.row(1));  // no noise, identical trajectories
  for (int rec = 0; rec < 5; ++rec) {
    const double t = rec + 1.0;
    const double exact = p.b + (2.0 - p.b) * std::exp(-2.0 * p.a * t);
    CHECK(std::abs(data(0, rec) - exact) < 0.01);  // O(h) Euler error
  }
  CHECK_THROWS_AS(simulate_cir(p, 1), ArgumentError);  // sigma=0 needs explicit x0
}

TEST_CASE("simulate validates the step ratio") {
  CirParams p;
  p.em_step = 0.3;  // 1.0 / 0.3 is not an integer
  CHECK_THROWS_AS(simulate_cir(p, 1), ArgumentError);
}

TEST_CASE("reflect padding") {
  Eigen::VectorXd x(4);
  x << 10, 20, 30, 40;

  // interior: plain slice
  Eigen::VectorXd w = reflect_pad_window(x, 2, 1);
  CHECK(w[0] == 10);
  CHECK(w[1] == 20);
  CHECK(w[2] == 30);

  w = reflect_pad_window(x, 1, 1);
  CHECK(w[0] == 20);
  CHECK(w[1] == 10);
  CHECK(w[2] == 20);

  w = reflect_pad_window(x, 4, 1);
  CHECK(w[0] == 30);
  CHECK(w[1] == 40);
  CHECK(w[2] == 30);

  // center entry is always x_i, every entry is a value of x
  for (int i = 1; i <= 4; ++i) {
    auto win = reflect_pad_window(x, i, 2);
    CHECK(win[2] == x[i - 1]);
    for (int k = 0; k < win.size(); ++k) {
      bool found = false;
      for (int c = 0; c < 4; ++c) found = found || win[k] == x[c];
      CHECK(found);
    }
  }

  CHECK_THROWS_AS(reflect_pad_window(x, 1, 4), ArgumentError);
  CHECK_THROWS_AS(reflect_pad_window(x, 0, 1), ArgumentError);
}

TEST_CASE("ensemble acf basics") {
  // white noise: every lag beyond 0 within 3/sqrt(len) of zero in the mean
  const int n_series = 200, len = 256;
  Eigen::MatrixXd wn(n_series, len);
  SequentialRng rng(3, 91);
  for (int s = 0; s < n_series; ++s)
    for (int t = 0; t < len; ++t) wn(s, t) = rng.normal();
  auto acf = ensemble_acf(wn, 6);
  CHECK(acf.mean[0] == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(acf.n_excluded == 0);
  for (int lag = 1; lag <= 6; ++lag)
    CHECK(std::abs(acf.mean[lag]) < 3.0 / std::sqrt(static_cast<double>(len * n_series) / 3.0));

  // constant series are excluded and counted
  Eigen::MatrixXd with_const = wn;
  with_const.row(0).setConstant(4.2);
  auto acf2 = ensemble_acf(with_const, 3);
  CHECK(acf2.n_excluded == 1);

  CHECK_THROWS_AS(ensemble_acf(wn, 256), ArgumentError);
}

TEST_CASE("ensemble acf of an AR(1) matches rho^lag") {
  const double rho = 0.6;
  const int n_series = 300, len = 400;
  Eigen::MatrixXd ar(n_series, len);
  SequentialRng rng(5, 92);
  const double noise = std::sqrt(1 - rho * rho);
  for (int s = 0; s < n_series; ++s) {
    double x = rng.normal();
    for (int t = 0; t < len; ++t) {
      ar(s, t) = x;
      x = rho * x + noise * rng.normal();
    }
  }
  auto acf = ensemble_acf(ar, 5);
  for (int lag = 1; lag <= 5; ++lag) {
    const double expect = std::pow(rho, lag);
    const double band = 3.0 * acf.stddev[lag] / std::sqrt(static_cast<double>(n_series)) + 0.02;
    CHECK(std::abs(acf.mean[lag] - expect) < band);
  }
}

TEST_CASE("simulated CIR acf tracks exp(-2 a lag dt)") {
  CirParams p;
  p.n_trajectories = 200;  // tighter ensemble than the paper default
  auto data = simulate_cir(p, 11);
  auto acf = ensemble_acf(data, 5);
  for (int lag = 1; lag <= 5; ++lag) {
    const double expect = std::exp(-2.0 * p.a * lag * p.record_interval);
    CHECK(std::abs(acf.mean[lag] - expect) < acf.stddev[lag]);
  }
}

TEST_CASE("histogram distance") {
  Eigen::VectorXd a(6), b(6);
  a << 1, 2, 3, 4, 5, 6;
  b = a;
  CHECK(histogram_distance(a, b, 4) == 0.0);

  Eigen::VectorXd lo = Eigen::VectorXd::LinSpaced(100, 0.0, 1.0);
  Eigen::VectorXd hi = Eigen::VectorXd::LinSpaced(100, 10.0, 11.0);
  CHECK(histogram_distance(lo, hi, 50) == doctest::Approx(1.0).epsilon(1e-12));

  // two draws from the same stationary CIR law are close
  CirExactLaw law{1.136, 1.1, 0.4205};
  SequentialRng rng(9, 93);
  Eigen::VectorXd s1(100000), s2(100000);
  for (int i = 0; i < 100000; ++i) s1[i] = law.c_stationary() * rng.chi_squared(law.dof());
  for (int i = 0; i < 100000; ++i) s2[i] = law.c_stationary() * rng.chi_squared(law.dof());
  CHECK(histogram_distance(s1, s2, 50) < 0.05);
}

TEST_CASE("cir training smoke: r=0 net shape and loss below the zero predictor") {
  CirParams p;
  p.n_trajectories = 20;
  auto data = simulate_cir(p, 13);
  auto grid = TimeGrid::ddpm_linear(0.05, 1e-4, 0.5, 0.001);

  TrainConfig cfg;
  cfg.learning_rate = 2e-3;  // fast smoke-test rate
  cfg.n_train_points = 1000;
  cfg.batch_size = 100;
  cfg.epochs = 30;
  cfg.seed = 3;
  auto res = cir_train(data, 0, cfg, grid);
  CHECK(res.net.input_dim() == 2);  // 2r+2 with r=0
  CHECK(res.net.output_dim() == 1);
  CHECK(std::isfinite(res.loss_trace.back()));
  CHECK(res.loss_trace.back() < res.zero_predictor_loss);
  CHECK(res.loss_trace.back() < res.loss_trace.front());
}

TEST_CASE("cir generation shapes, determinism, and noise modes") {
  auto grid = TimeGrid::ddpm_linear(0.05, 1e-4, 0.5, 0.001);
  MlpScoreNet net({2 + 2, 4, 6, 3, 1});  // r = 1
  SequentialRng rng(21, 94);
  net.init_weights(rng);

  auto g1 = cir_generate(net, 1, 30, 8, grid, 17);
  auto g2 = cir_generate(net, 1, 30, 8, grid, 17, false, 4);
  REQUIRE(g1.rows() == 8);
  REQUIRE(g1.cols() == 30);
  CHECK(g1 == g2);  // worker-count independent
  CHECK(g1.allFinite());

  auto g3 = cir_generate(net, 1, 30, 8, grid, 18);
  CHECK(g1 != g3);

  auto shared = cir_generate(net, 1, 30, 8, grid, 17, /*shared_noise=*/true);
  CHECK(shared.allFinite());
  CHECK(shared != g1);

  CHECK_THROWS_AS(cir_generate(net, 2, 30, 8, grid, 1), ArgumentError);
}
