#include <cmath>

#include "doctest.h"
#include "kmte/numerics.hpp"
#include "kmte/propensity.hpp"
#include "kmte/rng.hpp"

using namespace kmte;

namespace {

void check_loglik_monotone(const PropensityFit& fit) {
  const std::vector<double>& path = fit.loglik_path();
  for (std::size_t i = 1; i < path.size(); ++i) {
    CHECK(path[i] >= path[i - 1] - 1e-9 * (1.0 + std::abs(path[i - 1])));
  }
}

}  // namespace

TEST_CASE("intercept-only logit recovers the empirical rate") {
  const std::vector<std::uint8_t> d = {1, 0, 1, 0, 1, 0};
  const PropensityFit fit = fit_parametric_logit({}, 0, d);
  for (double p : fit.fitted()) CHECK(p == doctest::Approx(0.5).epsilon(1e-12));
  CHECK(fit.predict(std::span<const double>{}) == doctest::Approx(0.5).epsilon(1e-12));
  check_loglik_monotone(fit);
}

TEST_CASE("parametric logit recovers the design slope within three standard errors") {
  RngStream rng(314);
  const std::size_t n = 10000;
  std::vector<double> x(n);
  std::vector<std::uint8_t> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    d[i] = rng.bernoulli(logistic(0.5 * x[i])) ? 1 : 0;
  }
  const PropensityFit fit = fit_parametric_logit(x, 1, d);
  check_loglik_monotone(fit);
  REQUIRE(fit.coefficients().size() == 2);
  const std::vector<double> se = coefficient_standard_errors(fit, x, 1);
  REQUIRE(se.size() == 2);
  CHECK(std::abs(fit.coefficients()[1] - 0.5) < 3.0 * se[1]);
  const double at_zero = fit.predict(std::vector<double>{0.0});
  CHECK(std::abs(at_zero - 0.5) < 3.0 * se[0]);
}

TEST_CASE("perfect separation is detected") {
  RngStream rng(21);
  const std::size_t n = 200;
  std::vector<double> x(n);
  std::vector<std::uint8_t> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    d[i] = x[i] > 0.0 ? 1 : 0;
  }
  CHECK_THROWS_WITH_AS(static_cast<void>(fit_parametric_logit(x, 1, d)),
                       doctest::Contains("separation"), EstimationError);
}

TEST_CASE("constant indicator is rejected") {
  CHECK_THROWS_AS(static_cast<void>(fit_parametric_logit({1.0, 2.0}, 1, {1, 1})), ValidationError);
}

TEST_CASE("series basis enumerates powers in degree order") {
  RngStream rng(55);
  const std::size_t n = 300;
  std::vector<double> x(n);
  std::vector<std::uint8_t> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    d[i] = rng.bernoulli(logistic(0.4 * x[i])) ? 1 : 0;
  }
  const PropensityFit fit = fit_series_logit(x, 1, d, 4);
  REQUIRE(fit.basis_exponents().size() == 4);
  for (int e = 0; e < 4; ++e) CHECK(fit.basis_exponents()[e] == std::vector<int>{e});
  check_loglik_monotone(fit);

  // Auto order for one covariate is the same 1, x, x^2, x^3 basis.
  const PropensityFit auto_fit = fit_series_logit(x, 1, d, 0);
  CHECK(auto_fit.basis_exponents() == fit.basis_exponents());

  // Two covariates: intercept, then degree one, then degree two...
  std::vector<double> x2(2 * n);
  for (std::size_t i = 0; i < n; ++i) {
    x2[2 * i] = rng.normal();
    x2[2 * i + 1] = rng.normal();
  }
  const PropensityFit bivariate = fit_series_logit(x2, 2, d, 6);
  REQUIRE(bivariate.basis_exponents().size() == 6);
  CHECK(bivariate.basis_exponents()[0] == std::vector<int>{0, 0});
  CHECK(bivariate.basis_exponents()[1] == std::vector<int>{0, 1});
  CHECK(bivariate.basis_exponents()[2] == std::vector<int>{1, 0});
  CHECK(bivariate.basis_exponents()[3] == std::vector<int>{0, 2});
  CHECK(bivariate.basis_exponents()[4] == std::vector<int>{1, 1});
  CHECK(bivariate.basis_exponents()[5] == std::vector<int>{2, 0});
}

TEST_CASE("series with the bare intercept equals the covariate-free parametric fit") {
  RngStream rng(77);
  const std::size_t n = 100;
  std::vector<double> x(n);
  std::vector<std::uint8_t> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    d[i] = rng.bernoulli(0.3) ? 1 : 0;
  }
  const PropensityFit series = fit_series_logit(x, 1, d, 1);
  const PropensityFit parametric = fit_parametric_logit({}, 0, d);
  REQUIRE(series.coefficients().size() == 1);
  CHECK(series.coefficients()[0] == parametric.coefficients()[0]);
  for (std::size_t i = 0; i < n; ++i) CHECK(series.fitted()[i] == parametric.fitted()[0]);
}

TEST_CASE("richer series improves held-out prediction of a curved score") {
  RngStream rng(88);
  const std::size_t n = 4000;
  std::vector<double> x(n);
  std::vector<std::uint8_t> d(n);
  auto truth = [](double v) { return logistic(0.3 + 0.5 * v - 0.2 * v * v); };
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    d[i] = rng.bernoulli(truth(x[i])) ? 1 : 0;
  }
  const std::size_t half = n / 2;
  const std::vector<double> x_train(x.begin(), x.begin() + half);
  const std::vector<std::uint8_t> d_train(d.begin(), d.begin() + half);
  auto holdout_mse = [&](const PropensityFit& fit) {
    double mse = 0.0;
    for (std::size_t i = half; i < n; ++i) {
      const double err = fit.predict(std::span<const double>(&x[i], 1)) - truth(x[i]);
      mse += err * err;
    }
    return mse / static_cast<double>(n - half);
  };
  const double mse2 = holdout_mse(fit_series_logit(x_train, 1, d_train, 2));
  const double mse4 = holdout_mse(fit_series_logit(x_train, 1, d_train, 4));
  CHECK(mse4 < mse2);
}

TEST_CASE("collinear series columns are dropped with a warning") {
  RngStream rng(99);
  const std::size_t n = 400;
  std::vector<double> x(2 * n);
  std::vector<std::uint8_t> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double v = rng.normal();
    x[2 * i] = v;
    x[2 * i + 1] = v;  // duplicate covariate
    d[i] = rng.bernoulli(logistic(0.5 * v)) ? 1 : 0;
  }
  const PropensityFit fit = fit_series_logit(x, 2, d, 3);
  CHECK(!fit.warnings().empty());
  CHECK(fit.basis_exponents().size() < 3);
  check_loglik_monotone(fit);
}

TEST_CASE("series basis too rich for the sample is rejected") {
  std::vector<double> x(20);
  std::vector<std::uint8_t> d(20);
  for (std::size_t i = 0; i < 20; ++i) {
    x[i] = static_cast<double>(i);
    d[i] = i % 2;
  }
  CHECK_THROWS_AS(static_cast<void>(fit_series_logit(x, 1, d, 5)), ValidationError);
}

TEST_CASE("kernel fit: flat-kernel limit and window errors") {
  const std::size_t n = 20;
  std::vector<double> x(n);
  std::vector<std::uint8_t> d(n, 1);
  d[4] = 0;
  for (std::size_t i = 0; i < n; ++i) x[i] = static_cast<double>(i) / n;
  const PropensityFit fit = fit_nw_kernel(x, 1, d, 1e6);
  // With an essentially flat kernel the leave-one-out numerator is the
  // leave-one-out sum and the denominator counts everyone.
  for (std::size_t i = 0; i < n; ++i) {
    const double expected = (19.0 - (d[i] ? 1.0 : 0.0)) / 20.0;
    CHECK(fit.fitted()[i] == doctest::Approx(expected).epsilon(1e-6));
  }

  CHECK_THROWS_WITH_AS(static_cast<void>(fit_nw_kernel(x, 1, d, 1e-12)),
                       doctest::Contains("bandwidth too small"), EstimationError);
}

TEST_CASE("kernel fit concentrates near the response rate when x is irrelevant") {
  RngStream rng(3);
  const std::size_t n = 3000;
  std::vector<double> x(n);
  std::vector<std::uint8_t> d(n);
  std::size_t ones = 0;
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    d[i] = rng.bernoulli(0.4) ? 1 : 0;
    ones += d[i];
  }
  const double rate = static_cast<double>(ones) / n;
  const PropensityFit fit = fit_nw_kernel(x, 1, d, 0.8);
  double mean_abs_dev = 0.0;
  for (double p : fit.fitted()) mean_abs_dev += std::abs(p - rate) / n;
  CHECK(mean_abs_dev < 0.05);
}

TEST_CASE("predict clamps into the trimmed interval and checks dimensions") {
  RngStream rng(17);
  const std::size_t n = 500;
  std::vector<double> x(n);
  std::vector<std::uint8_t> d(n);
  for (std::size_t i = 0; i < n; ++i) {
    x[i] = rng.normal();
    d[i] = rng.bernoulli(logistic(3.0 * x[i])) ? 1 : 0;
  }
  const PropensityFit fit = fit_parametric_logit(x, 1, d, 0.01);
  const double far = fit.predict(std::vector<double>{50.0});
  CHECK(far == doctest::Approx(0.99).epsilon(1e-15));
  const double near = fit.predict(std::vector<double>{-50.0});
  CHECK(near == doctest::Approx(0.01).epsilon(1e-15));
  CHECK(fit.clamp_count() > 0);
  CHECK_THROWS_AS(static_cast<void>(fit.predict(std::vector<double>{1.0, 2.0})), ValidationError);
}
