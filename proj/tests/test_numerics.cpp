#include <cmath>

#include "doctest.h"
#include "kmte/numerics.hpp"
#include "kmte/rng.hpp"

using namespace kmte;

TEST_CASE("normal cdf matches erf identities") {
  CHECK(norm_cdf(0.0) == doctest::Approx(0.5).epsilon(1e-15));
  CHECK(norm_cdf(1.959963984540054) == doctest::Approx(0.975).epsilon(1e-12));
  CHECK(norm_cdf(-1.0) + norm_cdf(1.0) == doctest::Approx(1.0).epsilon(1e-15));
}

TEST_CASE("log normal cdf agrees with direct log and stays finite in the tail") {
  for (double x : {-2.0, -5.0, -7.9}) {
    CHECK(log_norm_cdf(x) == doctest::Approx(std::log(norm_cdf(x))).epsilon(1e-12));
  }
  // Continuity across the asymptotic switch at -8.
  CHECK(log_norm_cdf(-8.0000001) == doctest::Approx(log_norm_cdf(-7.9999999)).epsilon(1e-6));
  CHECK(std::isfinite(log_norm_cdf(-40.0)));
  CHECK(log_norm_cdf(-40.0) < -700.0);
}

TEST_CASE("gauss-hermite 64 reproduces normal moments") {
  CHECK(normal_expectation([](double) { return 1.0; }) == doctest::Approx(1.0).epsilon(1e-13));
  CHECK(normal_expectation([](double x) { return x; }) == doctest::Approx(0.0).epsilon(1e-13));
  CHECK(normal_expectation([](double x) { return x * x; }) == doctest::Approx(1.0).epsilon(1e-12));
  CHECK(normal_expectation([](double x) { return x * x * x * x; }) ==
        doctest::Approx(3.0).epsilon(1e-12));
}

TEST_CASE("exponential censoring probability matches quadrature") {
  // Simpson's rule over the outcome density as an independent check.
  auto simpson = [](double mu, double sigma, double rate) {
    const double lo = mu - 10.0 * sigma;
    const double hi = mu + 10.0 * sigma;
    const int steps = 20000;
    const double h = (hi - lo) / steps;
    double sum = 0.0;
    for (int i = 0; i <= steps; ++i) {
      const double y = lo + i * h;
      const double density =
          std::exp(-0.5 * ((y - mu) / sigma) * ((y - mu) / sigma)) / (sigma * std::sqrt(2.0 * M_PI));
      const double value = y > 0.0 ? (1.0 - std::exp(-rate * y)) * density : 0.0;
      sum += value * (i == 0 || i == steps ? 1.0 : (i % 2 ? 4.0 : 2.0));
    }
    return sum * h / 3.0;
  };
  for (auto [mu, sigma, rate] : {std::tuple{0.5, 1.0, 0.2}, {1.0, 1.4, 0.8}, {-0.3, 0.7, 1.5}}) {
    CHECK(exp_censor_probability(mu, sigma, rate) ==
          doctest::Approx(simpson(mu, sigma, rate)).epsilon(1e-7));
  }
  CHECK(exp_censor_probability(1.0, 1.0, 0.0) == 0.0);
  // Deep-tail regime exercising the log-space branch.
  CHECK(std::isfinite(exp_censor_probability(1.0, 1.0, 50.0)));
  CHECK(exp_censor_probability(1.0, 1.0, 50.0) <= norm_cdf(1.0));
}

TEST_CASE("rng streams are deterministic and children are independent of draw position") {
  RngStream a(42);
  RngStream b(42);
  for (int i = 0; i < 5; ++i) CHECK(a.uniform() == b.uniform());

  RngStream parent(7);
  RngStream child_before = parent.child(3);
  parent.normal();
  parent.normal();
  RngStream child_after = parent.child(3);
  CHECK(child_before.uniform() == child_after.uniform());
}

TEST_CASE("rng transforms land in range with sane first moments") {
  RngStream rng(2024);
  const int n = 200000;
  double mean = 0.0;
  double var = 0.0;
  for (int i = 0; i < n; ++i) {
    const double z = rng.normal();
    mean += z / n;
    var += z * z / n;
  }
  CHECK(std::abs(mean) < 3.0 / std::sqrt(static_cast<double>(n)));
  CHECK(var == doctest::Approx(1.0).epsilon(0.02));

  double exp_mean = 0.0;
  for (int i = 0; i < n; ++i) exp_mean += rng.exponential(2.0) / n;
  CHECK(exp_mean == doctest::Approx(0.5).epsilon(0.02));

  int hits = 0;
  for (int i = 0; i < n; ++i) hits += rng.uniform_index(10) == 0 ? 1 : 0;
  CHECK(std::abs(hits / static_cast<double>(n) - 0.1) < 0.01);
}
