#include "kmte/numerics.hpp"

#include <cmath>
#include <stdexcept>

namespace kmte {

namespace {

constexpr double kSqrt2 = 1.4142135623730950488016887242097;
constexpr double kLogSqrt2Pi = 0.91893853320467274178032973640562;
constexpr double kInvSqrtPi = 0.56418958354775628694807945156077;

}  // namespace

double norm_cdf(double x) { return 0.5 * std::erfc(-x / kSqrt2); }

double log_norm_cdf(double x) {
  if (x > -8.0) return std::log(norm_cdf(x));
  // Mills-ratio asymptotic expansion for the deep lower tail.
  const double z = -x;
  const double z2 = z * z;
  const double series = 1.0 - 1.0 / z2 + 3.0 / (z2 * z2) - 15.0 / (z2 * z2 * z2);
  return -0.5 * z2 - kLogSqrt2Pi - std::log(z) + std::log(series);
}

double logistic(double a) {
  if (a >= 0.0) return 1.0 / (1.0 + std::exp(-a));
  const double e = std::exp(a);
  return e / (1.0 + e);
}

namespace {

// Roots of the degree-n Hermite polynomial by Newton iteration on the
// orthonormal recurrence; classical initial guesses.
GaussHermite compute_gauss_hermite(int n) {
  GaussHermite gh;
  gh.nodes.assign(n, 0.0);
  gh.weights.assign(n, 0.0);
  const double pi_quarter = std::pow(M_PI, -0.25);
  const int half = (n + 1) / 2;
  double z = 0.0;
  for (int i = 0; i < half; ++i) {
    if (i == 0) {
      z = std::sqrt(2.0 * n + 1.0) - 1.85575 * std::pow(2.0 * n + 1.0, -1.0 / 6.0);
    } else if (i == 1) {
      z -= 1.14 * std::pow(n, 0.426) / z;
    } else if (i == 2) {
      z = 1.86 * z - 0.86 * gh.nodes[0];
    } else if (i == 3) {
      z = 1.91 * z - 0.91 * gh.nodes[1];
    } else {
      z = 2.0 * z - gh.nodes[i - 2];
    }
    double pp = 0.0;
    for (int iter = 0; iter < 100; ++iter) {
      double p1 = pi_quarter;
      double p2 = 0.0;
      for (int j = 1; j <= n; ++j) {
        const double p3 = p2;
        p2 = p1;
        p1 = z * std::sqrt(2.0 / j) * p2 - std::sqrt((j - 1.0) / j) * p3;
      }
      pp = std::sqrt(2.0 * n) * p2;
      const double dz = p1 / pp;
      z -= dz;
      if (std::abs(dz) < 1e-15) break;
    }
    gh.nodes[i] = z;
    gh.nodes[n - 1 - i] = -z;
    gh.weights[i] = 2.0 / (pp * pp);
    gh.weights[n - 1 - i] = gh.weights[i];
  }
  // Store ascending.
  for (int i = 0; i < n / 2; ++i) {
    std::swap(gh.nodes[i], gh.nodes[n - 1 - i]);
    std::swap(gh.weights[i], gh.weights[n - 1 - i]);
  }
  return gh;
}

}  // namespace

const GaussHermite& gauss_hermite_64() {
  static const GaussHermite gh = compute_gauss_hermite(64);
  return gh;
}

double normal_expectation(const std::function<double(double)>& g) {
  const GaussHermite& gh = gauss_hermite_64();
  double sum = 0.0;
  for (std::size_t i = 0; i < gh.nodes.size(); ++i) {
    sum += gh.weights[i] * g(kSqrt2 * gh.nodes[i]);
  }
  return kInvSqrtPi * sum;
}

double exp_censor_probability(double mu, double sigma, double rate) {
  if (sigma <= 0.0 || rate < 0.0) throw std::invalid_argument("exp_censor_probability: bad arguments");
  if (rate == 0.0) return 0.0;
  // P(C < Y) = E[(1 - exp(-rate Y)) 1{Y > 0}]
  //          = P(Y > 0) - exp(-rate mu + rate^2 sigma^2 / 2) Phi(mu/sigma - rate sigma).
  const double u = mu / sigma - rate * sigma;
  const double log_term = -rate * mu + 0.5 * rate * rate * sigma * sigma + log_norm_cdf(u);
  return norm_cdf(mu / sigma) - std::exp(log_term);
}

}  // namespace kmte
