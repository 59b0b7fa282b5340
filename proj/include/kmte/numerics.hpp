#pragma once

#include <functional>
#include <vector>

namespace kmte {

// Standard normal CDF, accurate in both tails.
double norm_cdf(double x);

// log(norm_cdf(x)), usable deep in the lower tail.
double log_norm_cdf(double x);

// Logistic CDF, overflow-safe on both sides.
double logistic(double a);

// Nodes and weights for n-point Gauss-Hermite quadrature with weight
// function exp(-x^2): integral f(x) exp(-x^2) dx ~ sum w_i f(x_i).
struct GaussHermite {
  std::vector<double> nodes;
  std::vector<double> weights;
};

const GaussHermite& gauss_hermite_64();

// E[g(X)] for X ~ N(0,1), via 64-point Gauss-Hermite.
double normal_expectation(const std::function<double(double)>& g);

// P(C < Y) for Y ~ N(mu, sigma^2) and C ~ Exponential(rate), independent.
double exp_censor_probability(double mu, double sigma, double rate);

}  // namespace kmte
