#pragma once

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kmte/data_model.hpp"

namespace kmte {

enum class PropensityMethod { ParametricLogit, SeriesLogit, NWKernel };

const char* propensity_method_name(PropensityMethod method);

struct PropensitySpec {
  PropensityMethod method = PropensityMethod::ParametricLogit;
  // SeriesLogit: number of power-basis terms including the intercept;
  // 0 selects all multi-indices of total degree <= 3.
  int series_terms = 0;
  // NWKernel: bandwidth has no default, the caller must supply one.
  double bandwidth = 0.0;
  double trim_epsilon = 0.01;
};

// A fitted probability-of-treatment (or instrument-assignment) model.
// Immutable after construction; prediction is reentrant.
class PropensityFit {
 public:
  PropensityMethod method() const { return method_; }
  double trim_epsilon() const { return trim_epsilon_; }
  int covariate_count() const { return covariate_count_; }

  // Model probability at a covariate row, clamped into
  // [trim_epsilon, 1 - trim_epsilon]. Throws on dimension mismatch.
  double predict(std::span<const double> x) const;

  // Clamped predictions at the training rows, in input order. For the kernel
  // method these are the leave-one-out values.
  const std::vector<double>& fitted() const { return fitted_; }

  // Number of training predictions that hit the trim boundary.
  std::size_t clamp_count() const { return clamp_count_; }

  // Logit coefficients on the internal basis; empty for the kernel method.
  const std::vector<double>& coefficients() const { return coefficients_; }

  // Multi-index exponents of the retained basis terms, one row per term
  // (parametric fits use degree <= 1 terms). Aligned with coefficients().
  const std::vector<std::vector<int>>& basis_exponents() const { return basis_exponents_; }

  // Log-likelihood after each accepted IRLS step, nondecreasing by
  // construction (step halving). Empty for the kernel method.
  const std::vector<double>& loglik_path() const { return loglik_path_; }

  const std::vector<std::string>& warnings() const { return warnings_; }

  double bandwidth() const { return bandwidth_; }

 private:
  friend PropensityFit fit_logit_basis(const std::vector<double>& x, int k,
                                       const std::vector<std::uint8_t>& d,
                                       std::vector<std::vector<int>> exponents, bool rescale,
                                       PropensityMethod method, double trim_epsilon);
  friend PropensityFit fit_nw_kernel(const std::vector<double>& x, int k,
                                     const std::vector<std::uint8_t>& d, double bandwidth,
                                     double trim_epsilon);

  PropensityMethod method_ = PropensityMethod::ParametricLogit;
  double trim_epsilon_ = 0.01;
  int covariate_count_ = 0;
  std::vector<double> fitted_;
  std::size_t clamp_count_ = 0;
  std::vector<double> coefficients_;
  std::vector<std::vector<int>> basis_exponents_;
  std::vector<double> loglik_path_;
  std::vector<std::string> warnings_;
  // Covariate rescaling applied before powering (series basis only).
  std::vector<double> rescale_center_;
  std::vector<double> rescale_halfwidth_;
  // Retained training data (kernel method only).
  std::vector<double> train_x_;
  std::vector<std::uint8_t> train_d_;
  double bandwidth_ = 0.0;
};

// Maximum-likelihood logit with an intercept, fit by iteratively reweighted
// least squares: convergence when the largest score component falls below
// 1e-8, at most 100 iterations, step halving so the log-likelihood never
// decreases. Perfect separation is detected and reported as an error.
PropensityFit fit_parametric_logit(const std::vector<double>& x, int k,
                                   const std::vector<std::uint8_t>& d, double trim_epsilon = 0.01);

// Logit on the power-series basis: multi-indices enumerated by nondecreasing
// total degree with lexicographic tie-break, covariates rescaled to [-1, 1]
// before powering. terms == 0 selects total degree <= 3. Collinear basis
// columns are dropped with a warning.
PropensityFit fit_series_logit(const std::vector<double>& x, int k,
                               const std::vector<std::uint8_t>& d, int terms,
                               double trim_epsilon = 0.01);

// Leave-one-out Nadaraya-Watson estimator with the product Epanechnikov
// kernel. The denominator includes the own observation; an empty
// leave-one-out neighborhood at any training point is an error.
PropensityFit fit_nw_kernel(const std::vector<double>& x, int k, const std::vector<std::uint8_t>& d,
                            double bandwidth, double trim_epsilon = 0.01);

// Fits on a sample's covariates with d = treatment (or d = instrument).
PropensityFit fit_propensity(const CensoredSample& sample, const PropensitySpec& spec,
                             bool target_instrument = false);

// Asymptotic standard errors of the logit coefficients from the observed
// information at the fit. Parametric fits only; empty otherwise.
std::vector<double> coefficient_standard_errors(const PropensityFit& fit,
                                                const std::vector<double>& x, int k);

}  // namespace kmte
