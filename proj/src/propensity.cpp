#include "kmte/propensity.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "kmte/numerics.hpp"

namespace kmte {

const char* propensity_method_name(PropensityMethod method) {
  switch (method) {
    case PropensityMethod::ParametricLogit: return "logit";
    case PropensityMethod::SeriesLogit: return "series";
    case PropensityMethod::NWKernel: return "kernel";
  }
  return "?";
}

namespace {

constexpr double kScoreTolerance = 1e-8;
constexpr int kMaxIterations = 100;
constexpr double kSeparationNorm = 1e4;
constexpr double kWeightFloor = 1e-10;

double clamp_probability(double p, double eps) { return std::min(1.0 - eps, std::max(eps, p)); }

// All multi-indices over k covariates with nondecreasing total degree,
// lexicographic within a degree. k == 0 yields just the intercept.
std::vector<std::vector<int>> enumerate_multi_indices(int k, int terms) {
  std::vector<std::vector<int>> result;
  if (k == 0) {
    result.push_back({});
    return result;
  }
  for (int degree = 0; static_cast<int>(result.size()) < terms; ++degree) {
    // Compositions of `degree` into k nonnegative parts, lexicographic.
    std::vector<int> current(k, 0);
    auto emit = [&](auto&& self, int pos, int remaining) -> void {
      if (static_cast<int>(result.size()) >= terms) return;
      if (pos == k - 1) {
        current[pos] = remaining;
        result.push_back(current);
        return;
      }
      for (int v = 0; v <= remaining; ++v) {
        current[pos] = v;
        self(self, pos + 1, remaining - v);
        if (static_cast<int>(result.size()) >= terms) return;
      }
    };
    emit(emit, 0, degree);
  }
  return result;
}

int count_indices_up_to_degree(int k, int max_degree) {
  if (k == 0) return 1;
  // C(k + max_degree, k)
  long long count = 1;
  for (int i = 1; i <= k; ++i) count = count * (max_degree + i) / i;
  return static_cast<int>(count);
}

double log_likelihood(const std::vector<double>& eta, const std::vector<std::uint8_t>& d) {
  double ll = 0.0;
  for (std::size_t i = 0; i < eta.size(); ++i) {
    const double e = eta[i];
    ll += (d[i] ? e : 0.0) - (std::max(e, 0.0) + std::log1p(std::exp(-std::abs(e))));
  }
  return ll;
}

// In-place Cholesky solve of a x = b for symmetric positive definite a
// (row-major p x p). Returns false when a pivot collapses.
bool cholesky_solve(std::vector<double> a, std::vector<double>& b, int p) {
  for (int j = 0; j < p; ++j) {
    double diag = a[j * p + j];
    for (int t = 0; t < j; ++t) diag -= a[j * p + t] * a[j * p + t];
    if (!(diag > 0.0) || diag < 1e-300) return false;
    const double root = std::sqrt(diag);
    a[j * p + j] = root;
    for (int i = j + 1; i < p; ++i) {
      double v = a[i * p + j];
      for (int t = 0; t < j; ++t) v -= a[i * p + t] * a[j * p + t];
      a[i * p + j] = v / root;
    }
  }
  for (int i = 0; i < p; ++i) {
    double v = b[i];
    for (int t = 0; t < i; ++t) v -= a[i * p + t] * b[t];
    b[i] = v / a[i * p + i];
  }
  for (int i = p - 1; i >= 0; --i) {
    double v = b[i];
    for (int t = i + 1; t < p; ++t) v -= a[t * p + i] * b[t];
    b[i] = v / a[i * p + i];
  }
  return true;
}

bool cholesky_inverse(std::vector<double> a, std::vector<double>& inv, int p) {
  inv.assign(static_cast<std::size_t>(p) * p, 0.0);
  for (int col = 0; col < p; ++col) {
    std::vector<double> e(p, 0.0);
    e[col] = 1.0;
    std::vector<double> a_copy = a;
    if (!cholesky_solve(std::move(a_copy), e, p)) return false;
    for (int row = 0; row < p; ++row) inv[row * p + col] = e[row];
  }
  return true;
}

}  // namespace

PropensityFit fit_logit_basis(const std::vector<double>& x, int k,
                              const std::vector<std::uint8_t>& d,
                              std::vector<std::vector<int>> exponents, bool rescale,
                              PropensityMethod method, double trim_epsilon) {
  const std::size_t n = d.size();
  if (n == 0) throw ValidationError("empty sample");
  if (x.size() != n * static_cast<std::size_t>(k)) {
    throw ValidationError("covariate matrix size mismatch");
  }
  if (!(trim_epsilon > 0.0 && trim_epsilon < 0.5)) {
    throw ValidationError("trim_epsilon must be in (0, 0.5)");
  }
  std::size_t ones = 0;
  for (std::uint8_t v : d) ones += v;
  if (ones == 0 || ones == n) throw ValidationError("indicator is constant; logit is undefined");

  PropensityFit fit;
  fit.method_ = method;
  fit.trim_epsilon_ = trim_epsilon;
  fit.covariate_count_ = k;

  if (rescale && k > 0) {
    fit.rescale_center_.assign(k, 0.0);
    fit.rescale_halfwidth_.assign(k, 1.0);
    for (int j = 0; j < k; ++j) {
      double lo = std::numeric_limits<double>::infinity();
      double hi = -lo;
      for (std::size_t i = 0; i < n; ++i) {
        lo = std::min(lo, x[i * k + j]);
        hi = std::max(hi, x[i * k + j]);
      }
      fit.rescale_center_[j] = 0.5 * (lo + hi);
      fit.rescale_halfwidth_[j] = hi > lo ? 0.5 * (hi - lo) : 1.0;
    }
  }

  auto basis_value = [&](std::span<const double> row, const std::vector<int>& exps) {
    double value = 1.0;
    for (int j = 0; j < k; ++j) {
      if (exps[j] == 0) continue;
      double u = row[j];
      if (!fit.rescale_center_.empty()) {
        u = (u - fit.rescale_center_[j]) / fit.rescale_halfwidth_[j];
      }
      for (int e = 0; e < exps[j]; ++e) value *= u;
    }
    return value;
  };

  // Design matrix, column-major for the Gram-Schmidt pass below.
  const int p_all = static_cast<int>(exponents.size());
  std::vector<std::vector<double>> columns(p_all, std::vector<double>(n));
  for (int c = 0; c < p_all; ++c) {
    for (std::size_t i = 0; i < n; ++i) {
      columns[c][i] = basis_value(std::span<const double>(x.data() + i * k, k), exponents[c]);
    }
  }

  // Drop collinear basis terms (series basis only): modified Gram-Schmidt
  // against the already-retained columns.
  std::vector<int> retained;
  if (method == PropensityMethod::SeriesLogit) {
    std::vector<std::vector<double>> ortho;
    for (int c = 0; c < p_all; ++c) {
      std::vector<double> v = columns[c];
      double original = 0.0;
      for (double val : v) original += val * val;
      for (const auto& u : ortho) {
        double dot = 0.0;
        for (std::size_t i = 0; i < n; ++i) dot += u[i] * v[i];
        for (std::size_t i = 0; i < n; ++i) v[i] -= dot * u[i];
      }
      double residual = 0.0;
      for (double val : v) residual += val * val;
      if (residual <= 1e-20 * std::max(original, 1.0)) {
        std::string term = "term(";
        for (int j = 0; j < k; ++j) term += (j ? "," : "") + std::to_string(exponents[c][j]);
        term += ")";
        fit.warnings_.push_back("dropped collinear basis " + term);
        continue;
      }
      const double norm = std::sqrt(residual);
      for (double& val : v) val /= norm;
      ortho.push_back(std::move(v));
      retained.push_back(c);
    }
  } else {
    retained.resize(p_all);
    for (int c = 0; c < p_all; ++c) retained[c] = c;
  }

  const int p = static_cast<int>(retained.size());
  fit.basis_exponents_.reserve(p);
  for (int c : retained) fit.basis_exponents_.push_back(exponents[c]);

  // IRLS with step halving.
  std::vector<double> theta(p, 0.0);
  std::vector<double> eta(n, 0.0);
  std::vector<double> prob(n, 0.5);
  auto compute_eta = [&](const std::vector<double>& coef, std::vector<double>& out) {
    for (std::size_t i = 0; i < n; ++i) {
      double v = 0.0;
      for (int c = 0; c < p; ++c) v += coef[c] * columns[retained[c]][i];
      out[i] = v;
    }
  };
  double ll = log_likelihood(eta, d);
  fit.loglik_path_.push_back(ll);

  bool converged = false;
  for (int iter = 0; iter < kMaxIterations; ++iter) {
    for (std::size_t i = 0; i < n; ++i) prob[i] = logistic(eta[i]);
    std::vector<double> score(p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double resid = static_cast<double>(d[i]) - prob[i];
      for (int c = 0; c < p; ++c) score[c] += columns[retained[c]][i] * resid;
    }
    double max_score = 0.0;
    for (double s : score) max_score = std::max(max_score, std::abs(s));
    if (max_score < kScoreTolerance) {
      converged = true;
      break;
    }
    double max_coef = 0.0;
    for (double t : theta) max_coef = std::max(max_coef, std::abs(t));
    if (max_coef > kSeparationNorm) {
      throw EstimationError("separation detected: coefficients diverge with score " +
                            std::to_string(max_score));
    }

    std::vector<double> info(static_cast<std::size_t>(p) * p, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
      const double w = std::max(prob[i] * (1.0 - prob[i]), kWeightFloor);
      for (int a = 0; a < p; ++a) {
        const double za = columns[retained[a]][i] * w;
        for (int b = a; b < p; ++b) {
          info[a * p + b] += za * columns[retained[b]][i];
        }
      }
    }
    for (int a = 0; a < p; ++a) {
      for (int b = 0; b < a; ++b) info[a * p + b] = info[b * p + a];
    }
    std::vector<double> step = score;
    if (!cholesky_solve(std::move(info), step, p)) {
      throw EstimationError("singular weighted design in IRLS");
    }

    double scale = 1.0;
    bool accepted = false;
    std::vector<double> candidate(p);
    std::vector<double> candidate_eta(n);
    for (int halving = 0; halving < 40; ++halving) {
      for (int c = 0; c < p; ++c) candidate[c] = theta[c] + scale * step[c];
      compute_eta(candidate, candidate_eta);
      const double candidate_ll = log_likelihood(candidate_eta, d);
      if (candidate_ll >= ll) {
        theta = candidate;
        eta = candidate_eta;
        ll = candidate_ll;
        accepted = true;
        break;
      }
      scale *= 0.5;
    }
    if (!accepted) break;  // no ascent direction left at this precision
    fit.loglik_path_.push_back(ll);
  }

  if (!converged) {
    double max_coef = 0.0;
    for (double t : theta) max_coef = std::max(max_coef, std::abs(t));
    if (max_coef > kSeparationNorm) {
      throw EstimationError("separation detected: coefficients diverge without convergence");
    }
  }
  // A log-likelihood at its supremum of zero means every label is predicted
  // with probability one: complete separation, however the iteration ended.
  if (ll > -1e-6) {
    throw EstimationError("separation detected: likelihood attains its supremum");
  }

  fit.coefficients_ = std::move(theta);
  fit.fitted_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const double raw = logistic(eta[i]);
    const double clamped = clamp_probability(raw, trim_epsilon);
    if (clamped != raw) ++fit.clamp_count_;
    fit.fitted_[i] = clamped;
  }
  return fit;
}

PropensityFit fit_parametric_logit(const std::vector<double>& x, int k,
                                   const std::vector<std::uint8_t>& d, double trim_epsilon) {
  std::vector<std::vector<int>> exponents;
  exponents.push_back(std::vector<int>(k, 0));
  for (int j = 0; j < k; ++j) {
    std::vector<int> unit(k, 0);
    unit[j] = 1;
    exponents.push_back(std::move(unit));
  }
  return fit_logit_basis(x, k, d, std::move(exponents), /*rescale=*/false,
                         PropensityMethod::ParametricLogit, trim_epsilon);
}

PropensityFit fit_series_logit(const std::vector<double>& x, int k,
                               const std::vector<std::uint8_t>& d, int terms, double trim_epsilon) {
  const std::size_t n = d.size();
  int use_terms = terms;
  if (use_terms <= 0) use_terms = count_indices_up_to_degree(k, 3);
  if (static_cast<std::size_t>(use_terms) * 10 > n) {
    throw ValidationError("series basis too rich: " + std::to_string(use_terms) +
                          " terms for n=" + std::to_string(n));
  }
  return fit_logit_basis(x, k, d, enumerate_multi_indices(k, use_terms), /*rescale=*/true,
                         PropensityMethod::SeriesLogit, trim_epsilon);
}

PropensityFit fit_nw_kernel(const std::vector<double>& x, int k, const std::vector<std::uint8_t>& d,
                            double bandwidth, double trim_epsilon) {
  const std::size_t n = d.size();
  if (n < 2) throw ValidationError("kernel fit needs at least two observations");
  if (x.size() != n * static_cast<std::size_t>(k)) {
    throw ValidationError("covariate matrix size mismatch");
  }
  if (!(bandwidth > 0.0)) throw ValidationError("bandwidth must be positive");
  if (!(trim_epsilon > 0.0 && trim_epsilon < 0.5)) {
    throw ValidationError("trim_epsilon must be in (0, 0.5)");
  }

  PropensityFit fit;
  fit.method_ = PropensityMethod::NWKernel;
  fit.trim_epsilon_ = trim_epsilon;
  fit.covariate_count_ = k;
  fit.bandwidth_ = bandwidth;
  fit.train_x_ = x;
  fit.train_d_ = d;

  auto kernel = [&](std::size_t a, std::span<const double> target) {
    double value = 1.0;
    for (int j = 0; j < k; ++j) {
      const double u = (x[a * k + j] - target[j]) / bandwidth;
      if (std::abs(u) >= 1.0) return 0.0;
      value *= 0.75 * (1.0 - u * u);
    }
    return value;
  };

  fit.fitted_.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> target(x.data() + i * k, static_cast<std::size_t>(k));
    double numerator = 0.0;
    double neighbors = 0.0;
    double denominator = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      const double w = kernel(j, target);
      denominator += w;
      if (j == i) continue;
      neighbors += w;
      numerator += d[j] ? w : 0.0;
    }
    if (neighbors == 0.0) {
      throw EstimationError("bandwidth too small at point " + std::to_string(i) +
                            ": empty kernel window");
    }
    const double raw = numerator / denominator;
    const double clamped = clamp_probability(raw, trim_epsilon);
    if (clamped != raw) ++fit.clamp_count_;
    fit.fitted_[i] = clamped;
  }
  return fit;
}

double PropensityFit::predict(std::span<const double> x) const {
  if (static_cast<int>(x.size()) != covariate_count_) {
    throw ValidationError("covariate dimension mismatch: expected " +
                          std::to_string(covariate_count_) + ", got " + std::to_string(x.size()));
  }
  if (method_ == PropensityMethod::NWKernel) {
    const std::size_t n = train_d_.size();
    const int k = covariate_count_;
    double numerator = 0.0;
    double denominator = 0.0;
    for (std::size_t j = 0; j < n; ++j) {
      double w = 1.0;
      for (int c = 0; c < k; ++c) {
        const double u = (train_x_[j * k + c] - x[c]) / bandwidth_;
        if (std::abs(u) >= 1.0) {
          w = 0.0;
          break;
        }
        w *= 0.75 * (1.0 - u * u);
      }
      denominator += w;
      numerator += train_d_[j] ? w : 0.0;
    }
    if (denominator == 0.0) {
      throw EstimationError("bandwidth too small at prediction point: empty kernel window");
    }
    return clamp_probability(numerator / denominator, trim_epsilon_);
  }

  double eta = 0.0;
  for (std::size_t c = 0; c < coefficients_.size(); ++c) {
    double value = 1.0;
    const std::vector<int>& exps = basis_exponents_[c];
    for (int j = 0; j < covariate_count_; ++j) {
      if (exps[j] == 0) continue;
      double u = x[j];
      if (!rescale_center_.empty()) u = (u - rescale_center_[j]) / rescale_halfwidth_[j];
      for (int e = 0; e < exps[j]; ++e) value *= u;
    }
    eta += coefficients_[c] * value;
  }
  return clamp_probability(logistic(eta), trim_epsilon_);
}

PropensityFit fit_propensity(const CensoredSample& sample, const PropensitySpec& spec,
                             bool target_instrument) {
  if (target_instrument && !sample.schema().has_instrument) {
    throw ValidationError("instrument column required");
  }
  if (!target_instrument && !sample.schema().has_treatment) {
    throw ValidationError("treatment column required");
  }
  const std::vector<std::uint8_t>& d =
      target_instrument ? sample.instrument_column() : sample.treatment_column();
  const int k = sample.covariate_count();
  switch (spec.method) {
    case PropensityMethod::ParametricLogit:
      return fit_parametric_logit(sample.covariate_matrix(), k, d, spec.trim_epsilon);
    case PropensityMethod::SeriesLogit:
      return fit_series_logit(sample.covariate_matrix(), k, d, spec.series_terms,
                              spec.trim_epsilon);
    case PropensityMethod::NWKernel:
      return fit_nw_kernel(sample.covariate_matrix(), k, d, spec.bandwidth, spec.trim_epsilon);
  }
  throw ValidationError("unknown propensity method");
}

std::vector<double> coefficient_standard_errors(const PropensityFit& fit,
                                                const std::vector<double>& x, int k) {
  // Raw-covariate basis only; the series basis applies an internal rescale
  // that these errors do not account for.
  if (fit.method() != PropensityMethod::ParametricLogit) return {};
  const std::size_t n = x.empty() && k == 0 ? fit.fitted().size() : x.size() / k;
  const int p = static_cast<int>(fit.coefficients().size());
  std::vector<double> info(static_cast<std::size_t>(p) * p, 0.0);
  std::vector<double> row(p, 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    const std::span<const double> xi(x.data() + i * k, static_cast<std::size_t>(k));
    double eta = 0.0;
    for (int c = 0; c < p; ++c) {
      double value = 1.0;
      for (int j = 0; j < k; ++j) {
        if (fit.basis_exponents()[c][j] == 0) continue;
        double u = xi[j];
        for (int e = 0; e < fit.basis_exponents()[c][j]; ++e) value *= u;
      }
      row[c] = value;
      eta += fit.coefficients()[c] * value;
    }
    const double prob = logistic(eta);
    const double w = prob * (1.0 - prob);
    for (int a = 0; a < p; ++a) {
      for (int b = a; b < p; ++b) info[a * p + b] += row[a] * w * row[b];
    }
  }
  for (int a = 0; a < p; ++a) {
    for (int b = 0; b < a; ++b) info[a * p + b] = info[b * p + a];
  }
  std::vector<double> inverse;
  if (!cholesky_inverse(std::move(info), inverse, p)) {
    throw EstimationError("singular information matrix");
  }
  std::vector<double> se(p, 0.0);
  for (int c = 0; c < p; ++c) se[c] = std::sqrt(inverse[c * p + c]);
  return se;
}

}  // namespace kmte
