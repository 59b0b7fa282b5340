#pragma once

#include <memory>
#include <vector>

#include "kmte/data_model.hpp"
#include "kmte/km_core.hpp"
#include "kmte/propensity.hpp"

namespace kmte {

struct UnconfoundedOptions {
  PropensitySpec propensity;
  std::vector<double> y_grid;    // empty selects the automatic grid
  std::vector<double> tau_grid;  // empty selects 0.05..0.95 step 0.05, clipped
  // Permit estimands that need the full outcome distribution when some arm's
  // largest observation is censored; the result then targets the truncated
  // distribution and the support diagnostics say so.
  bool allow_defective = false;
};

// Average, distributional, and quantile treatment effects under selection on
// observables with right-censored outcomes. The propensity score is fit on
// the full sample; each arm's outcome distribution is the product-limit
// curve with per-point mass divided by the fitted score (treated arm) or its
// complement (control arm). Horvitz-Thompson form: masses are not
// renormalized.
class UnconfoundedEstimator {
 public:
  UnconfoundedEstimator(const CensoredSample& sample, UnconfoundedOptions options);

  EffectCurve ate() const;
  EffectCurve dte() const;
  EffectCurve qte() const;
  EffectCurve estimate(EstimandKind kind) const;

  const StepDistribution& potential_cdf(bool treated_arm) const {
    return treated_arm ? cdf_treated_ : cdf_control_;
  }
  double potential_mean(bool treated_arm) const;

  const SupportDiagnostics& support() const { return support_; }
  const PropensityFit& propensity() const { return *propensity_; }
  const std::vector<double>& y_grid() const { return y_grid_; }
  const std::vector<double>& tau_grid() const { return tau_grid_; }
  std::size_t sample_size() const { return n_; }

 private:
  void require_full_mass(const char* estimand) const;

  std::size_t n_ = 0;
  UnconfoundedOptions options_;
  std::shared_ptr<const PropensityFit> propensity_;
  OrderedGroup group_treated_;
  OrderedGroup group_control_;
  StepDistribution cdf_treated_;
  StepDistribution cdf_control_;
  SupportDiagnostics support_;
  std::vector<double> y_grid_;
  std::vector<double> tau_grid_;
};

// Pooled distinct uncensored q values strictly below tau_h: the only points
// where the estimated curves jump.
std::vector<double> auto_outcome_grid(std::span<const OrderedGroup* const> groups, double tau_h);

// 0.05, 0.10, ..., 0.95.
std::vector<double> default_tau_levels();

}  // namespace kmte
