#include "kmte/effects_unconfounded.hpp"

#include <algorithm>
#include <cmath>
#include <set>

#include "kmte/dist_ops.hpp"

namespace kmte {

std::vector<double> auto_outcome_grid(std::span<const OrderedGroup* const> groups, double tau_h) {
  std::set<double> points;
  for (const OrderedGroup* group : groups) {
    for (std::size_t i = 0; i < group->group_size; ++i) {
      if (group->delta[i] && group->sorted_q[i] < tau_h) points.insert(group->sorted_q[i]);
    }
  }
  return {points.begin(), points.end()};
}

std::vector<double> default_tau_levels() {
  std::vector<double> taus;
  for (int i = 1; i <= 19; ++i) taus.push_back(0.05 * i);
  return taus;
}

namespace {

// IPW-reweighted product-limit curve for one arm: mass W_i / score at every
// uncensored point, where score is p for the treated arm and 1-p for the
// control arm.
StepDistribution reweighted_cdf(const OrderedGroup& group, const PropensityFit& fit,
                                bool treated_arm) {
  const KaplanMeierWeights weights = km_weights(group);
  std::vector<std::pair<double, double>> atoms;
  atoms.reserve(group.group_size);
  for (std::size_t i = 0; i < group.group_size; ++i) {
    const double w = weights.weights[i];
    if (w == 0.0) continue;
    const double score = fit.fitted()[group.original_index[i]];
    atoms.emplace_back(group.sorted_q[i], w / (treated_arm ? score : 1.0 - score));
  }
  if (atoms.empty()) throw EstimationError("arm has no uncensored observations");
  return StepDistribution::from_atoms(std::move(atoms));
}

std::vector<double> clip_taus(const std::vector<double>& taus, double tau_bar) {
  std::vector<double> kept;
  for (double tau : taus) {
    if (tau < tau_bar) kept.push_back(tau);
  }
  return kept;
}

}  // namespace

UnconfoundedEstimator::UnconfoundedEstimator(const CensoredSample& sample,
                                             UnconfoundedOptions options)
    : n_(sample.size()), options_(std::move(options)) {
  const ValidationReport validation = validate_for_estimand(sample, EstimandKind::Ate);
  if (!validation.pass) throw ValidationError(validation.failures.front());

  propensity_ = std::make_shared<const PropensityFit>(fit_propensity(sample, options_.propensity));
  group_treated_ = order_group(sample, [](const CensoredSample& s, std::size_t i) { return s.treated(i); });
  group_control_ = order_group(sample, [](const CensoredSample& s, std::size_t i) { return !s.treated(i); });

  const OrderedGroup* groups[] = {&group_control_, &group_treated_};
  const std::string labels[] = {"t=0", "t=1"};
  support_ = support_diagnostics(groups, labels);

  cdf_treated_ = reweighted_cdf(group_treated_, *propensity_, true);
  cdf_control_ = reweighted_cdf(group_control_, *propensity_, false);

  y_grid_ = options_.y_grid.empty() ? auto_outcome_grid(groups, support_.tau_h) : options_.y_grid;
  if (!std::is_sorted(y_grid_.begin(), y_grid_.end())) {
    throw ValidationError("outcome grid must be ascending");
  }

  const double tau_bar = std::min(
      {cdf_treated_.total_mass(), cdf_control_.total_mass(), 1.0});
  if (options_.tau_grid.empty()) {
    tau_grid_ = clip_taus(default_tau_levels(), tau_bar);
  } else {
    for (double tau : options_.tau_grid) {
      if (!(tau > 0.0 && tau < 1.0)) {
        throw ValidationError("tau grid values must lie in (0, 1)");
      }
      if (tau > tau_bar + kMassEpsilon) {
        throw EstimationError("quantile level " + std::to_string(tau) +
                              " beyond identified region (tau_bar=" + std::to_string(tau_bar) + ")");
      }
    }
    tau_grid_ = options_.tau_grid;
  }
}

void UnconfoundedEstimator::require_full_mass(const char* estimand) const {
  if (options_.allow_defective) return;
  if (support_.any_defective) {
    throw EstimationError(std::string(estimand) +
                          ": an arm's largest observation is censored, so the outcome "
                          "distribution is defective; pass allow_defective to target the "
                          "truncated estimand");
  }
}

double UnconfoundedEstimator::potential_mean(bool treated_arm) const {
  return step_mean(potential_cdf(treated_arm));
}

EffectCurve UnconfoundedEstimator::ate() const {
  require_full_mass("ate");
  EffectCurve curve;
  curve.kind = EstimandKind::Ate;
  curve.grid = {0.0};
  curve.estimates = {potential_mean(true) - potential_mean(false)};
  return curve;
}

EffectCurve UnconfoundedEstimator::dte() const {
  if (y_grid_.empty()) throw EstimationError("empty outcome grid");
  EffectCurve curve;
  curve.kind = EstimandKind::Dte;
  curve.grid = y_grid_;
  curve.estimates.reserve(y_grid_.size());
  for (double y : y_grid_) {
    curve.estimates.push_back(cdf_treated_.cdf(y) - cdf_control_.cdf(y));
  }
  return curve;
}

EffectCurve UnconfoundedEstimator::qte() const {
  if (tau_grid_.empty()) throw EstimationError("no admissible quantile levels");
  EffectCurve curve;
  curve.kind = EstimandKind::Qte;
  curve.grid = tau_grid_;
  curve.estimates.reserve(tau_grid_.size());
  for (double tau : tau_grid_) {
    curve.estimates.push_back(generalized_inverse(cdf_treated_, tau) -
                              generalized_inverse(cdf_control_, tau));
  }
  return curve;
}

EffectCurve UnconfoundedEstimator::estimate(EstimandKind kind) const {
  switch (kind) {
    case EstimandKind::Ate: return ate();
    case EstimandKind::Dte: return dte();
    case EstimandKind::Qte: return qte();
    default: throw ValidationError("estimand not handled by the unconfoundedness estimator");
  }
}

}  // namespace kmte
