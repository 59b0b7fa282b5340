#include "kmte/effects_cic.hpp"

#include <algorithm>
#include <cmath>

#include "kmte/dist_ops.hpp"
#include "kmte/effects_unconfounded.hpp"

namespace kmte {

CicEstimator::CicEstimator(const CensoredSample& sample, CicOptions options)
    : n_(sample.size()), options_(std::move(options)) {
  const ValidationReport validation = validate_for_estimand(sample, EstimandKind::Att);
  if (!validation.pass) throw ValidationError(validation.failures.front());

  std::vector<const OrderedGroup*> groups;
  std::vector<std::string> labels;
  for (int g = 0; g <= 1; ++g) {
    for (int j = 0; j <= 1; ++j) {
      Cell& cell = cells_[g * 2 + j];
      cell.group = order_group(sample, [g, j](const CensoredSample& s, std::size_t i) {
        return s.group(i) == (g == 1) && s.period(i) == (j == 1);
      });
      cell.cdf = km_cdf(cell.group);
      groups.push_back(&cell.group);
      labels.push_back("g=" + std::to_string(g) + ",period=" + std::to_string(j));
    }
  }
  support_ = support_diagnostics(groups, labels);

  // Empirical check of support containment for the transported cells; finite
  // samples routinely violate it at the edges, so this warns rather than
  // aborts.
  const auto range = [](const OrderedGroup& group) {
    return std::pair<double, double>(group.sorted_q.front(), group.sorted_q.back());
  };
  const auto [t_lo, t_hi] = range(cell(true, false).group);
  const auto [c_lo, c_hi] = range(cell(false, false).group);
  if (t_lo < c_lo || t_hi > c_hi) {
    warnings_.push_back("treated pre-period outcomes fall outside the control pre-period range");
  }

  y_grid_ = options_.y_grid.empty() ? auto_outcome_grid(groups, support_.tau_h) : options_.y_grid;
  if (!std::is_sorted(y_grid_.begin(), y_grid_.end())) {
    throw ValidationError("outcome grid must be ascending");
  }

  if (!y_grid_.empty()) {
    double tau_bar = cell(true, true).cdf.total_mass();
    double counterfactual_top = 0.0;
    bool below_support = false;
    for (double y : y_grid_) {
      below_support = below_support || cell(false, true).cdf.cdf(y) == 0.0;
      counterfactual_top = std::max(counterfactual_top, counterfactual_value(y));
    }
    if (below_support) {
      warnings_.push_back(
          "grid points below the post-period control support map through the first "
          "pre-period control jump");
    }
    tau_bar = std::min({tau_bar, counterfactual_top, 1.0});
    if (options_.tau_grid.empty()) {
      for (double tau : default_tau_levels()) {
        if (tau < tau_bar) tau_grid_.push_back(tau);
      }
    } else {
      for (double tau : options_.tau_grid) {
        if (!(tau > 0.0 && tau < 1.0)) {
          throw ValidationError("tau grid values must lie in (0, 1)");
        }
        if (tau > tau_bar + kMassEpsilon) {
          throw EstimationError("quantile level " + std::to_string(tau) +
                                " beyond identified region (tau_bar=" + std::to_string(tau_bar) +
                                ")");
        }
      }
      tau_grid_ = options_.tau_grid;
    }
  }
}

void CicEstimator::require_full_mass(const char* estimand) const {
  if (options_.allow_defective) return;
  if (support_.any_defective) {
    throw EstimationError(std::string(estimand) +
                          ": a cell's largest observation is censored; pass allow_defective to "
                          "target the truncated estimand");
  }
}

// F_{10}( F_{00}^{-1}( F_{01}(y) ) ). At levels of zero the inverse falls
// back to the first pre-period control jump, the same boundary convention as
// compose_counterfactual.
double CicEstimator::counterfactual_value(double y) const {
  const double level = cell(false, true).cdf.cdf(y);
  const double mapped = generalized_inverse(cell(false, false).cdf, level);
  return cell(true, false).cdf.cdf(mapped);
}

EffectCurve CicEstimator::counterfactual_cdf() const {
  if (y_grid_.empty()) throw EstimationError("empty outcome grid");
  EffectCurve curve;
  curve.kind = EstimandKind::Dtt;
  curve.grid = y_grid_;
  curve.estimates.reserve(y_grid_.size());
  for (double y : y_grid_) curve.estimates.push_back(counterfactual_value(y));
  return curve;
}

EffectCurve CicEstimator::att() const {
  require_full_mass("att");
  const double treated_mean = step_mean(cell(true, true).cdf);

  // Transported pre-period treated mean: each atom moves through
  // F_{01}^{-1}(F_{00}(q)).
  const StepDistribution& pre_treated = cell(true, false).cdf;
  double counterfactual_mean = 0.0;
  for (std::size_t i = 0; i < pre_treated.jump_count(); ++i) {
    const double moved = compose_counterfactual(cell(false, false).cdf, cell(false, true).cdf,
                                                pre_treated.jump_points()[i]);
    counterfactual_mean += pre_treated.masses()[i] * moved;
  }

  EffectCurve curve;
  curve.kind = EstimandKind::Att;
  curve.grid = {0.0};
  curve.estimates = {treated_mean - counterfactual_mean};
  return curve;
}

EffectCurve CicEstimator::dtt() const {
  const EffectCurve counterfactual = counterfactual_cdf();
  EffectCurve curve;
  curve.kind = EstimandKind::Dtt;
  curve.grid = y_grid_;
  curve.estimates.reserve(y_grid_.size());
  for (std::size_t i = 0; i < y_grid_.size(); ++i) {
    curve.estimates.push_back(cell(true, true).cdf.cdf(y_grid_[i]) - counterfactual.estimates[i]);
  }
  return curve;
}

EffectCurve CicEstimator::qtt() const {
  if (tau_grid_.empty()) throw EstimationError("no admissible quantile levels");
  const EffectCurve counterfactual = clip_unit_interval(rearrange(counterfactual_cdf()));
  EffectCurve curve;
  curve.kind = EstimandKind::Qtt;
  curve.grid = tau_grid_;
  curve.estimates.reserve(tau_grid_.size());
  for (double tau : tau_grid_) {
    curve.estimates.push_back(generalized_inverse(cell(true, true).cdf, tau) -
                              curve_quantile(counterfactual, tau));
  }
  return curve;
}

EffectCurve CicEstimator::estimate(EstimandKind kind) const {
  switch (kind) {
    case EstimandKind::Att: return att();
    case EstimandKind::Dtt: return dtt();
    case EstimandKind::Qtt: return qtt();
    default: throw ValidationError("estimand not handled by the changes-in-changes estimator");
  }
}

}  // namespace kmte
