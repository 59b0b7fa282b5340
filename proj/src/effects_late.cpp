#include "kmte/effects_late.hpp"

#include <algorithm>
#include <cmath>

#include "kmte/dist_ops.hpp"
#include "kmte/effects_unconfounded.hpp"

namespace kmte {

LateEstimator::LateEstimator(const CensoredSample& sample, LateOptions options)
    : n_(sample.size()), options_(std::move(options)) {
  const ValidationReport validation = validate_for_estimand(sample, EstimandKind::Late);
  if (!validation.pass) throw ValidationError(validation.failures.front());

  propensity_ = std::make_shared<const PropensityFit>(
      fit_propensity(sample, options_.instrument_propensity, /*target_instrument=*/true));
  const std::vector<double>& e = propensity_->fitted();

  // kappa_t = (1/n) sum_i [ z_i 1{t_i = t} / e_i - (1 - z_i) 1{t_i = t} / (1 - e_i) ].
  double k1 = 0.0;
  double k0 = 0.0;
  for (std::size_t i = 0; i < n_; ++i) {
    const double term = sample.instrument(i) ? 1.0 / e[i] : -1.0 / (1.0 - e[i]);
    (sample.treated(i) ? k1 : k0) += term;
  }
  kappa_treated_ = k1 / static_cast<double>(n_);
  kappa_control_ = k0 / static_cast<double>(n_);

  std::vector<const OrderedGroup*> groups;
  std::vector<std::string> labels;
  for (int t = 0; t <= 1; ++t) {
    for (int z = 0; z <= 1; ++z) {
      Cell& cell = cells_[t * 2 + z];
      bool any = false;
      for (std::size_t i = 0; i < n_ && !any; ++i) {
        any = sample.treated(i) == (t == 1) && sample.instrument(i) == (z == 1);
      }
      if (!any) continue;  // one-sided compliance: the cell contributes zero
      cell.present = true;
      cell.group = order_group(sample, [t, z](const CensoredSample& s, std::size_t i) {
        return s.treated(i) == (t == 1) && s.instrument(i) == (z == 1);
      });
      cell.weights = km_weights(cell.group);

      std::vector<std::pair<double, double>> atoms;
      for (std::size_t i = 0; i < cell.group.group_size; ++i) {
        const double w = cell.weights.weights[i];
        if (w == 0.0) continue;
        const double score = e[cell.group.original_index[i]];
        const double mass = w / (z == 1 ? score : 1.0 - score);
        atoms.emplace_back(cell.group.sorted_q[i], mass);
        cell.mean_term += cell.group.sorted_q[i] * mass;
      }
      cell.reweighted = StepDistribution::from_atoms(std::move(atoms));
      groups.push_back(&cell.group);
      labels.push_back("t=" + std::to_string(t) + ",z=" + std::to_string(z));
    }
  }
  support_ = support_diagnostics(groups, labels);

  y_grid_ = options_.y_grid.empty() ? auto_outcome_grid(groups, support_.tau_h) : options_.y_grid;
  if (!std::is_sorted(y_grid_.begin(), y_grid_.end())) {
    throw ValidationError("outcome grid must be ascending");
  }

  require_strong_first_stage();
  if (!y_grid_.empty()) {
    // Identified quantile range: the rearranged, clamped complier CDFs top
    // out at their largest attainable value on the grid.
    double tau_bar = 1.0;
    for (int t = 0; t <= 1; ++t) {
      const EffectCurve curve = rearranged_complier_cdf(t == 1);
      tau_bar = std::min(tau_bar, curve.estimates.back());
    }
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

void LateEstimator::require_strong_first_stage() const {
  if (std::abs(kappa_treated_) < kWeakFirstStage || std::abs(kappa_control_) < kWeakFirstStage) {
    throw EstimationError("weak first stage: |kappa| = " +
                          std::to_string(std::min(std::abs(kappa_treated_), std::abs(kappa_control_))) +
                          " below " + std::to_string(kWeakFirstStage));
  }
}

void LateEstimator::require_full_mass(const char* estimand) const {
  if (options_.allow_defective) return;
  if (support_.any_defective) {
    throw EstimationError(std::string(estimand) +
                          ": a cell's largest observation is censored; pass allow_defective to "
                          "target the truncated estimand");
  }
}

double LateEstimator::kappa(bool treated_arm) const {
  require_strong_first_stage();
  return treated_arm ? kappa_treated_ : kappa_control_;
}

double LateEstimator::complier_mean(bool treated_arm) const {
  require_strong_first_stage();
  require_full_mass("complier mean");
  const Cell& with = cell(treated_arm, true);
  const Cell& without = cell(treated_arm, false);
  const double contrast = (with.present ? with.mean_term : 0.0) -
                          (without.present ? without.mean_term : 0.0);
  return contrast / (treated_arm ? kappa_treated_ : kappa_control_);
}

EffectCurve LateEstimator::complier_cdf(bool treated_arm) const {
  require_strong_first_stage();
  if (y_grid_.empty()) throw EstimationError("empty outcome grid");
  const Cell& with = cell(treated_arm, true);
  const Cell& without = cell(treated_arm, false);
  const double kappa_t = treated_arm ? kappa_treated_ : kappa_control_;
  EffectCurve curve;
  curve.kind = EstimandKind::Ldte;
  curve.grid = y_grid_;
  curve.estimates.reserve(y_grid_.size());
  for (double y : y_grid_) {
    const double a = with.present ? with.reweighted.cdf(y) : 0.0;
    const double b = without.present ? without.reweighted.cdf(y) : 0.0;
    curve.estimates.push_back((a - b) / kappa_t);
  }
  return curve;
}

EffectCurve LateEstimator::rearranged_complier_cdf(bool treated_arm) const {
  double clip = 0.0;
  EffectCurve curve = clip_unit_interval(rearrange(complier_cdf(treated_arm)), &clip);
  max_clip_ = std::max(max_clip_, clip);
  return curve;
}

EffectCurve LateEstimator::late() const {
  EffectCurve curve;
  curve.kind = EstimandKind::Late;
  curve.grid = {0.0};
  curve.estimates = {complier_mean(true) - complier_mean(false)};
  return curve;
}

EffectCurve LateEstimator::ldte() const {
  const EffectCurve treated = complier_cdf(true);
  const EffectCurve control = complier_cdf(false);
  EffectCurve curve;
  curve.kind = EstimandKind::Ldte;
  curve.grid = y_grid_;
  curve.estimates.reserve(y_grid_.size());
  for (std::size_t i = 0; i < y_grid_.size(); ++i) {
    curve.estimates.push_back(treated.estimates[i] - control.estimates[i]);
  }
  return curve;
}

EffectCurve LateEstimator::lqte() const {
  if (tau_grid_.empty()) throw EstimationError("no admissible quantile levels");
  const EffectCurve treated = rearranged_complier_cdf(true);
  const EffectCurve control = rearranged_complier_cdf(false);
  EffectCurve curve;
  curve.kind = EstimandKind::Lqte;
  curve.grid = tau_grid_;
  curve.estimates.reserve(tau_grid_.size());
  for (double tau : tau_grid_) {
    curve.estimates.push_back(curve_quantile(treated, tau) - curve_quantile(control, tau));
  }
  return curve;
}

EffectCurve LateEstimator::estimate(EstimandKind kind) const {
  switch (kind) {
    case EstimandKind::Late: return late();
    case EstimandKind::Ldte: return ldte();
    case EstimandKind::Lqte: return lqte();
    default: throw ValidationError("estimand not handled by the local treatment effect estimator");
  }
}

}  // namespace kmte
