#include "kmte/dist_ops.hpp"

#include <algorithm>
#include <cmath>
#include <string>

namespace kmte {

double generalized_inverse(const StepDistribution& dist, double tau) {
  if (dist.jump_count() == 0) throw EstimationError("quantile of an empty distribution");
  if (tau > dist.total_mass() + kQuantileSlack) {
    throw EstimationError("quantile beyond identified region: tau=" + std::to_string(tau) +
                          " exceeds attainable mass " + std::to_string(dist.total_mass()));
  }
  if (tau <= 0.0) return dist.jump_points().front();
  const auto& cumulative = dist.cumulative();
  const double threshold = tau - kQuantileSlack;
  const auto it = std::lower_bound(cumulative.begin(), cumulative.end(), threshold);
  const std::size_t idx = it == cumulative.end()
                              ? cumulative.size() - 1
                              : static_cast<std::size_t>(it - cumulative.begin());
  return dist.jump_points()[idx];
}

double cdf_eval(const StepDistribution& dist, double y) { return dist.cdf(y); }

EffectCurve rearrange(EffectCurve curve) {
  std::sort(curve.estimates.begin(), curve.estimates.end());
  return curve;
}

double compose_counterfactual(const StepDistribution& inner, const StepDistribution& outer,
                              double y) {
  return generalized_inverse(outer, cdf_eval(inner, y));
}

double step_mean(const StepDistribution& dist) {
  double sum = 0.0;
  for (std::size_t i = 0; i < dist.jump_count(); ++i) {
    sum += dist.jump_points()[i] * dist.masses()[i];
  }
  return sum;
}

double km_mean(const StepDistribution& dist, bool allow_defective) {
  if (!allow_defective && std::abs(dist.total_mass() - 1.0) > kMassEpsilon) {
    throw EstimationError("distribution is defective (total mass " +
                          std::to_string(dist.total_mass()) +
                          "); pass allow_defective for the truncated mean");
  }
  return step_mean(dist);
}

double curve_quantile(const EffectCurve& curve, double tau) {
  const double threshold = tau - kQuantileSlack;
  for (std::size_t i = 0; i < curve.grid.size(); ++i) {
    if (curve.estimates[i] >= threshold) return curve.grid[i];
  }
  throw EstimationError("quantile beyond identified region: tau=" + std::to_string(tau));
}

EffectCurve clip_unit_interval(EffectCurve curve, double* max_clip) {
  double worst = 0.0;
  for (double& v : curve.estimates) {
    const double clipped = std::min(1.0, std::max(0.0, v));
    worst = std::max(worst, std::abs(clipped - v));
    v = clipped;
  }
  if (max_clip != nullptr) *max_clip = worst;
  return curve;
}

}  // namespace kmte
