#pragma once

#include "kmte/data_model.hpp"

namespace kmte {

// Generalized inverse inf{y : F(y) >= tau} over the jump set. tau above the
// total mass (beyond numeric slack) throws EstimationError; tau <= 0 returns
// the first jump point, the smallest data-driven choice.
double generalized_inverse(const StepDistribution& dist, double tau);

// Right-continuous evaluation; named wrapper around StepDistribution::cdf.
double cdf_eval(const StepDistribution& dist, double y);

// Ascending sort of the estimated values; the grid is unchanged and the
// multiset of estimates is preserved. Idempotent, so it is applied
// unconditionally wherever a monotone curve is required.
EffectCurve rearrange(EffectCurve curve);

// F_outer^{-1}(F_inner(y)): the counterfactual transport map between two
// step CDFs. Propagates "beyond identified region" from the inverse.
double compose_counterfactual(const StepDistribution& inner, const StepDistribution& outer,
                              double y);

// Mean of the distribution. Requires total mass within kMassEpsilon of one
// unless allow_defective is set, in which case the truncated mean of the
// identified part is returned.
double km_mean(const StepDistribution& dist, bool allow_defective = false);

// Mean with no mass check; used where the estimator is defined directly as
// the weighted sum regardless of its total mass.
double step_mean(const StepDistribution& dist);

// Smallest grid point whose value reaches tau, for a curve already made
// monotone by rearrange. Throws EstimationError when tau is out of reach.
double curve_quantile(const EffectCurve& curve, double tau);

// Clamps estimates into [0, 1]. When max_clip is non-null it receives the
// largest adjustment applied, so callers can log boundary events.
EffectCurve clip_unit_interval(EffectCurve curve, double* max_clip = nullptr);

}  // namespace kmte
