#include "kmte/km_core.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

namespace kmte {

OrderedGroup order_group(const CensoredSample& sample, const RowPredicate& selector) {
  OrderedGroup group;
  group.covariate_count = sample.covariate_count();
  group.parent_size = sample.size();

  std::vector<std::size_t> rows;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (selector(sample, i)) rows.push_back(i);
  }
  if (rows.empty()) throw ValidationError("selector matches no observation");

  // Ascending q; uncensored before censored at equal q; stable on input
  // order otherwise.
  std::stable_sort(rows.begin(), rows.end(), [&](std::size_t a, std::size_t b) {
    if (sample.q(a) != sample.q(b)) return sample.q(a) < sample.q(b);
    return sample.uncensored(a) && !sample.uncensored(b);
  });

  group.group_size = rows.size();
  group.sorted_q.reserve(rows.size());
  group.delta.reserve(rows.size());
  group.covariates.reserve(rows.size() * static_cast<std::size_t>(group.covariate_count));
  group.original_index = rows;
  for (std::size_t r : rows) {
    group.sorted_q.push_back(sample.q(r));
    group.delta.push_back(sample.uncensored(r) ? 1 : 0);
    const auto x = sample.covariates(r);
    group.covariates.insert(group.covariates.end(), x.begin(), x.end());
  }
  return group;
}

KaplanMeierWeights km_weights(const OrderedGroup& group) {
  const std::size_t m = group.group_size;
  KaplanMeierWeights result;
  result.group_fraction = static_cast<double>(m) / static_cast<double>(group.parent_size);
  result.weights.assign(m, 0.0);

  double running_product = 1.0;
  for (std::size_t i = 0; i < m; ++i) {
    const double remaining = static_cast<double>(m - i);  // n_g - i + 1 with 1-based i
    if (group.delta[i]) {
      result.weights[i] = result.group_fraction * running_product / remaining;
      running_product *= (remaining - 1.0) / remaining;
    }
  }
  return result;
}

StepDistribution km_cdf(const OrderedGroup& group) {
  const KaplanMeierWeights weights = km_weights(group);
  const double rescale = 1.0 / weights.group_fraction;  // n / n_g
  std::vector<std::pair<double, double>> atoms;
  atoms.reserve(group.group_size);
  bool any_uncensored = false;
  for (std::size_t i = 0; i < group.group_size; ++i) {
    if (!group.delta[i]) continue;
    any_uncensored = true;
    atoms.emplace_back(group.sorted_q[i], weights.weights[i] * rescale);
  }
  if (!any_uncensored) throw EstimationError("group has no uncensored observations");
  return StepDistribution::from_atoms(std::move(atoms));
}

HazardStep cumulative_hazard(const OrderedGroup& group) {
  HazardStep step;
  const std::size_t m = group.group_size;
  for (std::size_t i = 0; i < m; ++i) {
    if (!group.delta[i]) continue;
    const double increment = 1.0 / static_cast<double>(m - i);
    if (!step.locations.empty() && step.locations.back() == group.sorted_q[i]) {
      step.increments.back() += increment;
    } else {
      step.locations.push_back(group.sorted_q[i]);
      step.increments.push_back(increment);
    }
  }
  return step;
}

StepDistribution km_cdf_via_hazard(const OrderedGroup& group) {
  const std::size_t m = group.group_size;
  std::vector<std::pair<double, double>> atoms;
  atoms.reserve(m);
  double survival = 1.0;  // prod_{j < i} (1 - lambda_j)
  bool any_uncensored = false;
  for (std::size_t i = 0; i < m; ++i) {
    const double hazard = group.delta[i] ? 1.0 / static_cast<double>(m - i) : 0.0;
    if (group.delta[i]) {
      any_uncensored = true;
      atoms.emplace_back(group.sorted_q[i], survival * hazard);
    }
    survival *= 1.0 - hazard;
  }
  if (!any_uncensored) throw EstimationError("group has no uncensored observations");
  return StepDistribution::from_atoms(std::move(atoms));
}

double km_integral(const OrderedGroup& group,
                   const std::function<double(double, std::span<const double>)>& phi) {
  const KaplanMeierWeights weights = km_weights(group);
  double sum = 0.0;
  for (std::size_t i = 0; i < group.group_size; ++i) {
    const double w = weights.weights[i];
    if (w == 0.0) continue;
    const double value = phi(group.sorted_q[i], group.covariate_row(i));
    if (!std::isfinite(value)) {
      throw EstimationError("integrand is non-finite at a point with positive mass");
    }
    sum += w * value;
  }
  return sum;
}

SupportDiagnostics support_diagnostics(std::span<const OrderedGroup* const> groups,
                                       std::span<const std::string> labels) {
  SupportDiagnostics diag;
  diag.tau_h = std::numeric_limits<double>::infinity();
  for (std::size_t g = 0; g < groups.size(); ++g) {
    const OrderedGroup& group = *groups[g];
    GroupSupport support;
    support.label = g < labels.size() ? labels[g] : std::to_string(g);
    support.group_size = group.group_size;
    support.uncensored_count =
        static_cast<std::size_t>(std::accumulate(group.delta.begin(), group.delta.end(), 0));
    support.max_q = group.sorted_q.back();
    support.max_censored = group.delta.back() == 0;
    if (support.uncensored_count > 0) {
      const KaplanMeierWeights weights = km_weights(group);
      const double total = std::accumulate(weights.weights.begin(), weights.weights.end(), 0.0);
      support.km_mass = total / weights.group_fraction;
    }
    diag.tau_h = std::min(diag.tau_h, support.max_q);
    diag.any_defective = diag.any_defective || support.max_censored;
    diag.groups.push_back(std::move(support));
  }
  return diag;
}

}  // namespace kmte
