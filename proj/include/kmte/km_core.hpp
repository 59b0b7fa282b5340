#pragma once

#include <functional>
#include <span>
#include <string>
#include <vector>

#include "kmte/data_model.hpp"

namespace kmte {

// A subpopulation ordered by q, with tied uncensored observations placed
// before censored ones and original input order preserved within ties.
// Covariate rows travel with their order statistic.
struct OrderedGroup {
  std::vector<double> sorted_q;
  std::vector<std::uint8_t> delta;         // aligned to sorted_q
  std::vector<double> covariates;          // row-major, aligned to sorted_q
  int covariate_count = 0;
  std::vector<std::size_t> original_index; // sorted position -> row in the parent sample
  std::size_t group_size = 0;
  std::size_t parent_size = 0;

  std::span<const double> covariate_row(std::size_t i) const {
    const std::size_t k = static_cast<std::size_t>(covariate_count);
    return {covariates.data() + i * k, k};
  }
};

// Product-limit masses aligned to the ordered group. Censored positions get
// exactly zero; the total is group_fraction when the group maximum is
// uncensored and strictly less otherwise.
struct KaplanMeierWeights {
  std::vector<double> weights;
  double group_fraction = 0.0;  // group_size / parent_size
};

// Jumps of the within-group cumulative hazard at uncensored order
// statistics, aggregated over tied locations.
struct HazardStep {
  std::vector<double> locations;
  std::vector<double> increments;
};

using RowPredicate = std::function<bool(const CensoredSample&, std::size_t)>;

// Extracts and orders the rows selected by the predicate. Throws
// ValidationError when nothing is selected.
OrderedGroup order_group(const CensoredSample& sample, const RowPredicate& selector);

// Weight for position i: (n_g/n) * delta_i / (n_g - i + 1) * prod_{j<i}
// ((n_g - j) / (n_g - j + 1))^delta_j, computed in one forward pass with a
// running product. Each factor is at most one, so no overflow is possible.
KaplanMeierWeights km_weights(const OrderedGroup& group);

// Within-group product-limit CDF: the weights above summed at distinct
// uncensored q values and rescaled by n/n_g so the curve targets the group's
// own outcome distribution. Throws EstimationError when the group has no
// uncensored observation.
StepDistribution km_cdf(const OrderedGroup& group);

// Hazard increments delta_i / (n_g - i + 1), tied locations aggregated.
HazardStep cumulative_hazard(const OrderedGroup& group);

// Same curve as km_cdf but assembled through the hazard route: the jump at
// each order statistic is the survival prefix prod_{j<i} (1 - lambda_j)
// times its own hazard increment. Algebraically identical to km_cdf; the two
// expressions accumulate differently in floating point, which is what makes
// the pair a usable cross-check.
StepDistribution km_cdf_via_hazard(const OrderedGroup& group);

// Weighted sum of phi over the group's order statistics: sum_i W_i *
// phi(q_i, x_i). Multi-group estimands sum km_integral over their groups.
// Throws EstimationError if phi is non-finite at a point with positive mass.
double km_integral(const OrderedGroup& group,
                   const std::function<double(double, std::span<const double>)>& phi);

struct GroupSupport {
  std::string label;
  std::size_t group_size = 0;
  std::size_t uncensored_count = 0;
  double max_q = 0.0;
  bool max_censored = false;
  double km_mass = 0.0;  // total product-limit mass within the group
};

struct SupportDiagnostics {
  std::vector<GroupSupport> groups;
  double tau_h = 0.0;           // min over groups of the largest observed q
  bool any_defective = false;   // some group's maximum is censored
};

// Purely informational; never throws. A censored group maximum means the
// group's distribution is only identified up to its largest uncensored
// point, and downstream estimands target that truncated version.
SupportDiagnostics support_diagnostics(std::span<const OrderedGroup* const> groups,
                                       std::span<const std::string> labels);

}  // namespace kmte
