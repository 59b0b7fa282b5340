#pragma once

#include <array>
#include <vector>

#include "kmte/data_model.hpp"
#include "kmte/km_core.hpp"

namespace kmte {

struct CicOptions {
  std::vector<double> y_grid;    // empty selects the automatic grid
  std::vector<double> tau_grid;  // empty selects 0.05..0.95 step 0.05, clipped
  bool allow_defective = false;
};

// Changes-in-changes estimators of treated-group effects from four
// (group, period) cells, each summarized by its own within-cell
// product-limit CDF. Covariates are not used. The counterfactual
// distribution of the treated group's second period transports the
// pre-period treated outcomes through the control group's period map.
class CicEstimator {
 public:
  CicEstimator(const CensoredSample& sample, CicOptions options);

  const StepDistribution& cell_cdf(bool treated_group, bool post_period) const {
    return cells_[(treated_group ? 1 : 0) * 2 + (post_period ? 1 : 0)].cdf;
  }

  // Counterfactual no-treatment CDF of the treated group in the post period,
  // evaluated on the outcome grid. Monotone by construction; rearranged and
  // clamped before inversion regardless.
  EffectCurve counterfactual_cdf() const;

  EffectCurve att() const;
  EffectCurve dtt() const;
  EffectCurve qtt() const;
  EffectCurve estimate(EstimandKind kind) const;

  const SupportDiagnostics& support() const { return support_; }
  const std::vector<double>& y_grid() const { return y_grid_; }
  const std::vector<double>& tau_grid() const { return tau_grid_; }
  const std::vector<std::string>& warnings() const { return warnings_; }
  std::size_t sample_size() const { return n_; }

 private:
  struct Cell {
    OrderedGroup group;
    StepDistribution cdf;
  };

  const Cell& cell(bool g, bool j) const { return cells_[(g ? 1 : 0) * 2 + (j ? 1 : 0)]; }
  void require_full_mass(const char* estimand) const;
  double counterfactual_value(double y) const;

  std::size_t n_ = 0;
  CicOptions options_;
  std::array<Cell, 4> cells_;
  SupportDiagnostics support_;
  std::vector<double> y_grid_;
  std::vector<double> tau_grid_;
  std::vector<std::string> warnings_;
};

}  // namespace kmte
