#pragma once

#include <array>
#include <memory>
#include <optional>
#include <vector>

#include "kmte/data_model.hpp"
#include "kmte/km_core.hpp"
#include "kmte/propensity.hpp"

namespace kmte {

struct LateOptions {
  PropensitySpec instrument_propensity;
  std::vector<double> y_grid;    // empty selects the automatic grid
  std::vector<double> tau_grid;  // empty selects 0.05..0.95 step 0.05, clipped
  bool allow_defective = false;
};

// Local average, distributional, and quantile treatment effects for
// compliers, using a binary instrument. The sample splits into the four
// (treatment, instrument) cells, each with its own product-limit weights; a
// single instrument-propensity fit is shared by all cells. Cells emptied by
// one-sided compliance contribute zero.
class LateEstimator {
 public:
  static constexpr double kWeakFirstStage = 0.02;

  LateEstimator(const CensoredSample& sample, LateOptions options);

  // Sample analogue of the instrumented cell contrast for arm t: positive
  // for the treated arm and negative for the control arm (it equals
  // P(T_z = t at z=1) - P(T_z = t at z=0)). Magnitudes below
  // kWeakFirstStage throw.
  double kappa(bool treated_arm) const;

  double complier_mean(bool treated_arm) const;

  // Complier outcome CDF values on the shared outcome grid; possibly
  // non-monotone in finite samples.
  EffectCurve complier_cdf(bool treated_arm) const;

  EffectCurve late() const;
  EffectCurve ldte() const;
  EffectCurve lqte() const;
  EffectCurve estimate(EstimandKind kind) const;

  const SupportDiagnostics& support() const { return support_; }
  const PropensityFit& instrument_propensity() const { return *propensity_; }
  const std::vector<double>& y_grid() const { return y_grid_; }
  const std::vector<double>& tau_grid() const { return tau_grid_; }
  // Largest [0,1]-clamp applied to a rearranged complier CDF.
  double max_boundary_clip() const { return max_clip_; }
  std::size_t sample_size() const { return n_; }

 private:
  struct Cell {
    bool present = false;
    OrderedGroup group;
    KaplanMeierWeights weights;
    StepDistribution reweighted;  // mass W / e or W / (1 - e) at uncensored points
    double mean_term = 0.0;       // sum W q / e (or the 1-e analogue)
  };

  const Cell& cell(bool treated_arm, bool instrument_on) const {
    return cells_[(treated_arm ? 1 : 0) * 2 + (instrument_on ? 1 : 0)];
  }
  void require_strong_first_stage() const;
  void require_full_mass(const char* estimand) const;
  EffectCurve rearranged_complier_cdf(bool treated_arm) const;

  std::size_t n_ = 0;
  LateOptions options_;
  std::shared_ptr<const PropensityFit> propensity_;
  std::array<Cell, 4> cells_;
  double kappa_treated_ = 0.0;
  double kappa_control_ = 0.0;
  SupportDiagnostics support_;
  std::vector<double> y_grid_;
  std::vector<double> tau_grid_;
  mutable double max_clip_ = 0.0;
};

}  // namespace kmte
