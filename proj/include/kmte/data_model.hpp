#pragma once

#include <cstdint>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "kmte/common.hpp"

namespace kmte {

enum class EstimandKind { Ate, Dte, Qte, Late, Ldte, Lqte, Att, Dtt, Qtt };

const char* estimand_name(EstimandKind kind);
std::optional<EstimandKind> parse_estimand(std::string_view name);

// Scalar estimands are represented as curves on a length-1 grid.
bool estimand_is_scalar(EstimandKind kind);
bool estimand_needs_instrument(EstimandKind kind);
bool estimand_needs_did_cells(EstimandKind kind);
bool estimand_uses_tau_grid(EstimandKind kind);

// Which optional columns a sample carries. q and delta are always present.
struct SampleSchema {
  int covariate_count = 0;
  bool has_treatment = false;
  bool has_instrument = false;
  bool has_group = false;
  bool has_period = false;

  bool operator==(const SampleSchema&) const = default;
};

// One row, materialized. The columnar CensoredSample below is the working
// representation; Observation is for row-level inspection and tests.
struct Observation {
  double q = 0.0;
  bool uncensored = false;
  std::vector<double> x;
  std::optional<bool> treated;
  std::optional<bool> instrument;
  std::optional<bool> group;
  std::optional<bool> period;
};

// Immutable sample of right-censored observations: q = min(outcome, censor),
// delta = 1 when the outcome itself was observed. Safe to share across
// threads once constructed.
class CensoredSample {
 public:
  CensoredSample(SampleSchema schema, std::vector<double> q, std::vector<std::uint8_t> delta,
                 std::vector<std::uint8_t> treatment, std::vector<double> covariates,
                 std::vector<std::uint8_t> instrument, std::vector<std::uint8_t> group,
                 std::vector<std::uint8_t> period);

  std::size_t size() const { return q_.size(); }
  const SampleSchema& schema() const { return schema_; }
  int covariate_count() const { return schema_.covariate_count; }

  double q(std::size_t i) const { return q_[i]; }
  bool uncensored(std::size_t i) const { return delta_[i] != 0; }
  bool treated(std::size_t i) const { return treatment_[i] != 0; }
  bool instrument(std::size_t i) const { return instrument_[i] != 0; }
  bool group(std::size_t i) const { return group_[i] != 0; }
  bool period(std::size_t i) const { return period_[i] != 0; }

  std::span<const double> covariates(std::size_t i) const {
    const std::size_t k = static_cast<std::size_t>(schema_.covariate_count);
    return {covariates_.data() + i * k, k};
  }

  const std::vector<double>& covariate_matrix() const { return covariates_; }
  const std::vector<std::uint8_t>& treatment_column() const { return treatment_; }
  const std::vector<std::uint8_t>& instrument_column() const { return instrument_; }
  const std::vector<std::uint8_t>& delta_column() const { return delta_; }
  const std::vector<double>& q_column() const { return q_; }

  std::size_t uncensored_count() const;

  // New sample holding rows[0], rows[1], ... in that order; rows may repeat.
  CensoredSample subset(const std::vector<std::size_t>& rows) const;

  Observation row(std::size_t i) const;

 private:
  SampleSchema schema_;
  std::vector<double> q_;
  std::vector<std::uint8_t> delta_;
  std::vector<std::uint8_t> treatment_;
  std::vector<double> covariates_;  // row-major, size() * covariate_count
  std::vector<std::uint8_t> instrument_;
  std::vector<std::uint8_t> group_;
  std::vector<std::uint8_t> period_;
};

// Canonical CSV column names are q, delta, t, z, g, period, x1..xk.
// schema_hint remaps canonical -> actual header name for nonstandard files.
struct LoadOptions {
  std::map<std::string, std::string> schema_hint;
};

struct LoadResult {
  CensoredSample sample;
  std::vector<std::string> warnings;
};

LoadResult load_csv(const std::string& path, const LoadOptions& options = {});
void write_csv(const CensoredSample& sample, const std::string& path);

struct GroupDiagnostic {
  std::string label;
  std::size_t n = 0;
  std::size_t uncensored = 0;
  double censoring_fraction() const {
    return n == 0 ? 0.0 : 1.0 - static_cast<double>(uncensored) / static_cast<double>(n);
  }
};

struct ValidationReport {
  bool pass = true;
  std::vector<std::string> failures;
  std::vector<std::string> warnings;
  std::vector<GroupDiagnostic> groups;
};

// Checks that the sample carries the columns and non-empty cells the
// requested estimand needs. Never mutates or throws; failures are reported.
ValidationReport validate_for_estimand(const CensoredSample& sample, EstimandKind kind);

// Right-continuous step distribution: strictly ascending jump locations with
// strictly positive masses. Product-limit CDFs may be defective (total mass
// below one); inverse-probability reweighted curves may carry total mass
// slightly above one, which is preserved as-is.
class StepDistribution {
 public:
  StepDistribution() = default;

  // Sorts, merges equal locations, and drops zero-mass atoms. Negative
  // masses are a programming error here.
  static StepDistribution from_atoms(std::vector<std::pair<double, double>> atoms);

  std::size_t jump_count() const { return jump_points_.size(); }
  const std::vector<double>& jump_points() const { return jump_points_; }
  const std::vector<double>& masses() const { return masses_; }
  const std::vector<double>& cumulative() const { return cumulative_; }
  double total_mass() const { return cumulative_.empty() ? 0.0 : cumulative_.back(); }

  // P(value <= y): right-continuous in y.
  double cdf(double y) const;

 private:
  std::vector<double> jump_points_;
  std::vector<double> masses_;
  std::vector<double> cumulative_;
};

// Estimates over a grid of outcome levels (distribution effects) or quantile
// levels. Scalar effects use a single-point grid.
struct EffectCurve {
  EstimandKind kind = EstimandKind::Ate;
  std::vector<double> grid;
  std::vector<double> estimates;
  std::optional<double> band_halfwidth;  // uniform half-width, c / sqrt(n)
  std::optional<double> alpha;
};

}  // namespace kmte
