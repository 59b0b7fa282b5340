#pragma once

#include <array>
#include <cstdint>
#include <functional>
#include <string>
#include <vector>

#include "kmte/data_model.hpp"
#include "kmte/propensity.hpp"
#include "kmte/rng.hpp"

namespace kmte {

// Benchmark designs: potential outcomes built from independent standard
// normal draws (x, e0, e1), treatment assigned with probability
// logistic(0.5 x), and exponential censoring applied to both arms.
//   1: y0 = e0,     y1 = y0 + 1
//   2: y0 = e0,     y1 = y0 + 1 + e1
//   3: y0 = x + e0, y1 = y0 + 1 + x
//   4: y0 = x + e0, y1 = y0 + 1 + x + e1
// In every design E[y1] = med(y1) = 1, E[y0] = med(y0) = 0.
struct DesignSpec {
  int design_id = 1;
  std::size_t n = 1000;
  double target_censoring = 0.0;  // 0 disables censoring entirely
};

// Exponential censoring rate that achieves the target censoring fraction in
// the given design, to 1e-4 in probability: bisection over the closed-form
// censoring probability, with the covariate integrated out by 64-point
// Gauss-Hermite quadrature.
double calibrate_censoring(int design_id, double target);

// Population censoring fraction of the design under Exponential(rate)
// censoring.
double censoring_probability(int design_id, double rate);

CensoredSample generate(const DesignSpec& spec, RngStream& rng);
CensoredSample generate_with_rate(const DesignSpec& spec, double censor_rate, RngStream& rng);

// The six per-replicate targets, in report order: mean and median of each
// potential outcome, their difference, and the median gap.
enum class StudyTarget { MeanTreated, MeanControl, MedianTreated, MedianControl, Ate, MedianGap };
inline constexpr std::array<StudyTarget, 6> kStudyTargets = {
    StudyTarget::MeanTreated,  StudyTarget::MeanControl, StudyTarget::MedianTreated,
    StudyTarget::MedianControl, StudyTarget::Ate,         StudyTarget::MedianGap};

const char* target_label(StudyTarget target);
double target_truth(StudyTarget target);

enum class StudyEstimator { TwoStepKm, Ignore, Uncensored };
inline constexpr std::array<StudyEstimator, 3> kStudyEstimators = {
    StudyEstimator::TwoStepKm, StudyEstimator::Ignore, StudyEstimator::Uncensored};

const char* estimator_label(StudyEstimator estimator);

struct ReplicateEstimates {
  std::array<double, 6> values{};  // indexed like kStudyTargets
};

// Product-limit estimates reweighted by the fitted propensity.
ReplicateEstimates evaluate_two_step(const CensoredSample& sample, const PropensitySpec& spec);

// Plain inverse-probability weighting that treats q as the outcome and keeps
// every row, censored or not.
ReplicateEstimates naive_ignore(const CensoredSample& sample, const PropensitySpec& spec);

// Plain inverse-probability weighting after dropping all censored rows; the
// propensity is refit on the kept subsample.
ReplicateEstimates naive_uncensored(const CensoredSample& sample, const PropensitySpec& spec);

struct StudyConfig {
  std::vector<int> designs = {1, 2, 3, 4};
  std::vector<double> censoring_levels = {0.0, 0.10, 0.30};
  std::size_t replications = 1000;
  std::size_t sample_size = 1000;
  PropensitySpec propensity{PropensityMethod::SeriesLogit, /*series_terms=*/4};
  std::uint64_t seed = 0;
  int threads = 0;
  // Called after each (design, level) cell finishes; may be empty.
  std::function<void(int design, double censoring)> on_cell_done;
};

struct StudyRow {
  int design = 0;
  double censoring = 0.0;
  StudyEstimator estimator = StudyEstimator::TwoStepKm;
  StudyTarget target = StudyTarget::Ate;
  double bias_pp = 0.0;  // 100 * mean(estimate - truth) over successful replicates
  double rmse = 0.0;
  std::size_t reps = 0;      // attempted replicates
  std::size_t failures = 0;  // replicates where this estimator threw
};

struct SimulationReport {
  std::vector<StudyRow> rows;
  const StudyRow& find(int design, double censoring, StudyEstimator estimator,
                       StudyTarget target) const;
  std::string to_csv() const;
};

// Runs the full design x censoring grid. Replicates are independent, draw
// from child streams indexed by (design, level, replicate), and aggregate in
// replicate order, so the report is identical for any thread count.
SimulationReport run_study(const StudyConfig& config);

// Plain-loop reference implementation, kept for testing and benchmarks.
SimulationReport run_study_serial(const StudyConfig& config);

}  // namespace kmte
