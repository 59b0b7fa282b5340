#pragma once

#include <cstdint>
#include <functional>
#include <vector>

#include "kmte/data_model.hpp"
#include "kmte/rng.hpp"

namespace kmte {

// Estimand closure handed to the band construction. It must be a pure
// function of its sample argument, must refit every nuisance quantity on
// that sample, and must return a curve on the same fixed grid every time.
using CurveEstimator = std::function<EffectCurve(const CensoredSample&)>;

struct BootstrapSpec {
  int replicates = 999;
  double alpha = 0.05;
  std::uint64_t seed = 0;
  std::vector<double> grid;  // the discretized evaluation set, fixed upfront
  int threads = 0;           // 0 uses the OpenMP default
};

// Per-replicate statistics are the sup-deviations from the original curve
// scaled by sqrt(n), matching the root-n rate of the limiting process; the
// band half-width, critical_value / sqrt(n), is then the raw deviation
// quantile.
struct BandResult {
  double critical_value = 0.0;                // empirical (1 - alpha) quantile of sup stats
  double band_halfwidth = 0.0;                // critical_value / sqrt(n)
  std::vector<double> replicate_sup_stats;    // successful replicates, in replicate order
  int failed_replicates = 0;
};

bool operator==(const BandResult& a, const BandResult& b);

// n rows drawn i.i.d. with replacement; each draw copies the full record.
CensoredSample resample(const CensoredSample& sample, RngStream& rng);

// Ordinary nonparametric bootstrap of a uniform confidence band: recompute
// the estimator on each resample, take the sup-deviation from the original
// curve over the grid, and return the ceiling-rank (1 - alpha) quantile. Each
// replicate draws from a child stream indexed by its replicate number and
// writes only its own slot, so the result is bit-identical for any thread
// count. Replicates whose estimator throws an estimation or validation error
// are excluded and counted; more than 10% of them is an error.
BandResult uniform_band(const CensoredSample& sample, const CurveEstimator& estimator,
                        const BootstrapSpec& spec);

// Reference implementation with a plain loop; kept for testing the parallel
// path and for the benchmark target.
BandResult uniform_band_serial(const CensoredSample& sample, const CurveEstimator& estimator,
                               const BootstrapSpec& spec);

}  // namespace kmte
