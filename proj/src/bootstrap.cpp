#include "kmte/bootstrap.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "kmte/parallel.hpp"

namespace kmte {

bool operator==(const BandResult& a, const BandResult& b) {
  return a.critical_value == b.critical_value && a.band_halfwidth == b.band_halfwidth &&
         a.replicate_sup_stats == b.replicate_sup_stats &&
         a.failed_replicates == b.failed_replicates;
}

CensoredSample resample(const CensoredSample& sample, RngStream& rng) {
  const std::size_t n = sample.size();
  std::vector<std::size_t> rows(n);
  for (std::size_t i = 0; i < n; ++i) rows[i] = rng.uniform_index(n);
  return sample.subset(rows);
}

namespace {

void validate_spec(const BootstrapSpec& spec) {
  if (spec.replicates < 1) throw ValidationError("bootstrap needs at least one replicate");
  if (!(spec.alpha > 0.0 && spec.alpha < 1.0)) throw ValidationError("alpha must be in (0, 1)");
  if (spec.grid.empty()) throw ValidationError("bootstrap grid must be non-empty");
  if (!std::is_sorted(spec.grid.begin(), spec.grid.end())) {
    throw ValidationError("bootstrap grid must be ascending");
  }
}

void check_grid(const EffectCurve& curve, const BootstrapSpec& spec) {
  if (curve.grid != spec.grid) {
    throw ValidationError("estimator returned a curve on a different grid than the bootstrap spec");
  }
}

BandResult assemble(const CensoredSample& sample, const BootstrapSpec& spec,
                    const std::vector<double>& sup_stats, const std::vector<std::uint8_t>& ok) {
  BandResult result;
  result.replicate_sup_stats.reserve(sup_stats.size());
  for (std::size_t b = 0; b < sup_stats.size(); ++b) {
    if (ok[b]) {
      result.replicate_sup_stats.push_back(sup_stats[b]);
    } else {
      ++result.failed_replicates;
    }
  }
  if (result.failed_replicates * 10 > spec.replicates) {
    throw EstimationError("bootstrap unstable: " + std::to_string(result.failed_replicates) +
                          " of " + std::to_string(spec.replicates) + " replicates failed");
  }
  const std::size_t kept = result.replicate_sup_stats.size();
  std::vector<double> sorted = result.replicate_sup_stats;
  std::sort(sorted.begin(), sorted.end());
  const std::size_t rank = static_cast<std::size_t>(
      std::ceil((1.0 - spec.alpha) * static_cast<double>(kept)));
  result.critical_value = sorted[std::max<std::size_t>(rank, 1) - 1];
  result.band_halfwidth = result.critical_value / std::sqrt(static_cast<double>(sample.size()));
  return result;
}

template <typename Driver>
BandResult run_band(const CensoredSample& sample, const CurveEstimator& estimator,
                    const BootstrapSpec& spec, Driver&& driver) {
  validate_spec(spec);
  const EffectCurve original = estimator(sample);
  check_grid(original, spec);

  const RngStream master(spec.seed);
  std::vector<double> sup_stats(spec.replicates, 0.0);
  std::vector<std::uint8_t> ok(spec.replicates, 0);

  const double root_n = std::sqrt(static_cast<double>(sample.size()));
  driver(static_cast<std::int64_t>(spec.replicates), [&](std::int64_t b) {
    RngStream stream = master.child(static_cast<std::uint64_t>(b) + 1);
    const CensoredSample redrawn = resample(sample, stream);
    try {
      const EffectCurve replicate = estimator(redrawn);
      check_grid(replicate, spec);
      double sup = 0.0;
      for (std::size_t i = 0; i < replicate.estimates.size(); ++i) {
        sup = std::max(sup, std::abs(replicate.estimates[i] - original.estimates[i]));
      }
      sup_stats[b] = root_n * sup;
      ok[b] = 1;
    } catch (const EstimationError&) {
    } catch (const ValidationError&) {
    }
  });

  return assemble(sample, spec, sup_stats, ok);
}

}  // namespace

BandResult uniform_band(const CensoredSample& sample, const CurveEstimator& estimator,
                        const BootstrapSpec& spec) {
  return run_band(sample, estimator, spec, [&](std::int64_t count, auto&& body) {
    parallel_for(count, spec.threads, body);
  });
}

BandResult uniform_band_serial(const CensoredSample& sample, const CurveEstimator& estimator,
                               const BootstrapSpec& spec) {
  return run_band(sample, estimator, spec,
                  [](std::int64_t count, auto&& body) { serial_for(count, body); });
}

}  // namespace kmte
