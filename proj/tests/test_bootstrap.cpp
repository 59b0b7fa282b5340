#include <cmath>

#include "doctest.h"
#include "kmte/bootstrap.hpp"
#include "kmte/effects_unconfounded.hpp"
#include "kmte/parallel.hpp"
#include "kmte/rng.hpp"
#include "kmte/simulation.hpp"

using namespace kmte;

namespace {

CensoredSample tiny_sample(std::size_t n, std::uint64_t seed) {
  RngStream rng(seed);
  std::vector<double> q(n);
  std::vector<std::uint8_t> delta(n, 1);
  std::vector<std::uint8_t> t(n);
  for (std::size_t i = 0; i < n; ++i) {
    q[i] = rng.normal();
    t[i] = i % 2;
  }
  SampleSchema schema;
  schema.has_treatment = true;
  return CensoredSample(schema, std::move(q), std::move(delta), std::move(t), {}, {}, {}, {});
}

}  // namespace

TEST_CASE("resampling a single row reproduces the sample; seeds are reproducible") {
  const CensoredSample one = tiny_sample(1, 5).subset({0});
  RngStream rng(77);
  const CensoredSample redraw = resample(one, rng);
  CHECK(redraw.size() == 1);
  CHECK(redraw.q(0) == one.q(0));

  const CensoredSample sample = tiny_sample(10, 6);
  RngStream a(42), b(42);
  const CensoredSample ra = resample(sample, a);
  const CensoredSample rb = resample(sample, b);
  for (std::size_t i = 0; i < sample.size(); ++i) CHECK(ra.q(i) == rb.q(i));
}

TEST_CASE("resampling frequencies follow the multinomial law") {
  const std::size_t n = 5;
  const CensoredSample sample = tiny_sample(n, 7);
  RngStream rng(123);
  std::vector<std::size_t> appearances(n, 0);
  const int draws = 10000;
  for (int b = 0; b < draws; ++b) {
    const CensoredSample redraw = resample(sample, rng);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < n; ++j) {
        if (redraw.q(i) == sample.q(j)) {
          ++appearances[j];
          break;
        }
      }
    }
  }
  // Each row appears Binomial(n * draws, 1/n) times in total.
  const double mean = static_cast<double>(draws);
  const double sd = std::sqrt(n * draws * (1.0 / n) * (1.0 - 1.0 / n));
  for (std::size_t j = 0; j < n; ++j) {
    CHECK(std::abs(static_cast<double>(appearances[j]) - mean) < 3.0 * sd);
  }
}

TEST_CASE("constant estimator yields a zero-width band") {
  const CensoredSample sample = tiny_sample(30, 8);
  BootstrapSpec spec;
  spec.replicates = 50;
  spec.grid = {0.0};
  const CurveEstimator constant = [](const CensoredSample&) {
    EffectCurve curve;
    curve.grid = {0.0};
    curve.estimates = {0.0};
    return curve;
  };
  const BandResult band = uniform_band(sample, constant, spec);
  CHECK(band.critical_value == 0.0);
  CHECK(band.band_halfwidth == 0.0);
  CHECK(band.failed_replicates == 0);
  CHECK(band.replicate_sup_stats.size() == 50);
}

TEST_CASE("same seed gives bit-identical bands; parallel equals serial") {
  RngStream gen(909);
  DesignSpec design{2, 300, 0.10};
  const CensoredSample sample = generate(design, gen);

  UnconfoundedOptions options;
  options.propensity = PropensitySpec{PropensityMethod::SeriesLogit, 4};
  options.allow_defective = true;
  const UnconfoundedEstimator original(sample, options);
  const std::vector<double> grid = original.y_grid();

  UnconfoundedOptions replicate_options = options;
  replicate_options.y_grid = grid;
  const CurveEstimator estimator = [replicate_options](const CensoredSample& s) {
    return UnconfoundedEstimator(s, replicate_options).dte();
  };

  BootstrapSpec spec;
  spec.replicates = 60;
  spec.seed = 31337;
  spec.grid = grid;
  spec.threads = 4;

  const BandResult parallel_band = uniform_band(sample, estimator, spec);
  const BandResult parallel_again = uniform_band(sample, estimator, spec);
  CHECK(parallel_band == parallel_again);

  const BandResult serial_band = uniform_band_serial(sample, estimator, spec);
  CHECK(parallel_band == serial_band);

  CHECK(parallel_band.band_halfwidth > 0.0);
  CHECK(parallel_band.band_halfwidth ==
        doctest::Approx(parallel_band.critical_value / std::sqrt(300.0)).epsilon(1e-15));
}

TEST_CASE("alpha ordering: stricter coverage needs a wider band") {
  const CensoredSample sample = tiny_sample(60, 10);
  UnconfoundedOptions options;
  options.propensity.method = PropensityMethod::ParametricLogit;
  const UnconfoundedEstimator original(sample, options);
  UnconfoundedOptions replicate_options = options;
  replicate_options.y_grid = original.y_grid();
  const CurveEstimator estimator = [replicate_options](const CensoredSample& s) {
    return UnconfoundedEstimator(s, replicate_options).dte();
  };
  BootstrapSpec strict;
  strict.replicates = 199;
  strict.seed = 5;
  strict.grid = original.y_grid();
  strict.alpha = 0.01;
  BootstrapSpec loose = strict;
  loose.alpha = 0.10;
  const BandResult strict_band = uniform_band(sample, estimator, strict);
  const BandResult loose_band = uniform_band(sample, estimator, loose);
  CHECK(strict_band.critical_value >= loose_band.critical_value);
  // Same replicate streams: the sup stats agree, only the quantile moves.
  CHECK(strict_band.replicate_sup_stats == loose_band.replicate_sup_stats);
}

TEST_CASE("failed replicates are excluded, counted, and capped") {
  const CensoredSample sample = tiny_sample(40, 11);
  BootstrapSpec spec;
  spec.replicates = 100;
  spec.seed = 71;
  spec.grid = {0.0};

  // Fails on a hash of the resample, roughly five percent of the time.
  const CurveEstimator flaky = [](const CensoredSample& s) {
    double hash = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) hash += s.q(i) * (i + 1);
    const double frac = hash - std::floor(hash);
    if (frac < 0.05) throw EstimationError("synthetic failure");
    EffectCurve curve;
    curve.grid = {0.0};
    curve.estimates = {frac};
    return curve;
  };
  const BandResult band = uniform_band(sample, flaky, spec);
  CHECK(band.failed_replicates > 0);
  CHECK(band.failed_replicates * 10 <= spec.replicates);
  CHECK(band.replicate_sup_stats.size() + band.failed_replicates ==
        static_cast<std::size_t>(spec.replicates));

  const CurveEstimator broken = [](const CensoredSample& s) -> EffectCurve {
    double hash = 0.0;
    for (std::size_t i = 0; i < s.size(); ++i) hash += s.q(i) * (i + 1);
    if (hash - std::floor(hash) < 0.5) throw EstimationError("synthetic failure");
    EffectCurve curve;
    curve.grid = {0.0};
    curve.estimates = {0.0};
    return curve;
  };
  CHECK_THROWS_WITH_AS(static_cast<void>(uniform_band(sample, broken, spec)),
                       doctest::Contains("bootstrap unstable"), EstimationError);
}

TEST_CASE("parallel_for propagates the first exception and serial matches") {
  std::vector<int> touched(100, 0);
  CHECK_THROWS_AS(parallel_for(100, 4,
                               [&](std::int64_t i) {
                                 if (i == 37) throw EstimationError("boom");
                                 touched[i] = 1;
                               }),
                  EstimationError);
  std::vector<int> serial(100, 0);
  serial_for(100, [&](std::int64_t i) { serial[i] = 1; });
  for (int v : serial) CHECK(v == 1);
}
