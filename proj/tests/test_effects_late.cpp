#include <cmath>

#include "doctest.h"
#include "kmte/effects_late.hpp"
#include "kmte/numerics.hpp"
#include "kmte/rng.hpp"
#include "oracles.hpp"

using namespace kmte;

namespace {

struct RawLateData {
  std::vector<double> q;
  std::vector<std::uint8_t> delta;
  std::vector<std::uint8_t> t;
  std::vector<std::uint8_t> z;
  std::vector<double> x;
  int k = 0;
};

CensoredSample to_sample(const RawLateData& raw) {
  SampleSchema schema;
  schema.covariate_count = raw.k;
  schema.has_treatment = true;
  schema.has_instrument = true;
  return CensoredSample(schema, raw.q, raw.delta, raw.t, raw.x, raw.z, {}, {});
}

// Perfect compliance, instrument assigned by fair coin, unit treatment
// effect on a continuous baseline outcome.
RawLateData perfect_compliance(std::size_t n, std::uint64_t seed, double effect = 1.0) {
  RawLateData raw;
  RngStream rng(seed);
  for (std::size_t i = 0; i < n; ++i) {
    const bool z = rng.bernoulli(0.5);
    const double y = rng.normal() + (z ? effect : 0.0);
    raw.q.push_back(y);
    raw.delta.push_back(1);
    raw.t.push_back(z ? 1 : 0);
    raw.z.push_back(z ? 1 : 0);
  }
  return raw;
}

LateOptions intercept_only() {
  LateOptions options;
  options.instrument_propensity.method = PropensityMethod::ParametricLogit;
  return options;
}

}  // namespace

TEST_CASE("first-stage contrasts under perfect compliance") {
  // With t == z and an exactly balanced instrument (so the intercept-only
  // fit is one half), the treated-arm contrast is one and the control-arm
  // contrast is minus one: the z = 1 side never supplies control rows.
  RngStream rng(9);
  RawLateData raw;
  for (std::size_t i = 0; i < 400; ++i) {
    const bool z = i < 200;
    raw.q.push_back(rng.normal() + (z ? 1.0 : 0.0));
    raw.delta.push_back(1);
    raw.t.push_back(z ? 1 : 0);
    raw.z.push_back(z ? 1 : 0);
  }
  const LateEstimator estimator(to_sample(raw), intercept_only());
  CHECK(estimator.kappa(true) == doctest::Approx(1.0).epsilon(1e-9));
  CHECK(estimator.kappa(false) == doctest::Approx(-1.0).epsilon(1e-9));
}

TEST_CASE("an irrelevant instrument trips the weak-first-stage guard") {
  RngStream rng(12);
  RawLateData raw;
  for (std::size_t i = 0; i < 40000; ++i) {
    raw.q.push_back(rng.normal());
    raw.delta.push_back(1);
    raw.t.push_back(rng.bernoulli(0.5) ? 1 : 0);
    raw.z.push_back(rng.bernoulli(0.5) ? 1 : 0);
  }
  CHECK_THROWS_WITH_AS(static_cast<void>(LateEstimator(to_sample(raw), intercept_only())),
                       doctest::Contains("weak first stage"), EstimationError);
}

TEST_CASE("complier means reduce to arm means under perfect compliance") {
  const RawLateData raw = perfect_compliance(600, 31);
  const LateEstimator estimator(to_sample(raw), intercept_only());

  double mean1 = 0.0, mean0 = 0.0;
  std::size_t n1 = 0, n0 = 0;
  for (std::size_t i = 0; i < raw.q.size(); ++i) {
    if (raw.t[i]) {
      mean1 += raw.q[i];
      ++n1;
    } else {
      mean0 += raw.q[i];
      ++n0;
    }
  }
  mean1 /= n1;
  mean0 /= n0;

  // The empty off-diagonal cells contribute nothing; kappa rescales the
  // z-cell average back to the arm mean (exactly only at a balanced
  // instrument, hence the loose tolerance).
  CHECK(estimator.complier_mean(true) == doctest::Approx(mean1).epsilon(0.02));
  CHECK(estimator.complier_mean(false) == doctest::Approx(mean0).epsilon(0.02));
}

TEST_CASE("uncensored complier estimates match the direct instrumented oracle") {
  RngStream rng(77);
  for (int rep = 0; rep < 20; ++rep) {
    const std::size_t n = 80 + rng.uniform_index(120);
    RawLateData raw;
    raw.k = 1;
    std::vector<int> t_int, z_int;
    for (std::size_t i = 0; i < n; ++i) {
      const double x = rng.normal();
      const bool z = rng.bernoulli(logistic(0.4 * x));
      // Two-sided noncompliance, monotone in z.
      const bool t = z ? rng.bernoulli(0.9) : rng.bernoulli(0.15);
      const double y = rng.normal() + (t ? 1.0 : 0.0) + 0.3 * x;
      raw.q.push_back(y);
      raw.delta.push_back(1);
      raw.t.push_back(t ? 1 : 0);
      raw.z.push_back(z ? 1 : 0);
      raw.x.push_back(x);
      t_int.push_back(t ? 1 : 0);
      z_int.push_back(z ? 1 : 0);
    }
    LateOptions options = intercept_only();
    options.y_grid = {-0.5, 0.3, 1.1};
    const CensoredSample sample = to_sample(raw);
    const LateEstimator estimator(sample, options);

    const std::vector<double> e = estimator.instrument_propensity().fitted();
    const oracle::LateOracle expected = oracle::late_estimates(raw.q, t_int, z_int, e);
    CHECK(std::abs(estimator.kappa(true) - expected.kappa_treated) < 1e-10);
    CHECK(std::abs(estimator.kappa(false) - expected.kappa_control) < 1e-10);
    CHECK(std::abs(estimator.complier_mean(true) - expected.mean_treated) < 1e-10);
    CHECK(std::abs(estimator.complier_mean(false) - expected.mean_control) < 1e-10);
    CHECK(std::abs(estimator.late().estimates[0] - expected.late) < 1e-10);

    const EffectCurve cdf1 = estimator.complier_cdf(true);
    for (std::size_t g = 0; g < options.y_grid.size(); ++g) {
      const double oracle_value = oracle::late_complier_cdf(raw.q, t_int, z_int, e, true,
                                                            options.y_grid[g],
                                                            expected.kappa_treated);
      CHECK(std::abs(cdf1.estimates[g] - oracle_value) < 1e-10);
    }
  }
}

TEST_CASE("identical cell outcomes with a balanced instrument cancel exactly") {
  // Same outcome multiset in every (t, z) cell and a balanced instrument:
  // the four inverse-probability terms cancel point by point, so the local
  // distribution and quantile effects are identically zero.
  RawLateData raw;
  auto add_cell = [&](int t, int z, int count) {
    for (int i = 0; i < count; ++i) {
      raw.q.push_back(0.37 + 0.11 * (i % 10));
      raw.delta.push_back(1);
      raw.t.push_back(t);
      raw.z.push_back(z);
    }
  };
  add_cell(1, 1, 40);
  add_cell(1, 0, 10);
  add_cell(0, 1, 10);
  add_cell(0, 0, 40);

  LateOptions options = intercept_only();
  options.tau_grid = {0.25, 0.5, 0.75};
  const LateEstimator estimator(to_sample(raw), options);
  CHECK(estimator.kappa(true) == doctest::Approx(0.6).epsilon(1e-10));
  CHECK(estimator.kappa(false) == doctest::Approx(-0.6).epsilon(1e-10));
  CHECK(std::abs(estimator.late().estimates[0]) < 1e-10);
  for (double v : estimator.ldte().estimates) CHECK(std::abs(v) < 1e-10);
  for (double v : estimator.lqte().estimates) CHECK(std::abs(v) < 1e-10);
}

TEST_CASE("relabeling the instrument flips kappa and preserves the estimates") {
  RngStream rng(2025);
  const std::size_t n = 500;
  RawLateData raw;
  raw.k = 1;
  for (std::size_t i = 0; i < n; ++i) {
    const double x = rng.normal();
    const bool z = rng.bernoulli(logistic(0.5 * x));
    const bool t = z ? rng.bernoulli(0.85) : rng.bernoulli(0.2);
    raw.q.push_back(rng.normal() + (t ? 1.0 : 0.0));
    raw.delta.push_back(rng.bernoulli(0.85) ? 1 : 0);
    raw.t.push_back(t ? 1 : 0);
    raw.z.push_back(z ? 1 : 0);
    raw.x.push_back(x);
  }
  RawLateData flipped = raw;
  for (auto& v : flipped.z) v ^= 1;

  LateOptions options;
  options.instrument_propensity.method = PropensityMethod::ParametricLogit;
  options.allow_defective = true;
  options.y_grid = {-0.5, 0.5, 1.5};
  const LateEstimator original(to_sample(raw), options);
  const LateEstimator relabeled(to_sample(flipped), options);

  CHECK(original.kappa(true) == doctest::Approx(-relabeled.kappa(true)).epsilon(1e-7));
  CHECK(original.kappa(false) == doctest::Approx(-relabeled.kappa(false)).epsilon(1e-7));
  CHECK(original.late().estimates[0] ==
        doctest::Approx(relabeled.late().estimates[0]).epsilon(1e-6));
  const EffectCurve a = original.ldte();
  const EffectCurve b = relabeled.ldte();
  for (std::size_t i = 0; i < a.estimates.size(); ++i) {
    CHECK(a.estimates[i] == doctest::Approx(b.estimates[i]).epsilon(1e-6));
  }
}

TEST_CASE("constant-shift design recovers a unit local quantile effect") {
  // Mini Monte Carlo at modest size; the heavyweight version runs in the
  // acceptance suite.
  RngStream master(606);
  const int reps = 40;
  double mean_late = 0.0, sq_late = 0.0;
  double mean_lqte = 0.0, sq_lqte = 0.0;
  for (int r = 0; r < reps; ++r) {
    RngStream rng = master.child(r + 1);
    RawLateData raw;
    for (std::size_t i = 0; i < 2000; ++i) {
      const bool z = rng.bernoulli(0.5);
      const bool t = z;
      raw.q.push_back(rng.normal() + (t ? 1.0 : 0.0));
      raw.delta.push_back(1);
      raw.t.push_back(t ? 1 : 0);
      raw.z.push_back(z ? 1 : 0);
    }
    LateOptions options = intercept_only();
    options.tau_grid = {0.5};
    const LateEstimator estimator(to_sample(raw), options);
    const double late = estimator.late().estimates[0];
    const double lqte = estimator.lqte().estimates[0];
    mean_late += late / reps;
    sq_late += late * late / reps;
    mean_lqte += lqte / reps;
    sq_lqte += lqte * lqte / reps;
  }
  const double se_late = std::sqrt((sq_late - mean_late * mean_late) / reps);
  const double se_lqte = std::sqrt((sq_lqte - mean_lqte * mean_lqte) / reps);
  CHECK(std::abs(mean_late - 1.0) < 3.0 * se_late);
  CHECK(std::abs(mean_lqte - 1.0) < 3.0 * se_lqte);
}
