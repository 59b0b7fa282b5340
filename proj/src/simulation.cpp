#include "kmte/simulation.hpp"

#include <algorithm>
#include <array>
#include <charconv>
#include <cmath>
#include <limits>
#include <map>
#include <mutex>
#include <sstream>

#include "kmte/dist_ops.hpp"
#include "kmte/effects_unconfounded.hpp"
#include "kmte/km_core.hpp"
#include "kmte/numerics.hpp"
#include "kmte/parallel.hpp"

namespace kmte {

namespace {

struct DesignMoments {
  // Conditional law of each potential outcome given the covariate x:
  // mean_t(x) = intercept_t + slope_t * x; y1 = y0 + shift(x) [+ e1].
  double intercept0, slope0;
  double intercept1, slope1;
  bool treated_extra_noise;  // designs 2 and 4 add an independent e1 to y1
  double sigma0() const { return 1.0; }
  double sigma1() const { return treated_extra_noise ? std::sqrt(2.0) : 1.0; }
};

DesignMoments design_moments(int design_id) {
  switch (design_id) {
    case 1: return {0.0, 0.0, 1.0, 0.0, false};
    case 2: return {0.0, 0.0, 1.0, 0.0, true};
    case 3: return {0.0, 1.0, 1.0, 2.0, false};
    case 4: return {0.0, 1.0, 1.0, 2.0, true};
    default: throw ValidationError("design_id must be 1..4");
  }
}

}  // namespace

double censoring_probability(int design_id, double rate) {
  const DesignMoments m = design_moments(design_id);
  return normal_expectation([&](double x) {
    const double p_treat = logistic(0.5 * x);
    const double censored_treated =
        exp_censor_probability(m.intercept1 + m.slope1 * x, m.sigma1(), rate);
    const double censored_control =
        exp_censor_probability(m.intercept0 + m.slope0 * x, m.sigma0(), rate);
    return p_treat * censored_treated + (1.0 - p_treat) * censored_control;
  });
}

double calibrate_censoring(int design_id, double target) {
  if (!(target > 0.0 && target < 1.0)) throw ValidationError("target censoring must be in (0, 1)");
  double lo = 0.0;
  double hi = 1.0;
  while (censoring_probability(design_id, hi) < target) {
    hi *= 2.0;
    if (hi > 1e6) throw ValidationError("censoring target is not attainable in this design");
  }
  for (int iter = 0; iter < 200; ++iter) {
    const double mid = 0.5 * (lo + hi);
    const double value = censoring_probability(design_id, mid);
    if (std::abs(value - target) < 1e-4) return mid;
    (value < target ? lo : hi) = mid;
  }
  return 0.5 * (lo + hi);
}

CensoredSample generate_with_rate(const DesignSpec& spec, double censor_rate, RngStream& rng) {
  if (spec.n < 2) throw ValidationError("sample size must be at least 2");
  const DesignMoments m = design_moments(spec.design_id);

  std::vector<double> q(spec.n);
  std::vector<std::uint8_t> delta(spec.n);
  std::vector<std::uint8_t> treatment(spec.n);
  std::vector<double> covariates(spec.n);

  for (std::size_t i = 0; i < spec.n; ++i) {
    const double x = rng.normal();
    const double e0 = rng.normal();
    const double e1 = rng.normal();
    const bool treated = rng.bernoulli(logistic(0.5 * x));
    const double y0 = m.intercept0 + m.slope0 * x + e0;
    const double y1 = m.intercept1 + m.slope1 * x + e0 + (m.treated_extra_noise ? e1 : 0.0);
    const double y = treated ? y1 : y0;
    covariates[i] = x;
    treatment[i] = treated ? 1 : 0;
    if (spec.target_censoring > 0.0) {
      const double c = rng.exponential(censor_rate);
      q[i] = std::min(y, c);
      delta[i] = y <= c ? 1 : 0;
    } else {
      q[i] = y;
      delta[i] = 1;
    }
  }

  SampleSchema schema;
  schema.covariate_count = 1;
  schema.has_treatment = true;
  return CensoredSample(schema, std::move(q), std::move(delta), std::move(treatment),
                        std::move(covariates), {}, {}, {});
}

CensoredSample generate(const DesignSpec& spec, RngStream& rng) {
  double rate = 0.0;
  if (spec.target_censoring > 0.0) {
    static std::mutex mutex;
    static std::map<std::pair<int, double>, double> cache;
    std::lock_guard<std::mutex> lock(mutex);
    auto key = std::make_pair(spec.design_id, spec.target_censoring);
    auto it = cache.find(key);
    if (it == cache.end()) {
      it = cache.emplace(key, calibrate_censoring(spec.design_id, spec.target_censoring)).first;
    }
    rate = it->second;
  }
  return generate_with_rate(spec, rate, rng);
}

const char* target_label(StudyTarget target) {
  switch (target) {
    case StudyTarget::MeanTreated: return "ey1";
    case StudyTarget::MeanControl: return "ey0";
    case StudyTarget::MedianTreated: return "med1";
    case StudyTarget::MedianControl: return "med0";
    case StudyTarget::Ate: return "ate";
    case StudyTarget::MedianGap: return "qte50";
  }
  return "?";
}

double target_truth(StudyTarget target) {
  switch (target) {
    case StudyTarget::MeanTreated: return 1.0;
    case StudyTarget::MeanControl: return 0.0;
    case StudyTarget::MedianTreated: return 1.0;
    case StudyTarget::MedianControl: return 0.0;
    case StudyTarget::Ate: return 1.0;
    case StudyTarget::MedianGap: return 1.0;
  }
  return 0.0;
}

const char* estimator_label(StudyEstimator estimator) {
  switch (estimator) {
    case StudyEstimator::TwoStepKm: return "2skm";
    case StudyEstimator::Ignore: return "ignore";
    case StudyEstimator::Uncensored: return "uncens";
  }
  return "?";
}

namespace {

ReplicateEstimates from_arm_cdfs(const StepDistribution& treated, const StepDistribution& control) {
  ReplicateEstimates est;
  est.values[0] = step_mean(treated);
  est.values[1] = step_mean(control);
  est.values[2] = generalized_inverse(treated, 0.5);
  est.values[3] = generalized_inverse(control, 0.5);
  est.values[4] = est.values[0] - est.values[1];
  est.values[5] = est.values[2] - est.values[3];
  return est;
}

// Plain Horvitz-Thompson curve: mass (1/n)/score at every kept row.
ReplicateEstimates plain_ipw(const CensoredSample& sample, const PropensitySpec& spec) {
  const PropensityFit fit = fit_propensity(sample, spec);
  const double n = static_cast<double>(sample.size());
  std::vector<std::pair<double, double>> treated_atoms;
  std::vector<std::pair<double, double>> control_atoms;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    const double score = fit.fitted()[i];
    if (sample.treated(i)) {
      treated_atoms.emplace_back(sample.q(i), 1.0 / (n * score));
    } else {
      control_atoms.emplace_back(sample.q(i), 1.0 / (n * (1.0 - score)));
    }
  }
  if (treated_atoms.empty() || control_atoms.empty()) {
    throw EstimationError("an arm is empty");
  }
  return from_arm_cdfs(StepDistribution::from_atoms(std::move(treated_atoms)),
                       StepDistribution::from_atoms(std::move(control_atoms)));
}

}  // namespace

ReplicateEstimates evaluate_two_step(const CensoredSample& sample, const PropensitySpec& spec) {
  UnconfoundedOptions options;
  options.propensity = spec;
  options.allow_defective = true;  // the estimator is the truncated sum when the tail is censored
  options.y_grid = {0.0};          // grids are unused for the study targets
  options.tau_grid = {0.5};
  const UnconfoundedEstimator estimator(sample, options);
  return from_arm_cdfs(estimator.potential_cdf(true), estimator.potential_cdf(false));
}

ReplicateEstimates naive_ignore(const CensoredSample& sample, const PropensitySpec& spec) {
  return plain_ipw(sample, spec);
}

ReplicateEstimates naive_uncensored(const CensoredSample& sample, const PropensitySpec& spec) {
  std::vector<std::size_t> kept;
  for (std::size_t i = 0; i < sample.size(); ++i) {
    if (sample.uncensored(i)) kept.push_back(i);
  }
  if (kept.empty()) throw EstimationError("no uncensored rows left");
  if (kept.size() == sample.size()) return plain_ipw(sample, spec);
  return plain_ipw(sample.subset(kept), spec);
}

const StudyRow& SimulationReport::find(int design, double censoring, StudyEstimator estimator,
                                       StudyTarget target) const {
  for (const StudyRow& row : rows) {
    if (row.design == design && row.censoring == censoring && row.estimator == estimator &&
        row.target == target) {
      return row;
    }
  }
  throw ValidationError("report row not found");
}

std::string SimulationReport::to_csv() const {
  auto shortest = [](double v) {
    std::array<char, 64> buf;
    auto [ptr, ec] = std::to_chars(buf.data(), buf.data() + buf.size(), v);
    return std::string(buf.data(), ptr);
  };
  std::ostringstream out;
  out << "design,censoring,estimator,target,bias_pp,rmse,reps,failures\n";
  for (const StudyRow& row : rows) {
    out << row.design << ',' << shortest(row.censoring) << ',' << estimator_label(row.estimator)
        << ',' << target_label(row.target) << ',' << shortest(row.bias_pp) << ','
        << shortest(row.rmse) << ',' << row.reps << ',' << row.failures << "\n";
  }
  return out.str();
}

namespace {

struct CellAccumulator {
  // [estimator][replicate][target]; NaN marks a failed replicate.
  std::vector<std::array<std::array<double, 6>, 3>> replicates;
};

template <typename Driver>
SimulationReport run_study_impl(const StudyConfig& config, Driver&& driver) {
  if (config.replications < 1) throw ValidationError("replications must be at least 1");
  if (config.sample_size < 2) throw ValidationError("sample size must be at least 2");
  for (int design : config.designs) design_moments(design);
  for (double level : config.censoring_levels) {
    if (level < 0.0 || level >= 1.0) throw ValidationError("censoring level must be in [0, 1)");
  }

  SimulationReport report;
  const RngStream master(config.seed);

  std::uint64_t cell_index = 0;
  for (int design : config.designs) {
    for (double level : config.censoring_levels) {
      const double rate = level > 0.0 ? calibrate_censoring(design, level) : 0.0;
      const RngStream cell_stream = master.child(++cell_index);

      CellAccumulator acc;
      acc.replicates.resize(config.replications);

      driver(static_cast<std::int64_t>(config.replications), [&](std::int64_t r) {
        RngStream rep_stream = cell_stream.child(static_cast<std::uint64_t>(r) + 1);
        DesignSpec spec{design, config.sample_size, level};
        const CensoredSample sample = generate_with_rate(spec, rate, rep_stream);
        for (std::size_t e = 0; e < kStudyEstimators.size(); ++e) {
          std::array<double, 6>& slot = acc.replicates[r][e];
          try {
            ReplicateEstimates est;
            switch (kStudyEstimators[e]) {
              case StudyEstimator::TwoStepKm: est = evaluate_two_step(sample, config.propensity); break;
              case StudyEstimator::Ignore: est = naive_ignore(sample, config.propensity); break;
              case StudyEstimator::Uncensored: est = naive_uncensored(sample, config.propensity); break;
            }
            slot = est.values;
          } catch (const EstimationError&) {
            slot.fill(std::numeric_limits<double>::quiet_NaN());
          } catch (const ValidationError&) {
            slot.fill(std::numeric_limits<double>::quiet_NaN());
          }
        }
      });

      for (std::size_t e = 0; e < kStudyEstimators.size(); ++e) {
        for (std::size_t t = 0; t < kStudyTargets.size(); ++t) {
          StudyRow row;
          row.design = design;
          row.censoring = level;
          row.estimator = kStudyEstimators[e];
          row.target = kStudyTargets[t];
          row.reps = config.replications;
          const double truth = target_truth(kStudyTargets[t]);
          double sum_err = 0.0;
          double sum_sq = 0.0;
          std::size_t kept = 0;
          for (std::size_t r = 0; r < config.replications; ++r) {
            const double value = acc.replicates[r][e][t];
            if (std::isnan(value)) continue;
            const double err = value - truth;
            sum_err += err;
            sum_sq += err * err;
            ++kept;
          }
          row.failures = config.replications - kept;
          if (kept > 0) {
            row.bias_pp = 100.0 * sum_err / static_cast<double>(kept);
            row.rmse = std::sqrt(sum_sq / static_cast<double>(kept));
          } else {
            row.bias_pp = std::numeric_limits<double>::quiet_NaN();
            row.rmse = std::numeric_limits<double>::quiet_NaN();
          }
          report.rows.push_back(row);
        }
      }
      if (config.on_cell_done) config.on_cell_done(design, level);
    }
  }
  return report;
}

}  // namespace

SimulationReport run_study(const StudyConfig& config) {
  return run_study_impl(config, [&](std::int64_t count, auto&& body) {
    parallel_for(count, config.threads, body);
  });
}

SimulationReport run_study_serial(const StudyConfig& config) {
  return run_study_impl(config,
                        [](std::int64_t count, auto&& body) { serial_for(count, body); });
}

}  // namespace kmte
