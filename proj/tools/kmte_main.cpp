// Command-line front end: estimate treatment effects on a CSV of
// right-censored observations, or run the simulation study. Machine-readable
// output: JSON for estimates, CSV for study reports.
//
// Exit codes: 0 success, 2 invalid configuration or data, 3 estimation
// failure (weak instrument, quantile beyond the identified region, unstable
// bootstrap, ...).

#include <cstdint>
#include <fstream>
#include <iostream>
#include <optional>
#include <random>
#include <sstream>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "kmte/bootstrap.hpp"
#include "kmte/data_model.hpp"
#include "kmte/effects_cic.hpp"
#include "kmte/effects_late.hpp"
#include "kmte/effects_unconfounded.hpp"
#include "kmte/simulation.hpp"

namespace {

using nlohmann::json;
using namespace kmte;

constexpr int kExitOk = 0;
constexpr int kExitValidation = 2;
constexpr int kExitEstimation = 3;

std::uint64_t fnv1a(const std::string& text) {
  std::uint64_t hash = 1469598103934665603ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 1099511628211ULL;
  }
  return hash;
}

std::string hex64(std::uint64_t value) {
  std::ostringstream out;
  out << std::hex << value;
  return out.str();
}

std::vector<double> parse_grid(const std::string& text, const char* name) {
  std::vector<double> grid;
  if (text.empty() || text == "auto") return grid;
  std::stringstream in(text);
  std::string field;
  while (std::getline(in, field, ',')) {
    try {
      grid.push_back(std::stod(field));
    } catch (const std::exception&) {
      throw ValidationError(std::string("cannot parse ") + name + " value '" + field + "'");
    }
  }
  return grid;
}

std::uint64_t resolve_seed(const std::optional<std::uint64_t>& seed) {
  if (seed.has_value()) return *seed;
  std::random_device device;
  const std::uint64_t drawn =
      (static_cast<std::uint64_t>(device()) << 32) ^ static_cast<std::uint64_t>(device());
  std::cerr << "seed: " << drawn << "\n";
  return drawn;
}

void write_text(const std::string& output_path, const std::string& text) {
  if (output_path.empty()) {
    std::cout << text;
    return;
  }
  std::ofstream out(output_path);
  if (!out.good()) throw ValidationError("cannot open output file: " + output_path);
  out << text;
  if (!out.good()) throw ValidationError("write failed: " + output_path);
}

struct EstimateArgs {
  std::string input;
  std::string estimand = "ate";
  std::string propensity = "logit";
  int series_order = 0;
  double bandwidth = 0.0;
  double trim = 0.01;
  bool band = false;
  int bootstrap_b = 999;
  double alpha = 0.05;
  std::string grid = "auto";
  std::string tau_grid = "auto";
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string output;
  bool allow_defective = false;
};

PropensitySpec make_propensity_spec(const EstimateArgs& args) {
  PropensitySpec spec;
  if (args.propensity == "logit") {
    spec.method = PropensityMethod::ParametricLogit;
  } else if (args.propensity == "series") {
    spec.method = PropensityMethod::SeriesLogit;
    spec.series_terms = args.series_order;
  } else if (args.propensity == "kernel") {
    spec.method = PropensityMethod::NWKernel;
    if (!(args.bandwidth > 0.0)) {
      throw ValidationError("the kernel propensity requires --bandwidth");
    }
    spec.bandwidth = args.bandwidth;
  } else {
    throw ValidationError("unknown propensity method: " + args.propensity);
  }
  spec.trim_epsilon = args.trim;
  return spec;
}

json propensity_summary(const PropensityFit& fit) {
  json out;
  out["method"] = propensity_method_name(fit.method());
  out["trim_epsilon"] = fit.trim_epsilon();
  out["clamp_count"] = fit.clamp_count();
  if (fit.method() == PropensityMethod::NWKernel) {
    out["bandwidth"] = fit.bandwidth();
  } else {
    out["coefficients"] = fit.coefficients();
    json basis = json::array();
    for (const auto& exps : fit.basis_exponents()) basis.push_back(exps);
    out["basis_exponents"] = basis;
  }
  if (!fit.warnings().empty()) out["warnings"] = fit.warnings();
  return out;
}

json support_summary(const SupportDiagnostics& support) {
  json groups = json::array();
  for (const GroupSupport& g : support.groups) {
    groups.push_back({{"label", g.label},
                      {"size", g.group_size},
                      {"uncensored", g.uncensored_count},
                      {"max_q", g.max_q},
                      {"max_censored", g.max_censored},
                      {"km_mass", g.km_mass}});
  }
  return json{{"groups", groups}, {"tau_h", support.tau_h}, {"defective", support.any_defective}};
}

// Point estimate, diagnostics, and a resample closure with every grid frozen
// from the original sample.
struct PreparedEstimate {
  EffectCurve curve;
  json diagnostics;
  json propensity;
  CurveEstimator replicate;
};

PreparedEstimate prepare(const CensoredSample& sample, EstimandKind kind,
                         const EstimateArgs& args) {
  PreparedEstimate prepared;
  const ValidationReport validation = validate_for_estimand(sample, kind);
  if (!validation.pass) throw ValidationError(validation.failures.front());
  json warnings = json::array();
  for (const std::string& w : validation.warnings) warnings.push_back(w);

  const std::vector<double> y_grid = parse_grid(args.grid, "--grid");
  const std::vector<double> tau_grid = parse_grid(args.tau_grid, "--tau-grid");

  switch (kind) {
    case EstimandKind::Ate:
    case EstimandKind::Dte:
    case EstimandKind::Qte: {
      UnconfoundedOptions options;
      options.propensity = make_propensity_spec(args);
      options.y_grid = y_grid;
      options.tau_grid = tau_grid;
      options.allow_defective = args.allow_defective;
      const UnconfoundedEstimator estimator(sample, options);
      prepared.curve = estimator.estimate(kind);
      prepared.propensity = propensity_summary(estimator.propensity());
      prepared.diagnostics = support_summary(estimator.support());
      UnconfoundedOptions frozen = options;
      frozen.y_grid = estimator.y_grid();
      frozen.tau_grid = estimator.tau_grid();
      prepared.replicate = [frozen, kind](const CensoredSample& s) {
        return UnconfoundedEstimator(s, frozen).estimate(kind);
      };
      break;
    }
    case EstimandKind::Late:
    case EstimandKind::Ldte:
    case EstimandKind::Lqte: {
      LateOptions options;
      options.instrument_propensity = make_propensity_spec(args);
      options.y_grid = y_grid;
      options.tau_grid = tau_grid;
      options.allow_defective = args.allow_defective;
      const LateEstimator estimator(sample, options);
      prepared.curve = estimator.estimate(kind);
      prepared.propensity = propensity_summary(estimator.instrument_propensity());
      prepared.diagnostics = support_summary(estimator.support());
      prepared.diagnostics["kappa_treated"] = estimator.kappa(true);
      prepared.diagnostics["kappa_control"] = estimator.kappa(false);
      if (estimator.max_boundary_clip() > 0.0) {
        prepared.diagnostics["complier_cdf_clip"] = estimator.max_boundary_clip();
      }
      LateOptions frozen = options;
      frozen.y_grid = estimator.y_grid();
      frozen.tau_grid = estimator.tau_grid();
      prepared.replicate = [frozen, kind](const CensoredSample& s) {
        return LateEstimator(s, frozen).estimate(kind);
      };
      break;
    }
    case EstimandKind::Att:
    case EstimandKind::Dtt:
    case EstimandKind::Qtt: {
      CicOptions options;
      options.y_grid = y_grid;
      options.tau_grid = tau_grid;
      options.allow_defective = args.allow_defective;
      const CicEstimator estimator(sample, options);
      prepared.curve = estimator.estimate(kind);
      prepared.propensity = nullptr;
      prepared.diagnostics = support_summary(estimator.support());
      for (const std::string& w : estimator.warnings()) warnings.push_back(w);
      CicOptions frozen = options;
      frozen.y_grid = estimator.y_grid();
      frozen.tau_grid = estimator.tau_grid();
      prepared.replicate = [frozen, kind](const CensoredSample& s) {
        return CicEstimator(s, frozen).estimate(kind);
      };
      break;
    }
  }
  prepared.diagnostics["warnings"] = warnings;
  return prepared;
}

int cmd_estimate(const EstimateArgs& args_in) {
  EstimateArgs args = args_in;
  const std::uint64_t seed = resolve_seed(args.seed);

  const auto kind = parse_estimand(args.estimand);
  if (!kind.has_value()) throw ValidationError("unknown estimand: " + args.estimand);

  const LoadResult loaded = load_csv(args.input);
  for (const std::string& w : loaded.warnings) std::cerr << "warning: " << w << "\n";

  const PreparedEstimate prepared = prepare(loaded.sample, *kind, args);

  json config{{"command", "estimate"},
              {"input", args.input},
              {"estimand", args.estimand},
              {"propensity", args.propensity},
              {"series_order", args.series_order},
              {"bandwidth", args.bandwidth},
              {"trim", args.trim},
              {"band", args.band},
              {"bootstrap_b", args.bootstrap_b},
              {"alpha", args.alpha},
              {"grid", args.grid},
              {"tau_grid", args.tau_grid},
              {"allow_defective", args.allow_defective},
              {"seed", seed}};

  json report;
  report["command"] = "estimate";
  report["estimand"] = args.estimand;
  report["n"] = loaded.sample.size();
  report["seed"] = seed;
  report["config"] = config;
  report["config_hash"] = hex64(fnv1a(config.dump()));
  report["grid"] = prepared.curve.grid;
  report["estimates"] = prepared.curve.estimates;
  report["diagnostics"] = prepared.diagnostics;
  report["propensity"] = prepared.propensity;

  if (args.band) {
    BootstrapSpec spec;
    spec.replicates = args.bootstrap_b;
    spec.alpha = args.alpha;
    spec.seed = seed;
    spec.grid = prepared.curve.grid;
    spec.threads = args.threads;
    const BandResult band = uniform_band(loaded.sample, prepared.replicate, spec);
    report["band"] = {{"alpha", args.alpha},
                      {"halfwidth", band.band_halfwidth},
                      {"critical_value", band.critical_value},
                      {"replicates", args.bootstrap_b},
                      {"failed_replicates", band.failed_replicates}};
  } else {
    report["band"] = nullptr;
  }

  write_text(args.output, report.dump(2) + "\n");
  return kExitOk;
}

struct SimulateArgs {
  std::string designs = "1,2,3,4";
  std::string censoring = "0,0.1,0.3";
  std::size_t reps = 1000;
  std::size_t n = 1000;
  int series_order = 4;
  double trim = 0.01;
  std::optional<std::uint64_t> seed;
  int threads = 0;
  std::string output;
};

int cmd_simulate(const SimulateArgs& args) {
  StudyConfig config;
  config.designs.clear();
  for (double v : parse_grid(args.designs, "--designs")) {
    config.designs.push_back(static_cast<int>(v));
  }
  config.censoring_levels = parse_grid(args.censoring, "--censoring");
  if (config.designs.empty() || config.censoring_levels.empty()) {
    throw ValidationError("--designs and --censoring must be non-empty");
  }
  config.replications = args.reps;
  config.sample_size = args.n;
  config.propensity = PropensitySpec{PropensityMethod::SeriesLogit, args.series_order};
  config.propensity.trim_epsilon = args.trim;
  config.seed = resolve_seed(args.seed);
  config.threads = args.threads;
  config.on_cell_done = [](int design, double censoring) {
    std::cerr << "done: design " << design << ", censoring " << censoring << "\n";
  };

  const SimulationReport report = run_study(config);
  for (const StudyRow& row : report.rows) {
    if (row.failures * 100 > row.reps) {
      std::cerr << "warning: design " << row.design << " censoring " << row.censoring << " "
                << estimator_label(row.estimator) << "/" << target_label(row.target) << ": "
                << row.failures << " failures\n";
    }
  }
  write_text(args.output, report.to_csv());
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Treatment effect estimation for right-censored outcomes"};
  app.require_subcommand(1);

  EstimateArgs estimate_args;
  CLI::App* estimate = app.add_subcommand("estimate", "Estimate a treatment effect from a CSV file");
  estimate->add_option("--input", estimate_args.input, "Input CSV path")->required();
  estimate->add_option("--estimand", estimate_args.estimand,
                       "One of ate,dte,qte,late,ldte,lqte,att,dtt,qtt");
  estimate->add_option("--propensity", estimate_args.propensity, "logit, series, or kernel");
  estimate->add_option("--series-order", estimate_args.series_order,
                       "Series basis size (0 = total degree up to three)");
  estimate->add_option("--bandwidth", estimate_args.bandwidth, "Kernel bandwidth");
  estimate->add_option("--trim", estimate_args.trim, "Propensity trimming epsilon");
  estimate->add_flag("--band", estimate_args.band, "Bootstrap a uniform confidence band");
  estimate->add_option("--bootstrap-b", estimate_args.bootstrap_b, "Bootstrap replicates");
  estimate->add_option("--alpha", estimate_args.alpha, "Band miscoverage level");
  estimate->add_option("--grid", estimate_args.grid, "Outcome grid: auto or v1,v2,...");
  estimate->add_option("--tau-grid", estimate_args.tau_grid, "Quantile grid: auto or t1,t2,...");
  std::uint64_t estimate_seed = 0;
  CLI::Option* estimate_seed_opt =
      estimate->add_option("--seed", estimate_seed, "Seed (drawn and printed when absent)");
  estimate->add_option("--threads", estimate_args.threads, "Worker pool cap (0 = default)");
  estimate->add_option("--output", estimate_args.output, "Output path (stdout when absent)");
  estimate->add_flag("--allow-defective", estimate_args.allow_defective,
                     "Accept truncated estimands when a group maximum is censored");

  SimulateArgs simulate_args;
  CLI::App* simulate = app.add_subcommand("simulate", "Run the Monte Carlo study");
  simulate->add_option("--designs", simulate_args.designs, "Comma list of design ids (1..4)");
  simulate->add_option("--censoring", simulate_args.censoring, "Comma list of censoring levels");
  simulate->add_option("--reps", simulate_args.reps, "Replications per cell");
  simulate->add_option("--n", simulate_args.n, "Sample size per replication");
  simulate->add_option("--series-order", simulate_args.series_order, "Series basis size");
  simulate->add_option("--trim", simulate_args.trim, "Propensity trimming epsilon");
  std::uint64_t simulate_seed = 0;
  CLI::Option* simulate_seed_opt =
      simulate->add_option("--seed", simulate_seed, "Seed (drawn and printed when absent)");
  simulate->add_option("--threads", simulate_args.threads, "Worker pool cap (0 = default)");
  simulate->add_option("--output", simulate_args.output, "Output path (stdout when absent)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return kExitValidation;
  }

  try {
    if (estimate->parsed()) {
      if (estimate_seed_opt->count() > 0) estimate_args.seed = estimate_seed;
      return cmd_estimate(estimate_args);
    }
    if (simulate_seed_opt->count() > 0) simulate_args.seed = simulate_seed;
    return cmd_simulate(simulate_args);
  } catch (const ValidationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cout << json{{"error", e.what()}, {"kind", "validation"}}.dump(2) << "\n";
    return kExitValidation;
  } catch (const EstimationError& e) {
    std::cerr << "error: " << e.what() << "\n";
    std::cout << json{{"error", e.what()}, {"kind", "estimation"}}.dump(2) << "\n";
    return kExitEstimation;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}
