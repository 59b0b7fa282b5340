// Compares the OpenMP drivers against their serial reference implementations
// on the two replicate-parallel workloads, and verifies that both produce
// bit-identical results.

#include <chrono>
#include <cstdio>
#include <string>

#include "kmte/bootstrap.hpp"
#include "kmte/effects_unconfounded.hpp"
#include "kmte/parallel.hpp"
#include "kmte/rng.hpp"
#include "kmte/simulation.hpp"

using namespace kmte;

namespace {

double seconds_since(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

template <typename Fn>
double time_once(Fn&& fn) {
  const auto start = std::chrono::steady_clock::now();
  fn();
  return seconds_since(start);
}

}  // namespace

int main() {
  const int threads = hardware_threads();
  std::printf("worker pool: %d threads\n\n", threads);

  // Workload 1: bootstrap band for a distribution effect curve.
  {
    RngStream gen(7);
    DesignSpec design{2, 2000, 0.10};
    const CensoredSample sample = generate(design, gen);
    UnconfoundedOptions options;
    options.propensity = PropensitySpec{PropensityMethod::SeriesLogit, 4};
    options.allow_defective = true;
    const UnconfoundedEstimator original(sample, options);
    UnconfoundedOptions frozen = options;
    frozen.y_grid = original.y_grid();
    const CurveEstimator estimator = [frozen](const CensoredSample& s) {
      return UnconfoundedEstimator(s, frozen).dte();
    };
    BootstrapSpec spec;
    spec.replicates = 200;
    spec.seed = 99;
    spec.grid = original.y_grid();

    BandResult serial_result;
    BandResult parallel_result;
    const double serial_time =
        time_once([&] { serial_result = uniform_band_serial(sample, estimator, spec); });
    const double parallel_time =
        time_once([&] { parallel_result = uniform_band(sample, estimator, spec); });
    std::printf("bootstrap band   (n=2000, B=200): serial %.2fs, parallel %.2fs, speedup %.2fx, %s\n",
                serial_time, parallel_time, serial_time / parallel_time,
                serial_result == parallel_result ? "results identical" : "RESULTS DIFFER");
  }

  // Workload 2: a small simulation-study cell.
  {
    StudyConfig config;
    config.designs = {1};
    config.censoring_levels = {0.10};
    config.replications = 200;
    config.sample_size = 1000;
    config.seed = 5;

    std::string serial_csv;
    std::string parallel_csv;
    const double serial_time = time_once([&] { serial_csv = run_study_serial(config).to_csv(); });
    const double parallel_time = time_once([&] { parallel_csv = run_study(config).to_csv(); });
    std::printf("simulation cell  (n=1000, R=200): serial %.2fs, parallel %.2fs, speedup %.2fx, %s\n",
                serial_time, parallel_time, serial_time / parallel_time,
                serial_csv == parallel_csv ? "results identical" : "RESULTS DIFFER");
  }
  return 0;
}
