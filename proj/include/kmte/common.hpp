#pragma once

#include <stdexcept>
#include <string>

namespace kmte {

// Numeric slack used for mass identities and for cross-route comparisons of
// product-limit quantities.
inline constexpr double kMassEpsilon = 1e-10;

// Slack applied when inverting step CDFs, so that thresholds produced by one
// accumulation order do not flip the selected atom against thresholds
// produced by another. Kept two orders of magnitude below kMassEpsilon.
inline constexpr double kQuantileSlack = 1e-12;

// Structurally invalid input: schema violations, bad configuration,
// impossible requests. The CLI maps these to exit code 2.
class ValidationError : public std::runtime_error {
 public:
  explicit ValidationError(const std::string& what) : std::runtime_error(what) {}
};

// Estimation failure on structurally valid input: separation, weak
// instruments, quantiles beyond the identified region, unstable bootstraps.
// The CLI maps these to exit code 3.
class EstimationError : public std::runtime_error {
 public:
  explicit EstimationError(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace kmte
