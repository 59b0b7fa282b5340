#pragma once

#include <cmath>
#include <cstdint>
#include <random>

namespace kmte {

// SplitMix64 finalizer, used to turn correlated seed material into
// well-separated engine seeds.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9E3779B97F4A7C15ULL;
  x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
  x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
  return x ^ (x >> 31);
}

// Deterministic random stream with explicit child-stream derivation.
//
// The engine is std::mt19937_64, whose output sequence is fully specified by
// the standard; all variate transforms are implemented here rather than via
// <random> distributions, so identical seeds give identical draws on every
// platform. Child streams depend only on (seed, index), never on how many
// draws the parent has made, which is what makes replicate-indexed
// parallelism reproducible.
class RngStream {
 public:
  explicit RngStream(std::uint64_t seed) : seed_(seed), engine_(splitmix64(seed)) {}

  std::uint64_t seed() const { return seed_; }

  RngStream child(std::uint64_t index) const {
    return RngStream(splitmix64(splitmix64(seed_) + index));
  }

  std::uint64_t next_raw() { return engine_(); }

  // Uniform on [0, 1).
  double uniform() { return static_cast<double>(engine_() >> 11) * 0x1.0p-53; }

  // Uniform on (0, 1]; safe as a log argument.
  double uniform_positive() {
    return (static_cast<double>(engine_() >> 11) + 1.0) * 0x1.0p-53;
  }

  // Standard normal via Box-Muller; the paired draw is cached.
  double normal() {
    if (has_spare_) {
      has_spare_ = false;
      return spare_;
    }
    const double u1 = uniform_positive();
    const double u2 = uniform();
    const double radius = std::sqrt(-2.0 * std::log(u1));
    const double angle = 6.283185307179586476925286766559 * u2;
    spare_ = radius * std::sin(angle);
    has_spare_ = true;
    return radius * std::cos(angle);
  }

  double exponential(double rate) { return -std::log(uniform_positive()) / rate; }

  bool bernoulli(double p) { return uniform() < p; }

  // Unbiased integer on [0, bound); bound must be positive.
  std::uint64_t uniform_index(std::uint64_t bound) {
    const std::uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      const std::uint64_t r = engine_();
      if (r >= threshold) return r % bound;
    }
  }

 private:
  std::uint64_t seed_;
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace kmte
