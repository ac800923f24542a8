#pragma once

#include <cstdint>

namespace vn {

/// splitmix64. Small, fully specified, and reproducible in any language.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  /// Uniform integer in [0, bound). Plain modulo; the bias is below 2^-40 for
  /// every bound used here.
  std::uint64_t below(std::uint64_t bound) { return next() % bound; }

  /// Standard normal via Box-Muller (one draw per call, two uniforms).
  double normal();

  std::uint64_t state() const { return state_; }

 private:
  std::uint64_t state_;
};

}  // namespace vn
