#pragma once

#include <cstdint>

namespace paroc {

/// Deterministic 64-bit generator (splitmix64). We avoid std::uniform_*
/// distributions because their output sequences are implementation-defined;
/// audit reports and sweep plans must be reproducible from the seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ULL);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0,1) with 53 random mantissa bits.
  double uniform() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// +1 or -1 with equal probability.
  double sign() { return (next_u64() & 1) ? 1.0 : -1.0; }

 private:
  std::uint64_t state_;
};

}  // namespace paroc
