#pragma once

#include <cstdint>

namespace occkit {

// SplitMix64 (Steele, Lea & Flood, "Fast splittable pseudorandom number
// generators"). Chosen as the project-wide generator because the whole
// algorithm is three lines of fixed 64-bit constants, so any implementation
// in any language reproduces identical scenes from a seed.
struct SplitMix64 {
  std::uint64_t state;

  explicit SplitMix64(std::uint64_t seed) : state(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state += 0x9E3779B97F4A7C15ull);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
    return z ^ (z >> 31);
  }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n). Modulo bias is irrelevant at the n used here
  // and keeps the mapping trivially portable.
  std::uint64_t below(std::uint64_t n) { return next() % n; }

  int range_int(int lo, int hi_inclusive) {
    return lo + static_cast<int>(below(static_cast<std::uint64_t>(hi_inclusive - lo + 1)));
  }
};

}  // namespace occkit
