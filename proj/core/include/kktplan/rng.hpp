#pragma once

#include <cstdint>

namespace kktplan {

/// Counter-based SplitMix64 stream. Every random draw in the library comes
/// from one of these, so a single seed reproduces a run bit for bit.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(next() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  /// Uniform integer in [0, n).
  std::uint64_t below(std::uint64_t n) { return n == 0 ? 0 : next() % n; }

  /// Seed of the index-th child (trial, partition, ...): seed xor a scrambled
  /// index. A raw index would let seeds that differ only in low bits draw the
  /// same set of children in a different order.
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t index) { return seed ^ Rng(index).next(); }
  static Rng derive(std::uint64_t seed, std::uint64_t index) { return Rng(derive_seed(seed, index)); }

 private:
  std::uint64_t state_;
};

}  // namespace kktplan
