#pragma once

// SplitMix64 generator and per-record stream derivation. Every random draw in
// the library goes through this type so that outputs depend only on the seed
// and the record index.

#include <cstdint>

namespace anosov {

class SplitMix64 {
 public:
  using result_type = std::uint64_t;
  explicit SplitMix64(std::uint64_t seed) : state_(seed) {}

  static constexpr result_type min() { return 0; }
  static constexpr result_type max() { return ~result_type{0}; }

  result_type operator()() {
    std::uint64_t z = (state_ += 0x9E3779B97F4A7C15ULL);
    z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
    z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
    return z ^ (z >> 31);
  }

  /// Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>((*this)() >> 11) * 0x1.0p-53; }

  /// Independent stream for record `index` of a batch seeded with `seed`.
  static SplitMix64 stream(std::uint64_t seed, std::uint64_t index) {
    SplitMix64 mixer(seed ^ (index * 0xD1B54A32D192ED03ULL));
    return SplitMix64(mixer());
  }

 private:
  std::uint64_t state_;
};

}  // namespace anosov
