#pragma once

#include <cstdint>
#include <random>

namespace fedwad {

/// Portable seeded generator (algorithm "fwd-rng/1").
///
/// The engine is std::mt19937_64, whose output sequence is fixed by the C++
/// standard. Distributions are implemented here rather than taken from
/// <random>, because the standard library's distributions differ between
/// vendors:
///   uniform()  = (next() >> 11) * 2^-53, in [0, 1)
///   normal()   = Box-Muller on two uniforms, cosine branch first, sine
///                branch cached for the following call
///   below(n)   = rejection sampling on next() for an unbiased index
class Rng {
 public:
  static constexpr const char* kAlgorithm = "fwd-rng/1 (mt19937_64 + box-muller)";

  explicit Rng(std::uint64_t seed) : engine_(seed) {}

  std::uint64_t next() { return engine_(); }
  double uniform();
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }
  double normal();
  std::uint64_t below(std::uint64_t n);

 private:
  std::mt19937_64 engine_;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// SplitMix64 finalizer; used to derive independent sub-seeds from a base seed.
std::uint64_t mix_seed(std::uint64_t seed, std::uint64_t stream);

}  // namespace fedwad
