#pragma once

#include <cstdint>

namespace densepoint {

// SplitMix64 (Steele, Lea & Flood 2014). The raw 64-bit stream is fully
// specified and therefore identical on every platform; split() derives an
// independent child stream from the next draw.
//
// Single owner: not safe to share between threads.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : seed_(seed), state_(seed) {}

  std::uint64_t seed() const { return seed_; }

  std::uint64_t next_u64();

  // 53-bit uniform in [0, 1).
  double uniform();
  // Uniform in [lo, hi).
  double uniform(double lo, double hi);
  // Uniform integer in [lo, hi] inclusive, unbiased.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi);
  // Standard normal via Box-Muller.
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  Rng split();

 private:
  std::uint64_t seed_;
  std::uint64_t state_;
  bool has_spare_normal_ = false;
  double spare_normal_ = 0.0;
};

// The SplitMix64 output finalizer, exposed for seed derivation.
std::uint64_t mix64(std::uint64_t z);

}  // namespace densepoint
