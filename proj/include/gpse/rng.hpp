#pragma once

#include <complex>
#include <cstdint>

namespace gpse {

// Seedable, splittable generator (xoshiro256++ seeded through splitmix64).
// Every stochastic operation in the library takes one of these by reference;
// a single instance must not be shared across threads, but split() children
// are independent streams and may run concurrently.
class Rng {
 public:
  explicit Rng(uint64_t seed);

  // Independent child stream derived from (seed, stream id). Stable across
  // runs: same parent seed + id -> same child sequence.
  Rng split(uint64_t stream) const;

  uint64_t next_u64();
  double uniform();                       // [0, 1)
  double uniform(double lo, double hi);
  double normal();                        // N(0, 1)
  // Circularly symmetric complex normal with unit complex variance:
  // real and imaginary parts are independent N(0, 1/2).
  std::complex<double> complex_normal();
  // Uniform integer in [0, n)
  uint64_t below(uint64_t n);

 private:
  uint64_t s_[4];
  double cached_normal_ = 0.0;
  bool has_cached_ = false;
  uint64_t seed_ = 0;
};

}  // namespace gpse
