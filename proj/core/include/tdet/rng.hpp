#pragma once

#include <array>
#include <cstdint>

namespace tdet {

// splitmix64 step; used to expand seeds and derive independent streams.
std::uint64_t splitmix64(std::uint64_t& state);

// Mixes a stream tag into a seed so distinct pipeline stages never share draws.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);

// xoshiro256** seeded through splitmix64. Every draw is defined in terms of
// integer arithmetic and IEEE double operations only, so sequences are
// reproducible across platforms and languages.
class Rng {
 public:
  explicit Rng(std::uint64_t seed);

  std::uint64_t next();

  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);

  // Uniform integer in [0, n); n must be > 0. Rejection sampling, no bias.
  std::uint64_t below(std::uint64_t n);

  // Standard normal via Box-Muller (one value per call, no caching).
  double normal();

 private:
  std::array<std::uint64_t, 4> s_{};
};

}  // namespace tdet
