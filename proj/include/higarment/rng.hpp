#pragma once

#include <cstdint>
#include <string_view>

namespace hg {

// SplitMix64 step (Steele, Lea, Flood 2014 constants). Used to expand seeds.
std::uint64_t splitmix64(std::uint64_t& state);

// xoshiro256** 1.0 (Blackman & Vigna). Seeded through SplitMix64 so any
// 64-bit seed gives a well-mixed state; output is platform independent.
class Rng {
 public:
  explicit Rng(std::uint64_t seed = 0);

  std::uint64_t seed() const { return seed_; }
  std::uint64_t next_u64();
  // Uniform in [0, 1) with 53 random bits.
  double uniform();
  double uniform(double lo, double hi);
  // Uniform integer in [0, n). Rejection sampling, no modulo bias.
  std::uint64_t below(std::uint64_t n);
  // Standard normal via Box-Muller; the second variate is cached.
  double normal();
  bool bernoulli(double p) { return uniform() < p; }

  // Independent stream derived from (seed, stream id).
  static Rng derive(std::uint64_t seed, std::uint64_t stream);
  static std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t stream);
  static std::uint64_t derive_seed(std::uint64_t seed, std::string_view label);

 private:
  std::uint64_t seed_;
  std::uint64_t s_[4];
  bool has_spare_ = false;
  double spare_ = 0.0;
};

}  // namespace hg
