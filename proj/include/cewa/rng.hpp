#pragma once

#include <cstdint>
#include <random>
#include <span>
#include <stdexcept>

namespace cewa {

// SplitMix64 step; used both as a mixer and for seed derivation.
inline std::uint64_t splitmix64(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9E3779B97F4A7C15ULL);
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Replica/stream seed derivation: seed of stream i is the (i+1)-th output
// of SplitMix64 started at the master seed. Documented in the README so
// runs can be reproduced piecewise.
inline std::uint64_t split_seed(std::uint64_t master, std::uint64_t stream) {
  std::uint64_t s = master;
  std::uint64_t out = 0;
  for (std::uint64_t i = 0; i <= stream; ++i) out = splitmix64(s);
  return out;
}

// Deterministic generator. Wraps mt19937_64 (bit-exact across platforms)
// and avoids std distributions, whose output is implementation-defined.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : gen_(seed) {}

  std::uint64_t next_u64() { return gen_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return double(gen_() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n), rejection-free of modulo bias.
  std::uint64_t below(std::uint64_t n) {
    if (n == 0) throw std::invalid_argument("Rng::below: n must be positive");
    std::uint64_t threshold = (0 - n) % n;
    for (;;) {
      std::uint64_t r = gen_();
      if (r >= threshold) return r % n;
    }
  }

  // Index drawn proportionally to nonnegative weights; total must be > 0.
  std::size_t categorical(std::span<const double> weights) {
    double total = 0.0;
    for (double w : weights) total += w;
    if (!(total > 0.0))
      throw std::runtime_error("Rng::categorical: no positive mass");
    double u = uniform() * total;
    double acc = 0.0;
    std::size_t last_positive = 0;
    bool seen = false;
    for (std::size_t i = 0; i < weights.size(); ++i) {
      if (weights[i] > 0.0) {
        last_positive = i;
        seen = true;
        acc += weights[i];
        if (u < acc) return i;
      }
    }
    if (!seen) throw std::runtime_error("Rng::categorical: no positive mass");
    return last_positive;  // u landed on the rounding edge
  }

 private:
  std::mt19937_64 gen_;
};

}  // namespace cewa
