#pragma once

#include <array>
#include <cmath>
#include <cstdint>
#include <string_view>

namespace riskrank {

// splitmix64 step; also used as a 64-bit finalizer/mixer.
inline std::uint64_t splitmix64_next(std::uint64_t& state) {
  std::uint64_t z = (state += 0x9e3779b97f4a7c15ULL);
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

inline std::uint64_t fnv1a64(std::string_view s) {
  std::uint64_t h = 0xcbf29ce484222325ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

// xoshiro256++ with hand-rolled distributions. The standard library
// distributions are not bit-reproducible across implementations, and the
// output of every stochastic rule here must be byte-identical given
// (seed, stream label) on any platform.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) {
    std::uint64_t sm = seed;
    for (auto& word : state_) word = splitmix64_next(sm);
  }

  std::uint64_t next_u64() {
    const std::uint64_t result = rotl(state_[0] + state_[3], 23) + state_[0];
    const std::uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1), 53-bit resolution.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + next_double() * (hi - lo); }

  // Unbiased integer in [0, bound) by rejection.
  std::uint64_t below(std::uint64_t bound) {
    const std::uint64_t threshold = (0ULL - bound) % bound;
    for (;;) {
      const std::uint64_t r = next_u64();
      if (r >= threshold) return r % bound;
    }
  }

  // Standard normal via Box-Muller (cosine branch only).
  double normal() {
    double u1 = next_double();
    const double u2 = next_double();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * 3.14159265358979323846 * u2);
  }

  // Knuth's product method, split into chunks so exp(-lambda) stays
  // representable for large rates.
  int poisson(double lambda) {
    int total = 0;
    while (lambda > 30.0) {
      total += poisson_small(30.0);
      lambda -= 30.0;
    }
    return total + poisson_small(lambda);
  }

 private:
  static std::uint64_t rotl(std::uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }

  int poisson_small(double lambda) {
    if (lambda <= 0.0) return 0;
    const double limit = std::exp(-lambda);
    int k = 0;
    double p = 1.0;
    do {
      ++k;
      p *= next_double();
    } while (p > limit);
    return k - 1;
  }

  std::array<std::uint64_t, 4> state_{};
};

// Per-prompt streams are derived as xoshiro256++ seeded from
// splitmix64(master_seed XOR fnv1a64(label)), so results do not depend on
// the order in which prompts are processed.
inline Rng derive_stream(std::uint64_t master_seed, std::string_view label) {
  std::uint64_t s = master_seed ^ fnv1a64(label);
  return Rng(splitmix64_next(s));
}

inline Rng derive_stream(std::uint64_t master_seed, std::uint64_t index) {
  std::uint64_t ix = index;
  std::uint64_t s = master_seed ^ splitmix64_next(ix);
  return Rng(splitmix64_next(s));
}

}  // namespace riskrank
