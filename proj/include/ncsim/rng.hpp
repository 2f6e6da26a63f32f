#pragma once

#include <cstdint>
#include <initializer_list>

namespace ncsim {

// Deterministic, platform-independent PRNG (xoshiro256** seeded via splitmix64).
// std::mt19937 plus <random> distributions are avoided on purpose: distribution
// output is implementation-defined and would break byte-identical runs.
class Rng {
 public:
  explicit Rng(uint64_t seed = 0) {
    uint64_t x = seed;
    for (auto& word : state_) word = splitmix(x);
  }

  // Derives an independent stream from a seed plus a path of stream labels,
  // e.g. Rng::derive(run_seed, {node_id, kLossStream}).
  static Rng derive(uint64_t seed, std::initializer_list<uint64_t> path) {
    uint64_t x = seed;
    for (uint64_t p : path) {
      x = splitmix(x) ^ (p * 0x9e3779b97f4a7c15ull);
      x = splitmix(x);
    }
    return Rng(x);
  }

  uint64_t next_u64() {
    const uint64_t result = rotl(state_[1] * 5, 7) * 9;
    const uint64_t t = state_[1] << 17;
    state_[2] ^= state_[0];
    state_[3] ^= state_[1];
    state_[1] ^= state_[2];
    state_[0] ^= state_[3];
    state_[2] ^= t;
    state_[3] = rotl(state_[3], 45);
    return result;
  }

  // Uniform in [0, 1).
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform in [0, bound). bound must be > 0.
  uint32_t next_below(uint32_t bound) {
    // Lemire's multiply-shift rejection method.
    uint64_t x = next_u64() & 0xffffffffull;
    uint64_t m = x * bound;
    uint32_t l = static_cast<uint32_t>(m);
    if (l < bound) {
      uint32_t t = (0u - bound) % bound;
      while (l < t) {
        x = next_u64() & 0xffffffffull;
        m = x * bound;
        l = static_cast<uint32_t>(m);
      }
    }
    return static_cast<uint32_t>(m >> 32);
  }

  uint8_t next_byte() { return static_cast<uint8_t>(next_u64() >> 56); }

  bool next_bernoulli(double p) { return next_double() < p; }

 private:
  static uint64_t splitmix(uint64_t& x) {
    x += 0x9e3779b97f4a7c15ull;
    uint64_t z = x;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }
  static uint64_t rotl(uint64_t v, int k) { return (v << k) | (v >> (64 - k)); }

  uint64_t state_[4];
};

}  // namespace ncsim
