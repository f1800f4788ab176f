#pragma once

#include <cstdint>
#include <string_view>

namespace cofa {

// Deterministic seeded randomness. Two flavors:
//  - SplitMix64: a sequential stream for generators that walk a seed forward.
//  - unit_draw / keyed hashing: counter-based draws addressed by (seed, keys),
//    so parallel consumers never share mutable state and results are
//    independent of evaluation order.

inline uint64_t splitmix64_next(uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

class SplitMix64 {
 public:
  explicit SplitMix64(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() { return splitmix64_next(state_); }

  // Uniform in [0, 1), 53 mantissa bits.
  double next_double() { return static_cast<double>(next_u64() >> 11) * 0x1.0p-53; }

  // Uniform integer in [0, n). n must be > 0.
  uint64_t next_below(uint64_t n) {
    // Rejection sampling keeps the distribution exact and platform-independent.
    const uint64_t threshold = n * (UINT64_MAX / n);
    uint64_t x;
    do {
      x = next_u64();
    } while (x >= threshold);
    return x / (UINT64_MAX / n);
  }

  double next_in(double lo, double hi) { return lo + (hi - lo) * next_double(); }

  template <typename T>
  void shuffle(T& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(next_below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  uint64_t state_;
};

inline uint64_t fnv1a64(std::string_view s) {
  uint64_t h = 1469598103934665603ULL;
  for (unsigned char c : s) {
    h ^= c;
    h *= 1099511628211ULL;
  }
  return h;
}

inline uint64_t mix_key(uint64_t h, uint64_t v) {
  h ^= v + 0x9e3779b97f4a7c15ULL + (h << 6) + (h >> 2);
  uint64_t s = h;
  return splitmix64_next(s);
}

// One deterministic draw in [0, 1) addressed by a seed plus up to three keys.
inline double unit_draw(uint64_t seed, uint64_t k0, uint64_t k1 = 0, uint64_t k2 = 0) {
  uint64_t h = mix_key(seed, k0);
  h = mix_key(h, k1);
  h = mix_key(h, k2);
  return static_cast<double>(h >> 11) * 0x1.0p-53;
}

inline double unit_draw(uint64_t seed, std::string_view key, uint64_t k1 = 0, uint64_t k2 = 0) {
  return unit_draw(seed, fnv1a64(key), k1, k2);
}

}  // namespace cofa
