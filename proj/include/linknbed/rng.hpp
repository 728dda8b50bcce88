#pragma once

#include <cstdint>
#include <string_view>
#include <vector>

#include "linknbed/common.hpp"

namespace linknbed {

// SplitMix64 (Steele, Lea, Flood 2014): the state advances by the golden
// gamma and the output is the finalizer mix. Chosen because the sequence is
// trivially specified and identical on every platform, which is what makes
// seeded runs byte-reproducible.
class Rng {
 public:
  explicit Rng(uint64_t seed) : state_(seed) {}

  uint64_t next_u64() {
    uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, n). Plain modulo; the bias is < n / 2^64 and irrelevant
  // for the pool sizes seen here, while staying portable.
  uint64_t next_below(uint64_t n) {
    LNB_REQUIRE(n > 0, "next_below requires n > 0");
    return next_u64() % n;
  }

  // Uniform in [0, 1) from the top 53 bits.
  double next_unit() { return double(next_u64() >> 11) * 0x1.0p-53; }

  double next_uniform(double lo, double hi) {
    return lo + (hi - lo) * next_unit();
  }

  bool next_coin() { return (next_u64() & 1ull) != 0; }

  // Fisher-Yates; std::shuffle is implementation-defined, this is not.
  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = next_below(i);
      std::swap(v[i - 1], v[j]);
    }
  }

  // First k elements of a random permutation of [0, n), without replacement.
  std::vector<size_t> sample_indices(size_t n, size_t k) {
    std::vector<size_t> idx(n);
    for (size_t i = 0; i < n; ++i) idx[i] = i;
    if (k > n) k = n;
    for (size_t i = 0; i < k; ++i) {
      size_t j = i + next_below(n - i);
      std::swap(idx[i], idx[j]);
    }
    idx.resize(k);
    return idx;
  }

 private:
  uint64_t state_;
};

// Derives an independent stream key from (base seed, purpose tag, item ids).
// Every stochastic operation owns a tag so reordering one never perturbs
// another.
inline uint64_t derive_seed(uint64_t base, std::string_view tag, uint64_t a = 0,
                            uint64_t b = 0) {
  uint64_t h = fnv1a64(tag);
  h = fnv1a64_u64(base, h);
  h = fnv1a64_u64(a, h);
  h = fnv1a64_u64(b, h);
  return h;
}

inline Rng make_stream(uint64_t base, std::string_view tag, uint64_t a = 0,
                       uint64_t b = 0) {
  return Rng(derive_seed(base, tag, a, b));
}

}  // namespace linknbed
