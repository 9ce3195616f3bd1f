#pragma once

#include <cstdint>
#include <numeric>
#include <vector>

namespace htgfd {

inline uint64_t splitmix64(uint64_t& state) {
  state += 0x9E3779B97F4A7C15ull;
  uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ull;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBull;
  return z ^ (z >> 31);
}

// Deterministic PRNG (xoshiro256**). All randomness in the project flows
// through this type so that runs are reproducible from a single seed.
class Rng {
 public:
  explicit Rng(uint64_t seed) {
    uint64_t sm = seed;
    for (auto& w : s_) w = splitmix64(sm);
  }

  uint64_t u64() {
    const uint64_t result = rotl(s_[1] * 5, 7) * 9;
    const uint64_t t = s_[1] << 17;
    s_[2] ^= s_[0];
    s_[3] ^= s_[1];
    s_[1] ^= s_[2];
    s_[0] ^= s_[3];
    s_[2] ^= t;
    s_[3] = rotl(s_[3], 45);
    return result;
  }

  // uniform in [0, n), unbiased
  uint64_t below(uint64_t n) {
    const uint64_t threshold = (0 - n) % n;
    for (;;) {
      uint64_t r = u64();
      if (r >= threshold) return r % n;
    }
  }

  double real01() { return static_cast<double>(u64() >> 11) * 0x1.0p-53; }

  // uniform in [-a, a]
  double sym(double a) { return (2.0 * real01() - 1.0) * a; }

  template <class T>
  void shuffle(std::vector<T>& v) {
    for (size_t i = v.size(); i > 1; --i) {
      size_t j = static_cast<size_t>(below(i));
      std::swap(v[i - 1], v[j]);
    }
  }

  // k distinct indices from [0, n), in sampling order
  std::vector<int32_t> sample_indices(int32_t n, int32_t k) {
    std::vector<int32_t> idx(static_cast<size_t>(n));
    std::iota(idx.begin(), idx.end(), 0);
    if (k >= n) return idx;
    for (int32_t i = 0; i < k; ++i) {
      int32_t j = i + static_cast<int32_t>(below(static_cast<uint64_t>(n - i)));
      std::swap(idx[static_cast<size_t>(i)], idx[static_cast<size_t>(j)]);
    }
    idx.resize(static_cast<size_t>(k));
    return idx;
  }

  // derive a stream seed from components (order-sensitive)
  static uint64_t mix(std::initializer_list<uint64_t> parts) {
    uint64_t h = 0x2545F4914F6CDD1Dull;
    for (uint64_t p : parts) {
      h ^= p + 0x9E3779B97F4A7C15ull + (h << 6) + (h >> 2);
      uint64_t st = h;
      h = splitmix64(st);
    }
    return h;
  }

 private:
  static uint64_t rotl(uint64_t x, int k) { return (x << k) | (x >> (64 - k)); }
  uint64_t s_[4];
};

}  // namespace htgfd
