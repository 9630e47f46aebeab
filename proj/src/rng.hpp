#pragma once
#include <cstdint>
#include <random>
#include <string_view>

namespace polo {

inline uint64_t mix64(uint64_t z) {
  z += 0x9E3779B97F4A7C15ULL;
  z = (z ^ (z >> 30)) * 0xBF58476D1CE4E5B9ULL;
  z = (z ^ (z >> 27)) * 0x94D049BB133111EBULL;
  return z ^ (z >> 31);
}

// Derive an independent stream seed from (root seed, stream name, indices).
// All randomness in the project flows from one root seed through named
// sub-streams, so a component can be re-run in isolation and parallel workers
// can draw from per-task streams without depending on scheduling order.
inline uint64_t derive_seed(uint64_t seed, std::string_view stream, uint64_t a = 0,
                            uint64_t b = 0) {
  uint64_t h = 14695981039346656037ULL;  // FNV-1a over the stream name
  for (char c : stream) {
    h = (h ^ static_cast<unsigned char>(c)) * 1099511628211ULL;
  }
  uint64_t s = mix64(seed ^ h);
  s = mix64(s ^ a);
  s = mix64(s ^ b);
  return s;
}

// Seeded generator. Variates are produced with explicit arithmetic instead of
// std distributions, whose output is implementation-defined and would break
// the bit-reproducibility contract of single-threaded runs.
class Rng {
public:
  explicit Rng(uint64_t seed) : gen_(seed) {}

  static Rng derive(uint64_t seed, std::string_view stream, uint64_t a = 0, uint64_t b = 0) {
    return Rng(derive_seed(seed, stream, a, b));
  }

  uint64_t next() { return gen_(); }

  // Uniform double in [0, 1) with 53 random bits.
  double uniform() { return static_cast<double>(gen_() >> 11) * 0x1.0p-53; }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [0, n), n >= 1, unbiased (rejection on the tail).
  uint64_t below(uint64_t n) {
    uint64_t x, r;
    do {
      x = gen_();
      r = x % n;
    } while (x - r > uint64_t(0) - n);
    return r;
  }

private:
  std::mt19937_64 gen_;
};

}  // namespace polo
