#pragma once

#include <cstdint>
#include <random>

namespace epose::util {

// splitmix64 step; used to derive independent stream seeds from a master seed.
inline std::uint64_t splitmix64(std::uint64_t& x) {
  x += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = x;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Deterministic hash of up to four words into one stream seed.
inline std::uint64_t derive_seed(std::uint64_t a, std::uint64_t b = 0,
                                 std::uint64_t c = 0, std::uint64_t d = 0) {
  std::uint64_t x = a;
  std::uint64_t h = splitmix64(x);
  x ^= b + 0x9e3779b97f4a7c15ULL;
  h ^= splitmix64(x);
  x ^= c + 0xc2b2ae3d27d4eb4fULL;
  h ^= splitmix64(x);
  x ^= d + 0x165667b19e3779f9ULL;
  h ^= splitmix64(x);
  return h;
}

// mt19937_64 wrapper with fixed draw algorithms. The standard distributions
// are implementation-defined, so uniforms are built from raw engine words to
// keep streams reproducible.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform in [0, 1) with 53-bit resolution.
  double uniform() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  // Uniform integer in [lo, hi], inclusive.
  int uniform_int(int lo, int hi) {
    const int span = hi - lo + 1;
    int v = lo + static_cast<int>(uniform() * span);
    return v > hi ? hi : v;
  }

  // Index in [0, n) sampled uniformly.
  std::size_t uniform_index(std::size_t n) {
    auto v = static_cast<std::size_t>(uniform() * static_cast<double>(n));
    return v >= n ? n - 1 : v;
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace epose::util
