#pragma once

#include <cassert>
#include <cmath>
#include <cstdint>
#include <initializer_list>
#include <random>

namespace emlang {

// All randomness flows through explicitly seeded streams; nothing global.
// Distributions are implemented by hand on top of mt19937_64 so that the
// draw sequence is identical across platforms and standard libraries.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  std::uint64_t next_u64() { return eng_(); }

  // Uniform on [0, 1) with 53 random bits.
  double uniform01() {
    return static_cast<double>(eng_() >> 11) * 0x1.0p-53;
  }

  // Uniform on (0, 1); never returns an endpoint (safe under log).
  double uniform01_open() {
    return (static_cast<double>(eng_() >> 11) + 0.5) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) {
    return lo + (hi - lo) * uniform01();
  }

  // Unbiased integer in [0, n) via rejection.
  std::uint64_t below(std::uint64_t n) {
    assert(n > 0);
    const std::uint64_t limit = UINT64_MAX - UINT64_MAX % n;
    std::uint64_t x = eng_();
    while (x >= limit) x = eng_();
    return x % n;
  }

  bool bernoulli(double p) { return uniform01() < p; }

  double gumbel() { return -std::log(-std::log(uniform01_open())); }

 private:
  std::mt19937_64 eng_;
};

// Derives an independent stream from (seed, path), so that e.g. the training
// stream and the per-step evaluation streams never interleave.
inline std::uint64_t mix_seed(std::uint64_t seed,
                              std::initializer_list<std::uint64_t> path) {
  std::uint64_t z = seed;
  auto mix = [&z](std::uint64_t v) {
    z += 0x9e3779b97f4a7c15ULL + v;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
    z = z ^ (z >> 31);
  };
  for (std::uint64_t v : path) mix(v);
  mix(0);
  return z;
}

inline Rng derive_rng(std::uint64_t seed,
                      std::initializer_list<std::uint64_t> path) {
  return Rng(mix_seed(seed, path));
}

}  // namespace emlang
