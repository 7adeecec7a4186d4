#pragma once

#include <cmath>
#include <cstdint>
#include <numbers>
#include <vector>

namespace relay {

inline std::uint64_t splitmix64(std::uint64_t& state) {
  state += 0x9e3779b97f4a7c15ULL;
  std::uint64_t z = state;
  z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ULL;
  z = (z ^ (z >> 27)) * 0x94d049bb133111ebULL;
  return z ^ (z >> 31);
}

// Mixes up to three tags into a base seed. Parallel jobs (rollouts, eval
// episodes, training seeds) each derive their own stream so results are
// independent of scheduling and worker count.
inline std::uint64_t derive_seed(std::uint64_t base, std::uint64_t a = 0,
                                 std::uint64_t b = 0, std::uint64_t c = 0) {
  std::uint64_t s = base;
  std::uint64_t out = splitmix64(s);
  s ^= (a + 1) * 0x9e3779b97f4a7c15ULL;
  out ^= splitmix64(s);
  s ^= (b + 1) * 0xc2b2ae3d27d4eb4fULL;
  out ^= splitmix64(s);
  s ^= (c + 1) * 0x165667b19e3779f9ULL;
  out ^= splitmix64(s);
  return out;
}

// Deterministic generator with hand-rolled distributions. Distributions in
// <random> are unspecified across standard libraries; this keeps every
// sampled stream pinned down by the seed alone.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed ^ 0x9e3779b97f4a7c15ULL) {}

  std::uint64_t next_u64() { return splitmix64(state_); }

  // [0, 1)
  double uniform01() {
    return static_cast<double>(next_u64() >> 11) * 0x1.0p-53;
  }

  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform01(); }

  // Box-Muller without the cached second value: one normal costs two
  // uniforms, but the stream does not depend on call parity.
  double normal() {
    double u1 = uniform01();
    if (u1 <= 0.0) u1 = 0x1.0p-53;
    const double u2 = uniform01();
    return std::sqrt(-2.0 * std::log(u1)) *
           std::cos(2.0 * std::numbers::pi * u2);
  }

  double normal(double mean, double stddev) { return mean + stddev * normal(); }

  // Inclusive range, unbiased by rejection.
  std::int64_t uniform_int(std::int64_t lo, std::int64_t hi) {
    const std::uint64_t range = static_cast<std::uint64_t>(hi - lo) + 1;
    if (range == 0) return static_cast<std::int64_t>(next_u64());  // full span
    const std::uint64_t threshold = (-range) % range;
    for (;;) {
      const std::uint64_t x = next_u64();
      if (x >= threshold) return lo + static_cast<std::int64_t>(x % range);
    }
  }

  std::uint64_t uniform_index(std::uint64_t n) {
    return static_cast<std::uint64_t>(uniform_int(0, static_cast<std::int64_t>(n) - 1));
  }

  template <typename T>
  void shuffle(std::vector<T>& v) {
    for (std::size_t i = v.size(); i > 1; --i) {
      const std::size_t j = uniform_index(i);
      std::swap(v[i - 1], v[j]);
    }
  }

 private:
  std::uint64_t state_;
};

}  // namespace relay
