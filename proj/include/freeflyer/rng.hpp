#pragma once

#include <cstdint>
#include <random>

#include "freeflyer/common.hpp"

namespace ff {

// splitmix64; used to derive well-separated child seeds from (master, index)
// so that per-environment streams are independent of work partitioning.
inline std::uint64_t splitmix64(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ull;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ull;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebull;
  return x ^ (x >> 31);
}

inline std::uint64_t child_seed(std::uint64_t master, std::uint64_t index) {
  return splitmix64(splitmix64(master) ^ splitmix64(index + 0x51ed2701));
}

// Seeded stream with explicit distribution helpers. Distribution code lives
// here (not in std::*_distribution) so draws are reproducible bit-for-bit
// for a given seed, independent of library version and call history.
class Rng {
 public:
  Rng() : eng_(0) {}
  explicit Rng(std::uint64_t seed) : eng_(seed) {}

  static Rng child(std::uint64_t master, std::uint64_t index) {
    return Rng(child_seed(master, index));
  }

  std::uint64_t next_u64() { return eng_(); }

  // uniform in [0, 1)
  double uniform() { return (eng_() >> 11) * 0x1.0p-53; }

  // uniform in [lo, hi)
  double uniform(double lo, double hi) { return lo + (hi - lo) * uniform(); }

  bool bernoulli(double p) { return uniform() < p; }

  // standard normal via Box-Muller (no cached second draw)
  double normal() {
    double u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    double u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * kPi * u2);
  }

 private:
  std::mt19937_64 eng_;
};

}  // namespace ff
