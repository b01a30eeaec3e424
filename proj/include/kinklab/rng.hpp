#pragma once

#include <cmath>
#include <cstdint>

#include "kinklab/types.hpp"

namespace kinklab {

// Deterministic, platform-independent generator (splitmix64) so that seeded
// runs agree across compilers and standard libraries; std:: distributions are
// implementation-defined and would break the cross-platform contract.
class Rng {
 public:
  explicit Rng(std::uint64_t seed) : state_(seed) {}

  std::uint64_t next_u64() {
    std::uint64_t z = (state_ += 0x9e3779b97f4a7c15ull);
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
  }

  // Uniform in [0, 1).
  Real uniform() { return Real(next_u64() >> 11) * 0x1.0p-53; }

  Real uniform(Real lo, Real hi) { return lo + (hi - lo) * uniform(); }

  // Standard normal via Box-Muller (no cached spare; keeps state trivial).
  Real normal() {
    Real u1 = uniform();
    while (u1 <= 0.0) u1 = uniform();
    const Real u2 = uniform();
    return std::sqrt(-2.0 * std::log(u1)) * std::cos(2.0 * constants::pi * u2);
  }

  // Exponential with the given mean.
  Real exponential(Real mean) {
    Real u = uniform();
    while (u <= 0.0) u = uniform();
    return -mean * std::log(u);
  }

 private:
  std::uint64_t state_;
};

}  // namespace kinklab
