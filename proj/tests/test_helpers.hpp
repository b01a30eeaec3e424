#pragma once

#include <cmath>

#include "kinklab/configuration.hpp"
#include "kinklab/potential.hpp"
#include "kinklab/rng.hpp"

namespace kinklab::testing {

// Central-difference gradient of the potential energy (the independent oracle
// for the analytic gradient).
inline Coords fd_gradient(const Configuration& config, const PseudoTrap& trap, Real h = 1e-5) {
  Coords g = Coords::Zero(config.n_ions(), 3);
  Configuration c = config;
  for (Index i = 0; i < config.n_ions(); ++i)
    for (int a = 0; a < 3; ++a) {
      if (!config.dof_mask.active[a]) continue;
      c.positions = config.positions;
      c.positions(i, a) += h;
      const Real vp = potential_energy(c, trap);
      c.positions(i, a) -= 2.0 * h;
      const Real vm = potential_energy(c, trap);
      g(i, a) = (vp - vm) / (2.0 * h);
    }
  return g;
}

// Central-difference Hessian of the analytic gradient.
inline Mat fd_hessian(const Configuration& config, const PseudoTrap& trap, Real h = 1e-5) {
  Mat k(config.n_dof(), config.n_dof());
  Configuration c = config;
  Index col = 0;
  for (Index j = 0; j < config.n_ions(); ++j)
    for (int a = 0; a < 3; ++a) {
      if (!config.dof_mask.active[a]) continue;
      c.positions = config.positions;
      c.positions(j, a) += h;
      const Coords gp = gradient(c, trap);
      c.positions(j, a) -= 2.0 * h;
      const Coords gm = gradient(c, trap);
      Index row = 0;
      for (Index i = 0; i < config.n_ions(); ++i)
        for (int b = 0; b < 3; ++b) {
          if (!config.dof_mask.active[b]) continue;
          k(row, col) = (gp(i, b) - gm(i, b)) / (2.0 * h);
          ++row;
        }
      ++col;
    }
  return k;
}

// Random non-degenerate configuration with optional species mix.
inline Configuration random_configuration(Index n, DofMask mask, std::uint64_t seed,
                                          bool mixed_species = false) {
  Rng rng(seed);
  Coords p(n, 3);
  for (Index i = 0; i < n; ++i) {
    p(i, 0) = 3.0 * Real(i) - 1.5 * Real(n - 1) + 0.3 * rng.normal();
    p(i, 1) = 0.5 * rng.normal();
    p(i, 2) = 0.5 * rng.normal();
  }
  Configuration c = Configuration::uniform(p, mask);
  if (mixed_species)
    for (Index i = 0; i < n; ++i) {
      c.species[size_t(i)].mass_ratio = 0.5 + rng.uniform();
      c.species[size_t(i)].charge_ratio = 0.75 + 0.5 * rng.uniform();
    }
  c.apply_mask();
  return c;
}

inline Real rel_err(Real value, Real reference) {
  return std::abs(value - reference) / std::max(std::abs(reference), Real(1e-300));
}

}  // namespace kinklab::testing
