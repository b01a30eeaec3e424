#include "kinklab/potential.hpp"

#include <cmath>
#include <string>

#include "kinklab/errors.hpp"

namespace kinklab {

namespace {

void check_distance(Real r, Index i, Index j) {
  if (r < kCoulombGuard)
    throw SingularGeometryError("ions " + std::to_string(i) + " and " + std::to_string(j) +
                                " closer than " + std::to_string(kCoulombGuard));
}

// Trap curvature diag(w_ax, gamma_y w_rad, gamma_z w_rad) for ion i.
Vec3 trap_curvature(const IonSpecies& s, const PseudoTrap& trap) {
  const Real w_ax = s.charge_ratio;
  const Real w_rad = s.charge_ratio * s.charge_ratio / s.mass_ratio;
  return {w_ax, trap.gamma_y * w_rad, trap.gamma_z * w_rad};
}

// Paul trap curvature matrix (d^2 V_trap / dR^2) for a unit-charge ion at time t.
Mat3 paul_curvature(const PaulTrap& trap, Real t) {
  const Real c = std::cos(2.0 * t);
  Mat3 m = Mat3::Zero();
  m(0, 0) = trap.a_x;
  m(1, 1) = trap.a_y - 2.0 * trap.q * c;
  m(2, 2) = trap.a_z() + 2.0 * trap.q * c;
  m(1, 2) = m(2, 1) = trap.a_yz;
  return m;
}

}  // namespace

Real potential_energy(const Configuration& config, const PseudoTrap& trap) {
  const Index n = config.n_ions();
  Real v = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vec3 w = trap_curvature(config.species[size_t(i)], trap);
    const auto& p = config.positions;
    v += 0.5 * (w[0] * p(i, 0) * p(i, 0) + w[1] * p(i, 1) * p(i, 1) + w[2] * p(i, 2) * p(i, 2));
  }
  for (Index i = 0; i < n; ++i) {
    const Real ki = config.species[size_t(i)].charge_ratio;
    for (Index j = i + 1; j < n; ++j) {
      const Real r = (config.positions.row(i) - config.positions.row(j)).norm();
      check_distance(r, i, j);
      v += ki * config.species[size_t(j)].charge_ratio / r;
    }
  }
  return v;
}

Coords gradient(const Configuration& config, const PseudoTrap& trap) {
  const Index n = config.n_ions();
  Coords g = Coords::Zero(n, 3);
  for (Index i = 0; i < n; ++i) {
    const Vec3 w = trap_curvature(config.species[size_t(i)], trap);
    for (int a = 0; a < 3; ++a) g(i, a) = w[a] * config.positions(i, a);
  }
  for (Index i = 0; i < n; ++i) {
    const Real ki = config.species[size_t(i)].charge_ratio;
    for (Index j = i + 1; j < n; ++j) {
      const Vec3 d = config.positions.row(i) - config.positions.row(j);
      const Real r = d.norm();
      check_distance(r, i, j);
      const Vec3 f = (ki * config.species[size_t(j)].charge_ratio / (r * r * r)) * d;
      g.row(i) -= f;
      g.row(j) += f;
    }
  }
  for (int a = 0; a < 3; ++a)
    if (!config.dof_mask.active[a]) g.col(a).setZero();
  return g;
}

namespace {

// Assemble the active-DOF Hessian given per-ion trap curvature diag blocks.
template <typename TrapDiag>
Mat assemble_hessian(const Configuration& config, TrapDiag&& trap_diag) {
  const Index n = config.n_ions();
  const auto& mask = config.dof_mask.active;
  int axes[3], na = 0;
  for (int a = 0; a < 3; ++a)
    if (mask[a]) axes[na++] = a;

  Mat k = Mat::Zero(n * na, n * na);
  for (Index i = 0; i < n; ++i) {
    const Mat3 d = trap_diag(i);
    for (int ai = 0; ai < na; ++ai)
      for (int bi = 0; bi < na; ++bi) k(i * na + ai, i * na + bi) += d(axes[ai], axes[bi]);
  }
  for (Index i = 0; i < n; ++i) {
    const Real ki = config.species[size_t(i)].charge_ratio;
    for (Index j = i + 1; j < n; ++j) {
      const Vec3 d = config.positions.row(i) - config.positions.row(j);
      const Real r = d.norm();
      check_distance(r, i, j);
      const Real kk = ki * config.species[size_t(j)].charge_ratio;
      // d^2 (1/r) / dR_i dR_i = (3 d d^T / r^2 - I) / r^3, cross block negated
      const Mat3 blk = kk * (3.0 * d * d.transpose() / (r * r) - Mat3::Identity()) / (r * r * r);
      for (int ai = 0; ai < na; ++ai)
        for (int bi = 0; bi < na; ++bi) {
          const Real v = blk(axes[ai], axes[bi]);
          k(i * na + ai, i * na + bi) += v;
          k(j * na + ai, j * na + bi) += v;
          k(i * na + ai, j * na + bi) -= v;
          k(j * na + ai, i * na + bi) -= v;
        }
    }
  }
  return k;
}

}  // namespace

Mat hessian(const Configuration& config, const PseudoTrap& trap) {
  return assemble_hessian(config, [&](Index i) -> Mat3 {
    return trap_curvature(config.species[size_t(i)], trap).asDiagonal();
  });
}

Real paul_potential_energy(const Configuration& config, const PaulTrap& trap, Real t) {
  const Index n = config.n_ions();
  const Mat3 m = paul_curvature(trap, t);
  Real v = 0.0;
  for (Index i = 0; i < n; ++i) {
    const Vec3 p = config.positions.row(i);
    v += 0.5 * config.species[size_t(i)].charge_ratio * p.dot(m * p);
  }
  for (Index i = 0; i < n; ++i) {
    const Real ki = config.species[size_t(i)].charge_ratio;
    for (Index j = i + 1; j < n; ++j) {
      const Real r = (config.positions.row(i) - config.positions.row(j)).norm();
      check_distance(r, i, j);
      v += ki * config.species[size_t(j)].charge_ratio / r;
    }
  }
  return v;
}

Coords paul_force(const Configuration& config, const PaulTrap& trap, Real t) {
  const Index n = config.n_ions();
  const Mat3 m = paul_curvature(trap, t);
  Coords f = Coords::Zero(n, 3);
  for (Index i = 0; i < n; ++i) {
    const Vec3 p = config.positions.row(i);
    f.row(i) = -config.species[size_t(i)].charge_ratio * (m * p);
  }
  for (Index i = 0; i < n; ++i) {
    const Real ki = config.species[size_t(i)].charge_ratio;
    for (Index j = i + 1; j < n; ++j) {
      const Vec3 d = config.positions.row(i) - config.positions.row(j);
      const Real r = d.norm();
      check_distance(r, i, j);
      const Vec3 fc = (ki * config.species[size_t(j)].charge_ratio / (r * r * r)) * d;
      f.row(i) += fc;
      f.row(j) -= fc;
    }
  }
  for (int a = 0; a < 3; ++a)
    if (!config.dof_mask.active[a]) f.col(a).setZero();
  return f;
}

Mat paul_hessian(const Configuration& config, const PaulTrap& trap, Real t) {
  const Mat3 m = paul_curvature(trap, t);
  return assemble_hessian(config, [&](Index i) -> Mat3 {
    return config.species[size_t(i)].charge_ratio * m;
  });
}

Vec dof_masses(const Configuration& config) {
  const int na = config.dof_mask.n_active_axes();
  Vec m(config.n_dof());
  for (Index i = 0; i < config.n_ions(); ++i)
    m.segment(i * na, na).setConstant(config.species[size_t(i)].mass_ratio);
  return m;
}

Real stiffness_bound(const Configuration& config, const PseudoTrap& trap) {
  Real trap_max = 0.0;
  for (const auto& s : config.species) {
    const Vec3 w = trap_curvature(s, trap);
    for (int a = 0; a < 3; ++a)
      if (config.dof_mask.active[a]) trap_max = std::max(trap_max, w[a] / s.mass_ratio);
  }
  // Row-sum bound on the Coulomb part: each pair contributes at most 4/r^3
  // to a row (2/r^3 on the diagonal block, 2/r^3 on the cross block).
  Real coulomb_max = 0.0;
  const Index n = config.n_ions();
  for (Index i = 0; i < n; ++i) {
    Real row = 0.0;
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const Real r = (config.positions.row(i) - config.positions.row(j)).norm();
      check_distance(r, i, j);
      row += 4.0 * config.species[size_t(i)].charge_ratio *
             config.species[size_t(j)].charge_ratio / (r * r * r);
    }
    coulomb_max = std::max(coulomb_max, row / config.species[size_t(i)].mass_ratio);
  }
  return trap_max + coulomb_max;
}

}  // namespace kinklab
