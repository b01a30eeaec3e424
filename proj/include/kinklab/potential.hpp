#pragma once

#include "kinklab/configuration.hpp"
#include "kinklab/trap.hpp"
#include "kinklab/types.hpp"

namespace kinklab {

// Pairwise distances below this raise SingularGeometryError instead of
// returning huge values that would corrupt the optimizers.
inline constexpr Real kCoulombGuard = 1e-6;

// Nondimensional potential energy
//   V = sum_i 1/2 (w_ax,i x_i^2 + gamma_y w_rad,i y_i^2 + gamma_z w_rad,i z_i^2)
//     + sum_{i<j} kappa_i kappa_j / |R_i - R_j|
// with w_ax = kappa (DC axial) and w_rad = kappa^2/mu (pseudopotential).
// For the reference species both weights are 1. The w_rad weight is the
// standard ponderomotive scaling (secular frequency ~ kappa/mu); it is an
// approximation for non-reference species, the exact treatment being the
// time-dependent Paul potential below.
Real potential_energy(const Configuration& config, const PseudoTrap& trap);

// Analytic gradient dV/dR, N x 3 (masked axes zero).
Coords gradient(const Configuration& config, const PseudoTrap& trap);

// Exact second derivatives over the active DOF, symmetric n_dof x n_dof,
// ion-major ordering matching Configuration::active_coords().
Mat hessian(const Configuration& config, const PseudoTrap& trap);

// Time-dependent Paul potential energy at nondimensional time t:
//   V = sum_i kappa_i [ 1/2 (a_x x^2 + a_y y^2 + a_z z^2) + a_yz y z
//                       - q cos(2t) (y^2 - z^2) ]
//     + sum_{i<j} kappa_i kappa_j / |R_i - R_j|.
// This is the true potential energy; the equations of motion divide the force
// by the ion mass, so the effective Mathieu parameters of ion i scale with
// kappa_i/mu_i as they must.
Real paul_potential_energy(const Configuration& config, const PaulTrap& trap, Real t);

// Force -dV/dR (not acceleration), N x 3, masked axes zero.
Coords paul_force(const Configuration& config, const PaulTrap& trap, Real t);

// Hessian of the Paul potential at fixed time t, over active DOF.
Mat paul_hessian(const Configuration& config, const PaulTrap& trap, Real t);

// Per-DOF mass vector (mu_i repeated per active axis), for mass weighting.
Vec dof_masses(const Configuration& config);

// Gershgorin-style upper bound on the largest Hessian eigenvalue, used to
// pick stable integrator timesteps without an eigendecomposition.
Real stiffness_bound(const Configuration& config, const PseudoTrap& trap);

}  // namespace kinklab
