#include "kinklab/floquet.hpp"

#include <cmath>
#include <complex>
#include <string>

#include <Eigen/Eigenvalues>

#include "kinklab/errors.hpp"

namespace kinklab {

namespace {

// Curvature matrix of the radial plane at time t (the yz block of the trap
// Hessian): [[a_y - 2q cos 2t, a_yz], [a_yz, a_z + 2q cos 2t]].
Mat2 radial_curvature(const PaulTrap& trap, Real t) {
  const Real c = std::cos(2.0 * t);
  Mat2 m;
  m << trap.a_y - 2.0 * trap.q * c, trap.a_yz, trap.a_yz, trap.a_z() + 2.0 * trap.q * c;
  return m;
}

Mat4 system_matrix(const PaulTrap& trap, Real t) {
  Mat4 a = Mat4::Zero();
  a(0, 2) = a(1, 3) = 1.0;
  a.block<2, 2>(2, 0) = -radial_curvature(trap, t);
  return a;
}

}  // namespace

Mat4 radial_monodromy(const PaulTrap& trap, int steps_per_period) {
  const Real period = constants::pi;
  const Real h = period / steps_per_period;
  Mat4 phi = Mat4::Identity();
  Real t = 0.0;
  for (int s = 0; s < steps_per_period; ++s) {
    const Mat4 k1 = system_matrix(trap, t) * phi;
    const Mat4 k2 = system_matrix(trap, t + 0.5 * h) * (phi + 0.5 * h * k1);
    const Mat4 k3 = system_matrix(trap, t + 0.5 * h) * (phi + 0.5 * h * k2);
    const Mat4 k4 = system_matrix(trap, t + h) * (phi + h * k3);
    phi += (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4);
    t += h;
  }
  return phi;
}

SecularModes pseudopotential_from_paul(const PaulTrap& trap, bool allow_unstable,
                                       int steps_per_period) {
  SecularModes out;
  const Real period = constants::pi;

  // Axial motion decouples exactly: multipliers e^{+-i sqrt(a_x) pi}.
  if (trap.a_x > 0.0) {
    out.omega[0] = std::sqrt(trap.a_x);
    out.stable[0] = true;
    out.multiplier_modulus[0] = 1.0;
  } else {
    out.stable[0] = false;
    out.multiplier_modulus[0] = std::exp(std::sqrt(-trap.a_x) * period);
    if (!allow_unstable)
      throw FloquetInstabilityError("axial motion unstable (a_x <= 0)",
                                    out.multiplier_modulus[0]);
  }

  const Mat4 phi = radial_monodromy(trap, steps_per_period);
  Eigen::EigenSolver<Mat4> es(phi);
  if (es.info() != Eigen::Success)
    throw ConvergenceError("radial monodromy eigensolver failed");

  // Collect conjugate pairs with positive imaginary part; a stable pair sits
  // on the unit circle.
  struct RadialMode {
    Real omega;
    Vec2 axis;
    Real modulus;
    bool stable;
  };
  std::vector<RadialMode> modes;
  Real worst_modulus = 1.0;
  for (int k = 0; k < 4; ++k) {
    const std::complex<Real> lam = es.eigenvalues()[k];
    worst_modulus = std::max(worst_modulus, std::abs(lam));
    if (lam.imag() <= 0.0) continue;  // keep one of each conjugate pair
    RadialMode m;
    m.modulus = std::abs(lam);
    m.stable = std::abs(m.modulus - 1.0) < 1e-6;
    m.omega = std::arg(lam) / period;
    // Position part of the Floquet eigenvector; time-reversal symmetry about
    // t = 0 makes it real up to a global phase.
    Eigen::Vector2cd p = es.eigenvectors().col(k).head<2>();
    int imax;
    p.cwiseAbs().maxCoeff(&imax);
    if (std::abs(p[imax]) > 0.0) p /= p[imax];
    m.axis = p.real();
    if (m.axis.norm() > 0.0) m.axis.normalize();
    modes.push_back(m);
  }

  if (modes.size() != 2) {
    // Real multipliers: at least one radial direction is exponentially
    // unstable (or exactly parametrically resonant).
    if (!allow_unstable)
      throw FloquetInstabilityError("radial motion unstable (real Floquet multiplier)",
                                    worst_modulus);
    out.stable[1] = out.stable[2] = false;
    out.multiplier_modulus[1] = out.multiplier_modulus[2] = worst_modulus;
    return out;
  }

  if (modes[0].omega > modes[1].omega) std::swap(modes[0], modes[1]);
  for (int r = 0; r < 2; ++r) {
    out.omega[size_t(r) + 1] = modes[size_t(r)].omega;
    out.stable[size_t(r) + 1] = modes[size_t(r)].stable;
    out.multiplier_modulus[size_t(r) + 1] = modes[size_t(r)].modulus;
    if (!modes[size_t(r)].stable && !allow_unstable)
      throw FloquetInstabilityError("radial Floquet multiplier off the unit circle",
                                    modes[size_t(r)].modulus);
  }

  // Canonical axis orientation: y' along the softer radial mode with a
  // positive y component (or positive z if y ~ 0); z' completes a
  // right-handed frame with x.
  Vec2 y_axis = modes[0].axis;
  if (y_axis[0] < 0.0 || (std::abs(y_axis[0]) < 1e-12 && y_axis[1] < 0.0)) y_axis = -y_axis;
  Vec2 z_axis(-y_axis[1], y_axis[0]);
  out.axes = Mat3::Identity();
  out.axes.col(1) << 0.0, y_axis[0], y_axis[1];
  out.axes.col(2) << 0.0, z_axis[0], z_axis[1];
  out.axes_angle = std::atan2(y_axis[1], y_axis[0]);

  if (out.stable[0] && out.omega[0] > 0.0) {
    const Real wx = out.omega[0];
    out.pseudo.gamma_y = (out.omega[1] / wx) * (out.omega[1] / wx);
    out.pseudo.gamma_z = (out.omega[2] / wx) * (out.omega[2] / wx);
  }
  return out;
}

}  // namespace kinklab
