#include "kinklab/modes.hpp"

#include <algorithm>
#include <cmath>

#include <Eigen/Eigenvalues>

#include "kinklab/errors.hpp"
#include "kinklab/potential.hpp"

namespace kinklab {

Vec ModeSpectrum::ion_weights(Index mode) const {
  Vec w = Vec::Zero(n_ions);
  for (Index i = 0; i < n_ions; ++i)
    w[i] = mode_matrix.col(mode).segment(i * n_active_axes, n_active_axes).squaredNorm();
  return w;
}

ModeSpectrum normal_modes(const CriticalPoint& cp, const PseudoTrap& trap) {
  const Configuration& c = cp.config;
  ModeSpectrum s;
  s.n_ions = c.n_ions();
  s.n_active_axes = c.dof_mask.n_active_axes();

  Mat k = hessian(c, trap);
  const Vec m = dof_masses(c);
  const Vec m_invsqrt = m.cwiseSqrt().cwiseInverse();
  k = m_invsqrt.asDiagonal() * k * m_invsqrt.asDiagonal();

  Eigen::SelfAdjointEigenSolver<Mat> es(k);
  if (es.info() != Eigen::Success) throw ConvergenceError("normal_modes: eigensolver failed");
  s.lambdas = es.eigenvalues();
  s.mode_matrix = es.eigenvectors();

  s.frequencies.resize(s.lambdas.size());
  for (Index j = 0; j < s.lambdas.size(); ++j) {
    const Real l = s.lambdas[j];
    s.frequencies[j] = (l >= 0.0 ? 1.0 : -1.0) * std::sqrt(std::abs(l));
  }

  s.localization.resize(s.lambdas.size());
  for (Index j = 0; j < s.lambdas.size(); ++j) {
    const Vec w = s.ion_weights(j);
    s.localization[j] = 1.0 / w.squaredNorm();  // sum of weights is 1
  }

  for (Index j = 0; j < s.lambdas.size(); ++j) {
    if (s.is_localized(j)) {
      s.low_mode_index = j;
      break;
    }
  }
  return s;
}

ModeCoordinates mode_coordinates(const std::vector<Coords>& positions,
                                 const std::vector<Coords>& velocities,
                                 const ModeSpectrum& spectrum, const Configuration& reference) {
  if (positions.size() != velocities.size())
    throw InvalidArgumentError("mode_coordinates: positions/velocities size mismatch");
  const Index n_modes = spectrum.mode_matrix.cols();
  const Vec m_sqrt = dof_masses(reference).cwiseSqrt();

  auto flatten = [&](const Coords& x) {
    Vec v(reference.n_dof());
    Index k = 0;
    for (Index i = 0; i < reference.n_ions(); ++i)
      for (int a = 0; a < 3; ++a)
        if (reference.dof_mask.active[a]) v[k++] = x(i, a);
    return v;
  };
  const Vec r0 = flatten(reference.positions);

  ModeCoordinates mc;
  mc.theta.resize(Index(positions.size()), n_modes);
  mc.theta_dot.resize(Index(positions.size()), n_modes);
  for (size_t s = 0; s < positions.size(); ++s) {
    if (positions[s].rows() != reference.n_ions())
      throw InvalidArgumentError("mode_coordinates: sample dimension mismatch");
    const Vec dx = m_sqrt.asDiagonal() * (flatten(positions[s]) - r0);
    const Vec dv = m_sqrt.asDiagonal() * flatten(velocities[s]);
    mc.theta.row(Index(s)) = (spectrum.mode_matrix.transpose() * dx).transpose();
    mc.theta_dot.row(Index(s)) = (spectrum.mode_matrix.transpose() * dv).transpose();
  }
  return mc;
}

Coords reconstruct(const Vec& theta, const ModeSpectrum& spectrum,
                   const Configuration& reference) {
  const Vec m_invsqrt = dof_masses(reference).cwiseSqrt().cwiseInverse();
  const Vec dx = m_invsqrt.asDiagonal() * (spectrum.mode_matrix * theta);
  Coords out = reference.positions;
  Index k = 0;
  for (Index i = 0; i < reference.n_ions(); ++i)
    for (int a = 0; a < 3; ++a)
      if (reference.dof_mask.active[a]) out(i, a) += dx[k++];
  return out;
}

OmegaLowCurve omega_low_curve(const CriticalPoint& kink, Real gamma_y, Real ratio_ref,
                              Real ratio_from, Real ratio_to, Real ratio_step,
                              const NewtonOptions& opts) {
  if (ratio_step <= 0.0) throw InvalidArgumentError("omega_low_curve: step must be > 0");
  if (ratio_ref < ratio_from || ratio_ref > ratio_to)
    throw InvalidArgumentError("omega_low_curve: reference ratio outside range");
  OmegaLowCurve curve;

  // Sweeps outward from the reference ratio, tracking the kink's localized
  // mode by eigenvector overlap so the curve follows it through crossings
  // with the delocalized band.
  auto sweep = [&](Real step, Real r_end, bool& truncated) {
    std::vector<OmegaLowSample> out;
    Configuration c = kink.config;
    Vec tracked;
    for (Real r = ratio_ref;; r += step) {
      if ((step > 0 && r > r_end + 1e-12) || (step < 0 && r < r_end - 1e-12)) break;
      const PseudoTrap trap{gamma_y, gamma_y * r * r};
      CriticalPoint cp;
      try {
        cp = newton_critical(c, trap, opts);
      } catch (const ConvergenceError& e) {
        truncated = true;
        curve.truncation_reason = "kink lost at ratio " + std::to_string(r) + ": " + e.what();
        break;
      }
      const Real disp = (cp.config.positions - c.positions).rowwise().norm().maxCoeff();
      if (disp > 0.5 * c.lattice_spacing()) {
        truncated = true;
        curve.truncation_reason = "branch jump at ratio " + std::to_string(r) +
                                  " (displacement " + std::to_string(disp) + ")";
        break;
      }
      c = cp.config;
      const ModeSpectrum ms = normal_modes(cp, trap);
      Index pick = 0;
      if (tracked.size() == 0) {
        pick = ms.low_mode_index.value_or(0);
      } else {
        (ms.mode_matrix.transpose() * tracked).cwiseAbs().maxCoeff(&pick);
      }
      tracked = ms.mode_matrix.col(pick);
      out.push_back({r, ms.frequencies[pick], ms.localization[pick], cp.stable});
    }
    return out;
  };

  std::vector<OmegaLowSample> down = sweep(-ratio_step, ratio_from, curve.truncated_low);
  std::vector<OmegaLowSample> up = sweep(ratio_step, ratio_to, curve.truncated_high);
  std::reverse(down.begin(), down.end());
  if (!down.empty()) down.pop_back();  // drop the duplicated reference sample
  curve.samples = std::move(down);
  curve.samples.insert(curve.samples.end(), up.begin(), up.end());
  return curve;
}

}  // namespace kinklab
