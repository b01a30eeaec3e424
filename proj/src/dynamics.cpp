#include "kinklab/dynamics.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "kinklab/errors.hpp"
#include "kinklab/floquet.hpp"
#include "kinklab/potential.hpp"
#include "kinklab/rng.hpp"

namespace kinklab {

Real Trajectory::energy_drift(Index window) const {
  if (Index(energies.size()) < 2 * window || window < 1) return 0.0;
  Real first = 0.0, last = 0.0;
  for (Index k = 0; k < window; ++k) {
    first += energies[size_t(k)];
    last += energies[energies.size() - 1 - size_t(k)];
  }
  first /= Real(window);
  last /= Real(window);
  return std::abs(last - first) / std::max(std::abs(energies.front()), Real(1e-30));
}

namespace {

struct ForceField {
  const Configuration* ref;
  const TrapModel* trap;

  Coords force(const Coords& pos, Real t) const {
    Configuration c = *ref;
    c.positions = pos;
    c.apply_mask();
    if (std::holds_alternative<PseudoTrap>(*trap))
      return -gradient(c, std::get<PseudoTrap>(*trap));
    return paul_force(c, std::get<PaulTrap>(*trap), t);
  }
  Real energy(const Coords& pos, Real t) const {
    Configuration c = *ref;
    c.positions = pos;
    c.apply_mask();
    if (std::holds_alternative<PseudoTrap>(*trap))
      return potential_energy(c, std::get<PseudoTrap>(*trap));
    return paul_potential_energy(c, std::get<PaulTrap>(*trap), t);
  }
};

Real default_timestep(const Configuration& ref, const TrapModel& trap) {
  if (std::holds_alternative<PaulTrap>(trap)) return constants::pi / 400.0;
  const Real bound = stiffness_bound(ref, std::get<PseudoTrap>(trap));
  return 2.0 * constants::pi / (50.0 * std::sqrt(std::max(bound, Real(1.0))));
}

}  // namespace

Trajectory integrate(const State& initial, const Configuration& reference, const TrapModel& trap,
                     Real duration, const IntegrateOptions& opts) {
  if (std::holds_alternative<PaulTrap>(trap)) {
    // Single-ion motion must be Floquet-stable for the dynamics to make sense.
    pseudopotential_from_paul(std::get<PaulTrap>(trap));
  }
  Configuration ref = reference;
  ref.positions = initial.positions;
  ref.apply_mask();
  const Index n = ref.n_ions();
  if (initial.velocities.rows() != n)
    throw InvalidArgumentError("integrate: velocity row count mismatch");

  ForceField field{&ref, &trap};
  const Real dt = opts.timestep > 0.0 ? opts.timestep : default_timestep(ref, trap);
  const long n_steps = std::lround(std::ceil(duration / dt - 1e-9));
  const Real gamma = opts.damping;

  Vec inv_mass(n), mass(n);
  for (Index i = 0; i < n; ++i) {
    mass[i] = ref.species[size_t(i)].mass_ratio;
    inv_mass[i] = 1.0 / mass[i];
  }

  Coords pos = initial.positions;
  for (int a = 0; a < 3; ++a)
    if (!ref.dof_mask.active[a]) pos.col(a).setZero();
  Coords vel = initial.velocities;
  for (int a = 0; a < 3; ++a)
    if (!ref.dof_mask.active[a]) vel.col(a).setZero();
  Real t = initial.time;

  Trajectory traj;
  traj.timestep = dt;
  traj.stride = std::max(opts.stride, 1);
  const Index n_samples = Index(n_steps / traj.stride) + 1;
  traj.times.reserve(size_t(n_samples) + 1);
  traj.positions.reserve(size_t(n_samples) + 1);
  traj.velocities.reserve(size_t(n_samples) + 1);

  auto kinetic = [&](const Coords& v) {
    Real ke = 0.0;
    for (Index i = 0; i < n; ++i) ke += 0.5 * mass[i] * v.row(i).squaredNorm();
    return ke;
  };
  auto record = [&](const Coords& p, const Coords& v, Real time) {
    traj.times.push_back(time);
    traj.positions.push_back(p);
    traj.velocities.push_back(v);
    if (opts.record_energy) traj.energies.push_back(field.energy(p, time) + kinetic(v));
  };

  Coords force = field.force(pos, t);
  record(pos, vel, t);

  for (long s = 0; s < n_steps; ++s) {
    Coords vhalf = vel * (1.0 - 0.5 * dt * gamma);
    for (Index i = 0; i < n; ++i) vhalf.row(i) += 0.5 * dt * inv_mass[i] * force.row(i);
    pos += dt * vhalf;
    for (int a = 0; a < 3; ++a)
      if (!ref.dof_mask.active[a]) pos.col(a).setZero();
    force = field.force(pos, t + dt);
    for (Index i = 0; i < n; ++i)
      vel.row(i) = (vhalf.row(i) + 0.5 * dt * inv_mass[i] * force.row(i)) / (1.0 + 0.5 * dt * gamma);
    t += dt;
    if ((s + 1) % traj.stride == 0 || s + 1 == n_steps) {
      if (!pos.allFinite()) throw ConvergenceError("integrate: non-finite state at t = " +
                                                   std::to_string(t));
      record(pos, vel, t);
    }
  }
  traj.final_state = State{pos, vel, t};
  return traj;
}

State excite_mode(const CriticalPoint& cp, const ModeSpectrum& spectrum, Index mode,
                  Real energy) {
  if (mode < 0 || mode >= spectrum.lambdas.size())
    throw InvalidArgumentError("excite_mode: mode index out of range");
  if (spectrum.lambdas[mode] <= 0.0)
    throw InvalidArgumentError("excite_mode: mode is not stable");
  if (energy < 0.0) throw InvalidArgumentError("excite_mode: negative energy");

  const Real omega = spectrum.frequencies[mode];
  Vec theta = Vec::Zero(spectrum.lambdas.size());
  theta[mode] = std::sqrt(2.0 * energy) / omega;
  State s;
  s.positions = reconstruct(theta, spectrum, cp.config);
  s.velocities = Coords::Zero(cp.config.n_ions(), 3);
  return s;
}

State thermal_state(const CriticalPoint& cp, const ModeSpectrum& spectrum,
                    const UnitSystem& units, Real temperature_K, std::uint64_t seed) {
  if (!cp.stable) throw InvalidArgumentError("thermal_state: critical point is not stable");
  const Real kt = units.thermal_energy(temperature_K);
  Rng rng(seed);

  Vec theta = Vec::Zero(spectrum.lambdas.size());
  Vec theta_dot = Vec::Zero(spectrum.lambdas.size());
  if (kt > 0.0) {
    for (Index j = 0; j < spectrum.lambdas.size(); ++j) {
      const Real energy = rng.exponential(kt);
      const Real phase = rng.uniform(0.0, 2.0 * constants::pi);
      const Real omega = spectrum.frequencies[j];
      theta[j] = std::sqrt(2.0 * energy) / omega * std::cos(phase);
      theta_dot[j] = -std::sqrt(2.0 * energy) * std::sin(phase);
    }
  }

  State s;
  s.positions = reconstruct(theta, spectrum, cp.config);
  const Vec m_invsqrt = dof_masses(cp.config).cwiseSqrt().cwiseInverse();
  const Vec dv = m_invsqrt.asDiagonal() * (spectrum.mode_matrix * theta_dot);
  s.velocities = cp.config.expand(dv);
  return s;
}

Real kink_position(const Coords& positions) {
  const Index n = positions.rows();
  if (n < 8) throw InvalidArgumentError("kink_position: too few ions");
  std::vector<Real> x(static_cast<size_t>(n), 0.0);
  for (Index i = 0; i < n; ++i) x[size_t(i)] = positions(i, 0);
  std::sort(x.begin(), x.end());

  const size_t nb = x.size() - 1;
  std::vector<Real> mid(nb), comp(nb);
  for (size_t k = 0; k < nb; ++k) {
    mid[k] = 0.5 * (x[k] + x[k + 1]);
    comp[k] = 1.0 / std::max(x[k + 1] - x[k], Real(1e-9));
  }

  // The crystal is inhomogeneous (densest at the centre), so the defect is
  // the compression excess over a smooth local background, not the raw
  // maximum. Background: windowed mean excluding the bond's own
  // neighbourhood.
  std::vector<Real> excess(nb, 0.0);
  const int wide = 5, core = 1;
  for (size_t k = 0; k < nb; ++k) {
    Real bg = 0.0;
    int cnt = 0;
    for (int d = -wide; d <= wide; ++d) {
      if (std::abs(d) <= core) continue;
      const long j = long(k) + d;
      if (j < 0 || j >= long(nb)) continue;
      bg += comp[size_t(j)];
      ++cnt;
    }
    if (cnt > 0) excess[k] = std::max(comp[k] - bg / Real(cnt), Real(0.0));
  }

  // Centre of charge of the excess over the core window around the
  // most-compressed bond.
  size_t kmax = 0;
  for (size_t k = 1; k < nb; ++k)
    if (excess[k] > excess[kmax]) kmax = k;
  Real wsum = 0.0, xsum = 0.0;
  for (long d = -3; d <= 3; ++d) {
    const long j = long(kmax) + d;
    if (j < 0 || j >= long(nb)) continue;
    wsum += excess[size_t(j)];
    xsum += excess[size_t(j)] * mid[size_t(j)];
  }
  if (wsum <= 0.0) return mid[kmax];
  return xsum / wsum;
}

Real kink_position(const Configuration& config) { return kink_position(config.positions); }

ReleaseResult release_displaced_kink(const PseudoTrap& trap, Index n_ions, int offset,
                                     Real duration, const IntegrateOptions& opts) {
  ReleaseResult result;
  const DofMask mask = DofMask::full();
  const Configuration seed = make_seed(SeedSpec::displaced_kink(n_ions, offset), trap, mask);

  if (offset == 0) {
    result.start = relax(seed, trap).config;
  } else {
    // Where the seeded kink sits: the flip boundary `offset` sites from the
    // centre (the compression estimator is meaningful only after settling).
    const Real x_target = kink_site_position(seed, offset);
    const Real site = seed.lattice_spacing();

    // Try the unconstrained displaced minimum first.
    bool have_minimum = false;
    try {
      CriticalPoint cp = relax(seed, trap);
      if (cp.stable && std::abs(kink_position(cp.config) - x_target) < 0.75 * site) {
        result.start = cp.config;
        have_minimum = true;
      }
    } catch (const ConvergenceError&) {
    }
    if (!have_minimum) {
      // Globally trapping landscape: no displaced minimum exists, so prepare
      // the start with a short strong quench. The local (fast) coordinates
      // settle while the slow kink coordinate barely moves; velocities are
      // then zeroed for the release from rest.
      IntegrateOptions quench;
      quench.damping = 2.5;
      quench.stride = 1 << 20;
      quench.record_energy = false;
      const State s0{seed.positions, Coords::Zero(n_ions, 3), 0.0};
      const Trajectory settled = integrate(s0, seed, trap, 6.0, quench);
      result.start = seed;
      result.start.positions = settled.final_state.positions;
      result.quenched_start = true;
      if (std::abs(kink_position(result.start) - x_target) > 1.5 * site)
        throw ConvergenceError("release_displaced_kink: no displaced kink at offset " +
                               std::to_string(offset));
    }
  }

  State s0{result.start.positions, Coords::Zero(n_ions, 3), 0.0};
  result.trajectory = integrate(s0, result.start, trap, duration, opts);
  result.kink_positions.reserve(result.trajectory.positions.size());
  for (const Coords& p : result.trajectory.positions)
    result.kink_positions.push_back(kink_position(p));
  return result;
}

Coords paul_time_averaged_equilibrium(const Configuration& seed, const PaulTrap& trap,
                                      Real damp_periods, Real average_periods, Real friction) {
  const Real period = constants::pi;
  State s{seed.positions, Coords::Zero(seed.n_ions(), 3), 0.0};

  IntegrateOptions damp_opts;
  damp_opts.damping = friction;
  damp_opts.stride = 1 << 20;  // only the final state matters
  damp_opts.record_energy = false;
  const Trajectory damped = integrate(s, seed, trap, damp_periods * period, damp_opts);

  IntegrateOptions avg_opts;
  avg_opts.stride = 4;
  avg_opts.record_energy = false;
  const Trajectory orbit =
      integrate(damped.final_state, seed, trap, average_periods * period, avg_opts);

  Coords mean = Coords::Zero(seed.n_ions(), 3);
  for (const Coords& p : orbit.positions) mean += p;
  mean /= Real(orbit.positions.size());
  return mean;
}

AnharmonicityReport anharmonicity_report(const Trajectory& traj, const ModeSpectrum& spectrum,
                                         const Configuration& reference, Index mode) {
  if (traj.n_samples() < 16) throw InvalidArgumentError("anharmonicity_report: too few samples");
  const ModeCoordinates mc = mode_coordinates(traj.positions, traj.velocities, spectrum, reference);
  const Real omega = spectrum.frequencies[mode];
  if (omega <= 0.0) throw InvalidArgumentError("anharmonicity_report: unstable mode");

  // Energy share of the requested mode in the initial sample. The dominance
  // test looks at the prepared state: during the run the nonlinearity
  // legitimately dresses a soft mode with small high-frequency components
  // whose linearized energies are misleadingly amplified.
  Real mode_energy = 0.0, total_energy = 0.0;
  for (Index j = 0; j < spectrum.lambdas.size(); ++j) {
    const Real e = 0.5 * (mc.theta_dot(0, j) * mc.theta_dot(0, j) +
                          std::max(spectrum.lambdas[j], Real(0)) * mc.theta(0, j) * mc.theta(0, j));
    total_energy += e;
    if (j == mode) mode_energy += e;
  }
  AnharmonicityReport rep;
  rep.energy_share = total_energy > 0.0 ? mode_energy / total_energy : 0.0;
  if (rep.energy_share < 0.5)
    throw InvalidArgumentError("anharmonicity_report: mode energy share below 50%");

  const Vec theta = mc.theta.col(mode);
  const Vec theta_dot = mc.theta_dot.col(mode);
  rep.amplitude = theta.cwiseAbs().maxCoeff();

  // Spectral peak by a scanned discrete transform with parabolic refinement.
  const Index ns = traj.n_samples();
  auto power = [&](Real w) {
    Real re = 0.0, im = 0.0;
    for (Index s = 0; s < ns; ++s) {
      re += theta[s] * std::cos(w * traj.times[size_t(s)]);
      im += theta[s] * std::sin(w * traj.times[size_t(s)]);
    }
    return re * re + im * im;
  };
  const Real span = traj.times.back() - traj.times.front();
  const Real dw = constants::pi / span;
  Real best_w = 0.0, best_p = -1.0;
  for (Real w = 0.25 * omega; w <= 2.5 * omega; w += 0.25 * dw) {
    const Real pw = power(w);
    if (pw > best_p) {
      best_p = pw;
      best_w = w;
    }
  }
  // Parabolic refinement around the best grid point.
  const Real h = 0.25 * dw;
  const Real pm = power(best_w - h), p0 = power(best_w), pp = power(best_w + h);
  const Real denom = pm - 2.0 * p0 + pp;
  rep.fundamental = std::abs(denom) > 0.0 ? best_w - 0.5 * h * (pp - pm) / denom : best_w;

  // Radial scatter of the phase-space orbit about its mean radius.
  Vec radius(ns);
  for (Index s = 0; s < ns; ++s) {
    const Real a = theta[s];
    const Real b = theta_dot[s] / omega;
    radius[s] = std::sqrt(a * a + b * b);
  }
  const Real mean_r = radius.mean();
  rep.ellipse_deviation =
      mean_r > 0.0 ? std::sqrt((radius.array() - mean_r).square().mean()) / mean_r : 0.0;
  return rep;
}

}  // namespace kinklab
