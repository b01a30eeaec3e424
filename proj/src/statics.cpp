#include "kinklab/statics.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include <Eigen/Eigenvalues>
#include <Eigen/LU>

#include "kinklab/assignment.hpp"
#include "kinklab/errors.hpp"
#include "kinklab/potential.hpp"
#include "kinklab/rng.hpp"

namespace kinklab {

namespace {

Real active_grad_norm(const Configuration& c, const PseudoTrap& trap) {
  const Coords g = gradient(c, trap);
  Real s = 0.0;
  for (Index i = 0; i < c.n_ions(); ++i)
    for (int a = 0; a < 3; ++a)
      if (c.dof_mask.active[a]) s += g(i, a) * g(i, a);
  return std::sqrt(s);
}

bool sets_match(const Configuration& c, const Coords& transformed, Real tol) {
  const Index n = c.n_ions();
  Mat cost(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      Real d2 = (transformed.row(i) - c.positions.row(j)).squaredNorm();
      if (!(c.species[size_t(i)] == c.species[size_t(j)])) d2 += 1e6;
      cost(i, j) = d2;
    }
  const std::vector<int> match = min_cost_assignment(cost);
  for (Index i = 0; i < n; ++i)
    if (cost(i, match[size_t(i)]) > tol * tol) return false;
  return true;
}

SymmetryFlags detect_symmetry(const Configuration& c, Real tol) {
  auto inverted = [&](bool fx, bool fy, bool fz) {
    Coords p = c.positions;
    if (fx) p.col(0) *= -1.0;
    if (fy) p.col(1) *= -1.0;
    if (fz) p.col(2) *= -1.0;
    return p;
  };
  SymmetryFlags f;
  f.sym_x = sets_match(c, inverted(true, false, false), tol);
  f.sym_y = sets_match(c, inverted(false, true, false), tol);
  f.sym_z = sets_match(c, inverted(false, false, true), tol);
  f.sym_xy_combined =
      (f.sym_x && f.sym_y) ? true : sets_match(c, inverted(true, true, false), tol);
  return f;
}

struct PinSet {
  std::vector<std::pair<Index, int>> pins;

  void apply_to_vec(const Configuration& c, Vec& v) const {
    const auto& mask = c.dof_mask.active;
    for (const auto& [ion, axis] : pins) {
      if (!mask[size_t(axis)]) continue;
      int k = 0;
      for (int a = 0; a < axis; ++a)
        if (mask[size_t(a)]) ++k;
      v[ion * c.dof_mask.n_active_axes() + k] = 0.0;
    }
  }
  void apply_to_hessian(const Configuration& c, Mat& h) const {
    const auto& mask = c.dof_mask.active;
    for (const auto& [ion, axis] : pins) {
      if (!mask[size_t(axis)]) continue;
      int k = 0;
      for (int a = 0; a < axis; ++a)
        if (mask[size_t(a)]) ++k;
      const Index row = ion * c.dof_mask.n_active_axes() + k;
      h.row(row).setZero();
      h.col(row).setZero();
      h(row, row) = 1.0;
    }
  }
  bool empty() const { return pins.empty(); }
};

CriticalPoint newton_impl(const Configuration& seed, const PseudoTrap& trap,
                          const NewtonOptions& opts, const PinSet& pinset) {
  Configuration c = seed;
  c.apply_mask();
  const int na = c.dof_mask.n_active_axes();
  const Real spacing = std::max(c.lattice_spacing(), Real(1e-3));

  Vec g(c.n_dof());
  for (int it = 0; it <= opts.max_iterations; ++it) {
    const Coords grad_full = gradient(c, trap);
    Index k = 0;
    for (Index i = 0; i < c.n_ions(); ++i)
      for (int a = 0; a < 3; ++a)
        if (c.dof_mask.active[a]) g[k++] = grad_full(i, a);
    pinset.apply_to_vec(c, g);

    if (g.norm() < opts.grad_tol) {
      CriticalPoint cp = classify(c, trap, opts.zero_threshold);
      return cp;
    }
    if (it == opts.max_iterations) break;

    Mat h = hessian(c, trap);
    pinset.apply_to_hessian(c, h);
    Eigen::PartialPivLU<Mat> lu(h);
    Vec step = lu.solve(-g);
    if (!step.allFinite())
      throw ConvergenceError("newton_critical: singular Hessian");

    // Clamp the largest per-ion displacement.
    Real max_disp = 0.0;
    for (Index i = 0; i < c.n_ions(); ++i)
      max_disp = std::max(max_disp, step.segment(i * na, na).norm());
    const Real cap = opts.max_step_factor * spacing;
    if (max_disp > cap) step *= cap / max_disp;

    Vec x = c.active_coords() + step;
    c.set_active_coords(x);
    if (!c.positions.allFinite())
      throw ConvergenceError("newton_critical: non-finite iterate");
  }
  throw ConvergenceError("newton_critical: no convergence after " +
                         std::to_string(opts.max_iterations) + " iterations");
}

}  // namespace

CriticalPoint classify(const Configuration& config, const PseudoTrap& trap,
                       Real zero_threshold) {
  CriticalPoint cp;
  cp.config = config;
  cp.zero_threshold = zero_threshold;
  cp.energy = potential_energy(config, trap);
  cp.grad_norm = active_grad_norm(config, trap);

  const Mat k = hessian(config, trap);
  Eigen::SelfAdjointEigenSolver<Mat> es(k);
  if (es.info() != Eigen::Success) throw ConvergenceError("classify: eigensolver failed");
  cp.eigenvalues = es.eigenvalues();

  cp.n_negative = 0;
  cp.at_bifurcation = false;
  for (Index i = 0; i < cp.eigenvalues.size(); ++i) {
    if (cp.eigenvalues[i] < -zero_threshold) ++cp.n_negative;
    if (std::abs(cp.eigenvalues[i]) < zero_threshold) cp.at_bifurcation = true;
  }
  cp.local_index = cp.at_bifurcation ? 0 : (cp.n_negative % 2 ? -1 : 1);
  cp.stable = !cp.at_bifurcation && cp.n_negative == 0;
  cp.symmetry = detect_symmetry(config, kSymmetryMatchTol);
  return cp;
}

CriticalPoint newton_critical(const Configuration& seed, const PseudoTrap& trap,
                              const NewtonOptions& opts) {
  return newton_impl(seed, trap, opts, PinSet{});
}

CriticalPoint relax(const Configuration& seed, const PseudoTrap& trap,
                    const RelaxOptions& opts) {
  Configuration c = seed;
  c.apply_mask();
  c.validate();
  const PinSet pinset{opts.pinned};
  const Index n = c.n_ions();

  Vec inv_mass(n);
  for (Index i = 0; i < n; ++i) inv_mass[i] = 1.0 / c.species[size_t(i)].mass_ratio;

  auto masked_force = [&](const Configuration& cfg) {
    Coords f = -gradient(cfg, trap);
    for (const auto& [ion, axis] : opts.pinned) f(ion, axis) = 0.0;
    return f;
  };

  Real dt = opts.timestep;
  if (dt <= 0.0)
    dt = 2.0 * constants::pi / (50.0 * std::sqrt(std::max(stiffness_bound(c, trap), Real(1.0))));

  Coords vel = Coords::Zero(n, 3);
  Coords force = masked_force(c);
  const Real t_max = opts.schedule.duration * opts.schedule.max_duration_factor;
  Real t = 0.0;
  bool settled = false;
  long step_count = 0;

  while (t < t_max) {
    const Real g0 = opts.schedule.friction_at(t);
    const Real g1 = opts.schedule.friction_at(t + dt);
    // Velocity-Verlet with linear friction, explicit first half-kick and
    // implicit second.
    Coords vhalf = vel * (1.0 - 0.5 * dt * g0);
    for (Index i = 0; i < n; ++i) vhalf.row(i) += 0.5 * dt * inv_mass[i] * force.row(i);
    for (const auto& [ion, axis] : opts.pinned) vhalf(ion, axis) = 0.0;
    c.positions += dt * vhalf;
    c.apply_mask();
    force = masked_force(c);
    for (Index i = 0; i < n; ++i)
      vel.row(i) = (vhalf.row(i) + 0.5 * dt * inv_mass[i] * force.row(i)) / (1.0 + 0.5 * dt * g1);
    for (const auto& [ion, axis] : opts.pinned) vel(ion, axis) = 0.0;
    t += dt;
    ++step_count;

    if (step_count % 64 == 0) {
      Real ke = 0.0;
      for (Index i = 0; i < n; ++i)
        ke += 0.5 * c.species[size_t(i)].mass_ratio * vel.row(i).squaredNorm();
      if (ke < opts.schedule.kinetic_exit) {
        // Residual force excluding the pinned coordinates.
        Coords g = -masked_force(c);
        for (int a = 0; a < 3; ++a)
          if (!c.dof_mask.active[a]) g.col(a).setZero();
        if (g.norm() < opts.schedule.grad_exit) {
          settled = true;
          break;
        }
      }
      if (!c.positions.allFinite())
        throw ConvergenceError("relax: non-finite state during damped stage");
    }
  }
  if (!settled)
    throw ConvergenceError("relax: damped stage did not settle within " +
                           std::to_string(t_max) + " time units");

  CriticalPoint cp = newton_impl(c, trap, opts.newton, pinset);
  if (pinset.empty() && cp.n_negative > 0) cp.drifted_to_saddle = true;
  return cp;
}

// ---------------------------------------------------------------------------
// Seeds

Index kink_boundary_index(Index n_ions, int offset) {
  const Index mid = (n_ions % 2 == 1) ? (n_ions - 1) / 2 : n_ions / 2;
  Index boundary;
  if (offset == 0)
    boundary = (n_ions % 2 == 1) ? mid + 1 : mid;
  else if (offset > 0)
    boundary = mid + offset;
  else
    boundary = mid + offset + (n_ions % 2 == 1 ? 1 : 0);
  if (boundary < 1 || boundary >= n_ions)
    throw InvalidArgumentError("kink_boundary_index: offset outside the chain");
  return boundary;
}

Real kink_site_position(const Configuration& reference, int offset) {
  const Index b = kink_boundary_index(reference.n_ions(), offset);
  const std::vector<Index> order = reference.axial_order();
  return 0.5 * (reference.positions(order[size_t(b - 1)], 0) +
                reference.positions(order[size_t(b)], 0));
}

Real domain_wall_position(const Configuration& config) {
  const std::vector<Index> order = config.axial_order();
  const Index n = config.n_ions();
  if (n < 6) throw InvalidArgumentError("domain_wall_position: too few ions");
  std::vector<Real> ys(static_cast<size_t>(n), 0.0);
  for (Index k = 0; k < n; ++k) ys[size_t(k)] = std::abs(config.positions(order[size_t(k)], 1));
  std::vector<Real> sorted = ys;
  std::nth_element(sorted.begin(), sorted.begin() + long(sorted.size() / 2), sorted.end());
  const Real y_scale = sorted[sorted.size() / 2];

  // Alternation parity of the off-axis ions.
  std::vector<std::pair<Real, Real>> s;  // (x, parity sign)
  for (Index k = 0; k < n; ++k) {
    const Real y = config.positions(order[size_t(k)], 1);
    if (std::abs(y) < 0.3 * y_scale) continue;
    s.push_back({config.positions(order[size_t(k)], 0),
                 (y > 0.0 ? 1.0 : -1.0) * (k % 2 == 0 ? 1.0 : -1.0)});
  }
  if (s.size() < 4) throw InvalidArgumentError("domain_wall_position: no zigzag pattern");

  // Boundary maximizing the domain split.
  Real total = 0.0;
  for (const auto& [x, sg] : s) total += sg;
  Real best = -1.0, best_x = s.front().first, prefix = 0.0;
  for (size_t k = 0; k + 1 < s.size(); ++k) {
    prefix += s[k].second;
    const Real score = std::abs(prefix - (total - prefix));
    if (score > best) {
      best = score;
      best_x = 0.5 * (s[k].first + s[k + 1].first);
    }
  }
  return best_x;
}

Configuration chain_equilibrium(Index n_ions, DofMask mask) {
  if (n_ions < 1) throw InvalidArgumentError("chain_equilibrium: need at least one ion");
  Coords p = Coords::Zero(n_ions, 3);
  if (n_ions == 1) return Configuration::uniform(p, mask);
  const Real half_len = std::pow(Real(n_ions), 0.66) / 1.5;
  for (Index i = 0; i < n_ions; ++i)
    p(i, 0) = -half_len + 2.0 * half_len * Real(i) / Real(n_ions - 1);

  Configuration c = Configuration::uniform(p, DofMask::axial_x());
  NewtonOptions opts;
  opts.max_iterations = 200;
  c = newton_critical(c, PseudoTrap{1.0, 1.0}, opts).config;
  c.dof_mask = mask;
  c.apply_mask();
  return c;
}

std::pair<Real, Vec> chain_radial_crossing(const Configuration& chain, int k) {
  const Index n = chain.n_ions();
  Mat c = Mat::Zero(n, n);
  for (Index i = 0; i < n; ++i)
    for (Index j = 0; j < n; ++j) {
      if (i == j) continue;
      const Real r = std::abs(chain.positions(i, 0) - chain.positions(j, 0));
      const Real w = chain.species[size_t(i)].charge_ratio *
                     chain.species[size_t(j)].charge_ratio / (r * r * r);
      c(i, i) += w;
      c(i, j) -= w;
    }
  Eigen::SelfAdjointEigenSolver<Mat> es(c);
  const Index idx = n - 1 - k;  // descending order of crossing value
  if (idx < 0) throw InvalidArgumentError("chain_radial_crossing: mode index out of range");
  Vec mode = es.eigenvectors().col(idx);
  // Deterministic sign: component of the leftmost ion positive.
  Index leftmost = 0;
  chain.positions.col(0).minCoeff(&leftmost);
  if (mode[leftmost] < 0.0) mode = -mode;
  return {es.eigenvalues()[idx], mode};
}

namespace {

// Relaxed zigzag at trap.gamma_y, built by forming the zigzag just below the
// chain transition and continuing it down in gamma_y. Always planar (xy).
Configuration zigzag_configuration(Index n, const PseudoTrap& trap, DofMask mask) {
  Configuration chain = chain_equilibrium(n, DofMask::planar_xy());
  auto [gamma_crit, mode] = chain_radial_crossing(chain, 0);
  if (trap.gamma_y >= 0.999 * gamma_crit) {
    chain.dof_mask = mask;
    chain.apply_mask();
    return chain;  // above the transition the chain is the zigzag
  }

  RelaxOptions ropts;
  ropts.schedule.friction = 0.8;
  ropts.schedule.duration = 150.0 * 2.0 * constants::pi;
  ropts.schedule.grad_exit = 1e-3;

  const Real gamma_start = std::min(trap.gamma_y, 0.97 * gamma_crit);
  Configuration c = chain;
  c.positions.col(1) = 0.05 * mode / mode.cwiseAbs().maxCoeff();
  c = relax(c, PseudoTrap::planar(gamma_start), ropts).config;
  if (c.positions.col(1).cwiseAbs().maxCoeff() < 1e-4)
    throw ConvergenceError("zigzag formation failed at gamma_y = " +
                           std::to_string(gamma_start));

  Real gamma = gamma_start;
  Real step = -std::max(Real(1.0), gamma_crit / 50.0);
  const Real spacing_bound = 0.5 * c.lattice_spacing();
  while (gamma > trap.gamma_y + 1e-12) {
    const Real gamma_next = std::max(trap.gamma_y, gamma + step);
    bool ok = true;
    Configuration trial = c;
    try {
      trial = newton_critical(c, PseudoTrap::planar(gamma_next)).config;
    } catch (const ConvergenceError&) {
      ok = false;
    }
    if (ok) {
      const Real disp = (trial.positions - c.positions).rowwise().norm().maxCoeff();
      if (disp > spacing_bound || trial.positions.col(1).cwiseAbs().maxCoeff() < 1e-4) ok = false;
    }
    if (!ok) {
      step *= 0.5;
      if (std::abs(step) < 1e-4 * gamma_crit)
        throw ConvergenceError("zigzag continuation stalled at gamma_y = " +
                               std::to_string(gamma));
      continue;
    }
    c = trial;
    gamma = gamma_next;
  }
  c.dof_mask = mask;
  c.apply_mask();

  // Quasi-3D regime: when the planar zigzag is transversally unstable (large
  // crystals at near-degenerate radial trapping), nudge the seed along the
  // soft z mode so downstream relaxations leave the z = 0 saddle subspace.
  if (mask.active[2]) {
    const Index n_ions = c.n_ions();
    Mat cz = Mat::Zero(n_ions, n_ions);
    for (Index i = 0; i < n_ions; ++i)
      for (Index j = 0; j < n_ions; ++j) {
        if (i == j) continue;
        const Real r = (c.positions.row(i) - c.positions.row(j)).norm();
        const Real w = 1.0 / (r * r * r);
        cz(i, i) += w;
        cz(i, j) -= w;
      }
    Eigen::SelfAdjointEigenSolver<Mat> es(cz);
    const Real gz_crit = es.eigenvalues()[n_ions - 1];
    if (gz_crit > trap.gamma_z) {
      Vec mode = es.eigenvectors().col(n_ions - 1);
      Index leftmost = 0;
      c.positions.col(0).minCoeff(&leftmost);
      if (mode[leftmost] < 0.0) mode = -mode;
      c.positions.col(2) += 0.05 * c.lattice_spacing() / mode.cwiseAbs().maxCoeff() * mode;
    }
  }
  return c;
}

// Flip the radial coordinate of all ions at axial-order index >= boundary.
void flip_tail(Configuration& c, const std::vector<Index>& order, Index boundary) {
  for (size_t k = size_t(boundary); k < order.size(); ++k) c.positions(order[k], 1) *= -1.0;
}

// Deterministic out-of-plane bumps on the ions around a kink boundary, so
// 3-D relaxations leave the z = 0 saddle subspace; the two sides of the
// boundary are pushed in opposite directions.
void z_bump(Configuration& c, const std::vector<Index>& order, Index boundary, Real sign) {
  if (!c.dof_mask.active[2]) return;
  const Index b_lo = std::clamp<Index>(boundary - 1, 0, c.n_ions() - 1);
  const Index b_hi = std::clamp<Index>(boundary, 0, c.n_ions() - 1);
  const Real xb = 0.5 * (c.positions(order[size_t(b_lo)], 0) + c.positions(order[size_t(b_hi)], 0));
  const Real halo = 1.8 * c.lattice_spacing();
  for (Index i = 0; i < c.n_ions(); ++i) {
    const Real dx = c.positions(i, 0) - xb;
    if (std::abs(dx) < halo) c.positions(i, 2) += 0.08 * sign * (dx >= 0.0 ? 1.0 : -1.0);
  }
}

}  // namespace

Configuration make_seed(const SeedSpec& spec, const PseudoTrap& trap, DofMask mask) {
  const Index n = spec.n_ions;
  if (n < 1) throw InvalidArgumentError("make_seed: n_ions must be >= 1");

  Configuration c;
  switch (spec.kind) {
    case SeedSpec::Kind::Chain:
      c = chain_equilibrium(n, mask);
      break;

    case SeedSpec::Kind::Zigzag:
      c = zigzag_configuration(n, trap, mask);
      break;

    case SeedSpec::Kind::OddKink:
    case SeedSpec::Kind::DisplacedKink:
    case SeedSpec::Kind::ExtendedKinkSeed: {
      c = zigzag_configuration(n, trap, mask);
      const std::vector<Index> order = c.axial_order();
      const int offset = spec.kind == SeedSpec::Kind::DisplacedKink ? spec.offset : 0;
      const Index boundary = kink_boundary_index(n, offset);
      flip_tail(c, order, boundary);
      if (offset == 0 && n % 2 == 1) {
        // Centre ion on the axis so the boundary bisects the crystal.
        c.positions(order[size_t((n - 1) / 2)], 1) = 0.0;
      }
      if (spec.kind == SeedSpec::Kind::ExtendedKinkSeed) {
        const Real xc = c.positions(order[size_t((n - 1) / 2)], 0);
        const Real w = 3.0 * c.lattice_spacing();
        for (Index i = 0; i < n; ++i)
          c.positions(i, 1) *= std::tanh(std::abs(c.positions(i, 0) - xc) / w);
      }
      z_bump(c, order, boundary, 1.0);
      break;
    }

    case SeedSpec::Kind::TwoKink: {
      c = zigzag_configuration(n, trap, mask);
      const std::vector<Index> order = c.axial_order();
      const Index b = Index(spec.separation);
      if (b < 1 || b >= n - 1) throw InvalidArgumentError("make_seed: two-kink block invalid");
      const Index left = n / 2 - b / 2;
      const Index right = left + b;  // flip [left, right)
      for (Index k = left; k < right; ++k) c.positions(order[size_t(k)], 1) *= -1.0;
      z_bump(c, order, left, 1.0);
      z_bump(c, order, right, -1.0);  // opposite cores: the stable pairing
      break;
    }

    case SeedSpec::Kind::DarkIon: {
      SeedSpec base = spec;
      base.kind = spec.base;
      if (base.kind == SeedSpec::Kind::DarkIon)
        throw InvalidArgumentError("make_seed: dark_ion base cannot be dark_ion");
      c = make_seed(base, trap, mask);
      if (spec.dark_index < 0 || spec.dark_index >= n)
        throw InvalidArgumentError("make_seed: dark-ion index out of range");
      spec.dark.validate();
      const Index ion = c.axial_order()[size_t(spec.dark_index)];
      c.species[size_t(ion)] = spec.dark;
      // A heavy defect sits outside the bright rows (weaker radial
      // pseudopotential); displace the seed proportionally to the weight
      // deficit so the relaxation starts in the right basin. Vanishes for the
      // reference species.
      const Real deficit = 1.0 - (spec.dark.charge_ratio * spec.dark.charge_ratio /
                                  spec.dark.mass_ratio);
      if (deficit > 0.0) {
        const Real extent = c.positions.col(1).cwiseAbs().maxCoeff();
        const Real sign = c.positions(ion, 1) >= 0.0 ? 1.0 : -1.0;
        c.positions(ion, 1) += 2.0 * deficit * extent * sign;
        if (c.dof_mask.active[2]) c.positions(ion, 2) += 0.5 * deficit * extent;
      }
      break;
    }
  }

  if (spec.noise > 0.0) {
    Rng rng(spec.noise_seed);
    for (Index i = 0; i < c.n_ions(); ++i)
      for (int a = 1; a < 3; ++a)
        if (c.dof_mask.active[a]) c.positions(i, a) += spec.noise * rng.normal();
  }
  c.apply_mask();
  return c;
}

}  // namespace kinklab
