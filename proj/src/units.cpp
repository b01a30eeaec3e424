#include "kinklab/units.hpp"

#include <cmath>

#include "kinklab/errors.hpp"

namespace kinklab {

namespace {

Real gaussian_charge_sq(Real charge_C) {
  return constants::coulomb_constant * charge_C * charge_C;  // e_g^2, J*m
}

}  // namespace

UnitSystem UnitSystem::pseudopotential(Real mass_kg, Real charge_C, Real omega_x,
                                       Real doppler_temperature_K) {
  if (!(mass_kg > 0) || !(charge_C > 0) || !(omega_x > 0))
    throw InvalidArgumentError("UnitSystem: mass, charge, omega_x must be > 0");
  UnitSystem u;
  u.kind_ = Kind::Pseudopotential;
  u.mass_ = mass_kg;
  u.charge_ = charge_C;
  u.ref_freq_ = omega_x;
  u.t_doppler_ = doppler_temperature_K;
  u.time_ = 1.0 / omega_x;
  u.length_ = std::cbrt(gaussian_charge_sq(charge_C) / (mass_kg * omega_x * omega_x));
  u.energy_ = mass_kg * omega_x * omega_x * u.length_ * u.length_;
  return u;
}

UnitSystem UnitSystem::paul(Real mass_kg, Real charge_C, Real Omega_rf,
                            Real doppler_temperature_K) {
  if (!(mass_kg > 0) || !(charge_C > 0) || !(Omega_rf > 0))
    throw InvalidArgumentError("UnitSystem: mass, charge, Omega_rf must be > 0");
  UnitSystem u;
  u.kind_ = Kind::Paul;
  u.mass_ = mass_kg;
  u.charge_ = charge_C;
  u.ref_freq_ = Omega_rf;
  u.t_doppler_ = doppler_temperature_K;
  const Real half = 0.5 * Omega_rf;
  u.time_ = 2.0 / Omega_rf;
  u.length_ = std::cbrt(gaussian_charge_sq(charge_C) / (mass_kg * half * half));
  u.energy_ = mass_kg * half * half * u.length_ * u.length_;
  return u;
}

Real UnitSystem::thermal_energy(Real temperature_K) const {
  return constants::boltzmann * temperature_K / energy_;
}

Real UnitSystem::doppler_energy() const {
  if (!(t_doppler_ > 0))
    throw InvalidArgumentError("UnitSystem: doppler_temperature not set");
  return thermal_energy(t_doppler_);
}

std::string UnitSystem::kind_name() const {
  return kind_ == Kind::Pseudopotential ? "pseudopotential" : "paul";
}

}  // namespace kinklab
