#pragma once

#include <string>

#include "kinklab/types.hpp"

namespace kinklab {

// Nondimensionalization of the ion-crystal problem, Gaussian-units convention:
// the Coulomb constant e^2/(4 pi eps0) enters only here.
//
// Pseudopotential system (reference frequency = axial secular omega_x):
//   time_unit   = 1/omega_x
//   length_unit = (e_g^2 / (m omega_x^2))^(1/3)
//   energy_unit = m omega_x^2 d^2
//
// Paul system (reference frequency = Omega/2, drive cos(2t), rf period pi):
//   time_unit   = 2/Omega
//   length_unit = (e_g^2 / (m (Omega/2)^2))^(1/3)
//   energy_unit = m (Omega/2)^2 d^2
// which normalizes the Coulomb coefficient to 1 in both systems.
class UnitSystem {
 public:
  enum class Kind { Pseudopotential, Paul };

  static UnitSystem pseudopotential(Real mass_kg, Real charge_C, Real omega_x,
                                    Real doppler_temperature_K = 0.0);
  static UnitSystem paul(Real mass_kg, Real charge_C, Real Omega_rf,
                         Real doppler_temperature_K = 0.0);

  Kind kind() const { return kind_; }
  Real reference_mass() const { return mass_; }
  Real reference_charge() const { return charge_; }
  // omega_x for the pseudopotential system, Omega_rf for the Paul system.
  Real reference_frequency() const { return ref_freq_; }
  Real doppler_temperature() const { return t_doppler_; }

  Real length_unit() const { return length_; }  // meters
  Real time_unit() const { return time_; }      // seconds
  Real energy_unit() const { return energy_; }  // joules

  Real to_si_length(Real x) const { return x * length_; }
  Real from_si_length(Real x) const { return x / length_; }
  Real to_si_time(Real t) const { return t * time_; }
  Real from_si_time(Real t) const { return t / time_; }
  Real to_si_energy(Real e) const { return e * energy_; }
  Real from_si_energy(Real e) const { return e / energy_; }

  // k_B T in nondimensional energy units.
  Real thermal_energy(Real temperature_K) const;
  // k_B T_D in nondimensional energy units (doppler_temperature must be set).
  Real doppler_energy() const;

  std::string kind_name() const;

 private:
  UnitSystem() = default;
  Kind kind_ = Kind::Pseudopotential;
  Real mass_ = 0, charge_ = 0, ref_freq_ = 0, t_doppler_ = 0;
  Real length_ = 0, time_ = 0, energy_ = 0;
};

}  // namespace kinklab
