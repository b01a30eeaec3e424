#pragma once

#include <optional>
#include <string>

#include "kinklab/configuration.hpp"
#include "kinklab/continuation.hpp"
#include "kinklab/critical_point.hpp"
#include "kinklab/imaging.hpp"
#include "kinklab/modes.hpp"
#include "kinklab/pn.hpp"
#include "kinklab/trapfit.hpp"
#include "kinklab/units.hpp"

namespace kinklab {

// JSON document embedding the configuration, the trap model and (optionally)
// the unit system.
std::string configuration_json(const Configuration& c, const std::optional<PseudoTrap>& pseudo,
                               const std::optional<PaulTrap>& paul,
                               const std::optional<UnitSystem>& units);

std::string critical_point_json(const CriticalPoint& cp, const PseudoTrap& trap,
                                const std::optional<UnitSystem>& units = std::nullopt);

// Branch CSV: parameter,energy,n_negative,i0,min_eigenvalue
std::string branch_csv(const Branch& b);
// Sidecar with configurations and events.
std::string branch_json(const Branch& b);

// Spectrum CSV: mode,lambda,omega,participation
std::string spectrum_csv(const ModeSpectrum& s);
std::string mode_vectors_json(const ModeSpectrum& s);

// Landscape CSV: offset,E_min,E_saddle_left,E_saddle_right,stable
std::string pn_landscape_csv(const PNLandscape& l);
std::string pn_landscape_json(const PNLandscape& l);

// Strided trajectory CSV: t,E,x0,y0,z0,vx0,... (wide rows).
std::string trajectory_csv(const Trajectory& t);

std::string fit_result_json(const FitResult& r);
std::string dark_fit_json(const DarkIonFitResult& r);

std::string image_metadata_json(const IntegrationImage& image);

std::string omega_low_curve_csv(const OmegaLowCurve& c);

void write_text_file(const std::string& path, const std::string& content);
std::string read_text_file(const std::string& path);

}  // namespace kinklab
