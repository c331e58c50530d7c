#pragma once

#include <numbers>

// Single table of physical constants and unit conversions. Solver code works
// in units with c = 1 and lengths in nm, so one unit of time is the light
// travel time over 1 nm.
namespace bullseye::constants {

inline constexpr double pi = std::numbers::pi;
inline constexpr double c_m_per_s = 299792458.0;
inline constexpr double c_nm_per_ps = 299792.458;
inline constexpr double h_eV_s = 4.135667696e-15;
/// h*c in eV nm, pinned to the value used for all eV <-> nm conversions.
inline constexpr double hc_eV_nm = 1239.842;

inline constexpr double wavelength_to_ev(double nm) { return hc_eV_nm / nm; }
inline constexpr double ev_to_wavelength(double ev) { return hc_eV_nm / ev; }

/// Solver time unit (nm / c) expressed in picoseconds.
inline constexpr double solver_time_to_ps = 1.0 / c_nm_per_ps;

/// Angular frequency (rad per solver time unit) of vacuum wavelength `nm`.
inline constexpr double angular_frequency(double nm) { return 2.0 * pi / nm; }

inline constexpr double mhz_to_period_ps(double mhz) { return 1.0e6 / mhz; }

}  // namespace bullseye::constants
