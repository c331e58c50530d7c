#pragma once

#include <functional>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bullseye/fdtd.hpp"
#include "bullseye/materials.hpp"

namespace bullseye::cavity {

/// Lengths in nm. `omega` and `kappa` are in solver units (rad per nm/c);
/// `decay_rate_per_ps` is the energy decay rate kappa in 1/ps.
struct ResonanceEstimate {
  double wavelength_nm = 0.0;
  double fwhm_nm = 0.0;
  double q = 0.0;
  double decay_rate_per_ps = 0.0;
  double amplitude = 0.0;
  double omega = 0.0;
  double kappa = 0.0;
  /// Q from the exponential fit to the band-passed analytic envelope.
  double q_envelope = 0.0;
};

struct ExtractOptions {
  double min_wavelength_nm = 0.0;  ///< search band; 0 disables the bound
  double max_wavelength_nm = 0.0;
  double floor_factor = 5.0;
  int max_peaks = 8;
  std::size_t min_samples = 4096;
};

/// Resonances in probe ring-down records sampled every `sample_dt` (nm/c).
/// Power spectra of all series are summed; each peak is fitted with the
/// spectrum of a truncated damped exponential, which is the sampled-data
/// form of a Lorentzian. Sorted by Q, highest first.
std::vector<ResonanceEstimate> extract_resonances(const std::vector<std::vector<double>>& series,
                                                  double sample_dt, const ExtractOptions& options = {});

struct PowerSpectrum {
  std::vector<double> wavelength_nm;  ///< increasing
  std::vector<double> power;
};

/// Summed power spectrum of the probe series between the two wavelengths,
/// zero-padded to 4x. No taper: the record ends after the target mode has
/// decayed, so the high-Q lines keep their Lorentzian shape.
PowerSpectrum ringdown_spectrum(const std::vector<std::vector<double>>& series, double sample_dt,
                                double min_wavelength_nm, double max_wavelength_nm);

struct ModeVolume {
  double volume_nm3 = 0.0;
  double volume_cubic_wavelengths = 0.0;  ///< in (lambda / n)^3
  double index = 0.0;                     ///< n at the field maximum
  double r_max_nm = 0.0;
  double z_max_nm = 0.0;
};

/// V = int eps |E|^2 dV / max(eps |E|^2) from single-frequency phasors, over
/// the region outside the absorbers. Throws DegenerateField for zero fields.
ModeVolume mode_volume(const fdtd::VolumeDft& field, const fdtd::Lattice& lattice, double wavelength_nm);

/// F = (3 / 4 pi^2) Q / V with V in (lambda / n)^3.
double theoretical_purcell(double q, double volume_cubic_wavelengths);
double theoretical_purcell(double q, double volume_nm3, double wavelength_nm, double index);

struct FarFieldMap {
  std::vector<double> theta_deg;  ///< 0 = surface normal, up to 90
  std::vector<double> intensity;  ///< per solid angle, upper hemisphere integrates to 1
  double radiated_power = 0.0;    ///< upper-hemisphere integral before normalization
  double total_radiated_power = 0.0;  ///< full-sphere integral
  double plane_flux = 0.0;        ///< upward Poynting flux through the top face
  double surface_flux = 0.0;      ///< net outward flux through the closed surface
};

/// Projects tangential fields recorded on a closed surface in air to the far
/// field through the equivalent surface currents, averaged over azimuth.
/// The region outside the surface must be vacuum.
FarFieldMap near_to_far_field(const fdtd::SurfaceDft& surface, const fdtd::Lattice& lattice, double wavelength_nm,
                              int num_angles = 361);

/// Fraction of the upper-hemisphere power inside the cone asin(NA).
double collection_efficiency(const FarFieldMap& far_field, double numerical_aperture);

struct CavityOptions {
  double target_min_nm = 425.0;
  double target_max_nm = 455.0;
  /// Clearance of the far-field recording surface from the membrane faces
  /// and from the outermost ring.
  double surface_gap_nm = 125.0;
  /// Fraction of the ring-down used to locate the target mode before the
  /// single-frequency monitors start.
  double locate_fraction = 0.4;
  std::vector<double> numerical_apertures{0.65};
  int num_angles = 361;
};

struct CavitySetup {
  geom::BullseyeGeometry geometry;
  geom::LayerStack stack = geom::default_stack();
  geom::GridSpec grid;
  fdtd::SolverConfig solver;
  CavityOptions options;
};

struct CavityReport {
  std::vector<ResonanceEstimate> resonances;
  ResonanceEstimate target;
  ModeVolume mode_volume;
  FarFieldMap far_field;
  std::map<double, double> collection;  ///< NA -> fraction
  double theoretical_purcell = 0.0;
  double dt = 0.0;
  double sample_dt = 0.0;
  long total_steps = 0;
  long source_off_step = 0;
  std::vector<std::vector<double>> ringdown;  ///< probe series after source off
};

/// Probe set used when the configuration lists none: points on the emitter
/// plane near the cavity centre.
std::vector<fdtd::ProbePoint> default_probes(const geom::LayerStack& stack);

/// One adaptive run: source, ring-down, target-mode location inside the
/// target window, then phasor monitors at that frequency for the remainder.
CavityReport simulate_cavity(const CavitySetup& setup);

struct SweepAxes {
  std::vector<double> disk_diameter_nm;
  std::vector<double> period_nm;
  std::vector<double> ring_width_nm;
  std::vector<double> thickness_nm;  ///< membrane thickness; layers scale proportionally
};

struct SweepRow {
  std::size_t index = 0;
  CavitySetup setup;
  std::optional<CavityReport> report;
  std::string error_kind;
  std::string error_message;
};

/// Expands the axes (empty axis = base value) in row-major order D, period,
/// ring width, thickness.
std::vector<CavitySetup> expand_sweep(const CavitySetup& base, const SweepAxes& axes);

/// Runs every point (OpenMP across points) and calls `on_row` as each row
/// finishes, from one thread at a time. Per-point failures are recorded in
/// the row. Returned rows are in expansion order.
std::vector<SweepRow> sweep_parameters(const CavitySetup& base, const SweepAxes& axes,
                                       const std::function<void(const SweepRow&)>& on_row = {});

}  // namespace bullseye::cavity
