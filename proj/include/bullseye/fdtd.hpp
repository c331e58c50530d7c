#pragma once

#include <complex>
#include <optional>
#include <vector>

#include "bullseye/materials.hpp"

// Body-of-revolution FDTD on the (r, z) half plane for one azimuthal
// harmonic m. Fields carry the angular factors
//   E_r, E_z, H_phi ~ cos(m phi)      E_phi, H_r, H_z ~ sin(m phi)
// so every component is a real 2-D array. Units: c = eps0 = mu0 = 1,
// lengths in nm, time in nm / c.
//
// Yee placement (i, j integer node indices, r_i = i dr, z_j = z_min + j dz):
//   E_r (i+1/2, j)   E_phi (i, j)       E_z (i, j+1/2)
//   H_r (i, j+1/2)   H_phi (i+1/2, j+1/2)  H_z (i+1/2, j)
// All six arrays use LatticeShape storage indexed by the lower-left integer
// node, so e.g. er[at(i, j)] is E_r at (i+1/2, j).
namespace bullseye::fdtd {

enum class Polarization { InPlane, Vertical };
enum class Boundary { Pml, Pec };

/// Gaussian-modulated sinusoid. `bandwidth_nm` is the FWHM of the source
/// power spectrum. A positive `sheet_waist_nm` turns the point source into a
/// horizontal current sheet with Gaussian radial profile (a normally
/// incident beam for m = 1).
struct DipoleSource {
  double r_nm = 10.0;
  double z_nm = 44.6;
  Polarization polarization = Polarization::InPlane;
  double center_wavelength_nm = 440.0;
  double bandwidth_nm = 30.0;
  double amplitude = 1.0;
  double sheet_waist_nm = 0.0;

  double sigma_t() const;
  double peak_time() const { return 4.5 * sigma_t(); }
  double off_time() const { return 9.0 * sigma_t(); }
  double waveform(double t) const;
};

struct ProbePoint {
  double r_nm = 0.0;
  double z_nm = 0.0;
};

struct SolverConfig {
  int m = 1;
  /// Fraction of the stable time step for this lattice and m.
  double courant_factor = 0.9;
  /// 0 derives the length from expected_q and ringdown_factor.
  long total_steps = 0;
  double expected_q = 1100.0;
  /// Ring-down length in units of the energy decay time Q / omega.
  double ringdown_factor = 10.0;
  int pml_thickness = 12;
  /// Normal-incidence reflection target of the graded absorber.
  double pml_reflection = 1e-5;
  Boundary r_boundary = Boundary::Pml;
  Boundary z_boundary = Boundary::Pml;
  DipoleSource source;
  std::vector<ProbePoint> probes;
  double blowup_guard = 1e6;
  int guard_interval = 10;
  int sample_stride = 0;  ///< 0: about 20 samples per source period
  bool parallel = true;

  void validate() const;
};

/// Largest stable step of the BOR leapfrog for the given spacings and m.
double stable_time_step(double dr, double dz, int m);

/// Precomputed update coefficients for one run.
struct Lattice {
  geom::LatticeShape shape;
  double dr = 0.0, dz = 0.0, dt = 0.0, z_min = 0.0;
  int m = 1;
  int npml_r = 0, npml_z = 0;
  std::vector<double> r_int, r_half, inv_r_int, inv_r_half;
  std::vector<double> ce_r, ce_p, ce_z;  ///< dt / eps at each E node
  std::vector<double> eps_r, eps_p, eps_z;
  // CPML recursion coefficients psi <- b psi + c D on integer / half nodes.
  std::vector<double> bz_int, cz_int, bz_half, cz_half;
  std::vector<double> br_int, cr_int, br_half, cr_half;

  int nr() const { return shape.nr; }
  int nz() const { return shape.nz; }
  double z_int(int j) const { return z_min + j * dz; }
  double z_half(int j) const { return z_min + (j + 0.5) * dz; }
  bool z_pml_row(int j) const { return npml_z > 0 && (j < npml_z || j >= shape.nz - npml_z); }
  bool r_pml_col(int i) const { return npml_r > 0 && i >= shape.nr - npml_r; }
  /// First r index inside the radial absorber (nr when there is none).
  int r_pml_begin() const { return shape.nr - npml_r; }

  /// Dual-cell measures in the axisymmetric metric (per radian, times dz).
  double w_int_r(int i) const;
  double w_half_r(int i) const { return r_half[static_cast<std::size_t>(i)] * dr; }
  double w_int_z(int j) const { return (j == 0 || j == shape.nz) ? 0.5 * dz : dz; }
};

struct FieldState {
  std::vector<double> er, ep, ez, hr, hp, hz;
  std::vector<double> psi_hr_z, psi_hp_z, psi_hp_r, psi_hz_r;
  std::vector<double> psi_er_z, psi_ep_z, psi_ep_r, psi_ez_r;
  long step = 0;

  explicit FieldState(const geom::LatticeShape& shape);
  FieldState() = default;
};

/// Builds coefficients. PML cells are appended outside the grid on the open
/// sides; their permittivity copies the adjacent edge cells.
Lattice make_lattice(const geom::PermittivityGrid& grid, const SolverConfig& config);

namespace kernels {
/// OpenMP row-parallel update; bit-identical to the serial reference.
void update_h(const Lattice& lat, FieldState& s);
void update_e(const Lattice& lat, FieldState& s);
}  // namespace kernels

namespace reference {
/// Straight node-by-node serial update, kept as the baseline for the kernels.
void update_h(const Lattice& lat, FieldState& s);
void update_e(const Lattice& lat, FieldState& s);
}  // namespace reference

/// Running single-frequency DFT of E over the whole lattice.
struct VolumeDft {
  double omega = 0.0;
  std::vector<std::complex<double>> er, ep, ez;
  long samples = 0;
};

/// Running DFT of the tangential fields on a closed cylindrical surface:
/// discs at z_{j_bottom} and z_{j_top} for r <= r_{i_side}, and the side wall
/// r = r_{i_side} between them. H is averaged onto the E positions of each
/// face and phase-corrected for its half-step time offset.
struct SurfaceDft {
  double omega = 0.0;
  int j_bottom = 0, j_top = 0, i_side = 0;
  // Discs, index i: E_r / H_phi at r_{i+1/2}, E_phi / H_r at r_i.
  std::vector<std::complex<double>> top_er, top_ep, top_hr, top_hp;
  std::vector<std::complex<double>> bot_er, bot_ep, bot_hr, bot_hp;
  // Side wall, index j - j_bottom: E_phi / H_z at z_j, E_z / H_phi at z_{j+1/2}.
  std::vector<std::complex<double>> side_ep, side_ez, side_hp, side_hz;
  long samples = 0;
};

class Simulation {
 public:
  Simulation(const geom::PermittivityGrid& grid, const SolverConfig& config);

  /// One leapfrog step: H, then E, then the source current. Throws
  /// NumericalBlowup when a field exceeds the guard.
  void step();
  void run(long steps);

  double time() const { return static_cast<double>(state_.step) * lat_.dt; }
  long step_index() const { return state_.step; }
  double dt() const { return lat_.dt; }
  const Lattice& lattice() const { return lat_; }
  const FieldState& state() const { return state_; }
  FieldState& mutable_state() { return state_; }
  const SolverConfig& config() const { return config_; }
  long source_off_step() const;

  /// E_r, E_phi, E_z at each probe (nearest node of each component).
  std::vector<double> probe_values() const;
  std::size_t probe_channels() const { return 3 * config_.probes.size(); }

  void enable_volume_dft(double omega, int stride);
  /// Throws PlaneInsidePML when any face touches the absorber or the box is
  /// degenerate.
  void enable_surface_dft(int j_bottom, int j_top, int i_side, double omega, int stride);
  const std::optional<VolumeDft>& volume_dft() const { return volume_dft_; }
  const std::optional<SurfaceDft>& surface_dft() const { return surface_dft_; }

  /// Conserved leapfrog energy sum eps E^n.E^n + H^{n-1/2}.H^{n+1/2}, with the
  /// axisymmetric measure. Exactly invariant for lossless closed boxes.
  double energy_invariant() const;
  /// Instantaneous sum eps E^2 + H^2 with the same measure.
  double field_energy() const;
  double max_abs_field() const;

  int nearest_z_int(double z) const;
  int nearest_r_int(double r) const;
  int nearest_r_half(double r) const;

 private:
  void inject_source(double t_half);
  void accumulate_dft();

  SolverConfig config_;
  Lattice lat_;
  FieldState state_;
  struct SourceTap {
    std::size_t index;
    int component;  // 0 er, 1 ep, 2 ez
    double weight;
  };
  std::vector<SourceTap> taps_;
  long source_off_step_ = 0;
  std::optional<VolumeDft> volume_dft_;
  int volume_stride_ = 1;
  std::optional<SurfaceDft> surface_dft_;
  int surface_stride_ = 1;
};

/// Probe samples recorded after the source has switched off.
struct RingdownRecord {
  double dt = 0.0;         ///< solver step (nm / c)
  double sample_dt = 0.0;  ///< spacing of the recorded samples
  long source_off_step = 0;
  long total_steps = 0;
  std::vector<std::vector<double>> series;  ///< one per probe channel
};

long ringdown_steps(const SolverConfig& config, double dt);
int sample_stride(const SolverConfig& config, double dt);

RingdownRecord run_ringdown(const geom::PermittivityGrid& grid, const SolverConfig& config);

}  // namespace bullseye::fdtd
