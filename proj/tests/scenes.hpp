#pragma once

// Solver set-ups shared by the cavity tests and the acceptance run.

#include <algorithm>

#include "bullseye/cavity.hpp"
#include "bullseye/constants.hpp"
#include "grids.hpp"

namespace scenes {

using namespace bullseye;

/// Point dipole in a vacuum box, far field recorded on a closed surface
/// (radius 400 nm, z = +-250 nm) at 440 nm.
inline cavity::FarFieldMap free_dipole(bool vertical) {
  const double half_height = 250.0, radius = 400.0;
  const auto grid = test_support::uniform_grid(static_cast<int>((radius + 100.0) / 10.0),
                                               static_cast<int>((2.0 * half_height + 200.0) / 10.0), 10.0, 10.0,
                                               -(half_height + 100.0));
  fdtd::SolverConfig c;
  c.source.z_nm = 0.0;
  if (vertical) {
    c.m = 0;
    c.source.r_nm = 0.0;
    c.source.polarization = fdtd::Polarization::Vertical;
  }
  fdtd::Simulation sim(grid, c);
  sim.enable_surface_dft(sim.nearest_z_int(-half_height), sim.nearest_z_int(half_height), sim.nearest_r_int(radius),
                         constants::angular_frequency(440.0), 1);
  sim.run(sim.source_off_step() + static_cast<long>(4.0 * (radius + 2.0 * half_height) / sim.dt()));
  return cavity::near_to_far_field(*sim.surface_dft(), sim.lattice(), 440.0);
}

struct Slab {
  double index = 2.75;
  double thickness_nm = 800.0;
};

/// Wide, ringless slab driven by a broad current sheet: the 1-D Fabry-Perot
/// limit. Returns the strongest resonance between 420 and 460 nm.
inline cavity::ResonanceEstimate slab_resonance(const Slab& slab = {}) {
  const double n = slab.index, d = slab.thickness_nm, pad = 400.0, dz = 10.0;
  const int nr = 250, nz = static_cast<int>((d + 2.0 * pad) / dz);
  auto grid = test_support::uniform_grid(nr, nz, 10.0, dz, -pad);
  // Faces cut by the slab surface take the volume-weighted permittivity.
  auto overlap = [&](double a, double b) { return std::max(0.0, std::min(b, d) - std::max(a, 0.0)) / (b - a); };
  for (int i = 0; i <= nr; ++i) {
    for (int j = 0; j <= nz; ++j) {
      const double z = -pad + j * dz;
      const auto k = grid.shape.at(i, j);
      grid.eps_r[k] = grid.eps_phi[k] = 1.0 + (n * n - 1.0) * overlap(z - 0.5 * dz, z + 0.5 * dz);
      grid.eps_z[k] = 1.0 + (n * n - 1.0) * overlap(z, z + dz);
    }
  }
  fdtd::SolverConfig c;
  c.source.r_nm = 0.0;
  c.source.z_nm = 240.0;
  c.source.sheet_waist_nm = 1000.0;
  c.expected_q = 125.0;
  c.probes = {{20.0, 100.0}, {20.0, 330.0}, {20.0, 570.0}};
  const auto rec = fdtd::run_ringdown(grid, c);
  cavity::ExtractOptions o;
  o.min_wavelength_nm = 420.0;
  o.max_wavelength_nm = 460.0;
  return cavity::extract_resonances(rec.series, rec.sample_dt, o).front();
}

/// Three-ring cavity that runs in about two seconds at 10 nm cells.
inline cavity::CavitySetup small_cavity() {
  cavity::CavitySetup s;
  s.geometry.num_rings = 3;
  s.grid.padding_nm = 220.0;
  s.solver.expected_q = 200.0;
  s.solver.ringdown_factor = 8.0;
  s.options.target_min_nm = 400.0;
  s.options.target_max_nm = 480.0;
  return s;
}

/// Default geometry and index table at the given cell size.
inline cavity::CavitySetup paper_cavity(double cell_nm) {
  cavity::CavitySetup s;
  s.grid.dr_nm = s.grid.dz_nm = cell_nm;
  return s;
}

}  // namespace scenes
