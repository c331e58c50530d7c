#include "bullseye/fdtd.hpp"

#include <algorithm>
#include <cmath>
#include <numbers>

#include "bullseye/constants.hpp"
#include "bullseye/error.hpp"

namespace bullseye::fdtd {

namespace {

constexpr double kPmlOrder = 3.0;
constexpr double kCfsAlphaFraction = 0.05;

std::size_t uz(int v) { return static_cast<std::size_t>(v); }

struct Cpml {
  double b = 1.0;
  double c = 0.0;
};

Cpml cpml_coefficients(double depth, double sigma_max, double alpha_max, double dt) {
  if (depth <= 0.0) return {};
  depth = std::min(depth, 1.0);
  const double sigma = sigma_max * std::pow(depth, kPmlOrder);
  const double alpha = alpha_max * (1.0 - depth);
  const double b = std::exp(-(sigma + alpha) * dt);
  const double c = sigma > 0.0 ? sigma / (sigma + alpha) * (b - 1.0) : 0.0;
  return {b, c};
}

}  // namespace

double DipoleSource::sigma_t() const {
  // Power spectrum exp(-sigma^2 dw^2) has FWHM 2 sqrt(ln 2) / sigma in omega.
  const double dw = 2.0 * constants::pi * bandwidth_nm / (center_wavelength_nm * center_wavelength_nm);
  return 2.0 * std::sqrt(std::numbers::ln2) / dw;
}

double DipoleSource::waveform(double t) const {
  if (t < 0.0 || t > off_time()) return 0.0;
  const double s = sigma_t();
  const double u = t - peak_time();
  return amplitude * std::exp(-0.5 * u * u / (s * s)) *
         std::sin(constants::angular_frequency(center_wavelength_nm) * u);
}

void SolverConfig::validate() const {
  auto bad = [](const char* what) { throw Error(ErrorKind::ConfigError, what); };
  if (m < 0) bad("azimuthal mode number must be >= 0");
  if (!(courant_factor > 0.0)) bad("courant_factor must be positive");
  if (!(expected_q > 0.0)) bad("expected_q must be positive");
  if (!(ringdown_factor > 0.0)) bad("ringdown_factor must be positive");
  if (total_steps < 0) bad("total_steps must be >= 0");
  if ((r_boundary == Boundary::Pml || z_boundary == Boundary::Pml) && pml_thickness < 4) {
    bad("pml_thickness must be >= 4 cells");
  }
  if (!(pml_reflection > 0.0 && pml_reflection < 1.0)) bad("pml_reflection must be in (0, 1)");
  if (!(source.bandwidth_nm > 0.0) || !(source.bandwidth_nm < source.center_wavelength_nm)) {
    bad("source bandwidth must be in (0, center wavelength)");
  }
  if (source.r_nm < 0.0) bad("source radius must be >= 0");
  if (guard_interval < 1) bad("guard_interval must be >= 1");
  if (!(blowup_guard > 0.0)) bad("blowup_guard must be positive");
  for (const auto& p : probes) {
    if (p.r_nm < 0.0) bad("probe radius must be >= 0");
  }
}

double stable_time_step(double dr, double dz, int m) {
  // dt_max = 1 / sqrt(a(m) / dr^2 + 1 / dz^2). a(m) is a rounded-up fit to
  // the spectral radius of the closed-box update operator found by power
  // iteration; the near-axis m / r terms dominate for m >= 2.
  double a = 1.25;
  if (m == 1) a = 1.65;
  if (m >= 2) a = static_cast<double>(m) * m + 0.6;
  return 1.0 / std::sqrt(a / (dr * dr) + 1.0 / (dz * dz));
}

double Lattice::w_int_r(int i) const {
  if (i == 0) return 0.125 * dr * dr;
  if (i == shape.nr) return 0.5 * (r_int[uz(i)] * dr - 0.25 * dr * dr);
  return r_int[uz(i)] * dr;
}

FieldState::FieldState(const geom::LatticeShape& shape) {
  const std::size_t n = shape.size();
  for (auto* v : {&er, &ep, &ez, &hr, &hp, &hz, &psi_hr_z, &psi_hp_z, &psi_hp_r, &psi_hz_r, &psi_er_z,
                  &psi_ep_z, &psi_ep_r, &psi_ez_r}) {
    v->assign(n, 0.0);
  }
}

Lattice make_lattice(const geom::PermittivityGrid& grid, const SolverConfig& config) {
  config.validate();
  if (grid.nr() < 2 || grid.nz() < 2) throw Error(ErrorKind::InvalidArgument, "grid too small");
  Lattice lat;
  lat.m = config.m;
  lat.dr = grid.dr;
  lat.dz = grid.dz;
  lat.npml_r = config.r_boundary == Boundary::Pml ? config.pml_thickness : 0;
  lat.npml_z = config.z_boundary == Boundary::Pml ? config.pml_thickness : 0;
  lat.shape = {grid.nr() + lat.npml_r, grid.nz() + 2 * lat.npml_z};
  lat.z_min = grid.z_min - lat.npml_z * grid.dz;
  lat.dt = config.courant_factor * stable_time_step(lat.dr, lat.dz, lat.m);

  const int nr = lat.shape.nr, nz = lat.shape.nz;
  lat.r_int.resize(uz(nr + 1));
  lat.r_half.resize(uz(nr + 1));
  lat.inv_r_int.resize(uz(nr + 1));
  lat.inv_r_half.resize(uz(nr + 1));
  for (int i = 0; i <= nr; ++i) {
    lat.r_int[uz(i)] = i * lat.dr;
    lat.r_half[uz(i)] = (i + 0.5) * lat.dr;
    lat.inv_r_int[uz(i)] = i == 0 ? 0.0 : 1.0 / lat.r_int[uz(i)];
    lat.inv_r_half[uz(i)] = 1.0 / lat.r_half[uz(i)];
  }

  const std::size_t n = lat.shape.size();
  lat.eps_r.assign(n, 1.0);
  lat.eps_p.assign(n, 1.0);
  lat.eps_z.assign(n, 1.0);
  const auto& gs = grid.shape;
  for (int i = 0; i <= nr; ++i) {
    for (int j = 0; j <= nz; ++j) {
      const int gj = j - lat.npml_z;
      const std::size_t k = lat.shape.at(i, j);
      lat.eps_r[k] = grid.eps_r[gs.at(std::min(i, gs.nr - 1), std::clamp(gj, 0, gs.nz))];
      lat.eps_p[k] = grid.eps_phi[gs.at(std::min(i, gs.nr), std::clamp(gj, 0, gs.nz))];
      lat.eps_z[k] = grid.eps_z[gs.at(std::min(i, gs.nr), std::clamp(gj, 0, gs.nz - 1))];
    }
  }
  lat.ce_r.resize(n);
  lat.ce_p.resize(n);
  lat.ce_z.resize(n);
  for (std::size_t k = 0; k < n; ++k) {
    lat.ce_r[k] = lat.dt / lat.eps_r[k];
    lat.ce_p[k] = lat.dt / lat.eps_p[k];
    lat.ce_z[k] = lat.dt / lat.eps_z[k];
  }

  const double alpha_max = kCfsAlphaFraction * constants::angular_frequency(config.source.center_wavelength_nm);
  auto fill = [&](int npml, int count, double spacing, bool two_sided, std::vector<double>& bi,
                  std::vector<double>& ci, std::vector<double>& bh, std::vector<double>& ch) {
    bi.assign(uz(count + 1), 1.0);
    ci.assign(uz(count + 1), 0.0);
    bh.assign(uz(count + 1), 1.0);
    ch.assign(uz(count + 1), 0.0);
    if (npml == 0) return;
    const double thickness = npml * spacing;
    const double sigma_max =
        (kPmlOrder + 1.0) * (-std::log(config.pml_reflection)) / (2.0 * thickness);
    const double hi = count - npml;
    auto depth = [&](double x) {
      double d = std::max(0.0, x - hi);
      if (two_sided) d = std::max(d, npml - x);
      return d / npml;
    };
    for (int q = 0; q <= count; ++q) {
      const Cpml a = cpml_coefficients(depth(q), sigma_max, alpha_max, lat.dt);
      const Cpml b = cpml_coefficients(depth(q + 0.5), sigma_max, alpha_max, lat.dt);
      bi[uz(q)] = a.b;
      ci[uz(q)] = a.c;
      bh[uz(q)] = b.b;
      ch[uz(q)] = b.c;
    }
  };
  fill(lat.npml_z, nz, lat.dz, true, lat.bz_int, lat.cz_int, lat.bz_half, lat.cz_half);
  fill(lat.npml_r, nr, lat.dr, false, lat.br_int, lat.cr_int, lat.br_half, lat.cr_half);
  return lat;
}

// ---------------------------------------------------------------------------
// Node updates. The absorber form reduces exactly to the bulk form when the
// auxiliary fields are zero, so kernels may route any node through either.

namespace {

struct View {
  const Lattice& L;
  FieldState& S;
  int stride;
  double md, idr, idz, dt;

  View(const Lattice& lat, FieldState& s)
      : L(lat), S(s), stride(lat.shape.stride()), md(lat.m), idr(1.0 / lat.dr), idz(1.0 / lat.dz),
        dt(lat.dt) {}

  std::size_t at(int i, int j) const { return L.shape.at(i, j); }

  // H_r at (i, j+1/2), i >= 1.
  void hr_bulk_row(int i, int j0, int j1) {
    const double ir = L.inv_r_int[uz(i)];
    double* hr = S.hr.data() + at(i, 0);
    const double* ep = S.ep.data() + at(i, 0);
    const double* ez = S.ez.data() + at(i, 0);
    for (int j = j0; j < j1; ++j) {
      const double d = (ep[j + 1] - ep[j]) * idz;
      hr[j] += dt * (md * ez[j] * ir + d);
    }
  }
  void hr_pml(int i, int j) {
    const std::size_t k = at(i, j);
    const double d = (S.ep[k + 1] - S.ep[k]) * idz;
    double& psi = S.psi_hr_z[k];
    psi = L.bz_half[uz(j)] * psi + L.cz_half[uz(j)] * d;
    S.hr[k] += dt * (md * S.ez[k] * L.inv_r_int[uz(i)] + (d + psi));
  }
  // m = 1 axis value; the m E_z / r limit uses E_z one cell out.
  void hr_axis(int j) {
    const std::size_t k = at(0, j);
    const double d = (S.ep[k + 1] - S.ep[k]) * idz;
    double& psi = S.psi_hr_z[k];
    psi = L.bz_half[uz(j)] * psi + L.cz_half[uz(j)] * d;
    S.hr[k] += dt * (S.ez[k + uz(stride)] * idr + (d + psi));
  }

  // H_phi at (i+1/2, j+1/2).
  void hp_bulk_row(int i, int j0, int j1) {
    double* hp = S.hp.data() + at(i, 0);
    const double* er = S.er.data() + at(i, 0);
    const double* ez0 = S.ez.data() + at(i, 0);
    const double* ez1 = S.ez.data() + at(i + 1, 0);
    for (int j = j0; j < j1; ++j) {
      const double dzv = (er[j + 1] - er[j]) * idz;
      const double drv = (ez1[j] - ez0[j]) * idr;
      hp[j] += dt * (-dzv + drv);
    }
  }
  void hp_pml(int i, int j) {
    const std::size_t k = at(i, j);
    const double dzv = (S.er[k + 1] - S.er[k]) * idz;
    const double drv = (S.ez[k + uz(stride)] - S.ez[k]) * idr;
    double& pz = S.psi_hp_z[k];
    double& pr = S.psi_hp_r[k];
    pz = L.bz_half[uz(j)] * pz + L.cz_half[uz(j)] * dzv;
    pr = L.br_half[uz(i)] * pr + L.cr_half[uz(i)] * drv;
    S.hp[k] += dt * (-(dzv + pz) + (drv + pr));
  }

  // H_z at (i+1/2, j).
  void hz_bulk_row(int i, int j0, int j1) {
    const double r0 = L.r_int[uz(i)], r1 = L.r_int[uz(i + 1)];
    const double irh = L.inv_r_half[uz(i)];
    double* hz = S.hz.data() + at(i, 0);
    const double* er = S.er.data() + at(i, 0);
    const double* ep0 = S.ep.data() + at(i, 0);
    const double* ep1 = S.ep.data() + at(i + 1, 0);
    for (int j = j0; j < j1; ++j) {
      const double drv = (r1 * ep1[j] - r0 * ep0[j]) * idr * irh;
      hz[j] += dt * (-drv - md * er[j] * irh);
    }
  }
  void hz_pml(int i, int j) {
    const std::size_t k = at(i, j);
    const double irh = L.inv_r_half[uz(i)];
    const double drv = (L.r_int[uz(i + 1)] * S.ep[k + uz(stride)] - L.r_int[uz(i)] * S.ep[k]) * idr * irh;
    double& psi = S.psi_hz_r[k];
    psi = L.br_half[uz(i)] * psi + L.cr_half[uz(i)] * drv;
    S.hz[k] += dt * (-(drv + psi) - md * S.er[k] * irh);
  }

  // E_r at (i+1/2, j).
  void er_bulk_row(int i, int j0, int j1) {
    const double irh = L.inv_r_half[uz(i)];
    double* er = S.er.data() + at(i, 0);
    const double* ce = L.ce_r.data() + at(i, 0);
    const double* hp = S.hp.data() + at(i, 0);
    const double* hz = S.hz.data() + at(i, 0);
    for (int j = j0; j < j1; ++j) {
      const double dzv = (hp[j] - hp[j - 1]) * idz;
      er[j] += ce[j] * (md * hz[j] * irh - dzv);
    }
  }
  void er_pml(int i, int j) {
    const std::size_t k = at(i, j);
    const double dzv = (S.hp[k] - S.hp[k - 1]) * idz;
    double& psi = S.psi_er_z[k];
    psi = L.bz_int[uz(j)] * psi + L.cz_int[uz(j)] * dzv;
    S.er[k] += L.ce_r[k] * (md * S.hz[k] * L.inv_r_half[uz(i)] - (dzv + psi));
  }

  // E_phi at (i, j), i >= 1.
  void ep_bulk_row(int i, int j0, int j1) {
    double* ep = S.ep.data() + at(i, 0);
    const double* ce = L.ce_p.data() + at(i, 0);
    const double* hr = S.hr.data() + at(i, 0);
    const double* hz0 = S.hz.data() + at(i - 1, 0);
    const double* hz1 = S.hz.data() + at(i, 0);
    for (int j = j0; j < j1; ++j) {
      const double dzv = (hr[j] - hr[j - 1]) * idz;
      const double drv = (hz1[j] - hz0[j]) * idr;
      ep[j] += ce[j] * (dzv - drv);
    }
  }
  void ep_pml(int i, int j) {
    const std::size_t k = at(i, j);
    const double dzv = (S.hr[k] - S.hr[k - 1]) * idz;
    const double drv = (S.hz[k] - S.hz[k - uz(stride)]) * idr;
    double& pz = S.psi_ep_z[k];
    double& pr = S.psi_ep_r[k];
    pz = L.bz_int[uz(j)] * pz + L.cz_int[uz(j)] * dzv;
    pr = L.br_int[uz(i)] * pr + L.cr_int[uz(i)] * drv;
    S.ep[k] += L.ce_p[k] * ((dzv + pz) - (drv + pr));
  }
  // m = 1 axis: H_z ~ r near the axis, so dH_z/dr -> 2 H_z(dr/2) / dr.
  void ep_axis(int j) {
    const std::size_t k = at(0, j);
    const double dzv = (S.hr[k] - S.hr[k - 1]) * idz;
    double& pz = S.psi_ep_z[k];
    pz = L.bz_int[uz(j)] * pz + L.cz_int[uz(j)] * dzv;
    S.ep[k] += L.ce_p[k] * ((dzv + pz) - 2.0 * S.hz[k] * idr);
  }

  // E_z at (i, j+1/2), i >= 1.
  void ez_bulk_row(int i, int j0, int j1) {
    const double ir = L.inv_r_int[uz(i)];
    const double rh0 = L.r_half[uz(i - 1)], rh1 = L.r_half[uz(i)];
    double* ez = S.ez.data() + at(i, 0);
    const double* ce = L.ce_z.data() + at(i, 0);
    const double* hp0 = S.hp.data() + at(i - 1, 0);
    const double* hp1 = S.hp.data() + at(i, 0);
    const double* hr = S.hr.data() + at(i, 0);
    for (int j = j0; j < j1; ++j) {
      const double drv = (rh1 * hp1[j] - rh0 * hp0[j]) * idr * ir;
      ez[j] += ce[j] * (drv - md * hr[j] * ir);
    }
  }
  void ez_pml(int i, int j) {
    const std::size_t k = at(i, j);
    const double ir = L.inv_r_int[uz(i)];
    const double drv = (L.r_half[uz(i)] * S.hp[k] - L.r_half[uz(i - 1)] * S.hp[k - uz(stride)]) * idr * ir;
    double& psi = S.psi_ez_r[k];
    psi = L.br_int[uz(i)] * psi + L.cr_int[uz(i)] * drv;
    S.ez[k] += L.ce_z[k] * ((drv + psi) - md * S.hr[k] * ir);
  }
  // m = 0 axis: flux of H_phi through the circle r = dr/2 over its area.
  void ez_axis(int j) {
    const std::size_t k = at(0, j);
    S.ez[k] += L.ce_z[k] * (4.0 * S.hp[k] * idr);
  }
};

// Row driver: routes the absorber rows/columns through the node form and
// the rest through the vectorizable bulk loop.
template <typename Bulk, typename Node>
void row_split(const Lattice& L, int i, int j0, int j1, Bulk&& bulk, Node&& node) {
  if (L.r_pml_col(i)) {
    for (int j = j0; j < j1; ++j) node(j);
    return;
  }
  const int lo = L.npml_z > 0 ? std::min(std::max(j0, L.npml_z), j1) : j0;
  const int hi = L.npml_z > 0 ? std::max(std::min(j1, L.nz() - L.npml_z), lo) : j1;
  for (int j = j0; j < lo; ++j) node(j);
  bulk(lo, hi);
  for (int j = hi; j < j1; ++j) node(j);
}

}  // namespace

namespace kernels {

void update_h(const Lattice& L, FieldState& s) {
  View v(L, s);
  const int nr = L.nr(), nz = L.nz();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < nr; ++i) {
    if (i == 0) {
      if (L.m == 1) {
        for (int j = 0; j < nz; ++j) v.hr_axis(j);
      }
    } else {
      row_split(L, i, 0, nz, [&](int a, int b) { v.hr_bulk_row(i, a, b); }, [&](int j) { v.hr_pml(i, j); });
    }
    row_split(L, i, 0, nz, [&](int a, int b) { v.hp_bulk_row(i, a, b); }, [&](int j) { v.hp_pml(i, j); });
    row_split(L, i, 1, nz, [&](int a, int b) { v.hz_bulk_row(i, a, b); }, [&](int j) { v.hz_pml(i, j); });
  }
}

void update_e(const Lattice& L, FieldState& s) {
  View v(L, s);
  const int nr = L.nr(), nz = L.nz();
#pragma omp parallel for schedule(static)
  for (int i = 0; i < nr; ++i) {
    row_split(L, i, 1, nz, [&](int a, int b) { v.er_bulk_row(i, a, b); }, [&](int j) { v.er_pml(i, j); });
    if (i == 0) {
      if (L.m == 1) {
        for (int j = 1; j < nz; ++j) v.ep_axis(j);
      } else if (L.m == 0) {
        for (int j = 0; j < nz; ++j) v.ez_axis(j);
      }
    } else {
      row_split(L, i, 1, nz, [&](int a, int b) { v.ep_bulk_row(i, a, b); }, [&](int j) { v.ep_pml(i, j); });
      row_split(L, i, 0, nz, [&](int a, int b) { v.ez_bulk_row(i, a, b); }, [&](int j) { v.ez_pml(i, j); });
    }
  }
}

}  // namespace kernels

namespace reference {

namespace {
bool in_absorber(const Lattice& L, int i, int j) { return L.r_pml_col(i) || L.z_pml_row(j); }
}  // namespace

void update_h(const Lattice& L, FieldState& s) {
  View v(L, s);
  const int nr = L.nr(), nz = L.nz();
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nz; ++j) {
      if (i == 0) {
        if (L.m == 1) v.hr_axis(j);
      } else if (in_absorber(L, i, j)) {
        v.hr_pml(i, j);
      } else {
        v.hr_bulk_row(i, j, j + 1);
      }
    }
  }
  for (int i = 0; i < nr; ++i) {
    for (int j = 0; j < nz; ++j) {
      if (in_absorber(L, i, j)) {
        v.hp_pml(i, j);
      } else {
        v.hp_bulk_row(i, j, j + 1);
      }
    }
  }
  for (int i = 0; i < nr; ++i) {
    for (int j = 1; j < nz; ++j) {
      if (in_absorber(L, i, j)) {
        v.hz_pml(i, j);
      } else {
        v.hz_bulk_row(i, j, j + 1);
      }
    }
  }
}

void update_e(const Lattice& L, FieldState& s) {
  View v(L, s);
  const int nr = L.nr(), nz = L.nz();
  for (int i = 0; i < nr; ++i) {
    for (int j = 1; j < nz; ++j) {
      if (in_absorber(L, i, j)) {
        v.er_pml(i, j);
      } else {
        v.er_bulk_row(i, j, j + 1);
      }
    }
  }
  for (int j = 1; j < nz && L.m == 1; ++j) v.ep_axis(j);
  for (int i = 1; i < nr; ++i) {
    for (int j = 1; j < nz; ++j) {
      if (in_absorber(L, i, j)) {
        v.ep_pml(i, j);
      } else {
        v.ep_bulk_row(i, j, j + 1);
      }
    }
  }
  for (int j = 0; j < nz && L.m == 0; ++j) v.ez_axis(j);
  for (int i = 1; i < nr; ++i) {
    for (int j = 0; j < nz; ++j) {
      if (in_absorber(L, i, j)) {
        v.ez_pml(i, j);
      } else {
        v.ez_bulk_row(i, j, j + 1);
      }
    }
  }
}

}  // namespace reference

// ---------------------------------------------------------------------------

Simulation::Simulation(const geom::PermittivityGrid& grid, const SolverConfig& config)
    : config_(config), lat_(make_lattice(grid, config)), state_(lat_.shape) {
  const auto& src = config_.source;
  const double z_lo = lat_.z_int(lat_.npml_z), z_hi = lat_.z_int(lat_.nz() - lat_.npml_z);
  if (src.z_nm <= z_lo || src.z_nm >= z_hi || src.r_nm >= lat_.r_int[uz(lat_.r_pml_begin())]) {
    throw Error(ErrorKind::ConfigError, "source lies outside the simulation interior");
  }
  const int j = nearest_z_int(src.z_nm);
  if (src.sheet_waist_nm > 0.0) {
    for (int i = 0; i < lat_.r_pml_begin(); ++i) {
      const double gh = std::exp(-std::pow(lat_.r_half[uz(i)] / src.sheet_waist_nm, 2));
      const double gi = std::exp(-std::pow(lat_.r_int[uz(i)] / src.sheet_waist_nm, 2));
      if (gh > 1e-8) taps_.push_back({lat_.shape.at(i, j), 0, gh});
      if (gi > 1e-8 && (i > 0 || lat_.m == 1)) taps_.push_back({lat_.shape.at(i, j), 1, -gi});
    }
  } else if (src.polarization == Polarization::InPlane) {
    // x-directed current: J_r = J cos(phi), J_phi = -J sin(phi).
    taps_.push_back({lat_.shape.at(nearest_r_half(src.r_nm), j), 0, 1.0});
    const int ip = nearest_r_int(src.r_nm);
    if (ip > 0 || lat_.m == 1) taps_.push_back({lat_.shape.at(ip, j), 1, -1.0});
  } else {
    const int jh = std::clamp(static_cast<int>(std::floor((src.z_nm - lat_.z_min) / lat_.dz)), 0, lat_.nz() - 1);
    const int ip = nearest_r_int(src.r_nm);
    if (ip > 0 || lat_.m == 0) taps_.push_back({lat_.shape.at(ip, jh), 2, 1.0});
  }
  if (taps_.empty()) throw Error(ErrorKind::ConfigError, "source does not couple to this azimuthal order");
  source_off_step_ = static_cast<long>(std::ceil(src.off_time() / lat_.dt));
}

long Simulation::source_off_step() const { return source_off_step_; }

int Simulation::nearest_z_int(double z) const {
  return std::clamp(static_cast<int>(std::lround((z - lat_.z_min) / lat_.dz)), 0, lat_.nz());
}
int Simulation::nearest_r_int(double r) const {
  return std::clamp(static_cast<int>(std::lround(r / lat_.dr)), 0, lat_.nr());
}
int Simulation::nearest_r_half(double r) const {
  return std::clamp(static_cast<int>(std::floor(r / lat_.dr)), 0, lat_.nr() - 1);
}

void Simulation::inject_source(double t_half) {
  if (state_.step >= source_off_step_) return;
  const double s = config_.source.waveform(t_half);
  for (const auto& tap : taps_) {
    switch (tap.component) {
      case 0: state_.er[tap.index] -= lat_.ce_r[tap.index] * tap.weight * s; break;
      case 1: state_.ep[tap.index] -= lat_.ce_p[tap.index] * tap.weight * s; break;
      default: state_.ez[tap.index] -= lat_.ce_z[tap.index] * tap.weight * s; break;
    }
  }
}

void Simulation::step() {
  const double t_half = (static_cast<double>(state_.step) + 0.5) * lat_.dt;
  if (config_.parallel) {
    kernels::update_h(lat_, state_);
    kernels::update_e(lat_, state_);
  } else {
    reference::update_h(lat_, state_);
    reference::update_e(lat_, state_);
  }
  inject_source(t_half);
  ++state_.step;
  accumulate_dft();
  if (state_.step % config_.guard_interval == 0) {
    const double peak = max_abs_field();
    if (!(peak <= config_.blowup_guard)) {
      throw Error(ErrorKind::NumericalBlowup,
                  "field magnitude exceeded guard at step " + std::to_string(state_.step));
    }
  }
}

void Simulation::run(long steps) {
  for (long n = 0; n < steps; ++n) step();
}

std::vector<double> Simulation::probe_values() const {
  std::vector<double> out;
  out.reserve(probe_channels());
  for (const auto& p : config_.probes) {
    const int j = nearest_z_int(p.z_nm);
    const int jh = std::clamp(static_cast<int>(std::floor((p.z_nm - lat_.z_min) / lat_.dz)), 0, lat_.nz() - 1);
    out.push_back(state_.er[lat_.shape.at(nearest_r_half(p.r_nm), j)]);
    out.push_back(state_.ep[lat_.shape.at(nearest_r_int(p.r_nm), j)]);
    out.push_back(state_.ez[lat_.shape.at(nearest_r_int(p.r_nm), jh)]);
  }
  return out;
}

void Simulation::enable_volume_dft(double omega, int stride) {
  VolumeDft d;
  d.omega = omega;
  const std::size_t n = lat_.shape.size();
  d.er.assign(n, {});
  d.ep.assign(n, {});
  d.ez.assign(n, {});
  volume_dft_ = std::move(d);
  volume_stride_ = std::max(1, stride);
}

void Simulation::enable_surface_dft(int j_bottom, int j_top, int i_side, double omega, int stride) {
  const int z_lo = lat_.npml_z, z_hi = lat_.nz() - lat_.npml_z;
  if (j_bottom <= z_lo || j_top >= z_hi || i_side >= lat_.r_pml_begin()) {
    throw Error(ErrorKind::PlaneInsidePML, "recording surface overlaps the absorbing layer");
  }
  if (j_top - j_bottom < 2 || i_side < 2) throw Error(ErrorKind::InvalidArgument, "recording surface is degenerate");
  SurfaceDft d;
  d.omega = omega;
  d.j_bottom = j_bottom;
  d.j_top = j_top;
  d.i_side = i_side;
  const auto nd = uz(i_side + 1);
  for (auto* v : {&d.top_er, &d.top_ep, &d.top_hr, &d.top_hp, &d.bot_er, &d.bot_ep, &d.bot_hr, &d.bot_hp}) {
    v->assign(nd, {});
  }
  const auto ns = uz(j_top - j_bottom + 1);
  for (auto* v : {&d.side_ep, &d.side_ez, &d.side_hp, &d.side_hz}) v->assign(ns, {});
  surface_dft_ = std::move(d);
  surface_stride_ = std::max(1, stride);
}

void Simulation::accumulate_dft() {
  const double t = time();
  if (volume_dft_ && state_.step % volume_stride_ == 0) {
    auto& d = *volume_dft_;
    const std::complex<double> ph = std::polar(1.0, -d.omega * t);
    const std::size_t n = d.er.size();
    for (std::size_t k = 0; k < n; ++k) {
      d.er[k] += state_.er[k] * ph;
      d.ep[k] += state_.ep[k] * ph;
      d.ez[k] += state_.ez[k] * ph;
    }
    ++d.samples;
  }
  if (surface_dft_ && state_.step % surface_stride_ == 0) {
    auto& d = *surface_dft_;
    const std::complex<double> pe = std::polar(1.0, -d.omega * t);
    const std::complex<double> ph = std::polar(1.0, -d.omega * (t - 0.5 * lat_.dt));
    const auto& s = state_;
    const std::size_t st = uz(lat_.shape.stride());
    auto disc = [&](int j, auto& er, auto& ep, auto& hr, auto& hp) {
      for (int i = 0; i <= d.i_side; ++i) {
        const std::size_t k = lat_.shape.at(i, j);
        er[uz(i)] += s.er[k] * pe;
        ep[uz(i)] += s.ep[k] * pe;
        hr[uz(i)] += 0.5 * (s.hr[k] + s.hr[k - 1]) * ph;
        hp[uz(i)] += 0.5 * (s.hp[k] + s.hp[k - 1]) * ph;
      }
    };
    disc(d.j_top, d.top_er, d.top_ep, d.top_hr, d.top_hp);
    disc(d.j_bottom, d.bot_er, d.bot_ep, d.bot_hr, d.bot_hp);
    for (int j = d.j_bottom; j <= d.j_top; ++j) {
      const std::size_t k = lat_.shape.at(d.i_side, j);
      const auto q = uz(j - d.j_bottom);
      d.side_ep[q] += s.ep[k] * pe;
      d.side_ez[q] += s.ez[k] * pe;
      d.side_hp[q] += 0.5 * (s.hp[k] + s.hp[k - st]) * ph;
      d.side_hz[q] += 0.5 * (s.hz[k] + s.hz[k - st]) * ph;
    }
    ++d.samples;
  }
}

namespace {

// sum over E and H with the axisymmetric dual-cell measure; `h2` supplies
// the H product at each node.
template <typename HProduct>
double weighted_energy(const Lattice& L, const FieldState& s, HProduct&& h2) {
  const int nr = L.nr(), nz = L.nz();
  double e = 0.0, h = 0.0;
  for (int i = 0; i <= nr; ++i) {
    const double wi = L.w_int_r(i);
    const double wh = i < nr ? L.w_half_r(i) : 0.0;
    for (int j = 0; j <= nz; ++j) {
      const std::size_t k = L.shape.at(i, j);
      const double wz = L.w_int_z(j);
      if (i < nr) e += wh * wz * L.eps_r[k] * s.er[k] * s.er[k];
      if (i > 0) e += wi * wz * L.eps_p[k] * s.ep[k] * s.ep[k];
      if (j < nz) e += wi * L.dz * L.eps_z[k] * s.ez[k] * s.ez[k];
      if (j < nz && i > 0) h += wi * L.dz * h2(0, k);
      if (j < nz && i < nr) h += wh * L.dz * h2(1, k);
      if (i < nr) h += wh * wz * h2(2, k);
    }
  }
  return e + h;
}

}  // namespace

double Simulation::energy_invariant() const {
  FieldState next = state_;
  if (config_.parallel) {
    kernels::update_h(lat_, next);
  } else {
    reference::update_h(lat_, next);
  }
  const FieldState& s = state_;
  return weighted_energy(lat_, state_, [&](int c, std::size_t k) {
    switch (c) {
      case 0: return s.hr[k] * next.hr[k];
      case 1: return s.hp[k] * next.hp[k];
      default: return s.hz[k] * next.hz[k];
    }
  });
}

double Simulation::field_energy() const {
  const FieldState& s = state_;
  return weighted_energy(lat_, state_, [&](int c, std::size_t k) {
    switch (c) {
      case 0: return s.hr[k] * s.hr[k];
      case 1: return s.hp[k] * s.hp[k];
      default: return s.hz[k] * s.hz[k];
    }
  });
}

double Simulation::max_abs_field() const {
  double peak = 0.0;
  for (const auto* v : {&state_.er, &state_.ep, &state_.ez}) {
    for (double x : *v) {
      const double a = std::abs(x);
      // NaN propagates through the comparison below as "not <= guard".
      if (!(a <= peak)) peak = a;
    }
  }
  return peak;
}

long ringdown_steps(const SolverConfig& config, double dt) {
  const double tau = config.expected_q / constants::angular_frequency(config.source.center_wavelength_nm);
  return static_cast<long>(std::ceil(config.ringdown_factor * tau / dt));
}

int sample_stride(const SolverConfig& config, double dt) {
  if (config.sample_stride > 0) return config.sample_stride;
  const double shortest = config.source.center_wavelength_nm - config.source.bandwidth_nm;
  return std::max(1, static_cast<int>(std::floor(shortest / (20.0 * dt))));
}

RingdownRecord run_ringdown(const geom::PermittivityGrid& grid, const SolverConfig& config) {
  Simulation sim(grid, config);
  RingdownRecord rec;
  rec.dt = sim.dt();
  rec.source_off_step = sim.source_off_step();
  const long ring = ringdown_steps(config, sim.dt());
  if (config.total_steps > 0) {
    if (config.total_steps - rec.source_off_step < ring) {
      throw Error(ErrorKind::ConfigError, "total_steps shorter than the required ring-down length");
    }
    rec.total_steps = config.total_steps;
  } else {
    rec.total_steps = rec.source_off_step + ring;
  }
  const int stride = sample_stride(config, sim.dt());
  rec.sample_dt = stride * sim.dt();
  rec.series.assign(sim.probe_channels(), {});
  sim.run(rec.source_off_step);
  for (long n = rec.source_off_step; n < rec.total_steps; ++n) {
    sim.step();
    if ((sim.step_index() - rec.source_off_step) % stride == 0) {
      const auto v = sim.probe_values();
      for (std::size_t c = 0; c < v.size(); ++c) rec.series[c].push_back(v[c]);
    }
  }
  return rec;
}

}  // namespace bullseye::fdtd
