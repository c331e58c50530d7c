#include "bullseye/materials.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

#include "bullseye/error.hpp"

namespace bullseye::geom {

double DispersionTable::at(double wavelength_nm) const {
  if (points.empty()) throw Error(ErrorKind::InvalidArgument, "empty dispersion table");
  const auto& lo = points.front();
  const auto& hi = points.back();
  if (wavelength_nm < lo.first || wavelength_nm > hi.first || !std::isfinite(wavelength_nm)) {
    throw Error(ErrorKind::OutOfDispersionRange,
                "wavelength " + std::to_string(wavelength_nm) + " nm outside dispersion table [" +
                    std::to_string(lo.first) + ", " + std::to_string(hi.first) + "]");
  }
  if (wavelength_nm == hi.first) return hi.second;
  auto it = std::upper_bound(points.begin(), points.end(), wavelength_nm,
                             [](double x, const auto& p) { return x < p.first; });
  const auto& b = *it;
  const auto& a = *(it - 1);
  if (wavelength_nm == a.first) return a.second;
  const double t = (wavelength_nm - a.first) / (b.first - a.first);
  return a.second + t * (b.second - a.second);
}

void LayerStack::validate(double wavelength_nm) const {
  if (layers.empty()) throw Error(ErrorKind::InvalidGeometry, "layer stack is empty");
  for (const auto& layer : layers) {
    if (!(layer.thickness_nm > 0.0)) {
      throw Error(ErrorKind::InvalidGeometry, "layer '" + layer.name + "' has non-positive thickness");
    }
    const auto& pts = layer.index.points;
    if (pts.empty()) throw Error(ErrorKind::InvalidGeometry, "layer '" + layer.name + "' has no index table");
    for (std::size_t k = 0; k < pts.size(); ++k) {
      if (pts[k].second < 1.0) {
        throw Error(ErrorKind::InvalidGeometry, "layer '" + layer.name + "' has refractive index < 1");
      }
      if (k > 0 && !(pts[k].first > pts[k - 1].first)) {
        throw Error(ErrorKind::InvalidGeometry,
                    "layer '" + layer.name + "' index table wavelengths not increasing");
      }
    }
    (void)layer.index.at(wavelength_nm);
  }
  if (!suspended && substrate_index < 1.0) {
    throw Error(ErrorKind::InvalidGeometry, "substrate index < 1");
  }
}

void BullseyeGeometry::validate() const {
  if (!(disk_diameter_nm > 0.0)) throw Error(ErrorKind::InvalidGeometry, "disk diameter must be > 0");
  if (!(period_nm > 0.0)) throw Error(ErrorKind::InvalidGeometry, "period must be > 0");
  if (!(ring_width_nm > 0.0 && ring_width_nm < period_nm)) {
    throw Error(ErrorKind::InvalidGeometry, "ring width must satisfy 0 < width < period");
  }
  if (num_rings < 1) throw Error(ErrorKind::InvalidGeometry, "num_rings must be >= 1");
}

std::vector<RadialInterval> semiconductor_intervals(const BullseyeGeometry& g) {
  g.validate();
  std::vector<RadialInterval> out;
  const double r_disk = 0.5 * g.disk_diameter_nm;
  const double trench = g.trench_width_nm();
  out.push_back({0.0, r_disk});
  for (int k = 0; k < g.num_rings; ++k) {
    out.push_back({r_disk + k * g.period_nm + trench, r_disk + (k + 1) * g.period_nm});
  }
  if (g.outer == OuterRegion::Membrane) {
    out.push_back({r_disk + g.num_rings * g.period_nm + trench, std::numeric_limits<double>::infinity()});
  }
  return out;
}

double membrane_thickness(const LayerStack& stack) {
  if (stack.layers.empty()) throw Error(ErrorKind::InvalidArgument, "layer stack is empty");
  double t = 0.0;
  for (const auto& layer : stack.layers) t += layer.thickness_nm;
  return t;
}

double index_at(const LayerStack& stack, const std::string& layer, double wavelength_nm) {
  for (const auto& l : stack.layers) {
    if (l.name == layer) return l.index.at(wavelength_nm);
  }
  throw Error(ErrorKind::InvalidArgument, "no layer named '" + layer + "'");
}

LayerStack default_stack(double n_znse, double n_znmgse) {
  LayerStack s;
  s.layers = {
      {"buffer_ZnSe", 10.0, DispersionTable::flat(n_znse)},
      {"cladding_lower_ZnMgSe", 33.2, DispersionTable::flat(n_znmgse)},
      {"qw_ZnSe", 2.8, DispersionTable::flat(n_znse)},
      {"cladding_upper_ZnMgSe", 33.2, DispersionTable::flat(n_znmgse)},
  };
  return s;
}

double emitter_plane_nm(const LayerStack& stack) {
  double z = 0.0;
  for (const auto& l : stack.layers) {
    if (l.name.find("qw") != std::string::npos || l.name.find("QW") != std::string::npos) {
      return z + 0.5 * l.thickness_nm;
    }
    z += l.thickness_nm;
  }
  return 0.5 * z;
}

Medium::Medium(const BullseyeGeometry& geometry, const LayerStack& stack, double wavelength_nm)
    : solid_(semiconductor_intervals(geometry)) {
  stack.validate(wavelength_nm);
  double z = 0.0;
  for (const auto& l : stack.layers) {
    const double n = l.index.at(wavelength_nm);
    slabs_.push_back({z, z + l.thickness_nm, n * n});
    z += l.thickness_nm;
  }
  thickness_ = z;
  const double etch = geometry.etch_depth_nm > 0.0 ? std::min(geometry.etch_depth_nm, z) : z;
  etch_floor_ = z - etch;
  below_eps_ = stack.suspended ? 1.0 : stack.substrate_index * stack.substrate_index;
}

double Medium::radial_fraction(double r0, double r1) const {
  if (r1 <= r0) {
    for (const auto& iv : solid_) {
      if (r0 >= iv.lo && r0 <= iv.hi) return 1.0;
    }
    return 0.0;
  }
  double solid = 0.0;
  for (const auto& iv : solid_) {
    const double lo = std::max(r0, iv.lo);
    const double hi = std::min(r1, iv.hi);
    if (hi > lo) solid += hi * hi - lo * lo;
  }
  return solid / (r1 * r1 - r0 * r0);
}

template <typename F>
double Medium::integrate(double r0, double r1, double z0, double z1, F&& value) const {
  // value(eps_layer, radial_solid_fraction_or_one, in_membrane)
  const double f = radial_fraction(r0, r1);
  auto overlap = [&](double a, double b) { return std::max(0.0, std::min(z1, b) - std::max(z0, a)); };
  double acc = 0.0;
  acc += overlap(-std::numeric_limits<double>::infinity(), 0.0) * value(below_eps_, 0.0, false);
  acc += overlap(thickness_, std::numeric_limits<double>::infinity()) * value(1.0, 0.0, false);
  for (const auto& s : slabs_) {
    const double solid = overlap(s.z0, std::min(s.z1, etch_floor_));
    const double etched = overlap(std::max(s.z0, etch_floor_), s.z1);
    if (solid > 0.0) acc += solid * value(s.eps, 1.0, true);
    if (etched > 0.0) acc += etched * value(s.eps, f, true);
  }
  return acc;
}

double Medium::average(double r0, double r1, double z0, double z1) const {
  if (z1 <= z0) return at(0.5 * (r0 + r1), z0);
  const double acc = integrate(r0, r1, z0, z1, [](double eps, double frac, bool in_membrane) {
    return in_membrane ? frac * eps + (1.0 - frac) : eps;
  });
  return acc / (z1 - z0);
}

double Medium::fill_fraction(double r0, double r1, double z0, double z1) const {
  if (z1 <= z0) return is_semiconductor(0.5 * (r0 + r1), z0) ? 1.0 : 0.0;
  const double acc = integrate(r0, r1, z0, z1, [](double, double frac, bool in_membrane) {
    return in_membrane ? frac : 0.0;
  });
  return acc / (z1 - z0);
}

bool Medium::is_semiconductor(double r, double z) const {
  if (z < 0.0 || z > thickness_) return false;
  if (z <= etch_floor_) return true;
  return radial_fraction(r, r) > 0.5;
}

double Medium::at(double r, double z) const {
  if (z < 0.0) return below_eps_;
  if (z > thickness_) return 1.0;
  for (const auto& s : slabs_) {
    if (z >= s.z0 && z <= s.z1) return is_semiconductor(r, z) ? s.eps : 1.0;
  }
  return 1.0;
}

PermittivityGrid build_permittivity_grid(const BullseyeGeometry& geometry, const LayerStack& stack,
                                         const GridSpec& spec) {
  geometry.validate();
  if (!(spec.dr_nm > 0.0 && spec.dz_nm > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "grid spacings must be > 0");
  }
  const double narrowest = std::min(geometry.ring_width_nm, geometry.trench_width_nm());
  if (spec.dr_nm > 0.25 * narrowest || spec.dz_nm > 0.25 * narrowest) {
    throw Error(ErrorKind::FeatureUnderresolved,
                "grid spacing exceeds a quarter of the narrowest feature (" + std::to_string(narrowest) +
                    " nm)");
  }
  if (spec.padding_nm < 0.5 * spec.wavelength_nm) {
    throw Error(ErrorKind::InvalidArgument, "padding must be at least half the design wavelength");
  }
  const Medium medium(geometry, stack, spec.wavelength_nm);

  PermittivityGrid g;
  g.dr = spec.dr_nm;
  g.dz = spec.dz_nm;
  g.wavelength_nm = spec.wavelength_nm;
  g.membrane_top = medium.thickness();
  const double r_extent = geometry.outer_radius_nm() + spec.padding_nm;
  g.shape.nr = static_cast<int>(std::ceil(r_extent / g.dr - 1e-9));
  g.shape.nz = static_cast<int>(std::ceil((medium.thickness() + 2.0 * spec.padding_nm) / g.dz - 1e-9));
  // Centre the z window on the membrane so palindromic stacks rasterize symmetrically.
  g.z_min = 0.5 * medium.thickness() - 0.5 * g.shape.nz * g.dz;

  const int nr = g.shape.nr;
  const int nz = g.shape.nz;
  g.eps.resize(static_cast<std::size_t>(nr) * nz);
  g.fill.resize(g.eps.size());
  for (int i = 0; i < nr; ++i) {
    const double r0 = i * g.dr, r1 = (i + 1) * g.dr;
    for (int j = 0; j < nz; ++j) {
      const double z0 = g.z_min + j * g.dz, z1 = z0 + g.dz;
      const std::size_t k = static_cast<std::size_t>(i) * nz + j;
      g.eps[k] = medium.average(r0, r1, z0, z1);
      g.fill[k] = medium.fill_fraction(r0, r1, z0, z1);
    }
  }

  const std::size_t n = g.shape.size();
  g.eps_r.assign(n, 1.0);
  g.eps_phi.assign(n, 1.0);
  g.eps_z.assign(n, 1.0);
  const double hr = 0.5 * g.dr, hz = 0.5 * g.dz;
  for (int i = 0; i <= nr; ++i) {
    const double ri = i * g.dr;
    for (int j = 0; j <= nz; ++j) {
      const double zj = g.z_min + j * g.dz;
      const std::size_t k = g.shape.at(i, j);
      if (i < nr) g.eps_r[k] = medium.average(ri, ri + g.dr, zj - hz, zj + hz);
      g.eps_phi[k] = medium.average(std::max(0.0, ri - hr), ri + hr, zj - hz, zj + hz);
      if (j < nz) g.eps_z[k] = medium.average(std::max(0.0, ri - hr), ri + hr, zj, zj + g.dz);
    }
  }
  return g;
}

double semiconductor_fraction(const PermittivityGrid& grid, bool volume_weighted) {
  double solid = 0.0, total = 0.0;
  for (int i = 0; i < grid.nr(); ++i) {
    const double r0 = i * grid.dr, r1 = r0 + grid.dr;
    const double w = volume_weighted ? 0.5 * (r1 * r1 - r0 * r0) : grid.dr;
    for (int j = 0; j < grid.nz(); ++j) {
      solid += w * grid.cell_fill(i, j);
      total += w;
    }
  }
  return solid / total;
}

double analytic_semiconductor_fraction(const BullseyeGeometry& geometry, const LayerStack& stack,
                                       const PermittivityGrid& grid, bool volume_weighted) {
  const double R = grid.r_extent();
  const double t = membrane_thickness(stack);
  const double etch = geometry.etch_depth_nm > 0.0 ? std::min(geometry.etch_depth_nm, t) : t;
  double radial = 0.0;
  for (const auto& iv : semiconductor_intervals(geometry)) {
    const double lo = std::min(iv.lo, R), hi = std::min(iv.hi, R);
    radial += volume_weighted ? 0.5 * (hi * hi - lo * lo) : hi - lo;
  }
  const double full = volume_weighted ? 0.5 * R * R : R;
  const double solid = (t - etch) * full + etch * radial;
  return solid / (full * grid.z_extent());
}

}  // namespace bullseye::geom
