#pragma once

#include <string>
#include <utility>
#include <vector>

namespace bullseye::geom {

/// Piecewise-linear n(lambda) table, wavelengths in nm, strictly increasing.
struct DispersionTable {
  std::vector<std::pair<double, double>> points;

  static DispersionTable flat(double n, double lo_nm = 380.0, double hi_nm = 520.0) {
    return DispersionTable{{{lo_nm, n}, {hi_nm, n}}};
  }

  /// Throws OutOfDispersionRange outside [first, last].
  double at(double wavelength_nm) const;
};

struct Layer {
  std::string name;
  double thickness_nm = 0.0;
  DispersionTable index;
};

/// Layers are listed bottom to top; z = 0 is the bottom face of the first layer.
struct LayerStack {
  std::vector<Layer> layers;
  /// True once the sacrificial layer is removed (membrane in air on both sides).
  bool suspended = true;
  /// Index of the half-space below the membrane when not suspended.
  double substrate_index = 3.4;

  void validate(double wavelength_nm) const;
};

enum class OuterRegion { Air, Membrane };

/// Axisymmetric bullseye: central disk, then `num_rings` periods of
/// (etched trench of width period - ring_width, semiconductor ring of width
/// ring_width).
struct BullseyeGeometry {
  double disk_diameter_nm = 464.0;
  double period_nm = 116.0;
  double ring_width_nm = 58.0;
  int num_rings = 8;
  /// Support-bridge angle; kept for provenance, the axisymmetric model ignores it.
  double bridge_angle_deg = 3.0;
  /// Etch depth from the top surface; <= 0 means etched through the membrane.
  double etch_depth_nm = 0.0;
  OuterRegion outer = OuterRegion::Air;

  double trench_width_nm() const { return period_nm - ring_width_nm; }
  double outer_radius_nm() const { return 0.5 * disk_diameter_nm + num_rings * period_nm; }
  void validate() const;
};

struct RadialInterval {
  double lo = 0.0;
  double hi = 0.0;
};

/// Radial intervals that are unetched semiconductor, in increasing order.
/// The last interval may extend to +infinity for OuterRegion::Membrane.
std::vector<RadialInterval> semiconductor_intervals(const BullseyeGeometry& g);

double membrane_thickness(const LayerStack& stack);

double index_at(const LayerStack& stack, const std::string& layer, double wavelength_nm);

/// Stack from the grown wafer: ZnSe buffer, ZnMgSe cladding, ZnSe quantum
/// well, ZnMgSe cladding (bottom to top).
LayerStack default_stack(double n_znse = 2.75, double n_znmgse = 2.68);

/// z of the quantum-well mid-plane for `default_stack`-shaped stacks: the
/// centre of the first layer whose name contains "qw", else the membrane centre.
double emitter_plane_nm(const LayerStack& stack);

struct GridSpec {
  double dr_nm = 10.0;
  double dz_nm = 10.0;
  double padding_nm = 250.0;
  double wavelength_nm = 440.0;
};

/// Yee-lattice storage shared by the permittivity grid and the solver:
/// (nr + 1) x (nz + 1) nodes, z is the contiguous index.
struct LatticeShape {
  int nr = 0;  ///< cells along r
  int nz = 0;  ///< cells along z
  int stride() const { return nz + 1; }
  std::size_t size() const { return static_cast<std::size_t>(nr + 1) * (nz + 1); }
  std::size_t at(int i, int j) const { return static_cast<std::size_t>(i) * (nz + 1) + j; }
};

/// Relative permittivity sampled on a cylindrical (r, z) grid.
///
/// `eps` and `fill` are per-cell volume averages (cell (i, j) spans
/// [i dr, (i+1) dr] x [z_min + j dz, z_min + (j+1) dz]), stored row-major
/// with z contiguous. `eps_r`, `eps_phi`, `eps_z` hold the same averages over
/// the dual cells of the Yee components E_r (i+1/2, j), E_phi (i, j) and
/// E_z (i, j+1/2), in LatticeShape layout.
struct PermittivityGrid {
  double dr = 0.0;
  double dz = 0.0;
  double z_min = 0.0;
  double wavelength_nm = 0.0;
  double membrane_top = 0.0;
  LatticeShape shape;

  std::vector<double> eps;
  std::vector<double> fill;
  std::vector<double> eps_r;
  std::vector<double> eps_phi;
  std::vector<double> eps_z;

  int nr() const { return shape.nr; }
  int nz() const { return shape.nz; }
  double r_extent() const { return shape.nr * dr; }
  double z_extent() const { return shape.nz * dz; }
  double cell_eps(int i, int j) const { return eps[static_cast<std::size_t>(i) * shape.nz + j]; }
  double cell_fill(int i, int j) const { return fill[static_cast<std::size_t>(i) * shape.nz + j]; }
};

/// Analytic permittivity model of geometry + stack at one wavelength.
/// `average` integrates over a rectangle in (r, z) with the axisymmetric
/// measure r dr dz.
class Medium {
 public:
  Medium(const BullseyeGeometry& geometry, const LayerStack& stack, double wavelength_nm);

  double average(double r0, double r1, double z0, double z1) const;
  double fill_fraction(double r0, double r1, double z0, double z1) const;
  double at(double r, double z) const;
  bool is_semiconductor(double r, double z) const;
  double thickness() const { return thickness_; }

 private:
  struct Slab {
    double z0, z1, eps;
  };
  double radial_fraction(double r0, double r1) const;
  template <typename F>
  double integrate(double r0, double r1, double z0, double z1, F&& value) const;

  std::vector<RadialInterval> solid_;
  std::vector<Slab> slabs_;
  double thickness_ = 0.0;
  double etch_floor_ = 0.0;
  double below_eps_ = 1.0;
};

PermittivityGrid build_permittivity_grid(const BullseyeGeometry& geometry,
                                         const LayerStack& stack, const GridSpec& spec);

/// Semiconductor fraction of the gridded region, weighted by 2 pi r (volume)
/// or unweighted (area of the r-z half plane).
double semiconductor_fraction(const PermittivityGrid& grid, bool volume_weighted = true);

/// Same quantity evaluated analytically for the geometry over the grid's window.
double analytic_semiconductor_fraction(const BullseyeGeometry& geometry, const LayerStack& stack,
                                       const PermittivityGrid& grid, bool volume_weighted = true);

}  // namespace bullseye::geom
