#include <doctest.h>

#include <cmath>
#include <set>

#include "bullseye/analysis.hpp"
#include "bullseye/cavity.hpp"
#include "bullseye/constants.hpp"
#include "grids.hpp"
#include "oracles.hpp"
#include "scenes.hpp"
#include "support.hpp"

using namespace bullseye;
using test_support::uniform_grid;
using scenes::small_cavity;

namespace {

constexpr double kPi = constants::pi;

std::vector<double> damped_cosine(double wavelength_nm, double q, double amplitude, double phase, double dt,
                                  std::size_t n) {
  const double omega = 2.0 * kPi / wavelength_nm;
  const double kappa = omega / q;
  std::vector<double> x(n);
  for (std::size_t k = 0; k < n; ++k) {
    const double t = static_cast<double>(k) * dt;
    x[k] = amplitude * std::exp(-0.5 * kappa * t) * std::cos(omega * t + phase);
  }
  return x;
}

double hemisphere_integral(const cavity::FarFieldMap& ff) {
  double s = 0.0;
  for (std::size_t k = 0; k + 1 < ff.theta_deg.size(); ++k) {
    const double t0 = ff.theta_deg[k] * kPi / 180.0, t1 = ff.theta_deg[k + 1] * kPi / 180.0;
    s += 0.5 * (t1 - t0) * 2.0 * kPi * (ff.intensity[k] * std::sin(t0) + ff.intensity[k + 1] * std::sin(t1));
  }
  return s;
}

}  // namespace

TEST_CASE("single damped cosine is recovered") {
  const auto x = damped_cosine(440.0, 476.0, 1.0, 0.3, 2.0, 20000);
  const auto res = cavity::extract_resonances({x}, 2.0);
  REQUIRE(!res.empty());
  const auto& top = res.front();
  CHECK(std::abs(top.wavelength_nm - 440.0) < 0.05);
  CHECK(top.q == doctest::Approx(476.0).epsilon(0.01));
  CHECK(top.q == doctest::Approx(top.wavelength_nm / top.fwhm_nm).epsilon(1e-9));
  CHECK(top.q == doctest::Approx(top.omega / top.kappa).epsilon(0.01));
  CHECK(top.q_envelope == doctest::Approx(top.q).epsilon(0.01));
  CHECK(top.decay_rate_per_ps == doctest::Approx(top.kappa / constants::solver_time_to_ps).epsilon(1e-9));
}

TEST_CASE("two overlapping modes are separated") {
  const std::size_t n = 60000;
  auto a = damped_cosine(435.0, 300.0, 1.0, 0.1, 2.0, n);
  auto b = damped_cosine(435.0, 300.0, 0.5, 2.0, 2.0, n);
  const auto a2 = damped_cosine(445.0, 1000.0, 0.7, 1.0, 2.0, n);
  const auto b2 = damped_cosine(445.0, 1000.0, 1.0, -1.0, 2.0, n);
  for (std::size_t k = 0; k < n; ++k) {
    a[k] += a2[k];
    b[k] += b2[k];
  }
  const auto res = cavity::extract_resonances({a, b}, 2.0);
  REQUIRE(res.size() >= 2);
  // Sorted by Q, highest first.
  CHECK(res[0].q == doctest::Approx(1000.0).epsilon(0.03));
  CHECK(res[0].wavelength_nm == doctest::Approx(445.0).epsilon(0.001));
  CHECK(res[1].q == doctest::Approx(300.0).epsilon(0.03));
  CHECK(res[1].wavelength_nm == doctest::Approx(435.0).epsilon(0.001));
}

TEST_CASE("extraction errors") {
  CHECK_ERROR_KIND(cavity::extract_resonances({std::vector<double>(5000, 0.0)}, 2.0), ErrorKind::NoResonance);
  CHECK_ERROR_KIND(cavity::extract_resonances({std::vector<double>(1000, 1.0)}, 2.0), ErrorKind::InvalidArgument);
}

TEST_CASE("ring-down spectrum has a Lorentzian line at the resonance") {
  // Record runs until the amplitude is below 1e-5, as the solver's does.
  const auto x = damped_cosine(440.0, 476.0, 1.0, 0.3, 2.0, 200000);
  const auto spec = cavity::ringdown_spectrum({x}, 2.0, 430.0, 450.0);
  REQUIRE(spec.wavelength_nm.size() > 20);
  for (std::size_t k = 1; k < spec.wavelength_nm.size(); ++k) CHECK(spec.wavelength_nm[k] > spec.wavelength_nm[k - 1]);
  analysis::Spectrum s{spec.wavelength_nm, spec.power};
  const auto fit = analysis::fit_lorentzian(s, analysis::Orientation::Peak, analysis::Weighting::Uniform);
  CHECK(fit.center_nm == doctest::Approx(440.0).epsilon(1e-4));
  CHECK(fit.center_nm / fit.fwhm_nm == doctest::Approx(476.0).epsilon(0.02));
}

TEST_CASE("uniform field fills the whole closed box") {
  const auto grid = uniform_grid(40, 30, 10.0, 10.0, 0.0);
  fdtd::SolverConfig c;
  c.m = 0;
  c.r_boundary = c.z_boundary = fdtd::Boundary::Pec;
  c.source.r_nm = 0.0;
  c.source.z_nm = 150.0;
  c.source.polarization = fdtd::Polarization::Vertical;
  const auto lat = fdtd::make_lattice(grid, c);
  fdtd::VolumeDft f;
  f.er.assign(lat.shape.size(), 0.0);
  f.ez.assign(lat.shape.size(), 0.0);
  f.ep.assign(lat.shape.size(), 1.0);
  const auto mv = cavity::mode_volume(f, lat, 440.0);
  const double box = kPi * 400.0 * 400.0 * 300.0;
  CHECK(mv.volume_nm3 == doctest::Approx(box).epsilon(1e-12));
  CHECK(mv.volume_cubic_wavelengths == doctest::Approx(box / std::pow(440.0, 3)).epsilon(1e-12));

  f.ep.assign(lat.shape.size(), 0.0);
  CHECK_ERROR_KIND(cavity::mode_volume(f, lat, 440.0), ErrorKind::DegenerateField);
}

TEST_CASE("theoretical Purcell factor") {
  CHECK(cavity::theoretical_purcell(4.0 * kPi * kPi / 3.0, 1.0) == doctest::Approx(1.0).epsilon(1e-15));
  CHECK(cavity::theoretical_purcell(2000.0, 3.0) == doctest::Approx(2.0 * cavity::theoretical_purcell(1000.0, 3.0)));
  // F = 24 at Q = 1100 needs V = 3/(4 pi^2) * 1100 / 24.
  const double v = 3.0 / (4.0 * kPi * kPi) * 1100.0 / 24.0;
  CHECK(v == doctest::Approx(3.48).epsilon(0.002));
  CHECK(cavity::theoretical_purcell(1100.0, v) == doctest::Approx(24.0).epsilon(1e-12));
  const double lam = 440.0, n = 2.75, vol_nm3 = 2.0 * std::pow(lam / n, 3);
  CHECK(cavity::theoretical_purcell(500.0, vol_nm3, lam, n) == doctest::Approx(cavity::theoretical_purcell(500.0, 2.0)));
}

TEST_CASE("horizontal dipole far field matches the closed-form pattern") {
  const auto ff = scenes::free_dipole(false);
  for (double v : ff.intensity) CHECK(v >= 0.0);
  CHECK(hemisphere_integral(ff) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(oracles::rms_relative(ff.theta_deg, ff.intensity, oracles::horizontal_dipole) < 0.03);
  // Maximum on the normal.
  CHECK(ff.intensity.front() == doctest::Approx(*std::max_element(ff.intensity.begin(), ff.intensity.end())));
  // Full-sphere far-field power equals the net flux through the surface.
  CHECK(ff.total_radiated_power / ff.surface_flux == doctest::Approx(1.0).epsilon(0.02));

  CHECK(cavity::collection_efficiency(ff, 0.0) == 0.0);
  CHECK(cavity::collection_efficiency(ff, 1.0) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(cavity::collection_efficiency(ff, 0.65) == doctest::Approx(oracles::horizontal_dipole_cone(0.65)).epsilon(0.02));
  CHECK_ERROR_KIND(cavity::collection_efficiency(ff, 1.2), ErrorKind::InvalidArgument);
}

TEST_CASE("vertical dipole has an on-axis null") {
  const auto ff = scenes::free_dipole(true);
  const double peak = *std::max_element(ff.intensity.begin(), ff.intensity.end());
  CHECK(ff.intensity.front() < 1e-3 * peak);
  CHECK(oracles::rms_relative(ff.theta_deg, ff.intensity, oracles::vertical_dipole) < 0.03);
}

TEST_CASE("far-field surface may not touch the absorber") {
  const auto grid = uniform_grid(40, 40, 10.0, 10.0, -200.0);
  fdtd::SolverConfig c;
  c.source.z_nm = 0.0;
  fdtd::Simulation sim(grid, c);
  const double w = constants::angular_frequency(440.0);
  CHECK_ERROR_KIND(sim.enable_surface_dft(1, sim.nearest_z_int(100.0), sim.nearest_r_int(200.0), w, 1),
                   ErrorKind::PlaneInsidePML);
  CHECK_ERROR_KIND(sim.enable_surface_dft(sim.nearest_z_int(-100.0), sim.nearest_z_int(100.0),
                                          sim.lattice().r_pml_begin() + 2, w, 1),
                   ErrorKind::PlaneInsidePML);
}

TEST_CASE("dielectric slab resonance matches the transfer-matrix prediction") {
  const scenes::Slab slab;
  const auto res = scenes::slab_resonance(slab);
  const double best = oracles::slab_resonance(slab.index, slab.thickness_nm, 420.0, 460.0);
  CHECK(std::abs(res.wavelength_nm - best) / best < 0.01);
  // Pole of the round trip r^2 exp(2 i n k d) = 1.
  const double r = (slab.index - 1.0) / (slab.index + 1.0);
  const double q_pole = kPi * std::round(2.0 * slab.index * slab.thickness_nm / best) / (2.0 * std::log(1.0 / r));
  CHECK(res.q == doctest::Approx(q_pole).epsilon(0.05));
}

TEST_CASE("small cavity: report consistency and refinement") {
  const auto setup = small_cavity();
  const auto a = cavity::simulate_cavity(setup);
  const auto& t = a.target;
  CHECK(t.wavelength_nm > 400.0);
  CHECK(t.wavelength_nm < 480.0);
  CHECK(t.q == doctest::Approx(t.wavelength_nm / t.fwhm_nm).epsilon(1e-9));
  CHECK(t.q == doctest::Approx(t.omega / t.kappa).epsilon(0.01));
  CHECK(t.q_envelope == doctest::Approx(t.q).epsilon(0.01));
  CHECK(a.theoretical_purcell ==
        doctest::Approx(cavity::theoretical_purcell(t.q, a.mode_volume.volume_cubic_wavelengths)).epsilon(1e-9));
  CHECK(hemisphere_integral(a.far_field) == doctest::Approx(1.0).epsilon(1e-6));
  CHECK(a.far_field.total_radiated_power / a.far_field.surface_flux == doctest::Approx(1.0).epsilon(0.02));

  SUBCASE("halving the grid moves the resonance by < 0.5% and the mode volume by < 3%") {
    auto fine = setup;
    fine.grid.dr_nm = fine.grid.dz_nm = 5.0;
    const auto b = cavity::simulate_cavity(fine);
    CHECK(std::abs(b.target.wavelength_nm / t.wavelength_nm - 1.0) < 0.005);
    CHECK(std::abs(b.mode_volume.volume_cubic_wavelengths / a.mode_volume.volume_cubic_wavelengths - 1.0) < 0.03);
  }
  SUBCASE("doubling the absorber changes Q by < 2%") {
    auto thick = setup;
    thick.solver.pml_thickness *= 2;
    const auto b = cavity::simulate_cavity(thick);
    CHECK(std::abs(b.target.q / t.q - 1.0) < 0.02);
  }
}

TEST_CASE("sweep expansion, ordering and per-point errors") {
  auto base = small_cavity();
  cavity::SweepAxes axes;
  axes.disk_diameter_nm = {440.0, 464.0};
  axes.period_nm = {110.0, 116.0, 122.0};
  const auto points = cavity::expand_sweep(base, axes);
  REQUIRE(points.size() == 6);
  // Row-major: diameter outermost.
  CHECK(points[0].geometry.disk_diameter_nm == 440.0);
  CHECK(points[0].geometry.period_nm == 110.0);
  CHECK(points[2].geometry.period_nm == 122.0);
  CHECK(points[3].geometry.disk_diameter_nm == 464.0);

  cavity::SweepAxes thick;
  thick.thickness_nm = {100.0};
  const auto scaled = cavity::expand_sweep(base, thick);
  CHECK(geom::membrane_thickness(scaled[0].stack) == doctest::Approx(100.0));
}

TEST_CASE("3 x 3 sweep runs every point once, in order") {
  auto base = small_cavity();
  base.geometry.num_rings = 2;
  cavity::SweepAxes axes;
  axes.disk_diameter_nm = {440.0, 464.0, 488.0};
  axes.period_nm = {110.0, 116.0, 122.0};
  std::size_t seen = 0;
  const auto rows = cavity::sweep_parameters(base, axes, [&](const cavity::SweepRow&) { ++seen; });
  CHECK(seen == 9);
  REQUIRE(rows.size() == 9);
  std::set<std::pair<double, double>> configs;
  for (std::size_t k = 0; k < rows.size(); ++k) {
    CHECK(rows[k].index == k);
    CHECK(rows[k].report.has_value());
    configs.insert({rows[k].setup.geometry.disk_diameter_nm, rows[k].setup.geometry.period_nm});
  }
  CHECK(configs.size() == 9);
}

TEST_CASE("one-point sweep reproduces a direct run and failures stay in their row") {
  auto base = small_cavity();
  cavity::SweepAxes axes;
  axes.ring_width_nm = {58.0, 200.0};  // the second point is not a valid geometry
  const auto rows = cavity::sweep_parameters(base, axes);
  REQUIRE(rows.size() == 2);
  REQUIRE(rows[0].report.has_value());
  CHECK(!rows[1].report.has_value());
  CHECK(rows[1].error_kind == "InvalidGeometry");

  const auto direct = cavity::simulate_cavity(base);
  const auto& swept = *rows[0].report;
  CHECK(swept.target.wavelength_nm == direct.target.wavelength_nm);
  CHECK(swept.target.q == direct.target.q);
  CHECK(swept.mode_volume.volume_nm3 == direct.mode_volume.volume_nm3);
  CHECK(swept.far_field.intensity == direct.far_field.intensity);
}

TEST_CASE("a 5% larger period red-shifts the resonance") {
  auto base = small_cavity();
  const auto a = cavity::simulate_cavity(base);
  base.geometry.period_nm *= 1.05;
  base.geometry.ring_width_nm *= 1.05;
  const auto b = cavity::simulate_cavity(base);
  CHECK(b.target.wavelength_nm > a.target.wavelength_nm);
}

TEST_CASE("default geometry: far-field power accounting") {
  // On the full eight-ring cavity the top face sees the upward radiation;
  // on small cavities much of it leaves through the side wall instead.
  const auto rep = cavity::simulate_cavity(scenes::paper_cavity(10.0));
  const auto& ff = rep.far_field;
  CHECK(ff.plane_flux / ff.radiated_power == doctest::Approx(1.0).epsilon(0.02));
  CHECK(ff.total_radiated_power / ff.surface_flux == doctest::Approx(1.0).epsilon(0.02));
  CHECK(hemisphere_integral(ff) == doctest::Approx(1.0).epsilon(1e-6));
  double previous = 0.0;
  for (const auto& [na, fraction] : rep.collection) {
    CHECK(fraction >= previous);
    CHECK(fraction <= 1.0);
    previous = fraction;
  }
}
