#pragma once

// Closed-form and brute-force references shared by the unit tests and the
// acceptance run. Nothing here calls into the library's solvers.

#include <array>
#include <cmath>
#include <complex>
#include <cstdint>
#include <vector>

#include "bullseye/photon.hpp"

namespace oracles {

inline constexpr double kPi = 3.14159265358979323846;

/// Normal-incidence transmission of a lossless slab in air, from 2x2
/// interface and propagation matrices.
inline double slab_transmission(double n, double thickness, double wavelength) {
  using C = std::complex<double>;
  using M = std::array<C, 4>;
  auto mul = [](const M& a, const M& b) {
    return M{a[0] * b[0] + a[1] * b[2], a[0] * b[1] + a[1] * b[3], a[2] * b[0] + a[3] * b[2], a[2] * b[1] + a[3] * b[3]};
  };
  auto interface = [](double n1, double n2) {
    const double r = (n1 - n2) / (n1 + n2), t = 2.0 * n1 / (n1 + n2);
    return M{1.0 / t, r / t, r / t, 1.0 / t};
  };
  const C phase = std::exp(C(0.0, n * 2.0 * kPi / wavelength * thickness));
  const M prop{1.0 / phase, 0.0, 0.0, phase};
  const M total = mul(mul(interface(1.0, n), prop), interface(n, 1.0));
  return 1.0 / std::norm(total[0]);
}

/// Wavelength of the slab transmission maximum in [lo, hi], scanned at `step`.
inline double slab_resonance(double n, double thickness, double lo, double hi, double step = 1e-3) {
  double best = lo, best_t = 0.0;
  for (double lam = lo; lam <= hi; lam += step) {
    const double t = slab_transmission(n, thickness, lam);
    if (t > best_t) {
      best_t = t;
      best = lam;
    }
  }
  return best;
}

/// Azimuth-averaged dipole patterns, normalized over the upper hemisphere.
inline double horizontal_dipole(double theta) { return 3.0 * (1.0 + std::cos(theta) * std::cos(theta)) / (8.0 * kPi); }
inline double vertical_dipole(double theta) { return 3.0 * std::sin(theta) * std::sin(theta) / (4.0 * kPi); }

/// Fraction of a horizontal dipole's upper-hemisphere power inside asin(NA).
inline double horizontal_dipole_cone(double na) {
  const double u = std::cos(std::asin(na));
  return 0.75 * ((1.0 - u) + (1.0 - u * u * u) / 3.0);
}

/// RMS of (sample - pattern) relative to the pattern's RMS.
template <typename Pattern>
double rms_relative(const std::vector<double>& theta_deg, const std::vector<double>& intensity, Pattern pattern) {
  double se = 0.0, so = 0.0;
  for (std::size_t k = 0; k < theta_deg.size(); ++k) {
    const double o = pattern(theta_deg[k] * kPi / 180.0);
    se += (intensity[k] - o) * (intensity[k] - o);
    so += o * o;
  }
  return std::sqrt(se / so);
}

/// All-pairs count of t(det 1) - t(det 0) into [-max, max) with bins of w.
inline std::vector<std::uint64_t> all_pairs_histogram(const bullseye::photon::TimestampStream& s, double w,
                                                      double max_delay) {
  const auto a = s.times(0), b = s.times(1);
  std::vector<std::uint64_t> bins(static_cast<std::size_t>(std::llround(2.0 * max_delay / w)), 0);
  for (double t0 : a) {
    for (double t1 : b) {
      const double d = t1 - t0;
      if (d < -max_delay || d >= max_delay) continue;
      ++bins[static_cast<std::size_t>(std::floor((d + max_delay) / w))];
    }
  }
  return bins;
}

}  // namespace oracles
