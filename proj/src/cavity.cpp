#include "bullseye/cavity.hpp"

#include <algorithm>
#include <cmath>
#include <complex>
#include <limits>

#include "bullseye/constants.hpp"
#include "bullseye/error.hpp"
#include "bullseye/nlls.hpp"
#include "bullseye/spectral.hpp"

namespace bullseye::cavity {

namespace {

using cplx = std::complex<double>;
constexpr double kPi = constants::pi;

std::size_t uz(int v) { return static_cast<std::size_t>(v); }

// Hann-windowed spectrum of a truncated damped exponential,
// |sum_n w_n z^n|^2 with z = exp((-kappa/2 + i delta) dt), normalized to its
// delta = 0 value so the fitted amplitude is the peak height. The Hann
// window splits into three geometric sums with shifted ratios.
double windowed_line(double delta, double kappa, double dt, double n) {
  const double shift = 2.0 * kPi / n;
  auto sum = [&](double d) {
    const cplx z = std::exp(cplx(-0.5 * kappa * dt, d * dt));
    const cplx zs = z * std::exp(cplx(0.0, shift));
    const cplx zm = z * std::exp(cplx(0.0, -shift));
    const cplx zn = std::exp(n * cplx(-0.5 * kappa * dt, d * dt));
    return (1.0 - zn) * (0.5 / (1.0 - z) - 0.25 / (1.0 - zs) - 0.25 / (1.0 - zm));
  };
  const double ref = std::norm(sum(0.0));
  return ref > 0.0 ? std::norm(sum(delta)) / ref : 0.0;
}

struct Line {
  double omega, kappa, amplitude, background;
};

double line_value(const Line& l, double omega, double dt, double n) {
  return l.amplitude * windowed_line(l.omega - omega, l.kappa, dt, n);
}

// Decay rate from a log-linear fit to the analytic envelope of one series
// band-passed around omega0.
double envelope_kappa(const std::vector<double>& x, double dt, double omega0, double half_band) {
  const std::size_t n = x.size();
  const std::size_t len = spectral::next_pow2(2 * n);
  std::vector<cplx> buf(len, 0.0);
  for (std::size_t k = 0; k < n; ++k) buf[k] = x[k];
  auto spec = spectral::cfft(buf, -1);
  const double dw = 2.0 * kPi / (static_cast<double>(len) * dt);
  for (std::size_t k = 0; k < len; ++k) {
    const double w = static_cast<double>(k) * dw;
    const bool keep = k < len / 2 && std::abs(w - omega0) <= half_band;
    spec[k] = keep ? 2.0 * spec[k] : cplx{};
  }
  const auto analytic = spectral::cfft(spec, +1);
  std::vector<double> env(n);
  double peak = 0.0;
  for (std::size_t k = 0; k < n; ++k) {
    env[k] = std::abs(analytic[k]) / static_cast<double>(len);
    peak = std::max(peak, env[k]);
  }
  if (!(peak > 0.0)) return 0.0;
  // Skip the filter transients at both ends of the record.
  const std::size_t lo = n / 10, hi = (7 * n) / 10;
  double s = 0, st = 0, sy = 0, stt = 0, sty = 0;
  for (std::size_t k = lo; k < hi; ++k) {
    if (env[k] < 1e-6 * peak) continue;
    const double t = static_cast<double>(k) * dt;
    const double y = std::log(env[k]);
    s += 1;
    st += t;
    sy += y;
    stt += t * t;
    sty += t * y;
  }
  const double den = s * stt - st * st;
  if (s < 3 || den <= 0.0) return 0.0;
  const double slope = (s * sty - st * sy) / den;
  return -2.0 * slope;
}


// Windowed transform sum_n w_n q^n of a geometric sequence, Hann window.
cplx hann_sum(cplx q, double n) {
  const double shift = 2.0 * kPi / n;
  auto geo = [&](cplx r) {
    const cplx d = 1.0 - r;
    if (std::abs(d) < 1e-14) return cplx(n, 0.0);
    return (1.0 - std::pow(r, n)) / d;
  };
  return 0.5 * geo(q) - 0.25 * geo(q * std::exp(cplx(0.0, shift))) - 0.25 * geo(q * std::exp(cplx(0.0, -shift)));
}

// Joint refinement of all lines against the complex windowed spectra of
// every channel. Each channel is sum_p Re(c_p z_p^n); the c_p enter
// linearly and are eliminated by least squares inside the residual, so only
// (omega_p, kappa_p) are iterated. This accounts for the interference
// between neighbouring lines that the power-spectrum fits ignore.
void refine_jointly(std::vector<Line>& lines, const std::vector<std::pair<std::size_t, std::size_t>>& windows,
                    const std::vector<std::vector<cplx>>& spectra, double dw, double dt, std::size_t n) {
  const double resolution = 2.0 * kPi / (static_cast<double>(n) * dt);
  std::vector<std::size_t> bins;
  for (const auto& [a, b] : windows) {
    for (std::size_t k = a; k <= b; ++k) bins.push_back(k);
  }
  std::sort(bins.begin(), bins.end());
  bins.erase(std::unique(bins.begin(), bins.end()), bins.end());
  const std::size_t P = lines.size(), C = spectra.size(), B = bins.size();
  if (B < 2 * P + 2) return;
  double scale = 0.0;
  for (const auto& sp : spectra) {
    for (std::size_t k : bins) scale = std::max(scale, std::abs(sp[k]));
  }
  if (!(scale > 0.0)) return;
  const double nd = static_cast<double>(n);

  fit::Problem prob;
  prob.num_residuals = 2 * B * C;
  prob.residual = [&](std::span<const double> p, std::span<double> r) {
    Eigen::MatrixXd a(static_cast<Eigen::Index>(2 * B), static_cast<Eigen::Index>(2 * P));
    for (std::size_t q = 0; q < B; ++q) {
      const double w = static_cast<double>(bins[q]) * dw;
      const cplx rot = std::exp(cplx(0.0, -w * dt));
      for (std::size_t l = 0; l < P; ++l) {
        const cplx z = std::exp(cplx(-0.5 * p[2 * l + 1] * dt, p[2 * l] * dt));
        const cplx s1 = hann_sum(z * rot, nd), s2 = hann_sum(std::conj(z) * rot, nd);
        const cplx re_basis = 0.5 * (s1 + s2), im_basis = cplx(0.0, 0.5) * (s1 - s2);
        const auto row = static_cast<Eigen::Index>(2 * q), col = static_cast<Eigen::Index>(2 * l);
        a(row, col) = re_basis.real();
        a(row + 1, col) = re_basis.imag();
        a(row, col + 1) = im_basis.real();
        a(row + 1, col + 1) = im_basis.imag();
      }
    }
    const Eigen::ColPivHouseholderQR<Eigen::MatrixXd> qr(a);
    for (std::size_t c = 0; c < C; ++c) {
      Eigen::VectorXd y(static_cast<Eigen::Index>(2 * B));
      for (std::size_t q = 0; q < B; ++q) {
        y[static_cast<Eigen::Index>(2 * q)] = spectra[c][bins[q]].real() / scale;
        y[static_cast<Eigen::Index>(2 * q + 1)] = spectra[c][bins[q]].imag() / scale;
      }
      const Eigen::VectorXd coef = qr.solve(y);
      const Eigen::VectorXd res = a * coef - y;
      for (std::size_t q = 0; q < 2 * B; ++q) r[c * 2 * B + q] = res[static_cast<Eigen::Index>(q)];
    }
  };
  std::vector<double> p0;
  fit::Bounds bounds;
  for (const auto& l : lines) {
    p0.push_back(l.omega);
    p0.push_back(l.kappa);
    bounds.lower.push_back(l.omega - 4.0 * resolution - 2.0 * l.kappa);
    bounds.lower.push_back(1e-9 * l.omega);
    bounds.upper.push_back(l.omega + 4.0 * resolution + 2.0 * l.kappa);
    bounds.upper.push_back(l.omega);
  }
  fit::Options fo;
  fo.compute_covariance = false;
  fo.max_iterations = 200;
  std::vector<double> best;
  try {
    best = fit::nlls_minimize(prob, p0, bounds, fo).params;
  } catch (const fit::NoConvergence& e) {
    best = e.best();
  } catch (const Error&) {
    return;
  }
  for (std::size_t l = 0; l < P; ++l) {
    if (std::isfinite(best[2 * l]) && best[2 * l + 1] > 0.0) {
      lines[l].omega = best[2 * l];
      lines[l].kappa = best[2 * l + 1];
    }
  }
}

}  // namespace

PowerSpectrum ringdown_spectrum(const std::vector<std::vector<double>>& series, double sample_dt,
                                double min_wavelength_nm, double max_wavelength_nm) {
  if (series.empty() || series.front().empty()) throw Error(ErrorKind::InvalidArgument, "no probe series");
  if (!(sample_dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "sample spacing must be positive");
  if (!(min_wavelength_nm > 0.0 && max_wavelength_nm > min_wavelength_nm)) {
    throw Error(ErrorKind::InvalidArgument, "spectrum window must satisfy 0 < min < max");
  }
  const std::size_t n = series.front().size();
  const std::size_t nfft = spectral::next_pow2(4 * n);
  const std::size_t nbins = nfft / 2 + 1;
  std::vector<double> power(nbins, 0.0);
  for (const auto& s : series) {
    if (s.size() != n) throw Error(ErrorKind::InvalidArgument, "probe series lengths differ");
    const auto spec = spectral::rfft(s, nfft);
    for (std::size_t k = 0; k < nbins; ++k) power[k] += std::norm(spec[k]);
  }
  const double dw = 2.0 * kPi / (static_cast<double>(nfft) * sample_dt);
  PowerSpectrum out;
  for (std::size_t k = nbins - 1; k >= 1; --k) {
    const double lambda = 2.0 * kPi / (static_cast<double>(k) * dw);
    if (lambda < min_wavelength_nm) continue;
    if (lambda > max_wavelength_nm) break;
    out.wavelength_nm.push_back(lambda);
    out.power.push_back(power[k]);
  }
  return out;
}

std::vector<ResonanceEstimate> extract_resonances(const std::vector<std::vector<double>>& series,
                                                  double sample_dt, const ExtractOptions& opt) {
  if (series.empty()) throw Error(ErrorKind::InvalidArgument, "no probe series");
  const std::size_t n = series.front().size();
  for (const auto& s : series) {
    if (s.size() != n) throw Error(ErrorKind::InvalidArgument, "probe series lengths differ");
  }
  if (n < opt.min_samples) {
    throw Error(ErrorKind::InvalidArgument, "ring-down record shorter than " + std::to_string(opt.min_samples) +
                                                " samples");
  }
  if (!(sample_dt > 0.0)) throw Error(ErrorKind::InvalidArgument, "sample spacing must be positive");

  const std::size_t nfft = spectral::next_pow2(4 * n);
  const std::size_t nbins = nfft / 2 + 1;
  std::vector<double> power(nbins, 0.0);
  std::vector<std::vector<double>> channel_power;
  std::vector<std::vector<cplx>> spectra;
  channel_power.reserve(series.size());
  spectra.reserve(series.size());
  std::vector<double> hann(n), windowed(n);
  for (std::size_t k = 0; k < n; ++k) {
    hann[k] = 0.5 - 0.5 * std::cos(2.0 * kPi * static_cast<double>(k) / static_cast<double>(n));
  }
  for (const auto& s : series) {
    for (std::size_t k = 0; k < n; ++k) windowed[k] = hann[k] * s[k];
    const auto spec = spectral::rfft(windowed, nfft);
    std::vector<double> p(nbins);
    for (std::size_t k = 0; k < nbins; ++k) {
      p[k] = std::norm(spec[k]);
      power[k] += p[k];
    }
    channel_power.push_back(std::move(p));
    spectra.push_back(spec);
  }

  const double dw = 2.0 * kPi / (static_cast<double>(nfft) * sample_dt);
  std::size_t k_lo = 2, k_hi = nbins - 2;
  if (opt.max_wavelength_nm > 0.0) {
    k_lo = std::max(k_lo, static_cast<std::size_t>(std::ceil(2.0 * kPi / opt.max_wavelength_nm / dw)));
  }
  if (opt.min_wavelength_nm > 0.0) {
    k_hi = std::min(k_hi, static_cast<std::size_t>(std::floor(2.0 * kPi / opt.min_wavelength_nm / dw)));
  }
  if (k_lo + 2 >= k_hi) throw Error(ErrorKind::InvalidArgument, "search band narrower than the bin spacing");

  const double floor = spectral::median(std::vector<double>(power.begin() + static_cast<std::ptrdiff_t>(k_lo),
                                                            power.begin() + static_cast<std::ptrdiff_t>(k_hi + 1)));
  const double strongest = *std::max_element(power.begin() + static_cast<std::ptrdiff_t>(k_lo),
                                             power.begin() + static_cast<std::ptrdiff_t>(k_hi + 1));
  // The relative bound rejects round-off structure far below the main lines.
  const double threshold = std::max(opt.floor_factor * floor, 1e-12 * strongest);

  std::vector<std::size_t> candidates;
  for (std::size_t k = k_lo; k <= k_hi; ++k) {
    if (power[k] > threshold && power[k] > power[k - 1] && power[k] >= power[k + 1]) candidates.push_back(k);
  }
  if (candidates.empty() || !(threshold > 0.0 || power[candidates.front()] > 0.0)) {
    throw Error(ErrorKind::NoResonance, "no spectral peak above the noise floor");
  }
  std::sort(candidates.begin(), candidates.end(), [&](std::size_t a, std::size_t b) { return power[a] > power[b]; });

  const double nd = static_cast<double>(n);
  const double resolution = 2.0 * kPi / (nd * sample_dt);
  std::vector<Line> accepted;
  std::vector<std::pair<std::size_t, std::size_t>> windows;
  auto accepted_sum = [&](double w) {
    double v = 0.0;
    for (const auto& l : accepted) v += line_value(l, w, sample_dt, nd);
    return v;
  };

  for (std::size_t kc : candidates) {
    if (static_cast<int>(accepted.size()) >= opt.max_peaks) break;
    const double wc = static_cast<double>(kc) * dw;
    if (!(power[kc] > 2.0 * accepted_sum(wc))) continue;
    bool near = false;
    for (const auto& l : accepted) near |= std::abs(l.omega - wc) < 3.0 * l.kappa + 2.0 * resolution;
    if (near) continue;

    // Residual spectrum after removing lines already accepted.
    auto residual_power = [&](std::size_t k) { return power[k] - accepted_sum(static_cast<double>(k) * dw); };
    const double peak = residual_power(kc);
    if (!(peak > 0.0)) continue;
    std::size_t a = kc, b = kc;
    while (a > 1 && residual_power(a) > 0.5 * peak) --a;
    while (b + 1 < nbins && residual_power(b) > 0.5 * peak) ++b;
    const double width = std::max(static_cast<double>(b - a) * dw, 0.5 * resolution);
    double half_window = std::max(4.0 * width, 8.0 * resolution);
    // Keep neighbouring lines out of the fit window.
    for (std::size_t ko : candidates) {
      if (ko == kc || power[ko] < 1e-3 * power[kc]) continue;
      const double sep = std::abs(static_cast<double>(ko) - static_cast<double>(kc)) * dw;
      if (sep > 2.0 * resolution) half_window = std::min(half_window, 0.5 * sep);
    }
    for (const auto& l : accepted) half_window = std::min(half_window, std::max(0.5 * std::abs(l.omega - wc), 2.0 * resolution));
    const auto w0 = static_cast<std::size_t>(std::max(1.0, std::floor((wc - half_window) / dw)));
    const auto w1 = std::min(nbins - 1, static_cast<std::size_t>(std::ceil((wc + half_window) / dw)));
    if (w1 <= w0 + 6) continue;

    std::vector<double> xs, ys;
    for (std::size_t k = w0; k <= w1; ++k) {
      xs.push_back(static_cast<double>(k) * dw);
      ys.push_back(residual_power(k) / peak);
    }
    fit::Problem prob;
    prob.num_residuals = xs.size();
    prob.residual = [&](std::span<const double> p, std::span<double> r) {
      const Line l{p[0], p[1], p[2], p[3]};
      for (std::size_t q = 0; q < xs.size(); ++q) {
        r[q] = line_value(l, xs[q], sample_dt, nd) + l.background - ys[q];
      }
    };
    const double kappa0 = std::max(width - 1.44 * resolution, 0.05 * width);
    fit::Bounds bounds{{wc - half_window, 1e-9 * wc, 0.0, 0.0}, {wc + half_window, wc, 10.0, 1.0}};
    fit::Options fo;
    fo.compute_covariance = false;
    fo.max_iterations = 300;
    Line l{};
    try {
      const auto res = fit::nlls_minimize(prob, {wc, kappa0, 1.0, std::min(0.5, floor / peak)}, bounds, fo);
      l = {res.params[0], res.params[1], res.params[2] * peak, res.params[3] * peak};
    } catch (const fit::NoConvergence& e) {
      const auto& p = e.best();
      l = {p[0], p[1], p[2] * peak, p[3] * peak};
    }
    if (!(l.kappa > 1e-8 * l.omega) || !(l.amplitude > threshold) || !std::isfinite(l.omega)) continue;
    if (l.omega < static_cast<double>(k_lo) * dw || l.omega > static_cast<double>(k_hi) * dw) continue;
    accepted.push_back(l);
    windows.emplace_back(w0, w1);
  }
  if (accepted.empty()) throw Error(ErrorKind::NoResonance, "no fitted resonance in the search band");
  refine_jointly(accepted, windows, spectra, dw, sample_dt, n);

  std::vector<ResonanceEstimate> out;
  for (const auto& l : accepted) {
    ResonanceEstimate r;
    r.omega = l.omega;
    r.kappa = l.kappa;
    r.q = l.omega / l.kappa;
    r.wavelength_nm = 2.0 * kPi / l.omega;
    r.fwhm_nm = r.wavelength_nm / r.q;
    r.decay_rate_per_ps = l.kappa * constants::c_nm_per_ps;
    r.amplitude = std::sqrt(l.amplitude);

    // Envelope cross-check on the channel carrying most of this line.
    const auto kp = std::min(nbins - 1, static_cast<std::size_t>(std::lround(l.omega / dw)));
    std::size_t best = 0;
    for (std::size_t c = 1; c < channel_power.size(); ++c) {
      if (channel_power[c][kp] > channel_power[best][kp]) best = c;
    }
    double half_band = std::max(10.0 * l.kappa, 20.0 * resolution);
    for (const auto& o : accepted) {
      if (&o != &l) half_band = std::min(half_band, 0.5 * std::abs(o.omega - l.omega));
    }
    const double ke = envelope_kappa(series[best], sample_dt, l.omega, half_band);
    r.q_envelope = ke > 0.0 ? l.omega / ke : 0.0;
    out.push_back(r);
  }
  std::sort(out.begin(), out.end(), [](const auto& a, const auto& b) { return a.q > b.q; });
  return out;
}

ModeVolume mode_volume(const fdtd::VolumeDft& field, const fdtd::Lattice& lat, double wavelength_nm) {
  const std::size_t n = lat.shape.size();
  if (field.er.size() != n || field.ep.size() != n || field.ez.size() != n) {
    throw Error(ErrorKind::InvalidArgument, "field arrays do not match the lattice");
  }
  if (!(wavelength_nm > 0.0)) throw Error(ErrorKind::InvalidArgument, "wavelength must be positive");
  const int i_end = lat.r_pml_begin();  // nodes i < i_end lie outside the radial absorber
  const int j0 = lat.npml_z, j1 = lat.nz() - lat.npml_z;
  const double angular = lat.m == 0 ? 2.0 * kPi : kPi;

  double integral = 0.0;
  for (int i = 0; i <= i_end; ++i) {
    for (int j = j0; j <= j1; ++j) {
      const std::size_t k = lat.shape.at(i, j);
      const double wz = (j == j0 || j == j1) ? 0.5 * lat.dz : lat.dz;
      const double wi = i == i_end ? 0.5 * (lat.r_int[uz(i)] * lat.dr - 0.25 * lat.dr * lat.dr) : lat.w_int_r(i);
      if (i < i_end) integral += lat.w_half_r(i) * wz * lat.eps_r[k] * std::norm(field.er[k]);
      integral += wi * wz * lat.eps_p[k] * std::norm(field.ep[k]);
      if (j < j1) integral += wi * lat.dz * lat.eps_z[k] * std::norm(field.ez[k]);
    }
  }
  integral *= angular;

  // Peak of eps |E|^2 over r, z and phi, with E_r and E_z interpolated onto
  // the E_phi nodes.
  ModeVolume mv;
  double peak = 0.0;
  for (int i = 0; i <= i_end; ++i) {
    for (int j = j0; j <= j1; ++j) {
      const std::size_t k = lat.shape.at(i, j);
      cplx er;
      if (i == 0) {
        er = lat.m == 1 ? field.er[k] : cplx{};
      } else if (i == i_end) {
        er = field.er[lat.shape.at(i - 1, j)];
      } else {
        er = 0.5 * (field.er[k] + field.er[lat.shape.at(i - 1, j)]);
      }
      cplx ez;
      if (j == j0) {
        ez = field.ez[k];
      } else if (j == j1) {
        ez = field.ez[k - 1];
      } else {
        ez = 0.5 * (field.ez[k] + field.ez[k - 1]);
      }
      const double cos_part = std::norm(er) + std::norm(ez);
      const double sin_part = std::norm(field.ep[k]);
      const double val = lat.eps_p[k] * (lat.m == 0 ? cos_part + sin_part : std::max(cos_part, sin_part));
      if (val > peak) {
        peak = val;
        mv.index = std::sqrt(lat.eps_p[k]);
        mv.r_max_nm = lat.r_int[uz(i)];
        mv.z_max_nm = lat.z_int(j);
      }
    }
  }
  if (!(peak > 0.0)) throw Error(ErrorKind::DegenerateField, "field is identically zero");
  mv.volume_nm3 = integral / peak;
  mv.volume_cubic_wavelengths = mv.volume_nm3 / std::pow(wavelength_nm / mv.index, 3);
  return mv;
}

double theoretical_purcell(double q, double volume_cubic_wavelengths) {
  if (!(q > 0.0) || !(volume_cubic_wavelengths > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "Q and V must be positive");
  }
  return 3.0 / (4.0 * kPi * kPi) * q / volume_cubic_wavelengths;
}

double theoretical_purcell(double q, double volume_nm3, double wavelength_nm, double index) {
  if (!(wavelength_nm > 0.0) || !(index > 0.0)) {
    throw Error(ErrorKind::InvalidArgument, "wavelength and index must be positive");
  }
  return theoretical_purcell(q, volume_nm3 / std::pow(wavelength_nm / index, 3));
}

namespace {

// Radiation-vector components of the azimuthal harmonic on one surface
// element: the theta and phi projections of an equivalent current with
// components (a, b, c) along (r, phi, z), integrated over azimuth at
// observation angle theta. `sin_type` selects a ~ sin m phi, b ~ cos m phi,
// c ~ sin m phi; otherwise the opposite parities.
struct Projection {
  cplx theta, phi;
};

struct BesselRow {
  cplx i_lo, i_m, i_hi;  // 2 pi i^n J_n(x) for n = m - 1, m, m + 1
};

BesselRow bessel_row(int m, double x) {
  auto term = [&](int n) {
    const double j = n < 0 ? -std::cyl_bessel_j(1.0, x) : std::cyl_bessel_j(static_cast<double>(n), x);
    return 2.0 * kPi * std::pow(cplx(0.0, 1.0), ((n % 4) + 4) % 4) * j;
  };
  return {term(m - 1), term(m), term(m + 1)};
}

Projection project(const BesselRow& b, int m, bool sin_type, double ct, double st, cplx a, cplx bb, cplx c) {
  const cplx p = 0.5 * (b.i_lo + b.i_hi), q = 0.5 * (b.i_lo - b.i_hi);
  // m = 0 carries no azimuthal factor; that limit coincides with the sin-type sum.
  if (sin_type || m == 0) return {ct * (a * p + bb * q) - st * c * b.i_m, a * q + bb * p};
  return {ct * (a * p - bb * q) - st * c * b.i_m, bb * p - a * q};
}

}  // namespace

FarFieldMap near_to_far_field(const fdtd::SurfaceDft& surf, const fdtd::Lattice& lat, double wavelength_nm,
                              int num_angles) {
  if (surf.j_bottom <= lat.npml_z || surf.j_top >= lat.nz() - lat.npml_z || surf.i_side >= lat.r_pml_begin()) {
    throw Error(ErrorKind::PlaneInsidePML, "recording surface overlaps the absorbing layer");
  }
  if (num_angles < 3) throw Error(ErrorKind::InvalidArgument, "need at least 3 far-field angles");
  if (!(wavelength_nm > 0.0)) throw Error(ErrorKind::InvalidArgument, "wavelength must be positive");
  const int is = surf.i_side, jb = surf.j_bottom, jt = surf.j_top;
  if (surf.top_er.size() != uz(is + 1) || surf.side_ep.size() != uz(jt - jb + 1) || surf.samples == 0) {
    throw Error(ErrorKind::InvalidArgument, "surface record is empty or inconsistent");
  }
  for (int i = 0; i <= is; ++i) {
    for (int j : {jb, jt}) {
      if (std::abs(lat.eps_p[lat.shape.at(i, j)] - 1.0) > 1e-9) {
        throw Error(ErrorKind::InvalidArgument, "recording surface must lie in vacuum");
      }
    }
  }
  for (int j = jb; j <= jt; ++j) {
    if (std::abs(lat.eps_p[lat.shape.at(is, j)] - 1.0) > 1e-9) {
      throw Error(ErrorKind::InvalidArgument, "recording surface must lie in vacuum");
    }
  }
  const double k0 = 2.0 * kPi / wavelength_nm;
  const int m = lat.m;
  const double r_side = lat.r_int[uz(is)];
  const double ang = m == 0 ? 2.0 * kPi : kPi;  // int cos^2 or sin^2 over azimuth
  auto w_int = [&](int i) { return i == is ? 0.5 * r_side * lat.dr : lat.w_int_r(i); };
  auto w_side = [&](int j) { return (j == jb || j == jt ? 0.5 : 1.0) * lat.dz * r_side; };

  // Equivalent currents J = n x H (E-like parity) and M = -n x E (H-like
  // parity); the far field follows from their radiation vectors N and L.
  const int n_full = 2 * (num_angles - 1) + 1;
  std::vector<double> dpdo(uz(n_full));
  for (int a = 0; a < n_full; ++a) {
    const double theta = kPi * a / (n_full - 1);
    const double st = std::sin(theta), ct = std::cos(theta);
    cplx n_th, n_ph, l_th, l_ph;
    auto add = [&](const Projection& j, const Projection& mm, cplx phase) {
      n_th += j.theta * phase;
      n_ph += j.phi * phase;
      l_th += mm.theta * phase;
      l_ph += mm.phi * phase;
    };
    const cplx ph_top = std::polar(1.0, k0 * ct * lat.z_int(jt));
    const cplx ph_bot = std::polar(1.0, k0 * ct * lat.z_int(jb));
    for (int i = 0; i <= is; ++i) {
      const double ri = lat.r_int[uz(i)], wi = w_int(i);
      const auto bi = bessel_row(m, k0 * st * ri);
      add(project(bi, m, false, ct, st, 0.0, surf.top_hr[uz(i)], 0.0),
          project(bi, m, true, ct, st, surf.top_ep[uz(i)], 0.0, 0.0), wi * ph_top);
      add(project(bi, m, false, ct, st, 0.0, -surf.bot_hr[uz(i)], 0.0),
          project(bi, m, true, ct, st, -surf.bot_ep[uz(i)], 0.0, 0.0), wi * ph_bot);
      if (i == is) break;
      const double rh = lat.r_half[uz(i)], wh = lat.w_half_r(i);
      const auto bh = bessel_row(m, k0 * st * rh);
      add(project(bh, m, false, ct, st, -surf.top_hp[uz(i)], 0.0, 0.0),
          project(bh, m, true, ct, st, 0.0, -surf.top_er[uz(i)], 0.0), wh * ph_top);
      add(project(bh, m, false, ct, st, surf.bot_hp[uz(i)], 0.0, 0.0),
          project(bh, m, true, ct, st, 0.0, surf.bot_er[uz(i)], 0.0), wh * ph_bot);
    }
    const auto bs = bessel_row(m, k0 * st * r_side);
    for (int j = jb; j <= jt; ++j) {
      const auto q = uz(j - jb);
      add(project(bs, m, false, ct, st, 0.0, -surf.side_hz[q], 0.0),
          project(bs, m, true, ct, st, 0.0, 0.0, -surf.side_ep[q]),
          w_side(j) * std::polar(1.0, k0 * ct * lat.z_int(j)));
      if (j == jt) break;
      add(project(bs, m, false, ct, st, 0.0, 0.0, surf.side_hp[q]),
          project(bs, m, true, ct, st, 0.0, surf.side_ez[q], 0.0),
          lat.dz * r_side * std::polar(1.0, k0 * ct * lat.z_half(j)));
    }
    const double avg = m == 0 ? 1.0 : 0.5;  // azimuthal mean of cos^2 and sin^2
    dpdo[uz(a)] = avg * k0 * k0 / (32.0 * kPi * kPi) * (std::norm(l_ph + n_th) + std::norm(l_th - n_ph));
  }

  const double dth = kPi / (n_full - 1);
  auto band_power = [&](int a0, int a1) {
    double p = 0.0;
    for (int a = a0; a < a1; ++a) {
      p += 0.5 * dth * 2.0 * kPi * (dpdo[uz(a)] * std::sin(dth * a) + dpdo[uz(a + 1)] * std::sin(dth * (a + 1)));
    }
    return p;
  };
  FarFieldMap ff;
  ff.radiated_power = band_power(0, num_angles - 1);
  ff.total_radiated_power = band_power(0, n_full - 1);
  if (!(ff.radiated_power > 0.0)) throw Error(ErrorKind::DegenerateField, "no power radiated into the upper hemisphere");
  ff.theta_deg.resize(uz(num_angles));
  ff.intensity.resize(uz(num_angles));
  for (int a = 0; a < num_angles; ++a) {
    ff.theta_deg[uz(a)] = 180.0 * a / (n_full - 1);
    ff.intensity[uz(a)] = dpdo[uz(a)] / ff.radiated_power;
  }

  double top = 0.0, bot = 0.0, side = 0.0;
  for (int i = 0; i <= is; ++i) {
    top -= std::real(surf.top_ep[uz(i)] * std::conj(surf.top_hr[uz(i)])) * w_int(i);
    bot -= std::real(surf.bot_ep[uz(i)] * std::conj(surf.bot_hr[uz(i)])) * w_int(i);
    if (i == is) break;
    top += std::real(surf.top_er[uz(i)] * std::conj(surf.top_hp[uz(i)])) * lat.w_half_r(i);
    bot += std::real(surf.bot_er[uz(i)] * std::conj(surf.bot_hp[uz(i)])) * lat.w_half_r(i);
  }
  for (int j = jb; j <= jt; ++j) {
    const auto q = uz(j - jb);
    side += std::real(surf.side_ep[q] * std::conj(surf.side_hz[q])) * w_side(j);
    if (j < jt) side -= std::real(surf.side_ez[q] * std::conj(surf.side_hp[q])) * lat.dz * r_side;
  }
  ff.plane_flux = 0.5 * ang * top;
  ff.surface_flux = 0.5 * ang * (top - bot + side);
  return ff;
}

double collection_efficiency(const FarFieldMap& ff, double na) {
  if (!(na >= 0.0 && na <= 1.0)) throw Error(ErrorKind::InvalidArgument, "numerical aperture must be in [0, 1]");
  const std::size_t n = ff.theta_deg.size();
  if (n < 2 || ff.intensity.size() != n) throw Error(ErrorKind::InvalidArgument, "far-field map is empty");
  const double limit = std::asin(na);
  const double deg = kPi / 180.0;
  auto f = [&](std::size_t k) { return 2.0 * kPi * ff.intensity[k] * std::sin(ff.theta_deg[k] * deg); };
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < n; ++k) {
    const double t0 = ff.theta_deg[k] * deg, t1 = ff.theta_deg[k + 1] * deg;
    if (t0 >= limit) break;
    if (t1 <= limit) {
      sum += 0.5 * (t1 - t0) * (f(k) + f(k + 1));
    } else {
      const double s = (limit - t0) / (t1 - t0);
      const double fl = f(k) + s * (f(k + 1) - f(k));
      sum += 0.5 * (limit - t0) * (f(k) + fl);
      break;
    }
  }
  return sum;
}

std::vector<fdtd::ProbePoint> default_probes(const geom::LayerStack& stack) {
  const double z = geom::emitter_plane_nm(stack);
  return {{0.0, z}, {35.0, z}, {95.0, z}, {170.0, z}};
}

CavityReport simulate_cavity(const CavitySetup& setup) {
  const auto grid = geom::build_permittivity_grid(setup.geometry, setup.stack, setup.grid);
  fdtd::SolverConfig cfg = setup.solver;
  if (cfg.probes.empty()) cfg.probes = default_probes(setup.stack);
  const auto& opt = setup.options;
  if (!(opt.target_min_nm > 0.0 && opt.target_max_nm > opt.target_min_nm)) {
    throw Error(ErrorKind::ConfigError, "target window must satisfy 0 < min < max");
  }
  if (!(opt.locate_fraction > 0.0 && opt.locate_fraction < 1.0)) {
    throw Error(ErrorKind::ConfigError, "locate_fraction must be in (0, 1)");
  }

  fdtd::Simulation sim(grid, cfg);
  CavityReport rep;
  rep.dt = sim.dt();
  rep.source_off_step = sim.source_off_step();
  const long ring = fdtd::ringdown_steps(cfg, sim.dt());
  if (cfg.total_steps > 0) {
    if (cfg.total_steps - rep.source_off_step < ring) {
      throw Error(ErrorKind::ConfigError, "total_steps shorter than the required ring-down length");
    }
    rep.total_steps = cfg.total_steps;
  } else {
    rep.total_steps = rep.source_off_step + ring;
  }
  const int stride = fdtd::sample_stride(cfg, sim.dt());
  rep.sample_dt = stride * sim.dt();
  const ExtractOptions locate_opts{opt.target_min_nm, opt.target_max_nm};
  const long ring_len = rep.total_steps - rep.source_off_step;
  const long locate_len = std::min(ring_len, std::max(static_cast<long>(opt.locate_fraction * static_cast<double>(ring_len)),
                                                      static_cast<long>(locate_opts.min_samples) * stride));

  rep.ringdown.assign(sim.probe_channels(), {});
  auto record_until = [&](long step) {
    while (sim.step_index() < step) {
      sim.step();
      if ((sim.step_index() - rep.source_off_step) % stride == 0) {
        const auto v = sim.probe_values();
        for (std::size_t c = 0; c < v.size(); ++c) rep.ringdown[c].push_back(v[c]);
      }
    }
  };
  sim.run(rep.source_off_step);
  record_until(rep.source_off_step + locate_len);
  const auto located = extract_resonances(rep.ringdown, rep.sample_dt, locate_opts);
  const double omega0 = located.front().omega;

  const auto& lat = sim.lattice();
  const int j_top = sim.nearest_z_int(grid.membrane_top + opt.surface_gap_nm);
  const int j_bottom = sim.nearest_z_int(-opt.surface_gap_nm);
  const int i_side = std::min(sim.nearest_r_int(setup.geometry.outer_radius_nm() + opt.surface_gap_nm),
                              lat.r_pml_begin() - 2);
  sim.enable_volume_dft(omega0, stride);
  sim.enable_surface_dft(j_bottom, j_top, i_side, omega0, stride);
  record_until(rep.total_steps);

  const double lc = cfg.source.center_wavelength_nm, bw = cfg.source.bandwidth_nm;
  ExtractOptions band{std::min(lc - bw, opt.target_min_nm), std::max(lc + bw, opt.target_max_nm)};
  rep.resonances = extract_resonances(rep.ringdown, rep.sample_dt, band);
  auto in_target = [&](const ResonanceEstimate& r) {
    return r.wavelength_nm >= opt.target_min_nm && r.wavelength_nm <= opt.target_max_nm;
  };
  const auto it = std::find_if(rep.resonances.begin(), rep.resonances.end(), in_target);
  rep.target = it != rep.resonances.end() ? *it : located.front();

  rep.mode_volume = mode_volume(*sim.volume_dft(), sim.lattice(), rep.target.wavelength_nm);
  rep.theoretical_purcell = theoretical_purcell(rep.target.q, rep.mode_volume.volume_cubic_wavelengths);
  rep.far_field = near_to_far_field(*sim.surface_dft(), sim.lattice(), rep.target.wavelength_nm, opt.num_angles);
  for (double na : opt.numerical_apertures) rep.collection[na] = collection_efficiency(rep.far_field, na);
  return rep;
}

std::vector<CavitySetup> expand_sweep(const CavitySetup& base, const SweepAxes& axes) {
  auto axis = [](const std::vector<double>& v, double fallback) {
    return v.empty() ? std::vector<double>{fallback} : v;
  };
  const double t_base = geom::membrane_thickness(base.stack);
  std::vector<CavitySetup> out;
  for (double d : axis(axes.disk_diameter_nm, base.geometry.disk_diameter_nm)) {
    for (double p : axis(axes.period_nm, base.geometry.period_nm)) {
      for (double w : axis(axes.ring_width_nm, base.geometry.ring_width_nm)) {
        for (double t : axis(axes.thickness_nm, t_base)) {
          CavitySetup s = base;
          s.geometry.disk_diameter_nm = d;
          s.geometry.period_nm = p;
          s.geometry.ring_width_nm = w;
          if (t != t_base) {
            if (!(t > 0.0)) throw Error(ErrorKind::InvalidGeometry, "sweep thickness must be positive");
            const double scale = t / t_base;
            for (auto& layer : s.stack.layers) layer.thickness_nm *= scale;
            s.solver.source.z_nm *= scale;
            for (auto& pr : s.solver.probes) pr.z_nm *= scale;
          }
          out.push_back(std::move(s));
        }
      }
    }
  }
  return out;
}

std::vector<SweepRow> sweep_parameters(const CavitySetup& base, const SweepAxes& axes,
                                       const std::function<void(const SweepRow&)>& on_row) {
  const auto setups = expand_sweep(base, axes);
  std::vector<SweepRow> rows(setups.size());
  const auto count = static_cast<long>(setups.size());
#pragma omp parallel for schedule(dynamic, 1)
  for (long p = 0; p < count; ++p) {
    auto& row = rows[static_cast<std::size_t>(p)];
    row.index = static_cast<std::size_t>(p);
    row.setup = setups[static_cast<std::size_t>(p)];
    try {
      row.setup.geometry.validate();
      row.report = simulate_cavity(row.setup);
    } catch (const Error& e) {
      row.error_kind = std::string(to_string(e.kind()));
      row.error_message = e.what();
    } catch (const std::exception& e) {
      row.error_kind = "InternalError";
      row.error_message = e.what();
    }
    if (on_row) {
#pragma omp critical(bullseye_sweep_sink)
      on_row(row);
    }
  }
  return rows;
}

}  // namespace bullseye::cavity
