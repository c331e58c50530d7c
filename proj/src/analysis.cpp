#include "bullseye/analysis.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numbers>
#include <numeric>

#include "bullseye/constants.hpp"

namespace bullseye::analysis {

namespace {

constexpr double kFwhmToSigma = 0.42466090014400953;
constexpr double kInvSqrt2Pi = 0.3989422804014327;

std::vector<double> poisson_weights(const std::vector<double>& y) {
  std::vector<double> w(y.size());
  for (std::size_t k = 0; k < y.size(); ++k) w[k] = 1.0 / std::sqrt(std::max(std::abs(y[k]), 1.0));
  return w;
}

// Least-squares line through (x, y) with weights w: returns {slope, intercept}.
std::pair<double, double> weighted_line(const std::vector<double>& x, const std::vector<double>& y,
                                        const std::vector<double>& w) {
  double sw = 0, sx = 0, sy = 0, sxx = 0, sxy = 0;
  for (std::size_t k = 0; k < x.size(); ++k) {
    sw += w[k];
    sx += w[k] * x[k];
    sy += w[k] * y[k];
    sxx += w[k] * x[k] * x[k];
    sxy += w[k] * x[k] * y[k];
  }
  const double det = sw * sxx - sx * sx;
  if (!(std::abs(det) > 0.0)) return {0.0, sw > 0 ? sy / sw : 0.0};
  const double slope = (sw * sxy - sx * sy) / det;
  return {slope, (sy - slope * sx) / sw};
}

// Value and derivatives of the exponential-Gaussian CDF G(t; tau, sigma).
struct ExpGauss {
  double cdf, density, d_tau;
};

ExpGauss exp_gauss(double t, double tau, double sigma) {
  if (sigma <= 0.0) {
    if (t <= 0.0) return {0.0, 0.0, 0.0};
    const double e = std::exp(-t / tau);
    return {-std::expm1(-t / tau), e / tau, -e * t / (tau * tau)};
  }
  const double phi = 0.5 * std::erfc(-t / (sigma * std::numbers::sqrt2));
  const double u = (sigma / tau - t / sigma) / std::numbers::sqrt2;
  const double g0 = std::exp(-0.5 * t * t / (sigma * sigma));
  // E = exp(-t/tau + sigma^2/2tau^2) Phi(t/sigma - sigma/tau), evaluated
  // without overflow on either side.
  const double e = u < 0.0 ? 0.5 * std::exp(-t / tau + 0.5 * sigma * sigma / (tau * tau)) * std::erfc(u)
                           : 0.5 * g0 * models::erfcx(u);
  const double de_dtau = e * (t / (tau * tau) - sigma * sigma / (tau * tau * tau)) + sigma / (tau * tau) * kInvSqrt2Pi * g0;
  return {phi - e, e / tau, -de_dtau};
}

}  // namespace

void Spectrum::validate() const {
  if (wavelength_nm.size() != counts.size()) throw Error(ErrorKind::InvalidArgument, "spectrum columns differ in length");
  for (std::size_t k = 1; k < wavelength_nm.size(); ++k) {
    if (!(wavelength_nm[k] > wavelength_nm[k - 1])) {
      throw Error(ErrorKind::InvalidArgument, "wavelengths must be strictly increasing");
    }
  }
  for (double c : counts) {
    if (!(c >= 0.0)) throw Error(ErrorKind::InvalidArgument, "counts must be non-negative");
  }
}

namespace models {

double lorentzian(const std::vector<double>& p, double x, double sign) {
  const double d = x - p[0], h = 0.25 * p[1] * p[1];
  return p[3] + sign * p[2] * h / (d * d + h);
}

fit::Problem lorentzian_problem(const std::vector<double>& x, const std::vector<double>& y,
                                const std::vector<double>& w, double sign) {
  fit::Problem pr;
  pr.num_residuals = x.size();
  pr.residual = [&x, &y, &w, sign](std::span<const double> p, std::span<double> r) {
    const std::vector<double> q(p.begin(), p.end());
    for (std::size_t k = 0; k < x.size(); ++k) r[k] = (lorentzian(q, x[k], sign) - y[k]) * w[k];
  };
  pr.jacobian = [&x, &w, sign](std::span<const double> p, Eigen::MatrixXd& j) {
    const double h = 0.25 * p[1] * p[1];
    for (std::size_t k = 0; k < x.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      const double d = x[k] - p[0], den = d * d + h, den2 = den * den;
      j(i, 0) = sign * p[2] * h * 2.0 * d / den2 * w[k];
      j(i, 1) = sign * p[2] * d * d * 0.5 * p[1] / den2 * w[k];
      j(i, 2) = sign * h / den * w[k];
      j(i, 3) = w[k];
    }
  };
  return pr;
}

double erfcx(double x) {
  if (x < 25.0) return std::exp(x * x) * std::erfc(x);
  // Asymptotic series; the next term is below 1e-11 relative here.
  const double y = 1.0 / (2.0 * x * x);
  return 1.0 / (x * std::sqrt(std::numbers::pi)) * (1.0 - y * (1.0 - 3.0 * y * (1.0 - 5.0 * y)));
}

double exp_gauss_cdf(double t, double tau, double sigma) { return exp_gauss(t, tau, sigma).cdf; }

std::vector<double> biexp_bins(const std::vector<double>& p, const std::vector<double>& edges, double width,
                               double sigma) {
  std::vector<double> out(edges.size());
  for (std::size_t k = 0; k < edges.size(); ++k) {
    const double a = edges[k] - p[0], b = a + width;
    out[k] = p[1] * (exp_gauss(b, p[2], sigma).cdf - exp_gauss(a, p[2], sigma).cdf) +
             p[3] * (exp_gauss(b, p[4], sigma).cdf - exp_gauss(a, p[4], sigma).cdf) + p[5];
  }
  return out;
}

fit::Problem biexp_problem(const std::vector<double>& edges, double width, const std::vector<double>& y,
                           const std::vector<double>& w, double sigma, bool fit_t0) {
  // Without t0 the parameter vector is {A1, tau1, A2, tau2, baseline}.
  auto full = [fit_t0](std::span<const double> p) {
    std::vector<double> q(p.begin(), p.end());
    if (!fit_t0) q.insert(q.begin(), 0.0);
    return q;
  };
  fit::Problem pr;
  pr.num_residuals = edges.size();
  pr.residual = [&edges, width, &y, &w, sigma, full](std::span<const double> p, std::span<double> r) {
    const auto m = biexp_bins(full(p), edges, width, sigma);
    for (std::size_t k = 0; k < m.size(); ++k) r[k] = (m[k] - y[k]) * w[k];
  };
  pr.jacobian = [&edges, width, &w, sigma, full, fit_t0](std::span<const double> pp, Eigen::MatrixXd& j) {
    const auto p = full(pp);
    const Eigen::Index off = fit_t0 ? 0 : -1;
    for (std::size_t k = 0; k < edges.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      const double a = edges[k] - p[0], b = a + width;
      const auto fa = exp_gauss(a, p[2], sigma), fb = exp_gauss(b, p[2], sigma);
      const auto sa = exp_gauss(a, p[4], sigma), sb = exp_gauss(b, p[4], sigma);
      if (fit_t0) j(i, 0) = -(p[1] * (fb.density - fa.density) + p[3] * (sb.density - sa.density)) * w[k];
      j(i, 1 + off) = (fb.cdf - fa.cdf) * w[k];
      j(i, 2 + off) = p[1] * (fb.d_tau - fa.d_tau) * w[k];
      j(i, 3 + off) = (sb.cdf - sa.cdf) * w[k];
      j(i, 4 + off) = p[3] * (sb.d_tau - sa.d_tau) * w[k];
      j(i, 5 + off) = w[k];
    }
  };
  return pr;
}

double saturation(const std::vector<double>& p, double power) {
  return -p[0] * std::expm1(-std::pow(power / p[1], p[2])) + p[3];
}

fit::Problem saturation_problem(const std::vector<double>& power, const std::vector<double>& y,
                                const std::vector<double>& w) {
  fit::Problem pr;
  pr.num_residuals = power.size();
  pr.residual = [&power, &y, &w](std::span<const double> p, std::span<double> r) {
    const std::vector<double> q(p.begin(), p.end());
    for (std::size_t k = 0; k < power.size(); ++k) r[k] = (saturation(q, power[k]) - y[k]) * w[k];
  };
  pr.jacobian = [&power, &w](std::span<const double> p, Eigen::MatrixXd& j) {
    for (std::size_t k = 0; k < power.size(); ++k) {
      const auto i = static_cast<Eigen::Index>(k);
      const double lr = std::log(power[k] / p[1]);
      const double x = std::pow(power[k] / p[1], p[2]);
      const double ex = std::exp(-x);
      j(i, 0) = -std::expm1(-x) * w[k];
      j(i, 1) = -p[0] * ex * p[2] * x / p[1] * w[k];
      j(i, 2) = p[0] * ex * x * lr * w[k];
      j(i, 3) = w[k];
    }
  };
  return pr;
}

}  // namespace models

LorentzianFit fit_lorentzian(const Spectrum& s, Orientation o) {
  return fit_lorentzian(s, o, o == Orientation::Peak ? Weighting::Poisson : Weighting::Uniform);
}

LorentzianFit fit_lorentzian(const Spectrum& s, Orientation o, Weighting weighting) {
  s.validate();
  const auto& x = s.wavelength_nm;
  const auto& y = s.counts;
  if (x.size() < 10) throw Error(ErrorKind::InvalidArgument, "need at least 10 spectrum samples");
  const auto [lo_it, hi_it] = std::minmax_element(y.begin(), y.end());
  if (*hi_it == *lo_it) throw Error(ErrorKind::DegenerateData, "spectrum is constant");
  const double sign = o == Orientation::Peak ? 1.0 : -1.0;

  // Start from the extreme sample and its half-maximum crossings.
  const std::size_t ipk = static_cast<std::size_t>((o == Orientation::Peak ? hi_it : lo_it) - y.begin());
  const double base = o == Orientation::Peak ? *lo_it : *hi_it;
  const double amp = std::abs(y[ipk] - base);
  const double half = base + sign * 0.5 * amp;
  auto beyond_half = [&](std::size_t k) { return sign * (y[k] - half) > 0.0; };
  std::size_t a = ipk, b = ipk;
  while (a > 0 && beyond_half(a - 1)) --a;
  while (b + 1 < x.size() && beyond_half(b + 1)) ++b;
  const double spacing = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
  const double width0 = std::max(x[b] - x[a] + spacing, 2.0 * spacing);

  const bool poisson = weighting == Weighting::Poisson;
  std::vector<double> w = poisson ? poisson_weights(y) : std::vector<double>(y.size(), 1.0);
  const auto problem = models::lorentzian_problem(x, y, w, sign);
  fit::Bounds bounds{{x.front(), 1e-6 * spacing, 0.0}, {x.back()}};
  fit::Options opt;
  opt.gtol = 1e-10;
  // Stop on the gradient, not the cost: a relative cost-drop test ends near
  // cosine sqrt(ftol), above the 1e-8 convergence contract.
  opt.ftol = 0.0;
  auto res = fit::nlls_minimize(problem, {x[ipk], width0, amp, base}, bounds, opt);
  if (poisson) {
    std::vector<double> m(x.size());
    for (std::size_t k = 0; k < x.size(); ++k) m[k] = models::lorentzian(res.params, x[k], sign);
    w = poisson_weights(m);
    res = fit::nlls_minimize(problem, res.params, bounds, opt);
  }

  LorentzianFit f;
  f.center_nm = res.params[0];
  f.fwhm_nm = res.params[1];
  f.amplitude = res.params[2];
  f.offset = res.params[3];
  f.center_sigma = res.sigma(0);
  f.fwhm_sigma = res.sigma(1);
  f.amplitude_sigma = res.sigma(2);
  f.offset_sigma = res.sigma(3);
  f.orientation = o;
  f.gradient_cosine = res.gradient_cosine;
  f.iterations = res.iterations;
  return f;
}

double q_factor(double center_ev, double fwhm_ev) {
  if (!(fwhm_ev > 0.0) || !(center_ev > 0.0)) throw Error(ErrorKind::InvalidArgument, "center and fwhm must be positive");
  return center_ev / fwhm_ev;
}

double q_factor_wavelength(double center_nm, double fwhm_nm) { return q_factor(center_nm, fwhm_nm); }

EnergyLine to_energy(double center_nm, double fwhm_nm) {
  if (!(center_nm > 0.0) || !(fwhm_nm > 0.0) || !(fwhm_nm < 2.0 * center_nm)) {
    throw Error(ErrorKind::InvalidArgument, "need 0 < fwhm < 2 center");
  }
  const double hc = constants::hc_eV_nm;
  return {hc / center_nm, hc * fwhm_nm / (center_nm * center_nm - 0.25 * fwhm_nm * fwhm_nm)};
}

double isolate_line(const Spectrum& s, double center, double bw) {
  s.validate();
  if (!(bw >= 0.0)) throw Error(ErrorKind::InvalidArgument, "bandwidth must be non-negative");
  const auto& x = s.wavelength_nm;
  const auto& y = s.counts;
  const double lo = center - 0.5 * bw, hi = center + 0.5 * bw;
  if (x.empty() || lo < x.front() || hi > x.back()) {
    throw Error(ErrorKind::WindowOutOfRange, "integration window leaves the sampled range");
  }
  if (bw == 0.0) return 0.0;
  auto value = [&](double t) {
    const auto it = std::upper_bound(x.begin(), x.end(), t);
    if (it == x.end()) return y.back();
    const auto k = static_cast<std::size_t>(it - x.begin());
    if (k == 0) return y.front();
    const double f = (t - x[k - 1]) / (x[k] - x[k - 1]);
    return y[k - 1] + f * (y[k] - y[k - 1]);
  };
  // Break points: window ends plus every sample strictly inside.
  std::vector<double> t{lo};
  for (double v : x) {
    if (v > lo && v < hi) t.push_back(v);
  }
  t.push_back(hi);
  double sum = 0.0;
  for (std::size_t k = 0; k + 1 < t.size(); ++k) sum += 0.5 * (t[k + 1] - t[k]) * (value(t[k]) + value(t[k + 1]));
  return sum;
}

double signal_fraction(double s, double b) {
  if (!(s >= 0.0) || !(b >= 0.0)) throw Error(ErrorKind::InvalidArgument, "rates must be non-negative");
  if (s + b == 0.0) throw Error(ErrorKind::ZeroTotalRate, "signal plus background is zero");
  return s / (s + b);
}

CorrectedG2 g2_background_correct(double g2, double r, double g2_sigma, double r_sigma) {
  if (!(r > 0.0 && r <= 1.0)) throw Error(ErrorKind::InvalidR, "R must be in (0, 1]");
  const double r2 = r * r;
  CorrectedG2 c{g2, r, (g2 - (1.0 - r2)) / r2, 0.0};
  const double d_g = 1.0 / r2;
  const double d_r = -2.0 * (g2 - 1.0) / (r2 * r);
  c.uncertainty = std::hypot(d_g * g2_sigma, d_r * r_sigma);
  return c;
}

double g2_background_uncorrect(double g2_corr, double r) {
  if (!(r > 0.0 && r <= 1.0)) throw Error(ErrorKind::InvalidR, "R must be in (0, 1]");
  return r * r * g2_corr + 1.0 - r * r;
}

BiexpFit fit_biexp_irf(const std::vector<double>& t, const std::vector<double>& y, double irf_fwhm) {
  if (t.size() != y.size() || t.size() < 12) throw Error(ErrorKind::InvalidArgument, "need at least 12 matching bins");
  if (!(irf_fwhm >= 0.0)) throw Error(ErrorKind::InvalidArgument, "irf_fwhm must be non-negative");
  const double width = t[1] - t[0];
  if (!(width > 0.0)) throw Error(ErrorKind::InvalidArgument, "time axis must increase");
  for (std::size_t k = 1; k < t.size(); ++k) {
    if (std::abs(t[k] - t[k - 1] - width) > 1e-6 * width) {
      throw Error(ErrorKind::InvalidArgument, "time axis must be uniformly spaced");
    }
  }
  const double sigma = irf_fwhm * kFwhmToSigma;
  std::vector<double> edges(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) edges[k] = t[k] - 0.5 * width;

  // Initial guess from log-linear slopes of the tail, then of the early
  // decay after removing the slow part.
  const std::size_t ipk = static_cast<std::size_t>(std::max_element(y.begin(), y.end()) - y.begin());
  if (!(y[ipk] > 0.0)) throw Error(ErrorKind::DegenerateData, "decay histogram is empty");
  double bl = 0.0;
  {
    std::vector<double> pre;
    for (std::size_t k = 0; k < t.size(); ++k) {
      if (t[k] < -4.0 * sigma - 2.0 * width) pre.push_back(y[k]);
    }
    if (pre.size() >= 5) bl = std::accumulate(pre.begin(), pre.end(), 0.0) / static_cast<double>(pre.size());
  }
  auto fit_log = [&](double t_from, double t_to, const std::vector<double>& subtract) {
    std::vector<double> xs, ls, ws;
    for (std::size_t k = ipk; k < t.size(); ++k) {
      if (t[k] < t_from || t[k] > t_to) continue;
      const double v = y[k] - bl - subtract[k];
      if (v > 3.0) {
        xs.push_back(t[k]);
        ls.push_back(std::log(v));
        ws.push_back(v);
      }
    }
    if (xs.size() < 3) return std::pair<double, double>{0.0, 0.0};
    return weighted_line(xs, ls, ws);
  };
  const double t_pk = t[ipk], t_end = t.back();
  const std::vector<double> zeros(t.size(), 0.0);
  auto [s_slope, s_icpt] = fit_log(t_pk + 0.3 * (t_end - t_pk), t_end, zeros);
  double tau2 = s_slope < 0.0 ? -1.0 / s_slope : 0.3 * (t_end - t_pk);
  double a2 = std::exp(s_icpt) * tau2 / width;
  std::vector<double> slow(t.size());
  for (std::size_t k = 0; k < t.size(); ++k) slow[k] = t[k] > 0.0 ? a2 * width / tau2 * std::exp(-t[k] / tau2) : 0.0;
  auto [f_slope, f_icpt] = fit_log(t_pk, t_pk + 0.5 * tau2, slow);
  double tau1 = f_slope < 0.0 ? -1.0 / f_slope : 0.2 * tau2;
  if (!(tau1 < tau2)) tau1 = 0.2 * tau2;
  double a1 = std::max(std::exp(f_icpt) * tau1 / width, 1.0);
  a2 = std::max(a2, 1.0);

  auto w = poisson_weights(y);
  const bool fit_t0 = sigma > 0.0;
  const auto problem = models::biexp_problem(edges, width, y, w, sigma, fit_t0);
  std::vector<double> p0{a1, tau1, a2, tau2, bl};
  std::vector<double> lower{0.0, 1e-3 * width, 0.0, 1e-3 * width, 0.0};
  if (fit_t0) {
    p0.insert(p0.begin(), 0.0);
    lower.insert(lower.begin(), t.front());
  }
  fit::Options opt;
  opt.max_iterations = 1000;
  auto res = fit::nlls_minimize(problem, p0, {lower, {}}, opt);
  // Refit with weights from the model: data-based weights bias sparse tail
  // bins low.
  {
    auto q = res.params;
    if (!fit_t0) q.insert(q.begin(), 0.0);
    const auto m = models::biexp_bins(q, edges, width, sigma);
    w = poisson_weights(m);
    res = fit::nlls_minimize(problem, res.params, {lower, {}}, opt);
  }

  std::vector<double> p = res.params;
  std::vector<double> sg(p.size());
  for (std::size_t k = 0; k < p.size(); ++k) sg[k] = res.sigma(k);
  if (!fit_t0) {
    p.insert(p.begin(), 0.0);
    sg.insert(sg.begin(), 0.0);
  }
  if (p[2] > p[4]) {
    std::swap(p[1], p[3]);
    std::swap(p[2], p[4]);
    std::swap(sg[1], sg[3]);
    std::swap(sg[2], sg[4]);
  }
  BiexpFit f;
  f.t0_ps = p[0];
  f.fast_amplitude = p[1];
  f.tau_fast_ps = p[2];
  f.slow_amplitude = p[3];
  f.tau_slow_ps = p[4];
  f.baseline = p[5];
  f.t0_sigma = sg[0];
  f.fast_amplitude_sigma = sg[1];
  f.tau_fast_sigma = sg[2];
  f.slow_amplitude_sigma = sg[3];
  f.tau_slow_sigma = sg[4];
  f.baseline_sigma = sg[5];
  f.irf_fwhm_ps = irf_fwhm;
  f.iterations = res.iterations;
  if (f.tau_fast_ps / f.tau_slow_ps > 0.8) {
    f.warnings.push_back("IdentifiabilityWarning: fast and slow lifetimes are within 20%");
  }
  return f;
}

PurcellEstimate purcell_from_lifetimes(double tb, double sb, double tc, double sc) {
  if (!(tb > 0.0) || !(tc > 0.0)) throw Error(ErrorKind::InvalidArgument, "lifetimes must be positive");
  const double f = tb / tc;
  return {f, f * std::hypot(sb / tb, sc / tc)};
}

SaturationFit fit_saturation(const std::vector<double>& pw, const std::vector<double>& in) {
  if (pw.size() != in.size() || pw.size() < 6) throw Error(ErrorKind::InvalidArgument, "need at least 6 (P, I) points");
  std::vector<std::size_t> order(pw.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](auto a, auto b) { return pw[a] < pw[b]; });
  std::vector<double> p, y;
  for (auto k : order) {
    if (!(pw[k] > 0.0)) throw Error(ErrorKind::InvalidArgument, "powers must be positive");
    p.push_back(pw[k]);
    y.push_back(in[k]);
  }
  const double pmax = p.back();
  // Offset from the low-power intercept, I_sat from the top point, P0 from
  // the half-intensity power.
  const double slope0 = (y[1] - y[0]) / (p[1] - p[0]);
  const double i0 = std::max(0.0, y[0] - slope0 * p[0]);
  const double isat = std::max(y.back() - i0, 1e-6 * std::max(1.0, std::abs(y.back())));
  double p_half = pmax;
  for (std::size_t k = 1; k < p.size(); ++k) {
    if (y[k] - i0 >= 0.5 * isat) {
      const double f = (0.5 * isat - (y[k - 1] - i0)) / std::max(y[k] - y[k - 1], 1e-300);
      p_half = p[k - 1] + std::clamp(f, 0.0, 1.0) * (p[k] - p[k - 1]);
      break;
    }
  }
  const double p0 = std::max(p_half / std::numbers::ln2, 1e-3 * pmax);

  const auto w = poisson_weights(y);
  const auto problem = models::saturation_problem(p, y, w);
  fit::Bounds bounds{{0.0, 1e-6 * pmax, 0.1, 0.0}, {std::numeric_limits<double>::infinity(), 1e3 * pmax, 5.0}};
  fit::Options opt;
  opt.max_iterations = 2000;
  opt.ftol = 0.0;  // as for the Lorentzian: converge on the gradient
  fit::Result res;
  try {
    res = fit::nlls_minimize(problem, {isat, p0, 1.0, i0}, bounds, opt);
  } catch (const fit::NoConvergence& e) {
    if (e.best().size() > 1 && e.best()[1] > 10.0 * pmax) {
      throw Error(ErrorKind::NonSaturatingData, "no saturation within the measured power range");
    }
    throw;
  } catch (const Error& e) {
    if (e.kind() != ErrorKind::SingularNormalMatrix) throw;
    // Linear data leaves I_sat and P0 degenerate along I_sat / P0 = const.
    throw Error(ErrorKind::NonSaturatingData, "no saturation within the measured power range");
  }
  if (res.params[1] > 10.0 * pmax) {
    throw Error(ErrorKind::NonSaturatingData, "no saturation within the measured power range");
  }
  SaturationFit f;
  f.i_sat = res.params[0];
  f.p0_uw = res.params[1];
  f.alpha = res.params[2];
  f.i0 = res.params[3];
  f.i_sat_sigma = res.sigma(0);
  f.p0_sigma = res.sigma(1);
  f.alpha_sigma = res.sigma(2);
  f.i0_sigma = res.sigma(3);
  f.gradient_cosine = res.gradient_cosine;
  f.iterations = res.iterations;
  return f;
}

double enhancement_ratio(const std::vector<double>& cav, const std::vector<double>& bulk) {
  if (cav.empty() || bulk.empty()) throw Error(ErrorKind::EmptyGroup, "both groups need at least one emitter");
  const double mc = std::accumulate(cav.begin(), cav.end(), 0.0) / static_cast<double>(cav.size());
  const double mb = std::accumulate(bulk.begin(), bulk.end(), 0.0) / static_cast<double>(bulk.size());
  if (!(mb > 0.0)) throw Error(ErrorKind::InvalidArgument, "bulk mean must be positive");
  return mc / mb;
}

double enhancement_ratio(const std::vector<SaturationFit>& cav, const std::vector<SaturationFit>& bulk) {
  std::vector<double> a, b;
  for (const auto& f : cav) a.push_back(f.i_sat);
  for (const auto& f : bulk) b.push_back(f.i_sat);
  return enhancement_ratio(a, b);
}

}  // namespace bullseye::analysis
