#pragma once

#include <string>
#include <vector>

#include "bullseye/nlls.hpp"

// Measurement-analysis chain on top of the shared least-squares engine.
// Wavelengths in nm, energies in eV, times in ps, powers in uW, rates in
// counts per second.
namespace bullseye::analysis {

struct Spectrum {
  std::vector<double> wavelength_nm;
  std::vector<double> counts;
  double resolution_nm = 0.02;

  void validate() const;
};

enum class Orientation { Peak, Dip };
enum class Weighting { Poisson, Uniform };

/// offset +- amplitude (w/2)^2 / ((x - x0)^2 + (w/2)^2), amplitude >= 0;
/// the sign is + for a peak and - for a dip.
struct LorentzianFit {
  double center_nm = 0.0;
  double fwhm_nm = 0.0;
  double amplitude = 0.0;
  double offset = 0.0;
  double center_sigma = 0.0, fwhm_sigma = 0.0, amplitude_sigma = 0.0, offset_sigma = 0.0;
  Orientation orientation = Orientation::Peak;
  double gradient_cosine = 0.0;
  int iterations = 0;
};

/// Poisson weights suit count spectra (peaks); uniform weights suit
/// reflectivity-style dips. The default picks by orientation.
LorentzianFit fit_lorentzian(const Spectrum& spectrum, Orientation orientation = Orientation::Peak);
LorentzianFit fit_lorentzian(const Spectrum& spectrum, Orientation orientation, Weighting weighting);

/// Q = E0 / dE, the canonical form.
double q_factor(double center_ev, double fwhm_ev);
/// Q = lambda0 / dlambda.
double q_factor_wavelength(double center_nm, double fwhm_nm);
/// Photon energy of the line centre and the energy width of the wavelength
/// FWHM interval [lambda0 - w/2, lambda0 + w/2].
struct EnergyLine {
  double center_ev = 0.0;
  double fwhm_ev = 0.0;
};
EnergyLine to_energy(double center_nm, double fwhm_nm);

/// Trapezoid integral of counts over [center - bw/2, center + bw/2], with
/// linearly interpolated end points. WindowOutOfRange when the window leaves
/// the sampled range.
double isolate_line(const Spectrum& spectrum, double center_nm, double bandwidth_nm);

/// R = S / (S + B). ZeroTotalRate when both are zero.
double signal_fraction(double signal_cps, double background_cps);

struct CorrectedG2 {
  double g2_raw = 0.0;
  double r = 1.0;
  double g2_corr = 0.0;
  double uncertainty = 0.0;
};

/// g2_corr = (g2 - (1 - R^2)) / R^2, with first-order propagation of the
/// given input uncertainties. InvalidR outside (0, 1].
CorrectedG2 g2_background_correct(double g2_raw, double r, double g2_sigma = 0.0, double r_sigma = 0.0);
/// Inverse map: g2 = R^2 g2_corr + 1 - R^2.
double g2_background_uncorrect(double g2_corr, double r);

/// Biexponential decay convolved with a Gaussian IRF on a binned time axis.
/// Parameters: t0, fast counts, tau_fast, slow counts, tau_slow, baseline per bin.
struct BiexpFit {
  double t0_ps = 0.0;
  double tau_fast_ps = 0.0, tau_slow_ps = 0.0;
  double fast_amplitude = 0.0, slow_amplitude = 0.0;  ///< total counts in each component
  double baseline = 0.0;                              ///< counts per bin
  double irf_fwhm_ps = 0.0;
  double t0_sigma = 0.0, tau_fast_sigma = 0.0, tau_slow_sigma = 0.0;
  double fast_amplitude_sigma = 0.0, slow_amplitude_sigma = 0.0, baseline_sigma = 0.0;
  std::vector<std::string> warnings;
  int iterations = 0;
};

/// `time_ps` are uniformly spaced bin centers. With irf_fwhm = 0 the model
/// is a plain biexponential starting at t = 0 and t0 is not fitted.
BiexpFit fit_biexp_irf(const std::vector<double>& time_ps, const std::vector<double>& counts, double irf_fwhm_ps);

struct PurcellEstimate {
  double value = 0.0;
  double sigma = 0.0;
};

/// F = tau_bulk / tau_cavity with independent first-order error propagation.
PurcellEstimate purcell_from_lifetimes(double tau_bulk_ps, double sigma_bulk_ps, double tau_cavity_ps,
                                       double sigma_cavity_ps);

struct SaturationFit {
  double i_sat = 0.0;
  double p0_uw = 0.0;
  double alpha = 1.0;
  double i0 = 0.0;
  double i_sat_sigma = 0.0, p0_sigma = 0.0, alpha_sigma = 0.0, i0_sigma = 0.0;
  double gradient_cosine = 0.0;
  int iterations = 0;
};

/// I = I_sat (1 - exp(-(P / P0)^alpha)) + I0. NonSaturatingData when the
/// fitted P0 exceeds ten times the largest measured power.
SaturationFit fit_saturation(const std::vector<double>& power_uw, const std::vector<double>& intensity_cps);

/// mean(I_sat cavity) / mean(I_sat bulk). EmptyGroup when either is empty.
double enhancement_ratio(const std::vector<SaturationFit>& cavity, const std::vector<SaturationFit>& bulk);
double enhancement_ratio(const std::vector<double>& cavity_i_sat, const std::vector<double>& bulk_i_sat);

/// Closed-form model curves and their analytic Jacobians, exposed so the
/// derivatives can be audited against finite differences.
namespace models {

double lorentzian(const std::vector<double>& p, double x, double sign);
fit::Problem lorentzian_problem(const std::vector<double>& x, const std::vector<double>& y,
                                const std::vector<double>& weights, double sign);

/// CDF of an exponential (time constant tau) convolved with a zero-mean
/// Gaussian of width sigma; the sigma = 0 limit is 1 - exp(-t / tau) for t > 0.
double exp_gauss_cdf(double t, double tau, double sigma);
/// Scaled complementary error function exp(x^2) erfc(x).
double erfcx(double x);

/// Bin counts for parameters {t0, A1, tau1, A2, tau2, baseline} on bins
/// [edge_k, edge_k + width).
std::vector<double> biexp_bins(const std::vector<double>& p, const std::vector<double>& left_edges, double width,
                               double sigma);
fit::Problem biexp_problem(const std::vector<double>& left_edges, double width, const std::vector<double>& y,
                           const std::vector<double>& weights, double sigma, bool fit_t0);

double saturation(const std::vector<double>& p, double power);
fit::Problem saturation_problem(const std::vector<double>& power, const std::vector<double>& y,
                                const std::vector<double>& weights);

}  // namespace models

}  // namespace bullseye::analysis
