#pragma once

#include <array>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "bullseye/error.hpp"

// Phenomenological photon-counting Monte Carlo. Times are in ps, rates in
// counts per second unless a name says otherwise.
namespace bullseye::photon {

/// Biexponential emission-delay model. With single_photon set, one
/// excitation yields at most one photon, plus a second with probability
/// `reexcitation_probability` (the residual multi-photon part).
struct EmitterModel {
  double tau_fast_ps = 141.1;
  double tau_slow_ps = 617.0;
  double fast_fraction = 0.8;
  bool single_photon = true;
  double reexcitation_probability = 0.0;

  void validate() const;
  double mean_delay_ps() const { return fast_fraction * tau_fast_ps + (1.0 - fast_fraction) * tau_slow_ps; }
  /// Closed-form CDF of the delay mixture.
  double delay_cdf(double t_ps) const;
};

enum class ExcitationMode { Pulsed, Cw };

struct ExcitationConfig {
  ExcitationMode mode = ExcitationMode::Pulsed;
  double rep_rate_mhz = 76.0;
  double pulse_duration_ps = 2.0;  ///< FWHM of the Gaussian excitation pulse
  double power_uw = 1.0;
  double threshold_power_uw = 5.0;  ///< P0
  double exponent = 1.0;            ///< alpha
  double cw_rate_per_ps = 1e-4;     ///< excitation attempt rate in CW mode

  void validate() const;
  double period_ps() const { return 1.0e6 / rep_rate_mhz; }
  /// 1 - exp(-(P / P0)^alpha).
  double excitation_probability() const;
  double excitation_probability(double power_uw) const;
};

struct BackgroundModel {
  double rate_cps = 0.0;
};

struct DetectorModel {
  double irf_fwhm_ps = 50.0;
  double dead_time_ps = 77000.0;
  double dark_rate_cps = 0.0;
  double efficiency = 1.0;
};

enum class Origin : std::uint8_t { Signal, Background, Dark };

struct Event {
  int detector = 0;
  double time_ps = 0.0;
  Origin origin = Origin::Signal;
};

/// Events sorted by time. Per detector the times are strictly increasing and
/// lie in [0, duration].
struct TimestampStream {
  std::vector<Event> events;
  double duration_ps = 0.0;
  std::uint64_t seed = 0;
  std::string provenance;

  std::vector<double> times(int detector) const;
  std::size_t count(int detector) const;
};

struct StreamConfig {
  EmitterModel emitter;
  ExcitationConfig excitation;
  BackgroundModel background;
  std::array<DetectorModel, 2> detectors{};
  double splitter_ratio = 0.5;  ///< probability a photon goes to detector 0
  double duration_ps = 0.0;
  std::uint64_t seed = 1;

  void validate() const;
};

/// Draws one emission delay: branch fast with probability a, then exponential.
double sample_emission_delay(const EmitterModel& model, std::mt19937_64& rng);

/// Pulsed mode draws every block of pulses from its own generator seeded
/// from (seed, block), so the stream does not depend on the thread count.
/// CW mode runs as one sequential process.
TimestampStream simulate_stream(const StreamConfig& config);

/// Pulses per independent random block in pulsed mode.
inline constexpr long kPulsesPerBlock = 1L << 16;

/// Cross-detector delays t(det 1) - t(det 0). Bin k covers
/// [-max_delay + k w, -max_delay + (k + 1) w). With a positive rep period the
/// bins are also grouped into per-pulse bars: bin k belongs to window
/// n = round(center_k / T), and only windows fully inside the range are kept.
struct CoincidenceHistogram {
  double bin_width_ps = 0.0;
  double max_delay_ps = 0.0;
  std::vector<std::uint64_t> bins;
  double rep_period_ps = 0.0;
  int first_pulse = 0;  ///< window index of pulse_bars[0]
  std::vector<std::uint64_t> pulse_bars;

  double bin_center(std::size_t k) const { return -max_delay_ps + (static_cast<double>(k) + 0.5) * bin_width_ps; }
  int pulse_of_bin(std::size_t k) const;
  /// Recomputes pulse_bars from bins for the given period.
  void group_pulses(double rep_period_ps);
};

/// Sort-merge window count, parallel over detector-0 events with exact
/// integer merging. Throws EmptyStream when either detector has no events and
/// InvalidArgument unless 2 max_delay is a whole number of bins.
CoincidenceHistogram hbt_histogram(const TimestampStream& stream, double bin_width_ps, double max_delay_ps,
                                   double rep_period_ps = 0.0);

namespace reference {
/// Serial version of the same sweep, kept as the baseline for tests and benchmarks.
CoincidenceHistogram hbt_histogram(const TimestampStream& stream, double bin_width_ps, double max_delay_ps,
                                   double rep_period_ps = 0.0);
}  // namespace reference

struct NormalizedBars {
  std::vector<int> pulse;
  std::vector<double> raw;
  std::vector<double> normalized;
  double reference = 0.0;  ///< mean of the bars at +-1..+-5 pulses
  double g2_zero = 0.0;
};

/// Divides every bar by the mean of the ten bars nearest zero delay (five
/// each side). Needs at least 11 full windows each side, otherwise
/// InsufficientWindow; DegenerateData when those bars are all empty.
NormalizedBars pulse_normalize(const CoincidenceHistogram& hist, double rep_period_ps);

/// Re-excitation probability q that gives the emitter a residual
/// normalized zero-delay coincidence g2_res = 2 q / (p (1 + q)^2) at
/// excitation probability p.
double reexcitation_for_residual_g2(double g2_residual, double excitation_probability);

struct DecayConfig {
  double irf_fwhm_ps = 50.0;
  double bin_width_ps = 4.0;
  double t_min_ps = -500.0;
  double t_max_ps = 12000.0;
  long photons = 1000000;
  double background_per_bin = 0.0;  ///< mean flat background counts per bin
  std::uint64_t seed = 1;
};

/// Start-stop histogram of photon arrival relative to the laser pulse.
struct DecayHistogram {
  std::vector<double> time_ps;  ///< bin centers
  std::vector<double> counts;
  double bin_width_ps = 0.0;
};

DecayHistogram simulate_decay_histogram(const EmitterModel& emitter, const DecayConfig& config);

struct SaturationSeriesConfig {
  double saturated_rate_cps = 1.47e4;  ///< detected rate at full excitation
  double background_cps = 300.0;       ///< I0
  double integration_s = 1.0;
  bool shot_noise = true;
  std::uint64_t seed = 1;
};

struct SaturationPoint {
  double power_uw = 0.0;
  double intensity_cps = 0.0;
};

/// Detected rate I(P) = I_sat (1 - exp(-(P / P0)^alpha)) + I0 for a
/// single-photon emitter, with Poisson counting noise when enabled. A
/// non-single-photon emitter has no saturation: I = I_sat (P / P0)^alpha + I0.
std::vector<SaturationPoint> simulate_saturation_series(const EmitterModel& emitter,
                                                        const ExcitationConfig& excitation,
                                                        const std::vector<double>& powers_uw,
                                                        const SaturationSeriesConfig& config);

/// Sets the excitation power for per-pulse probability p, the re-excitation
/// probability for the residual g2 and the background rate for signal
/// fraction r, keeping every other field.
void calibrate_hbt(StreamConfig& config, double signal_fraction, double residual_g2, double excitation_probability);

namespace presets {
EmitterModel cavity_emitter();
EmitterModel bulk_emitter();
/// Pulsed HBT run at 76 MHz: excitation probability p per pulse, background
/// sized for signal fraction r, re-excitation tuned for the residual g2.
StreamConfig hbt_run(double signal_fraction, double residual_g2, long pulses, std::uint64_t seed,
                     double excitation_probability = 0.05);
ExcitationConfig saturation_excitation();
std::vector<double> saturation_powers_uw();
}  // namespace presets

}  // namespace bullseye::photon
