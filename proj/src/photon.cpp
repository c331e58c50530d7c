#include "bullseye/photon.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>

namespace bullseye::photon {

namespace {

constexpr double kFwhmToSigma = 0.42466090014400953;  // 1 / (2 sqrt(2 ln 2))
constexpr double kPsPerSecond = 1e12;

std::size_t uz(long v) { return static_cast<std::size_t>(v); }

std::mt19937_64 block_rng(std::uint64_t seed, std::uint64_t block, std::uint32_t tag) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(block), static_cast<std::uint32_t>(block >> 32), tag};
  return std::mt19937_64(seq);
}

// Routes one photon through the splitter and detector front end; appends
// nothing when it is lost to inefficiency.
void detect(const StreamConfig& cfg, double t, Origin origin, std::mt19937_64& rng, std::vector<Event>& out) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const int d = u(rng) < cfg.splitter_ratio ? 0 : 1;
  const auto& det = cfg.detectors[static_cast<std::size_t>(d)];
  if (u(rng) >= det.efficiency) return;
  if (origin == Origin::Signal && det.irf_fwhm_ps > 0.0) {
    std::normal_distribution<double> jitter(0.0, det.irf_fwhm_ps * kFwhmToSigma);
    t += jitter(rng);
  }
  out.push_back({d, t, origin});
}

// Homogeneous Poisson arrivals over [t0, t1).
template <typename Fn>
void poisson_arrivals(double rate_cps, double t0, double t1, std::mt19937_64& rng, Fn&& emit) {
  if (!(rate_cps > 0.0) || !(t1 > t0)) return;
  std::poisson_distribution<long> count(rate_cps * (t1 - t0) / kPsPerSecond);
  std::uniform_real_distribution<double> at(t0, t1);
  const long n = count(rng);
  for (long k = 0; k < n; ++k) emit(at(rng));
}

void emit_photons(const StreamConfig& cfg, double t_excite, std::mt19937_64& rng, std::vector<Event>& out) {
  const double t1 = t_excite + sample_emission_delay(cfg.emitter, rng);
  detect(cfg, t1, Origin::Signal, rng, out);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  if (cfg.emitter.reexcitation_probability > 0.0 && u(rng) < cfg.emitter.reexcitation_probability) {
    detect(cfg, t1 + sample_emission_delay(cfg.emitter, rng), Origin::Signal, rng, out);
  }
}

// Sorts, clips to the run and applies each detector's dead time.
TimestampStream finish(const StreamConfig& cfg, std::vector<Event> raw) {
  TimestampStream s;
  s.duration_ps = cfg.duration_ps;
  s.seed = cfg.seed;
  std::sort(raw.begin(), raw.end(), [](const Event& a, const Event& b) {
    if (a.time_ps != b.time_ps) return a.time_ps < b.time_ps;
    if (a.detector != b.detector) return a.detector < b.detector;
    return a.origin < b.origin;
  });
  std::array<double, 2> last{-1.0, -1.0};
  std::array<bool, 2> any{false, false};
  s.events.reserve(raw.size());
  for (const auto& e : raw) {
    if (e.time_ps < 0.0 || e.time_ps > cfg.duration_ps) continue;
    const auto d = static_cast<std::size_t>(e.detector);
    if (any[d] && (e.time_ps <= last[d] || e.time_ps - last[d] < cfg.detectors[d].dead_time_ps)) continue;
    any[d] = true;
    last[d] = e.time_ps;
    s.events.push_back(e);
  }
  return s;
}

}  // namespace

void EmitterModel::validate() const {
  if (!(tau_fast_ps > 0.0) || !(tau_slow_ps >= tau_fast_ps)) {
    throw Error(ErrorKind::ConfigError, "emitter lifetimes must satisfy 0 < tau_fast <= tau_slow");
  }
  if (!(fast_fraction >= 0.0 && fast_fraction <= 1.0)) {
    throw Error(ErrorKind::ConfigError, "fast_fraction must be in [0, 1]");
  }
  if (!(reexcitation_probability >= 0.0 && reexcitation_probability <= 1.0)) {
    throw Error(ErrorKind::ConfigError, "reexcitation_probability must be in [0, 1]");
  }
}

double EmitterModel::delay_cdf(double t) const {
  if (t <= 0.0) return 0.0;
  return 1.0 - fast_fraction * std::exp(-t / tau_fast_ps) - (1.0 - fast_fraction) * std::exp(-t / tau_slow_ps);
}

void ExcitationConfig::validate() const {
  if (mode == ExcitationMode::Pulsed && !(rep_rate_mhz > 0.0)) {
    throw Error(ErrorKind::ConfigError, "rep_rate_mhz must be positive");
  }
  if (!(pulse_duration_ps >= 0.0)) throw Error(ErrorKind::ConfigError, "pulse_duration_ps must be >= 0");
  if (!(power_uw >= 0.0) || !(threshold_power_uw > 0.0) || !(exponent > 0.0)) {
    throw Error(ErrorKind::ConfigError, "need power >= 0, threshold_power > 0 and exponent > 0");
  }
  if (mode == ExcitationMode::Cw && !(cw_rate_per_ps > 0.0)) {
    throw Error(ErrorKind::ConfigError, "cw_rate_per_ps must be positive");
  }
}

double ExcitationConfig::excitation_probability() const { return excitation_probability(power_uw); }

double ExcitationConfig::excitation_probability(double p) const {
  return -std::expm1(-std::pow(p / threshold_power_uw, exponent));
}

std::vector<double> TimestampStream::times(int detector) const {
  std::vector<double> t;
  for (const auto& e : events) {
    if (e.detector == detector) t.push_back(e.time_ps);
  }
  return t;
}

std::size_t TimestampStream::count(int detector) const {
  return static_cast<std::size_t>(
      std::count_if(events.begin(), events.end(), [&](const Event& e) { return e.detector == detector; }));
}

void StreamConfig::validate() const {
  emitter.validate();
  excitation.validate();
  if (!(background.rate_cps >= 0.0)) throw Error(ErrorKind::ConfigError, "background rate must be >= 0");
  for (const auto& d : detectors) {
    if (!(d.irf_fwhm_ps >= 0.0) || !(d.dead_time_ps >= 0.0) || !(d.dark_rate_cps >= 0.0)) {
      throw Error(ErrorKind::ConfigError, "detector parameters must be non-negative");
    }
    if (!(d.efficiency >= 0.0 && d.efficiency <= 1.0)) {
      throw Error(ErrorKind::ConfigError, "detector efficiency must be in [0, 1]");
    }
  }
  if (!(splitter_ratio >= 0.0 && splitter_ratio <= 1.0)) {
    throw Error(ErrorKind::ConfigError, "splitter_ratio must be in [0, 1]");
  }
  if (!(duration_ps > 0.0)) throw Error(ErrorKind::ConfigError, "duration must be positive");
  if (excitation.mode == ExcitationMode::Pulsed && duration_ps < 100.0 * excitation.period_ps()) {
    throw Error(ErrorKind::ConfigError, "pulsed runs need at least 100 pulse periods");
  }
  const bool light = excitation.excitation_probability() > 0.0 || background.rate_cps > 0.0;
  for (const auto& d : detectors) {
    if (light && d.efficiency == 0.0 && d.dark_rate_cps == 0.0) {
      throw Error(ErrorKind::ConfigError, "a detector with zero efficiency would record nothing");
    }
  }
}

double sample_emission_delay(const EmitterModel& m, std::mt19937_64& rng) {
  std::uniform_real_distribution<double> u(0.0, 1.0);
  const double tau = u(rng) < m.fast_fraction ? m.tau_fast_ps : m.tau_slow_ps;
  std::exponential_distribution<double> e(1.0 / tau);
  return e(rng);
}

TimestampStream simulate_stream(const StreamConfig& cfg) {
  cfg.validate();
  const double dur = cfg.duration_ps;
  std::vector<Event> raw;

  if (cfg.excitation.mode == ExcitationMode::Pulsed) {
    const double period = cfg.excitation.period_ps();
    const double p_exc = cfg.excitation.excitation_probability();
    const double pulse_sigma = cfg.excitation.pulse_duration_ps * kFwhmToSigma;
    const long pulses = static_cast<long>(std::ceil(dur / period));
    const long blocks = (pulses + kPulsesPerBlock - 1) / kPulsesPerBlock;
    std::vector<std::vector<Event>> per_block(uz(blocks));
#pragma omp parallel for schedule(dynamic)
    for (long b = 0; b < blocks; ++b) {
      auto rng = block_rng(cfg.seed, static_cast<std::uint64_t>(b), 0u);
      auto& out = per_block[uz(b)];
      std::uniform_real_distribution<double> u(0.0, 1.0);
      std::normal_distribution<double> pulse(0.0, 1.0);
      const long k0 = b * kPulsesPerBlock, k1 = std::min(pulses, k0 + kPulsesPerBlock);
      // Classical light: Poisson photon number with the same P(n >= 1).
      std::poisson_distribution<int> classical(-std::log1p(-std::min(p_exc, 1.0 - 1e-16)));
      for (long k = k0; k < k1; ++k) {
        const int n = cfg.emitter.single_photon ? (u(rng) < p_exc ? 1 : 0) : classical(rng);
        if (n == 0) continue;
        const double t = static_cast<double>(k) * period + (pulse_sigma > 0.0 ? pulse_sigma * pulse(rng) : 0.0);
        if (cfg.emitter.single_photon) {
          emit_photons(cfg, t, rng, out);
        } else {
          for (int q = 0; q < n; ++q) {
            detect(cfg, t + sample_emission_delay(cfg.emitter, rng), Origin::Signal, rng, out);
          }
        }
      }
      const double t0 = static_cast<double>(k0) * period, t1 = std::min(dur, static_cast<double>(k1) * period);
      poisson_arrivals(cfg.background.rate_cps, t0, t1, rng,
                       [&](double t) { detect(cfg, t, Origin::Background, rng, out); });
      for (int d = 0; d < 2; ++d) {
        poisson_arrivals(cfg.detectors[static_cast<std::size_t>(d)].dark_rate_cps, t0, t1, rng,
                         [&](double t) { out.push_back({d, t, Origin::Dark}); });
      }
    }
    std::size_t total = 0;
    for (const auto& v : per_block) total += v.size();
    raw.reserve(total);
    for (auto& v : per_block) raw.insert(raw.end(), v.begin(), v.end());
  } else {
    auto rng = block_rng(cfg.seed, 0, 1u);
    std::exponential_distribution<double> next(cfg.excitation.cw_rate_per_ps);
    double t = next(rng);
    while (t < dur) {
      const double t_emit = t + sample_emission_delay(cfg.emitter, rng);
      detect(cfg, t_emit, Origin::Signal, rng, raw);
      // A single emitter cannot be re-excited before it has emitted.
      t = (cfg.emitter.single_photon ? t_emit : t) + next(rng);
    }
    poisson_arrivals(cfg.background.rate_cps, 0.0, dur, rng,
                     [&](double x) { detect(cfg, x, Origin::Background, rng, raw); });
    for (int d = 0; d < 2; ++d) {
      poisson_arrivals(cfg.detectors[static_cast<std::size_t>(d)].dark_rate_cps, 0.0, dur, rng,
                       [&](double x) { raw.push_back({d, x, Origin::Dark}); });
    }
  }
  return finish(cfg, std::move(raw));
}

int CoincidenceHistogram::pulse_of_bin(std::size_t k) const {
  return static_cast<int>(std::floor(bin_center(k) / rep_period_ps + 0.5));
}

void CoincidenceHistogram::group_pulses(double period) {
  rep_period_ps = period;
  pulse_bars.clear();
  first_pulse = 0;
  if (!(period > 0.0)) return;
  const int lo = static_cast<int>(std::ceil(-max_delay_ps / period + 0.5));
  const int hi = static_cast<int>(std::floor(max_delay_ps / period - 0.5));
  if (hi < lo) return;
  first_pulse = lo;
  pulse_bars.assign(static_cast<std::size_t>(hi - lo + 1), 0);
  for (std::size_t k = 0; k < bins.size(); ++k) {
    const int n = pulse_of_bin(k);
    if (n >= lo && n <= hi) pulse_bars[static_cast<std::size_t>(n - lo)] += bins[k];
  }
}

namespace {

CoincidenceHistogram empty_histogram(const TimestampStream& s, double w, double max_delay) {
  if (!(w > 0.0) || !(max_delay > 0.0)) throw Error(ErrorKind::InvalidArgument, "bin width and range must be positive");
  const double nb = 2.0 * max_delay / w;
  const double nr = std::round(nb);
  if (std::abs(nb - nr) > 1e-9 * nb) {
    throw Error(ErrorKind::InvalidArgument, "2 max_delay must be a whole number of bins");
  }
  bool has0 = false, has1 = false;
  for (const auto& e : s.events) {
    has0 = has0 || e.detector == 0;
    has1 = has1 || e.detector == 1;
  }
  if (!has0 || !has1) throw Error(ErrorKind::EmptyStream, "both detectors need events");
  CoincidenceHistogram h;
  h.bin_width_ps = w;
  h.max_delay_ps = max_delay;
  h.bins.assign(static_cast<std::size_t>(nr), 0);
  return h;
}

// Counts pairs for detector-0 events [i0, i1) into `bins`.
void sweep(const std::vector<double>& a, const std::vector<double>& b, std::size_t i0, std::size_t i1, double w,
           double max_delay, std::vector<std::uint64_t>& bins) {
  const std::size_t nb = bins.size();
  std::size_t lo = static_cast<std::size_t>(std::lower_bound(b.begin(), b.end(), a[i0] - max_delay) - b.begin());
  for (std::size_t i = i0; i < i1; ++i) {
    const double t0 = a[i];
    while (lo < b.size() && b[lo] < t0 - max_delay) ++lo;
    for (std::size_t j = lo; j < b.size(); ++j) {
      const double d = b[j] - t0;
      if (d >= max_delay) break;
      const auto k = static_cast<std::size_t>(std::floor((d + max_delay) / w));
      if (k < nb) ++bins[k];
    }
  }
}

}  // namespace

CoincidenceHistogram hbt_histogram(const TimestampStream& s, double w, double max_delay, double period) {
  auto h = empty_histogram(s, w, max_delay);
  const auto a = s.times(0), b = s.times(1);
  const std::size_t nb = h.bins.size();
  const int threads = omp_get_max_threads();
  const std::size_t shards = std::min<std::size_t>(a.size(), static_cast<std::size_t>(threads) * 4);
  std::vector<std::vector<std::uint64_t>> local(shards, std::vector<std::uint64_t>(nb, 0));
#pragma omp parallel for schedule(dynamic)
  for (std::size_t sh = 0; sh < shards; ++sh) {
    const std::size_t i0 = a.size() * sh / shards, i1 = a.size() * (sh + 1) / shards;
    if (i1 > i0) sweep(a, b, i0, i1, w, max_delay, local[sh]);
  }
  for (const auto& l : local) {
    for (std::size_t k = 0; k < nb; ++k) h.bins[k] += l[k];
  }
  h.group_pulses(period);
  return h;
}

namespace reference {
CoincidenceHistogram hbt_histogram(const TimestampStream& s, double w, double max_delay, double period) {
  auto h = empty_histogram(s, w, max_delay);
  const auto a = s.times(0), b = s.times(1);
  sweep(a, b, 0, a.size(), w, max_delay, h.bins);
  h.group_pulses(period);
  return h;
}
}  // namespace reference

NormalizedBars pulse_normalize(const CoincidenceHistogram& hist, double period) {
  CoincidenceHistogram h = hist;
  if (h.rep_period_ps != period || h.pulse_bars.empty()) h.group_pulses(period);
  const int lo = h.first_pulse, hi = h.first_pulse + static_cast<int>(h.pulse_bars.size()) - 1;
  if (h.pulse_bars.empty() || lo > -11 || hi < 11) {
    throw Error(ErrorKind::InsufficientWindow, "need at least 11 full pulse windows on each side of zero delay");
  }
  NormalizedBars nb;
  auto bar = [&](int n) { return static_cast<double>(h.pulse_bars[static_cast<std::size_t>(n - lo)]); };
  double sum = 0.0;
  for (int n = 1; n <= 5; ++n) sum += bar(n) + bar(-n);
  nb.reference = sum / 10.0;
  if (!(nb.reference > 0.0)) throw Error(ErrorKind::DegenerateData, "side bars are empty");
  for (int n = lo; n <= hi; ++n) {
    nb.pulse.push_back(n);
    nb.raw.push_back(bar(n));
    nb.normalized.push_back(bar(n) / nb.reference);
  }
  nb.g2_zero = bar(0) / nb.reference;
  return nb;
}

double reexcitation_for_residual_g2(double g, double p) {
  if (!(g >= 0.0) || !(p > 0.0 && p <= 1.0)) throw Error(ErrorKind::InvalidArgument, "need g2 >= 0 and 0 < p <= 1");
  if (g == 0.0) return 0.0;
  // g p q^2 + (2 g p - 2) q + g p = 0, smaller root.
  const double a = g * p, b = 2.0 * g * p - 2.0;
  const double disc = b * b - 4.0 * a * a;
  if (disc < 0.0) throw Error(ErrorKind::InvalidArgument, "residual g2 not reachable at this excitation probability");
  const double q = (-b - std::sqrt(disc)) / (2.0 * a);
  if (q > 1.0) throw Error(ErrorKind::InvalidArgument, "residual g2 needs re-excitation probability above 1");
  return q;
}

DecayHistogram simulate_decay_histogram(const EmitterModel& emitter, const DecayConfig& cfg) {
  emitter.validate();
  if (!(cfg.bin_width_ps > 0.0) || !(cfg.t_max_ps > cfg.t_min_ps) || cfg.photons < 0 || !(cfg.irf_fwhm_ps >= 0.0) ||
      !(cfg.background_per_bin >= 0.0)) {
    throw Error(ErrorKind::ConfigError, "invalid decay histogram configuration");
  }
  const auto nb = static_cast<std::size_t>(std::floor((cfg.t_max_ps - cfg.t_min_ps) / cfg.bin_width_ps));
  DecayHistogram h;
  h.bin_width_ps = cfg.bin_width_ps;
  h.counts.assign(nb, 0.0);
  h.time_ps.resize(nb);
  for (std::size_t k = 0; k < nb; ++k) h.time_ps[k] = cfg.t_min_ps + (static_cast<double>(k) + 0.5) * cfg.bin_width_ps;
  auto rng = block_rng(cfg.seed, 0, 2u);
  std::normal_distribution<double> jitter(0.0, cfg.irf_fwhm_ps * kFwhmToSigma);
  for (long n = 0; n < cfg.photons; ++n) {
    double t = sample_emission_delay(emitter, rng);
    if (cfg.irf_fwhm_ps > 0.0) t += jitter(rng);
    const double x = (t - cfg.t_min_ps) / cfg.bin_width_ps;
    if (x >= 0.0 && x < static_cast<double>(nb)) h.counts[static_cast<std::size_t>(x)] += 1.0;
  }
  if (cfg.background_per_bin > 0.0) {
    std::poisson_distribution<long> bg(cfg.background_per_bin);
    for (auto& c : h.counts) c += static_cast<double>(bg(rng));
  }
  return h;
}

std::vector<SaturationPoint> simulate_saturation_series(const EmitterModel& emitter, const ExcitationConfig& exc,
                                                        const std::vector<double>& powers,
                                                        const SaturationSeriesConfig& cfg) {
  emitter.validate();
  exc.validate();
  if (!(cfg.saturated_rate_cps > 0.0) || !(cfg.background_cps >= 0.0) || !(cfg.integration_s > 0.0)) {
    throw Error(ErrorKind::ConfigError, "invalid saturation series configuration");
  }
  auto rng = block_rng(cfg.seed, 0, 3u);
  std::vector<SaturationPoint> out;
  for (double p : powers) {
    if (!(p > 0.0)) throw Error(ErrorKind::InvalidArgument, "powers must be positive");
    const double drive = emitter.single_photon ? exc.excitation_probability(p)
                                               : std::pow(p / exc.threshold_power_uw, exc.exponent);
    const double rate = cfg.saturated_rate_cps * drive + cfg.background_cps;
    double value = rate;
    if (cfg.shot_noise) {
      std::poisson_distribution<long> counts(rate * cfg.integration_s);
      value = static_cast<double>(counts(rng)) / cfg.integration_s;
    }
    out.push_back({p, value});
  }
  return out;
}

void calibrate_hbt(StreamConfig& c, double r, double g2_res, double p_exc) {
  if (!(r > 0.0 && r <= 1.0)) throw Error(ErrorKind::InvalidR, "signal fraction must be in (0, 1]");
  if (!(p_exc > 0.0 && p_exc < 1.0)) throw Error(ErrorKind::ConfigError, "excitation probability must be in (0, 1)");
  c.excitation.power_uw = std::pow(-std::log1p(-p_exc), 1.0 / c.excitation.exponent) * c.excitation.threshold_power_uw;
  c.emitter.reexcitation_probability = reexcitation_for_residual_g2(g2_res, p_exc);
  const double signal_cps = p_exc * (1.0 + c.emitter.reexcitation_probability) * 1e12 / c.excitation.period_ps();
  c.background.rate_cps = signal_cps * (1.0 - r) / r;
}

namespace presets {

EmitterModel cavity_emitter() { return {141.1, 617.0, 0.8, true, 0.0}; }

EmitterModel bulk_emitter() { return {201.6, 2610.0, 0.8, true, 0.0}; }

StreamConfig hbt_run(double r, double g2_res, long pulses, std::uint64_t seed, double p_exc) {
  StreamConfig c;
  c.emitter = cavity_emitter();
  calibrate_hbt(c, r, g2_res, p_exc);
  c.duration_ps = static_cast<double>(pulses) * c.excitation.period_ps();
  c.seed = seed;
  return c;
}

ExcitationConfig saturation_excitation() {
  ExcitationConfig e;
  e.threshold_power_uw = 5.0;
  e.exponent = 1.0;
  return e;
}

std::vector<double> saturation_powers_uw() {
  return {0.25, 0.5, 1.0, 1.5, 2.0, 3.0, 4.0, 5.0, 7.0, 10.0, 14.0, 20.0, 28.0, 40.0};
}

}  // namespace presets

}  // namespace bullseye::photon
