#include <doctest.h>
#include <omp.h>

#include <algorithm>
#include <cmath>
#include <random>

#include "bullseye/analysis.hpp"
#include "bullseye/photon.hpp"
#include "oracles.hpp"
#include "support.hpp"

using namespace bullseye;
using namespace bullseye::photon;

namespace {

std::vector<double> draws(const EmitterModel& m, std::size_t n, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::vector<double> x(n);
  for (auto& v : x) v = sample_emission_delay(m, rng);
  return x;
}

double mean_of(const std::vector<double>& x) {
  double s = 0.0;
  for (double v : x) s += v;
  return s / static_cast<double>(x.size());
}

// Histogram with bars at every pulse window of +-12 periods: four bins each,
// `side` counts per side bar and `centre` in the zero-delay bar.
CoincidenceHistogram synthetic_bars(std::uint64_t side, std::uint64_t centre, double half_windows = 12.5) {
  const double period = ExcitationConfig{}.period_ps();
  CoincidenceHistogram h;
  h.bin_width_ps = period / 4.0;
  h.max_delay_ps = half_windows * period;
  h.bins.assign(static_cast<std::size_t>(std::llround(8.0 * half_windows)), side / 4);
  // Spread the centre bar over its four bins.
  const std::size_t mid = h.bins.size() / 2;
  for (std::size_t k = mid - 2; k < mid + 2; ++k) h.bins[k] = centre / 4 + (k - (mid - 2) < centre % 4 ? 1 : 0);
  h.group_pulses(period);
  return h;
}

}  // namespace

TEST_CASE("emission delays follow the biexponential mixture") {
  const auto m = presets::cavity_emitter();
  auto x = draws(m, 1000000, 3);
  const double n = static_cast<double>(x.size());

  // Mixture mean within three standard errors; second moment 2 (a t1^2 + (1 - a) t2^2).
  const double mean = m.mean_delay_ps();
  CHECK(mean == doctest::Approx(236.3).epsilon(1e-4));
  const double second = 2.0 * (m.fast_fraction * m.tau_fast_ps * m.tau_fast_ps +
                               (1.0 - m.fast_fraction) * m.tau_slow_ps * m.tau_slow_ps);
  const double se = std::sqrt((second - mean * mean) / n);
  CHECK(std::abs(mean_of(x) - mean) < 3.0 * se);

  std::sort(x.begin(), x.end());
  double ks = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double f = m.delay_cdf(x[i]);
    ks = std::max({ks, std::abs(f - static_cast<double>(i) / n), std::abs(f - static_cast<double>(i + 1) / n)});
  }
  CHECK(ks < 0.002);
}

TEST_CASE("single-exponential limit has mean tau") {
  EmitterModel m;
  m.fast_fraction = 1.0;
  m.tau_fast_ps = 100.0;
  m.tau_slow_ps = 100.0;
  const auto x = draws(m, 1000000, 5);
  CHECK(std::abs(mean_of(x) - 100.0) < 3.0 * 100.0 / 1000.0);
}

TEST_CASE("no light, no events") {
  StreamConfig c;
  c.excitation.power_uw = 0.0;
  c.duration_ps = 1000.0 * c.excitation.period_ps();
  CHECK(simulate_stream(c).events.empty());
}

TEST_CASE("stream invariants and thread-count independence") {
  auto c = presets::hbt_run(0.86, 0.12, 400000, 9);
  omp_set_num_threads(1);
  const auto one = simulate_stream(c);
  omp_set_num_threads(4);
  const auto four = simulate_stream(c);
  omp_set_num_threads(omp_get_num_procs());
  REQUIRE(one.events.size() == four.events.size());
  bool same = true;
  for (std::size_t k = 0; k < one.events.size(); ++k) {
    same = same && one.events[k].detector == four.events[k].detector && one.events[k].time_ps == four.events[k].time_ps &&
           one.events[k].origin == four.events[k].origin;
  }
  CHECK(same);

  for (int d = 0; d < 2; ++d) {
    const auto t = one.times(d);
    REQUIRE(!t.empty());
    CHECK(t.front() >= 0.0);
    CHECK(t.back() <= one.duration_ps);
    bool increasing = true;
    for (std::size_t k = 1; k < t.size(); ++k) increasing = increasing && t[k] > t[k - 1];
    CHECK(increasing);
  }

  auto other = c;
  other.seed = 10;
  CHECK(simulate_stream(other).events.size() != one.events.size());
}

TEST_CASE("calibrated signal fraction is reproduced by the event origins") {
  const auto s = simulate_stream(presets::hbt_run(0.86, 0.12, 10000000, 21));
  double signal = 0.0;
  for (const auto& e : s.events) signal += e.origin == Origin::Signal ? 1.0 : 0.0;
  const double r = signal / static_cast<double>(s.events.size());
  CHECK(r == doctest::Approx(0.86).epsilon(0.01));
}

TEST_CASE("toy stream histogram by hand") {
  TimestampStream s;
  s.events = {{0, 0.0}, {1, 50.0}, {1, 130.0}};
  s.duration_ps = 200.0;
  const auto h = hbt_histogram(s, 100.0, 200.0);
  CHECK(h.bins == std::vector<std::uint64_t>{0, 0, 1, 1});
}

TEST_CASE("histogram equals all-pairs counting on random streams") {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 5; ++trial) {
    CAPTURE(trial);
    TimestampStream s;
    s.duration_ps = 5e6;
    std::uniform_real_distribution<double> t(0.0, s.duration_ps);
    std::bernoulli_distribution det(trial == 4 ? 0.9 : 0.5);
    for (int k = 0; k < 10000; ++k) s.events.push_back({det(rng) ? 1 : 0, t(rng)});
    std::sort(s.events.begin(), s.events.end(), [](const Event& a, const Event& b) { return a.time_ps < b.time_ps; });
    const double w = 250.0, max_delay = 40000.0;
    const auto oracle = oracles::all_pairs_histogram(s, w, max_delay);
    const auto fast = hbt_histogram(s, w, max_delay);
    const auto slow = reference::hbt_histogram(s, w, max_delay);
    CHECK(fast.bins == oracle);
    CHECK(slow.bins == oracle);
  }
}

TEST_CASE("histogram errors and bar bookkeeping") {
  TimestampStream s;
  s.events = {{0, 10.0}, {0, 20.0}};
  s.duration_ps = 100.0;
  CHECK_ERROR_KIND(hbt_histogram(s, 10.0, 50.0), ErrorKind::EmptyStream);
  s.events.push_back({1, 30.0});
  CHECK_ERROR_KIND(hbt_histogram(s, 30.0, 50.0), ErrorKind::InvalidArgument);

  const auto stream = simulate_stream(presets::hbt_run(0.86, 0.12, 200000, 4));
  const double period = ExcitationConfig{}.period_ps();
  const auto h = hbt_histogram(stream, 16.0, 250000.0, period);
  // Each bar is the exact sum of its bins.
  for (std::size_t b = 0; b < h.pulse_bars.size(); ++b) {
    std::uint64_t sum = 0;
    for (std::size_t k = 0; k < h.bins.size(); ++k) {
      if (h.pulse_of_bin(k) == h.first_pulse + static_cast<int>(b)) sum += h.bins[k];
    }
    CHECK(sum == h.pulse_bars[b]);
  }
}

TEST_CASE("an ideal single emitter never gives a zero-delay coincidence") {
  StreamConfig c;
  c.emitter = presets::cavity_emitter();
  c.excitation.power_uw = 2.0;
  c.duration_ps = 2e6 * c.excitation.period_ps();
  const auto s = simulate_stream(c);
  const double period = c.excitation.period_ps();
  const auto h = hbt_histogram(s, 16.0, 250000.0, period);
  const auto bars = pulse_normalize(h, period);
  for (std::size_t k = 0; k < bars.pulse.size(); ++k) {
    if (bars.pulse[k] == 0) CHECK(bars.raw[k] == 0.0);
  }
  CHECK(bars.reference > 100.0);
}

TEST_CASE("pulse normalization") {
  const double period = ExcitationConfig{}.period_ps();
  auto bars = pulse_normalize(synthetic_bars(1000, 350), period);
  CHECK(bars.g2_zero == doctest::Approx(0.35).epsilon(1e-12));
  CHECK(bars.reference == doctest::Approx(1000.0));

  bars = pulse_normalize(synthetic_bars(400, 400), period);
  for (double v : bars.normalized) CHECK(v == doctest::Approx(1.0).epsilon(1e-12));

  CHECK_ERROR_KIND(pulse_normalize(synthetic_bars(400, 400, 10.5), period), ErrorKind::InsufficientWindow);
  CHECK_ERROR_KIND(pulse_normalize(synthetic_bars(0, 0), period), ErrorKind::DegenerateData);
}

TEST_CASE("re-excitation inverts the residual g2 relation") {
  for (double p : {0.01, 0.05, 0.2}) {
    for (double g : {0.0, 0.05, 0.12}) {
      const double q = reexcitation_for_residual_g2(g, p);
      CHECK(q >= 0.0);
      CHECK(2.0 * q / (p * (1.0 + q) * (1.0 + q)) == doctest::Approx(g).epsilon(1e-10));
    }
  }
}

TEST_CASE("background-only light is Poissonian") {
  StreamConfig c;
  c.excitation.power_uw = 0.0;
  c.duration_ps = 5e6 * c.excitation.period_ps();
  // Each detector runs into its dead time at this rate, but the two
  // thinned streams stay independent, so the cross-correlation stays flat.
  c.background.rate_cps = 4e7;
  const auto s = simulate_stream(c);
  CHECK(s.events.size() > 1000000);
  CHECK(s.events.size() < 1100000);
  const double period = c.excitation.period_ps();
  const auto bars = pulse_normalize(hbt_histogram(s, period / 16.0, 12.5 * period, period), period);
  REQUIRE(bars.normalized.size() == 25);
  for (double v : bars.normalized) CHECK(v == doctest::Approx(1.0).epsilon(0.02));
}

TEST_CASE("end-to-end raw g2 over 20 seeds") {
  double sum = 0.0, worst = 0.0;
  for (std::uint64_t seed = 1; seed <= 20; ++seed) {
    const auto c = presets::hbt_run(0.86, 0.12, 10000000, seed);
    const double period = c.excitation.period_ps();
    const auto bars = pulse_normalize(hbt_histogram(simulate_stream(c), 16.0, 250000.0, period), period);
    sum += bars.g2_zero;
    worst = std::max(worst, std::abs(bars.g2_zero - 0.35));
  }
  CHECK(worst < 0.03);
  CHECK(sum / 20.0 == doctest::Approx(0.35).epsilon(0.03));

  // Background removed: only the residual emitter term is left.
  auto clean = presets::hbt_run(1.0, 0.0, 4000000, 99);
  const double period = clean.excitation.period_ps();
  const auto bars = pulse_normalize(hbt_histogram(simulate_stream(clean), 16.0, 250000.0, period), period);
  CHECK(bars.g2_zero < 0.01);
}

TEST_CASE("saturation series") {
  const auto exc = presets::saturation_excitation();
  SaturationSeriesConfig quiet;
  quiet.shot_noise = false;
  const auto low = simulate_saturation_series(presets::cavity_emitter(), exc, {1e-9}, quiet);
  CHECK(low[0].intensity_cps == doctest::Approx(quiet.background_cps).epsilon(1e-6));

  quiet.background_cps = 0.0;
  const auto at_p0 = simulate_saturation_series(presets::cavity_emitter(), exc, {exc.threshold_power_uw}, quiet);
  CHECK(at_p0[0].intensity_cps == doctest::Approx(quiet.saturated_rate_cps * (1.0 - std::exp(-1.0))).epsilon(1e-12));

  const SaturationSeriesConfig noisy;
  const auto powers = presets::saturation_powers_uw();
  const auto series = simulate_saturation_series(presets::cavity_emitter(), exc, powers, noisy);
  std::vector<double> p, i;
  for (const auto& pt : series) {
    p.push_back(pt.power_uw);
    i.push_back(pt.intensity_cps);
  }
  const auto fit = analysis::fit_saturation(p, i);
  CHECK(fit.i_sat == doctest::Approx(1.47e4).epsilon(0.05));
}
