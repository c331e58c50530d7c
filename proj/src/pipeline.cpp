#include "bullseye/pipeline.hpp"

#include <omp.h>

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <limits>
#include <map>
#include <numeric>
#include <sstream>

#include "bullseye/constants.hpp"
#include "bullseye/error.hpp"
#include "bullseye/io.hpp"
#include "bullseye/svg.hpp"

namespace bullseye::pipeline {

namespace {

constexpr double kFwhmToSigma = 0.42466090014400953;  // 1 / (2 sqrt(2 ln 2))
constexpr double kDeg = 180.0 / constants::pi;

[[noreturn]] void usage(const std::string& what) { throw Error(ErrorKind::UsageError, what); }

json number_or_null(double x) { return std::isfinite(x) ? json(x) : json(nullptr); }

// ---------------------------------------------------------------- plans

struct Plan {
  std::string command;
  config::LabConfig cfg;
  json cfg_json;
  json arguments = json::object();
  std::vector<io::FileRecord> inputs;
  fs::path out_dir;
  std::string manifest_name = "manifest.json";
};

void add_input(Plan& p, const fs::path& path) { p.inputs.push_back(io::describe_input(path)); }

Plan plan_from_request(const Request& r) {
  Plan p;
  p.command = r.command;
  p.cfg = r.config ? config::load(*r.config) : config::LabConfig{};
  if (r.seed) p.cfg.seed = *r.seed;
  p.out_dir = r.out;
  if (r.command == "design") {
    if (r.sweep) {
      add_input(p, *r.sweep);
      json doc;
      try {
        doc = json::parse(io::read_file(*r.sweep));
      } catch (const json::parse_error& e) {
        throw Error(ErrorKind::ConfigInvalid, r.sweep->string() + ": " + e.what());
      }
      p.cfg.sweep = config::sweep_from_json(doc);
    }
  } else if (r.command == "analyze") {
    static const std::vector<std::string> tasks{"lorentzian", "g2", "lifetime", "saturation", "enhancement"};
    if (std::find(tasks.begin(), tasks.end(), r.task) == tasks.end()) usage("unknown analyze task '" + r.task + "'");
    if (r.out.filename().empty()) usage("--out must name the report file");
    p.out_dir = r.out.parent_path().empty() ? fs::path(".") : r.out.parent_path();
    p.arguments["task"] = r.task;
    p.arguments["report"] = r.out.filename().string();
    p.manifest_name = r.out.stem().string() + ".manifest.json";
    auto need = [&](const std::optional<fs::path>& f, const char* flag) {
      if (!f) usage(std::string("task ") + r.task + " needs " + flag);
      add_input(p, *f);
      return f->string();
    };
    if (r.task == "lorentzian") p.arguments["spectrum"] = need(r.spectrum, "--spectrum");
    if (r.task == "g2") p.arguments["hist"] = need(r.hist, "--hist");
    if (r.task == "lifetime") p.arguments["decay"] = need(r.decay, "--decay");
    if (r.task == "saturation") p.arguments["saturation"] = need(r.saturation, "--saturation");
    if (r.task == "enhancement") {
      json cav = json::array(), bulk = json::array();
      for (const auto& f : r.cavity_saturation) {
        add_input(p, f);
        cav.push_back(f.string());
      }
      for (const auto& f : r.bulk_saturation) {
        add_input(p, f);
        bulk.push_back(f.string());
      }
      p.arguments["cavity_saturation"] = cav;
      p.arguments["bulk_saturation"] = bulk;
    }
  } else if (r.command == "report") {
    if (!r.input_dir) usage("report needs --in <dir>");
    if (!fs::is_directory(*r.input_dir)) throw Error(ErrorKind::IoFailure, "not a directory: " + r.input_dir->string());
    p.arguments["input_dir"] = r.input_dir->string();
  } else if (r.command == "replay") {
    if (r.scenario != "paper-cavity" && r.scenario != "paper-bulk") {
      usage("unknown scenario '" + r.scenario + "' (paper-cavity, paper-bulk)");
    }
    p.arguments["scenario"] = r.scenario;
  } else if (r.command != "simulate") {
    usage("unknown command '" + r.command + "'");
  }
  p.cfg_json = config::to_json(p.cfg);
  return p;
}

Plan plan_from_manifest(const fs::path& manifest_path, const fs::path& out) {
  json doc;
  try {
    doc = json::parse(io::read_file(manifest_path));
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigInvalid, manifest_path.string() + ": " + e.what());
  }
  const auto m = io::RunManifest::from_json(doc);
  Plan p;
  p.command = m.command;
  p.cfg = config::from_json(m.config);
  p.cfg_json = config::to_json(p.cfg);
  if (io::sha256_hex(io::dump_json(p.cfg_json)) != m.config_digest) {
    throw Error(ErrorKind::ConfigInvalid, "manifest: config digest does not match the embedded config");
  }
  p.arguments = m.arguments;
  p.out_dir = out;
  if (p.command == "analyze") {
    p.manifest_name = fs::path(p.arguments.at("report").get<std::string>()).stem().string() + ".manifest.json";
  }
  for (const auto& in : m.inputs) {
    const auto now = io::describe_input(in.path);
    if (now.sha256 != in.sha256) throw Error(ErrorKind::IoFailure, "input changed since the run: " + in.path);
    p.inputs.push_back(now);
  }
  return p;
}

// ---------------------------------------------------------------- emitters

io::Table table(std::vector<std::string> header, std::vector<std::vector<double>> columns) {
  return io::Table{std::move(header), std::move(columns)};
}

std::vector<double> as_double(const std::vector<std::uint64_t>& v) { return {v.begin(), v.end()}; }

std::vector<double> left_edges(const std::vector<double>& centers, double width) {
  std::vector<double> e(centers.size());
  for (std::size_t k = 0; k < centers.size(); ++k) e[k] = centers[k] - 0.5 * width;
  return e;
}

double uniform_spacing(const std::vector<double>& x, const std::string& what) {
  if (x.size() < 2) throw Error(ErrorKind::InvalidArgument, what + " needs at least two rows");
  const double w = (x.back() - x.front()) / static_cast<double>(x.size() - 1);
  for (std::size_t k = 1; k < x.size(); ++k) {
    if (std::abs(x[k] - x[k - 1] - w) > 1e-6 * std::abs(w)) {
      throw Error(ErrorKind::InvalidArgument, what + " must be uniformly spaced");
    }
  }
  if (!(w > 0.0)) throw Error(ErrorKind::InvalidArgument, what + " must increase");
  return w;
}

std::vector<double> biexp_model(const analysis::BiexpFit& f, const std::vector<double>& centers, double width) {
  const std::vector<double> p{f.t0_ps, f.fast_amplitude, f.tau_fast_ps, f.slow_amplitude, f.tau_slow_ps, f.baseline};
  return analysis::models::biexp_bins(p, left_edges(centers, width), width, f.irf_fwhm_ps * kFwhmToSigma);
}

struct DecayCurve {
  std::string label;
  std::vector<double> counts;
  std::optional<analysis::BiexpFit> fit;
};

void emit_decay(io::OutputDir& dir, const std::string& stem, const std::vector<double>& t,
                const std::vector<DecayCurve>& curves) {
  static const char* colors[] = {"#d62728", "#1f77b4", "#2ca02c", "#9467bd"};
  io::Table tab;
  tab.header.push_back("time_ps");
  tab.columns.push_back(t);
  std::vector<svg::Series> series;
  const double width = t.size() > 1 ? t[1] - t[0] : 1.0;
  for (std::size_t c = 0; c < curves.size(); ++c) {
    const auto& cv = curves[c];
    const std::string suffix = curves.size() > 1 ? "_" + cv.label : "";
    const std::string color = colors[c % 4];
    tab.header.push_back("counts" + suffix);
    tab.columns.push_back(cv.counts);
    series.push_back({cv.label, t, cv.counts, true, color});
    if (cv.fit) {
      auto model = biexp_model(*cv.fit, t, width);
      tab.header.push_back("model" + suffix);
      tab.columns.push_back(model);
      series.push_back({"", t, std::move(model), false, "#000000"});
    }
  }
  dir.write_csv(stem + ".csv", tab);
  dir.write(stem + ".svg", svg::line_chart({"Time-resolved photoluminescence", "time (ps)", "counts per bin", true}, series));
}

void emit_bars(io::OutputDir& dir, const std::string& stem, const photon::NormalizedBars& bars) {
  std::vector<double> pulse(bars.pulse.begin(), bars.pulse.end());
  dir.write_csv(stem + ".csv", table({"pulse", "counts", "normalized"}, {pulse, bars.raw, bars.normalized}));
  dir.write(stem + ".svg", svg::bar_chart({"Pulsed coincidences", "delay (pulse periods)", "normalized coincidences", false},
                                         bars.pulse, bars.normalized));
}

void emit_saturation(io::OutputDir& dir, const std::string& stem, const std::vector<double>& power,
                     const std::vector<double>& rate, const std::optional<analysis::SaturationFit>& fit) {
  io::Table tab = table({"power_uW", "counts_per_s"}, {power, rate});
  std::vector<svg::Series> series{{"data", power, rate, true, "#1f77b4"}};
  if (fit) {
    const std::vector<double> p{fit->i_sat, fit->p0_uw, fit->alpha, fit->i0};
    std::vector<double> model(power.size()), dense_p, dense_y;
    for (std::size_t k = 0; k < power.size(); ++k) model[k] = analysis::models::saturation(p, power[k]);
    tab.header.push_back("model");
    tab.columns.push_back(model);
    series.push_back({"fit", power, model, false, "#000000"});
  }
  dir.write_csv(stem + ".csv", tab);
  dir.write(stem + ".svg", svg::line_chart({"Power dependence", "excitation power (uW)", "count rate (1/s)", false}, series));
}

void emit_spectrum(io::OutputDir& dir, const std::string& stem, const std::vector<double>& wl,
                   const std::vector<double>& y, const std::string& y_name,
                   const std::optional<analysis::LorentzianFit>& fit) {
  io::Table tab = table({"wavelength_nm", y_name}, {wl, y});
  std::vector<svg::Series> series{{"data", wl, y, fit.has_value(), "#1f77b4"}};
  if (fit) {
    const std::vector<double> p{fit->center_nm, fit->fwhm_nm, fit->amplitude, fit->offset};
    const double sign = fit->orientation == analysis::Orientation::Peak ? 1.0 : -1.0;
    std::vector<double> model(wl.size());
    for (std::size_t k = 0; k < wl.size(); ++k) model[k] = analysis::models::lorentzian(p, wl[k], sign);
    tab.header.push_back("model");
    tab.columns.push_back(model);
    series.push_back({"Lorentzian fit", wl, model, false, "#000000"});
  }
  dir.write_csv(stem + ".csv", tab);
  dir.write(stem + ".svg", svg::line_chart({"Spectrum", "wavelength (nm)", y_name, false}, series));
}

void emit_farfield(io::OutputDir& dir, const std::string& stem, const std::vector<double>& theta,
                   const std::vector<double>& intensity, const std::vector<double>& apertures) {
  std::vector<double> cones;
  for (double na : apertures) {
    if (na > 0.0 && na < 1.0) cones.push_back(std::asin(na) * kDeg);
  }
  dir.write_csv(stem + ".csv", table({"angle_deg", "intensity"}, {theta, intensity}));
  dir.write(stem + ".svg", svg::polar_chart("Far-field intensity", theta, intensity, cones));
}

// ---------------------------------------------------------------- commands

json sweep_row_json(const cavity::SweepRow& row) {
  const auto& g = row.setup.geometry;
  json j{{"index", row.index},
         {"disk_diameter_nm", g.disk_diameter_nm},
         {"period_nm", g.period_nm},
         {"ring_width_nm", g.ring_width_nm},
         {"thickness_nm", geom::membrane_thickness(row.setup.stack)}};
  if (row.report) {
    j["report"] = to_json(*row.report);
  } else {
    j["error"] = {{"kind", row.error_kind}, {"message", row.error_message}};
  }
  return j;
}

json run_design(const Plan& p, io::OutputDir& dir) {
  const auto& axes = p.cfg.sweep;
  const bool sweep = !axes.disk_diameter_nm.empty() || !axes.period_nm.empty() || !axes.ring_width_nm.empty() ||
                     !axes.thickness_nm.empty();
  if (!sweep) {
    const auto report = cavity::simulate_cavity(p.cfg.design);
    json doc = to_json(report);
    dir.write_json("report.json", doc);
    const auto& ff = report.far_field;
    emit_farfield(dir, "farfield", ff.theta_deg, ff.intensity, p.cfg.design.options.numerical_apertures);
    const auto spec = cavity::ringdown_spectrum(report.ringdown, report.sample_dt, p.cfg.design_extras.spectrum_min_nm,
                                                p.cfg.design_extras.spectrum_max_nm);
    emit_spectrum(dir, "spectrum", spec.wavelength_nm, spec.power, "power", std::nullopt);
    return doc;
  }
  // Rows are appended as they finish, then rewritten in index order so the
  // final file does not depend on scheduling.
  std::error_code ec;
  fs::remove(dir.path("sweep.jsonl"), ec);
  const auto rows = cavity::sweep_parameters(p.cfg.design, axes, [&](const cavity::SweepRow& row) {
    dir.append_line("sweep.jsonl", sweep_row_json(row).dump());
  });
  std::string lines;
  json all = json::array();
  std::vector<std::vector<double>> cols(11);
  for (const auto& row : rows) {
    const json j = sweep_row_json(row);
    lines += j.dump() + "\n";
    all.push_back(j);
    const auto& g = row.setup.geometry;
    const double nan = std::numeric_limits<double>::quiet_NaN();
    const bool ok = row.report.has_value();
    const auto& r = row.report;
    double collection = nan;
    if (ok && !r->collection.empty()) collection = r->collection.begin()->second;
    const double values[] = {static_cast<double>(row.index),
                             g.disk_diameter_nm,
                             g.period_nm,
                             g.ring_width_nm,
                             geom::membrane_thickness(row.setup.stack),
                             ok ? r->target.wavelength_nm : nan,
                             ok ? r->target.q : nan,
                             ok ? r->mode_volume.volume_cubic_wavelengths : nan,
                             ok ? r->theoretical_purcell : nan,
                             collection,
                             ok ? 1.0 : 0.0};
    for (std::size_t c = 0; c < cols.size(); ++c) cols[c].push_back(values[c]);
  }
  dir.write("sweep.jsonl", lines);
  dir.write_csv("sweep.csv", table({"index", "disk_diameter_nm", "period_nm", "ring_width_nm", "thickness_nm",
                                    "wavelength_nm", "q", "mode_volume_cubic_wavelengths", "theoretical_purcell",
                                    "collection_first_na", "ok"},
                                   cols));
  json doc{{"rows", all}};
  dir.write_json("report.json", doc);
  return doc;
}

json run_simulate(const Plan& p, io::OutputDir& dir) {
  const auto& ph = p.cfg.photon;
  const auto sc = p.cfg.stream();
  const auto stream = photon::simulate_stream(sc);
  {
    std::string csv = "detector_id,time_ps\n";
    csv.reserve(24 * stream.events.size());
    for (const auto& e : stream.events) csv += std::to_string(e.detector) + "," + io::format_number(e.time_ps) + "\n";
    dir.write("stream.csv", csv);
  }
  const double period = sc.excitation.mode == photon::ExcitationMode::Pulsed ? sc.excitation.period_ps() : 0.0;
  json summary{{"seed", p.cfg.seed},
               {"duration_ps", stream.duration_ps},
               {"events_detector_0", stream.count(0)},
               {"events_detector_1", stream.count(1)},
               {"excitation_power_uw", sc.excitation.power_uw},
               {"excitation_probability", sc.excitation.excitation_probability()},
               {"reexcitation_probability", sc.emitter.reexcitation_probability},
               {"background_cps", sc.background.rate_cps}};
  if (stream.count(0) > 0 && stream.count(1) > 0) {
    const auto h = photon::hbt_histogram(stream, ph.histogram.bin_width_ps, ph.histogram.max_delay_ps, period);
    std::vector<double> centers(h.bins.size());
    for (std::size_t k = 0; k < centers.size(); ++k) centers[k] = h.bin_center(k);
    dir.write_csv("hist.csv", table({"delay_ps", "counts"}, {centers, as_double(h.bins)}));
    if (period > 0.0) {
      try {
        const auto bars = photon::pulse_normalize(h, period);
        emit_bars(dir, "g2_bars", bars);
        summary["g2_raw"] = bars.g2_zero;
      } catch (const Error& e) {
        summary["g2_raw"] = nullptr;
        summary["g2_note"] = std::string(to_string(e.kind())) + ": " + e.what();
      }
    }
  } else {
    summary["g2_note"] = "a detector recorded no events; no coincidence histogram";
  }
  auto decay_cfg = ph.decay;
  decay_cfg.seed = p.cfg.seed + 1;
  const auto decay = photon::simulate_decay_histogram(sc.emitter, decay_cfg);
  emit_decay(dir, "decay", decay.time_ps, {{"decay", decay.counts, std::nullopt}});
  auto sat_cfg = ph.saturation.series;
  sat_cfg.seed = p.cfg.seed + 2;
  const auto sat = photon::simulate_saturation_series(sc.emitter, sc.excitation, ph.saturation.powers_uw, sat_cfg);
  std::vector<double> pw, rate;
  for (const auto& pt : sat) {
    pw.push_back(pt.power_uw);
    rate.push_back(pt.intensity_cps);
  }
  emit_saturation(dir, "saturation", pw, rate, std::nullopt);
  dir.write_json("report.json", summary);
  return summary;
}

analysis::Spectrum spectrum_from(const io::Table& t) {
  analysis::Spectrum s;
  s.wavelength_nm = t.column("wavelength_nm");
  s.counts = t.column("counts", "power");
  return s;
}

analysis::LorentzianFit fit_spectrum(const analysis::Spectrum& s, const config::AnalysisSettings& a) {
  switch (a.weighting) {
    case config::WeightingChoice::Poisson: return analysis::fit_lorentzian(s, a.orientation, analysis::Weighting::Poisson);
    case config::WeightingChoice::Uniform: return analysis::fit_lorentzian(s, a.orientation, analysis::Weighting::Uniform);
    case config::WeightingChoice::Auto: break;
  }
  return analysis::fit_lorentzian(s, a.orientation);
}

json lorentzian_report(const analysis::Spectrum& s, const analysis::LorentzianFit& fit,
                       const config::AnalysisSettings& a) {
  const auto e = analysis::to_energy(fit.center_nm, fit.fwhm_nm);
  json doc{{"fit", to_json(fit)},
           {"center_ev", e.center_ev},
           {"fwhm_ev", e.fwhm_ev},
           {"q_energy", analysis::q_factor(e.center_ev, e.fwhm_ev)},
           {"q_wavelength", analysis::q_factor_wavelength(fit.center_nm, fit.fwhm_nm)}};
  if (a.line_bandwidth_nm > 0.0) {
    const double sig = analysis::isolate_line(s, fit.center_nm, a.line_bandwidth_nm);
    const double bg = analysis::isolate_line(s, fit.center_nm + a.detuning_nm, a.line_bandwidth_nm);
    doc["line"] = {{"signal", sig},
                   {"background", bg},
                   {"bandwidth_nm", a.line_bandwidth_nm},
                   {"detuning_nm", a.detuning_nm},
                   {"signal_fraction", analysis::signal_fraction(sig, bg)}};
  }
  return doc;
}

json g2_report(const photon::NormalizedBars& bars, const config::AnalysisSettings& a) {
  const double r = a.effective_signal_fraction();
  // Shot-noise estimate of the zero-delay bar unless the config supplies one.
  double g2_sigma = a.g2_sigma;
  std::size_t zero = 0;
  while (zero < bars.pulse.size() && bars.pulse[zero] != 0) ++zero;
  if (!(g2_sigma > 0.0) && zero < bars.pulse.size() && bars.reference > 0.0) {
    g2_sigma = std::sqrt(std::max(1.0, bars.raw[zero])) / bars.reference;
  }
  const auto corr = analysis::g2_background_correct(bars.g2_zero, r, g2_sigma, a.signal_fraction_sigma);
  return json{{"g2_raw", bars.g2_zero}, {"g2_raw_sigma", g2_sigma}, {"correction", to_json(corr)},
              {"g2_corr", corr.g2_corr}, {"signal_fraction", r}, {"bars", to_json(bars)}};
}

json lifetime_report(const analysis::BiexpFit& fit, const config::AnalysisSettings& a) {
  json doc{{"fit", to_json(fit)}};
  if (a.bulk_tau_ps > 0.0) {
    doc["purcell"] = to_json(
        analysis::purcell_from_lifetimes(a.bulk_tau_ps, a.bulk_tau_sigma_ps, fit.tau_fast_ps, fit.tau_fast_sigma));
  }
  return doc;
}

analysis::SaturationFit fit_saturation_table(const io::Table& t) {
  return analysis::fit_saturation(t.column("power_uW"), t.column("counts_per_s"));
}

json run_analyze(const Plan& p, io::OutputDir& dir) {
  const auto& a = p.cfg.analysis;
  const auto task = p.arguments.at("task").get<std::string>();
  json doc{{"task", task}};
  if (task == "lorentzian") {
    const auto s = spectrum_from(io::read_csv(p.arguments.at("spectrum").get<std::string>()));
    doc.update(lorentzian_report(s, fit_spectrum(s, a), a));
  } else if (task == "g2") {
    const auto t = io::read_csv(p.arguments.at("hist").get<std::string>());
    const double period = p.cfg.photon.excitation.period_ps();
    const auto h = histogram_from_columns(t.column("delay_ps"), t.column("counts"), period);
    doc.update(g2_report(photon::pulse_normalize(h, period), a));
  } else if (task == "lifetime") {
    const auto t = io::read_csv(p.arguments.at("decay").get<std::string>());
    doc.update(lifetime_report(analysis::fit_biexp_irf(t.column("time_ps"), t.column("counts"), a.irf_fwhm_ps), a));
  } else if (task == "saturation") {
    doc["fit"] = to_json(fit_saturation_table(io::read_csv(p.arguments.at("saturation").get<std::string>())));
  } else {
    std::vector<double> cav = a.cavity_i_sat, bulk = a.bulk_i_sat;
    json fits = json::object();
    for (const char* group : {"cavity_saturation", "bulk_saturation"}) {
      json list = json::array();
      for (const auto& f : p.arguments.at(group)) {
        const auto fit = fit_saturation_table(io::read_csv(f.get<std::string>()));
        (std::string(group) == "cavity_saturation" ? cav : bulk).push_back(fit.i_sat);
        list.push_back(to_json(fit));
      }
      fits[group] = list;
    }
    doc["fits"] = fits;
    doc["cavity_i_sat"] = cav;
    doc["bulk_i_sat"] = bulk;
    doc["enhancement_ratio"] = analysis::enhancement_ratio(cav, bulk);
  }
  dir.write_json(p.arguments.at("report").get<std::string>(), doc);
  return doc;
}

// Peak-centred crop for simulated spectra with several resonances.
analysis::Spectrum crop_to_peak(const analysis::Spectrum& s) {
  const auto n = s.counts.size();
  const auto k = static_cast<std::size_t>(std::max_element(s.counts.begin(), s.counts.end()) - s.counts.begin());
  const double half = 0.5 * s.counts[k];
  std::size_t lo = k, hi = k;
  while (lo > 0 && s.counts[lo] > half) --lo;
  while (hi + 1 < n && s.counts[hi] > half) ++hi;
  const std::size_t span = std::max<std::size_t>(8, 6 * (hi - lo));
  const std::size_t a = k > span ? k - span : 0, b = std::min(n, k + span + 1);
  analysis::Spectrum out;
  out.wavelength_nm.assign(s.wavelength_nm.begin() + static_cast<long>(a), s.wavelength_nm.begin() + static_cast<long>(b));
  out.counts.assign(s.counts.begin() + static_cast<long>(a), s.counts.begin() + static_cast<long>(b));
  return out;
}

json run_report(const Plan& p, io::OutputDir& dir) {
  const fs::path in = p.arguments.at("input_dir").get<std::string>();
  const auto& a = p.cfg.analysis;
  std::vector<fs::path> files;
  for (const auto& e : fs::directory_iterator(in)) {
    if (e.is_regular_file() && e.path().extension() == ".csv") files.push_back(e.path());
  }
  std::sort(files.begin(), files.end());
  json doc = json::object();
  auto note = [&](const std::string& key, const Error& e) {
    doc[key] = {{"error", {{"kind", std::string(to_string(e.kind()))}, {"message", e.what()}}}};
  };
  for (const auto& f : files) {
    const std::string name = f.stem().string();
    if (name == "spectrum") {
      const auto t = io::read_csv(f);
      const bool simulated = std::find(t.header.begin(), t.header.end(), "power") != t.header.end();
      auto s = spectrum_from(t);
      if (simulated) s = crop_to_peak(s);
      try {
        // Simulated power spectra carry no counting noise.
        const auto fit = simulated ? analysis::fit_lorentzian(s, analysis::Orientation::Peak, analysis::Weighting::Uniform)
                                   : fit_spectrum(s, a);
        doc["spectrum"] = lorentzian_report(s, fit, a);
        emit_spectrum(dir, "spectrum_fit", s.wavelength_nm, s.counts, simulated ? "power" : "counts", fit);
      } catch (const Error& e) {
        note("spectrum", e);
      }
    } else if (name == "farfield") {
      const auto t = io::read_csv(f);
      const auto& th = t.column("angle_deg");
      const auto& it = t.column("intensity");
      cavity::FarFieldMap map;
      map.theta_deg = th;
      map.intensity = it;
      json col = json::array();
      for (double na : p.cfg.design.options.numerical_apertures) {
        col.push_back({{"na", na}, {"fraction", cavity::collection_efficiency(map, na)}});
      }
      doc["farfield"] = {{"collection", col}};
      emit_farfield(dir, "farfield_plot", th, it, p.cfg.design.options.numerical_apertures);
    } else if (name == "hist") {
      const auto t = io::read_csv(f);
      const double period = p.cfg.photon.excitation.period_ps();
      try {
        const auto bars =
            photon::pulse_normalize(histogram_from_columns(t.column("delay_ps"), t.column("counts"), period), period);
        doc["g2"] = g2_report(bars, a);
        emit_bars(dir, "g2_bars_plot", bars);
      } catch (const Error& e) {
        note("g2", e);
      }
    } else if (name.rfind("decay", 0) == 0) {
      const auto t = io::read_csv(f);
      const auto& time = t.column("time_ps");
      for (std::size_t c = 0; c < t.header.size(); ++c) {
        const auto& col = t.header[c];
        if (col.rfind("counts", 0) != 0) continue;
        const std::string key = name + (col == "counts" ? "" : col.substr(6));
        try {
          const auto fit = analysis::fit_biexp_irf(time, t.columns[c], a.irf_fwhm_ps);
          doc[key] = lifetime_report(fit, a);
          emit_decay(dir, key + "_fit", time, {{key, t.columns[c], fit}});
        } catch (const Error& e) {
          note(key, e);
        }
      }
    } else if (name.rfind("saturation", 0) == 0) {
      const auto t = io::read_csv(f);
      try {
        const auto fit = fit_saturation_table(t);
        doc[name] = {{"fit", to_json(fit)}};
        emit_saturation(dir, name + "_fit", t.column("power_uW"), t.column("counts_per_s"), fit);
      } catch (const Error& e) {
        note(name, e);
      }
    }
  }
  dir.write_json("report.json", doc);
  return doc;
}

json run_replay(const Plan& p, io::OutputDir& dir) {
  const auto r = replay(p.arguments.at("scenario").get<std::string>(), p.cfg.seed);
  json rows = json::array();
  std::string csv = "quantity,recovered,paper,low,high,pass\n";
  for (const auto& row : r.rows) {
    rows.push_back({{"quantity", row.quantity}, {"recovered", row.recovered}, {"paper", row.paper},
                    {"low", row.low}, {"high", row.high}, {"pass", row.pass}});
    csv += row.quantity + "," + io::format_number(row.recovered) + "," + io::format_number(row.paper) + "," +
           io::format_number(row.low) + "," + io::format_number(row.high) + "," + (row.pass ? "pass" : "fail") + "\n";
  }
  dir.write("table.csv", csv);
  dir.write("table.txt", format_table(r));
  const auto& t = r.decay_cavity.time_ps;
  emit_decay(dir, "decay", t, {{"cavity", r.decay_cavity.counts, r.fit_cavity}, {"bulk", r.decay_bulk.counts, r.fit_bulk}});
  emit_bars(dir, "g2_bars", r.bars);
  std::vector<double> pw, rate;
  for (const auto& pt : r.saturation) {
    pw.push_back(pt.power_uw);
    rate.push_back(pt.intensity_cps);
  }
  emit_saturation(dir, "saturation", pw, rate, r.saturation_fit);
  json doc{{"scenario", r.scenario},
           {"seed", r.seed},
           {"rows", rows},
           {"all_pass", r.all_pass()},
           {"lifetime_cavity_slot", to_json(r.fit_cavity)},
           {"lifetime_bulk", to_json(r.fit_bulk)},
           {"purcell", to_json(r.purcell)},
           {"g2", to_json(r.g2)},
           {"bars", to_json(r.bars)},
           {"saturation", to_json(r.saturation_fit)}};
  dir.write_json("report.json", doc);
  return doc;
}

Outcome execute(const Plan& p) {
  io::OutputDir dir(p.out_dir);
  std::error_code ec;
  fs::remove(dir.path(p.manifest_name), ec);
  fs::remove(dir.path("error.json"), ec);
  io::RunManifest m;
  m.command = p.command;
  m.config = p.cfg_json;
  m.config_digest = io::sha256_hex(io::dump_json(p.cfg_json));
  m.seed = p.cfg.seed;
  m.arguments = p.arguments;
  m.inputs = p.inputs;
  m.started_utc = io::utc_now();
  json result;
  if (p.command == "design") {
    result = run_design(p, dir);
  } else if (p.command == "simulate") {
    result = run_simulate(p, dir);
  } else if (p.command == "analyze") {
    result = run_analyze(p, dir);
  } else if (p.command == "report") {
    result = run_report(p, dir);
  } else if (p.command == "replay") {
    result = run_replay(p, dir);
  } else {
    usage("unknown command '" + p.command + "'");
  }
  m.outputs = dir.outputs();
  std::sort(m.outputs.begin(), m.outputs.end(), [](const auto& x, const auto& y) { return x.path < y.path; });
  m.finished_utc = io::utc_now();
  io::write_atomic(dir.path(p.manifest_name), io::dump_json(m.to_json()));
  return Outcome{0, std::move(result), m.digest()};
}

const std::vector<std::string>& commands() {
  static const std::vector<std::string> c{"design", "simulate", "analyze", "report", "replay", "rerun"};
  return c;
}

ReplayRow compare(const std::string& quantity, double recovered, double paper, double low, double high) {
  return ReplayRow{quantity, recovered, paper, low, high, recovered >= low && recovered <= high};
}

ReplayRow compare_rel(const std::string& quantity, double recovered, double paper, double rel) {
  return compare(quantity, recovered, paper, paper * (1.0 - rel), paper * (1.0 + rel));
}

}  // namespace

int exit_code_for(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::ConfigInvalid:
    case ErrorKind::ConfigError:
    case ErrorKind::UsageError: return 2;
    default: return 1;
  }
}

void apply_thread_cap() {
  const char* env = std::getenv("BULLSEYE_LAB_THREADS");
  if (!env || !*env) return;
  char* end = nullptr;
  const long n = std::strtol(env, &end, 10);
  if (*end != '\0' || n <= 0) usage("BULLSEYE_LAB_THREADS must be a positive integer");
  omp_set_num_threads(static_cast<int>(std::min<long>(n, 4096)));
}

Outcome run(const Request& r) {
  if (std::find(commands().begin(), commands().end(), r.command) == commands().end()) {
    return Outcome{2, json{{"kind", "UsageError"}, {"message", "unknown command '" + r.command + "'"}}, {}};
  }
  const fs::path err_dir = r.command == "analyze" ? (r.out.parent_path().empty() ? fs::path(".") : r.out.parent_path())
                                                  : r.out;
  auto fail = [&](int code, const std::string& kind, const std::string& message) {
    json err{{"tool_version", io::kToolVersion},
             {"command", r.command},
             {"error", {{"kind", kind}, {"message", message}}},
             {"exit_code", code}};
    if (!err_dir.empty()) {
      try {
        fs::create_directories(err_dir);
        io::write_atomic(err_dir / "error.json", io::dump_json(err));
      } catch (const std::exception&) {
        // The caller still gets the error document and the exit code.
      }
    }
    return Outcome{code, err, {}};
  };
  try {
    apply_thread_cap();
    if (r.out.empty()) usage("--out is required");
    if (r.command == "rerun") {
      if (!r.manifest) usage("rerun needs --manifest <file>");
      return execute(plan_from_manifest(*r.manifest, r.out));
    }
    return execute(plan_from_request(r));
  } catch (const Error& e) {
    return fail(exit_code_for(e.kind()), std::string(to_string(e.kind())), e.what());
  } catch (const json::exception& e) {
    return fail(2, "ConfigInvalid", e.what());
  } catch (const std::exception& e) {
    return fail(1, "InternalError", e.what());
  }
}

photon::CoincidenceHistogram histogram_from_columns(const std::vector<double>& delay, const std::vector<double>& counts,
                                                    double period) {
  if (delay.size() != counts.size()) throw Error(ErrorKind::InvalidArgument, "histogram columns differ in length");
  const double w = uniform_spacing(delay, "histogram delays");
  photon::CoincidenceHistogram h;
  h.bin_width_ps = w;
  h.max_delay_ps = 0.5 * w * static_cast<double>(delay.size());
  if (std::abs(delay.front() - (-h.max_delay_ps + 0.5 * w)) > 1e-6 * w) {
    throw Error(ErrorKind::InvalidArgument, "histogram bins must be symmetric about zero delay");
  }
  h.bins.resize(counts.size());
  for (std::size_t k = 0; k < counts.size(); ++k) {
    if (!(counts[k] >= 0.0) || counts[k] != std::floor(counts[k])) {
      throw Error(ErrorKind::InvalidArgument, "histogram counts must be non-negative integers");
    }
    h.bins[k] = static_cast<std::uint64_t>(counts[k]);
  }
  h.group_pulses(period);
  return h;
}

bool ReplayResult::all_pass() const {
  return std::all_of(rows.begin(), rows.end(), [](const ReplayRow& r) { return r.pass; });
}

ReplayResult replay(const std::string& scenario, std::uint64_t seed) {
  if (scenario != "paper-cavity" && scenario != "paper-bulk") usage("unknown scenario '" + scenario + "'");
  const bool control = scenario == "paper-bulk";
  ReplayResult r;
  r.scenario = scenario;
  r.seed = seed;
  const auto measured = control ? photon::presets::bulk_emitter() : photon::presets::cavity_emitter();
  const auto reference = photon::presets::bulk_emitter();

  photon::DecayConfig dc;
  dc.seed = seed + 1;
  r.decay_cavity = photon::simulate_decay_histogram(measured, dc);
  dc.seed = seed + 2;
  r.decay_bulk = photon::simulate_decay_histogram(reference, dc);
  r.fit_cavity = analysis::fit_biexp_irf(r.decay_cavity.time_ps, r.decay_cavity.counts, dc.irf_fwhm_ps);
  r.fit_bulk = analysis::fit_biexp_irf(r.decay_bulk.time_ps, r.decay_bulk.counts, dc.irf_fwhm_ps);
  r.purcell = analysis::purcell_from_lifetimes(r.fit_bulk.tau_fast_ps, r.fit_bulk.tau_fast_sigma,
                                               r.fit_cavity.tau_fast_ps, r.fit_cavity.tau_fast_sigma);

  auto hbt = photon::presets::hbt_run(0.86, 0.12, 10000000, seed + 3);
  hbt.emitter.tau_fast_ps = measured.tau_fast_ps;
  hbt.emitter.tau_slow_ps = measured.tau_slow_ps;
  hbt.emitter.fast_fraction = measured.fast_fraction;
  const double period = hbt.excitation.period_ps();
  const auto stream = photon::simulate_stream(hbt);
  const auto hist = photon::hbt_histogram(stream, 16.0, 250000.0, period);
  r.bars = photon::pulse_normalize(hist, period);
  r.g2 = analysis::g2_background_correct(r.bars.g2_zero, 0.86);

  photon::SaturationSeriesConfig sc;
  sc.saturated_rate_cps = control ? 1.03e3 : 1.47e4;
  sc.seed = seed + 4;
  r.saturation = photon::simulate_saturation_series(measured, photon::presets::saturation_excitation(),
                                                    photon::presets::saturation_powers_uw(), sc);
  std::vector<double> pw, rate;
  for (const auto& pt : r.saturation) {
    pw.push_back(pt.power_uw);
    rate.push_back(pt.intensity_cps);
  }
  r.saturation_fit = analysis::fit_saturation(pw, rate);

  r.rows.push_back(compare_rel("tau_fast_ps cavity slot", r.fit_cavity.tau_fast_ps, 141.1, 0.05));
  r.rows.push_back(compare_rel("tau_slow_ps cavity slot", r.fit_cavity.tau_slow_ps, 617.0, 0.05));
  r.rows.push_back(compare_rel("tau_fast_ps bulk", r.fit_bulk.tau_fast_ps, 201.6, 0.05));
  r.rows.push_back(compare_rel("tau_slow_ps bulk", r.fit_bulk.tau_slow_ps, 2610.0, 0.05));
  r.rows.push_back(compare("purcell_factor", r.purcell.value, 1.43, 1.30, 1.55));
  r.rows.push_back(compare("g2_raw", r.bars.g2_zero, 0.35, 0.32, 0.38));
  r.rows.push_back(compare("g2_corr", r.g2.g2_corr, 0.12, 0.09, 0.15));
  r.rows.push_back(compare_rel("i_sat_cps cavity slot", r.saturation_fit.i_sat, 1.47e4, 0.05));
  return r;
}

std::string format_table(const ReplayResult& r) {
  std::string out = "scenario " + r.scenario + " seed " + std::to_string(r.seed) + "\n";
  char line[160];
  std::snprintf(line, sizeof line, "%-26s %12s %10s %21s %s\n", "quantity", "recovered", "paper", "accepted", "result");
  out += line;
  for (const auto& row : r.rows) {
    char range[64];
    std::snprintf(range, sizeof range, "[%.4g, %.4g]", row.low, row.high);
    std::snprintf(line, sizeof line, "%-26s %12.5g %10.5g %21s %s\n", row.quantity.c_str(), row.recovered, row.paper,
                  range, row.pass ? "pass" : "MISMATCH");
    out += line;
  }
  return out;
}

json to_json(const cavity::CavityReport& report) {
  auto res = [](const cavity::ResonanceEstimate& e) {
    return json{{"wavelength_nm", e.wavelength_nm}, {"fwhm_nm", e.fwhm_nm},
                {"q", e.q},                         {"q_envelope", number_or_null(e.q_envelope)},
                {"decay_rate_per_ps", e.decay_rate_per_ps}, {"amplitude", e.amplitude},
                {"omega", e.omega},                 {"kappa", e.kappa}};
  };
  json list = json::array();
  for (const auto& e : report.resonances) list.push_back(res(e));
  const auto& mv = report.mode_volume;
  const auto& ff = report.far_field;
  // `fraction` is relative to the upper hemisphere; `fraction_of_total` to
  // everything the source radiates.
  const double upper_share = ff.total_radiated_power > 0.0 ? ff.radiated_power / ff.total_radiated_power : 0.0;
  json collection = json::array();
  for (const auto& [na, frac] : report.collection) {
    collection.push_back({{"na", na}, {"fraction", frac}, {"fraction_of_total", frac * upper_share}});
  }
  return json{{"resonances", list},
              {"target", res(report.target)},
              {"mode_volume",
               {{"volume_nm3", mv.volume_nm3},
                {"volume_cubic_wavelengths", mv.volume_cubic_wavelengths},
                {"index", mv.index},
                {"r_max_nm", mv.r_max_nm},
                {"z_max_nm", mv.z_max_nm}}},
              {"far_field",
               {{"radiated_power", ff.radiated_power},
                {"total_radiated_power", ff.total_radiated_power},
                {"plane_flux", ff.plane_flux},
                {"surface_flux", ff.surface_flux}}},
              {"collection", collection},
              {"theoretical_purcell", report.theoretical_purcell},
              {"dt", report.dt},
              {"sample_dt", report.sample_dt},
              {"total_steps", report.total_steps},
              {"source_off_step", report.source_off_step}};
}

json to_json(const analysis::LorentzianFit& f) {
  return json{{"center_nm", f.center_nm},
              {"fwhm_nm", f.fwhm_nm},
              {"amplitude", f.amplitude},
              {"offset", f.offset},
              {"center_sigma", f.center_sigma},
              {"fwhm_sigma", f.fwhm_sigma},
              {"amplitude_sigma", f.amplitude_sigma},
              {"offset_sigma", f.offset_sigma},
              {"orientation", f.orientation == analysis::Orientation::Peak ? "peak" : "dip"},
              {"gradient_cosine", f.gradient_cosine},
              {"iterations", f.iterations}};
}

json to_json(const analysis::CorrectedG2& g) {
  return json{{"g2_raw", g.g2_raw}, {"r", g.r}, {"g2_corr", g.g2_corr}, {"uncertainty", g.uncertainty}};
}

json to_json(const analysis::BiexpFit& f) {
  return json{{"t0_ps", f.t0_ps},
              {"tau_fast_ps", f.tau_fast_ps},
              {"tau_slow_ps", f.tau_slow_ps},
              {"fast_amplitude", f.fast_amplitude},
              {"slow_amplitude", f.slow_amplitude},
              {"baseline", f.baseline},
              {"irf_fwhm_ps", f.irf_fwhm_ps},
              {"t0_sigma", f.t0_sigma},
              {"tau_fast_sigma", f.tau_fast_sigma},
              {"tau_slow_sigma", f.tau_slow_sigma},
              {"fast_amplitude_sigma", f.fast_amplitude_sigma},
              {"slow_amplitude_sigma", f.slow_amplitude_sigma},
              {"baseline_sigma", f.baseline_sigma},
              {"warnings", f.warnings},
              {"iterations", f.iterations}};
}

json to_json(const analysis::PurcellEstimate& p) { return json{{"value", p.value}, {"sigma", p.sigma}}; }

json to_json(const analysis::SaturationFit& f) {
  return json{{"i_sat", f.i_sat},
              {"p0_uw", f.p0_uw},
              {"alpha", f.alpha},
              {"i0", f.i0},
              {"i_sat_sigma", f.i_sat_sigma},
              {"p0_sigma", f.p0_sigma},
              {"alpha_sigma", f.alpha_sigma},
              {"i0_sigma", f.i0_sigma},
              {"gradient_cosine", f.gradient_cosine},
              {"iterations", f.iterations}};
}

json to_json(const photon::NormalizedBars& b) {
  return json{{"pulse", b.pulse},
              {"raw", b.raw},
              {"normalized", b.normalized},
              {"reference", b.reference},
              {"g2_zero", b.g2_zero}};
}

}  // namespace bullseye::pipeline
