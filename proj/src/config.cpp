#include "bullseye/config.hpp"

#include <cmath>
#include <fstream>
#include <limits>
#include <set>
#include <sstream>
#include <type_traits>
#include <utility>

#include "bullseye/error.hpp"

namespace bullseye::config {

namespace {

template <typename E>
using Names = std::vector<std::pair<E, const char*>>;

Names<geom::OuterRegion> names(geom::OuterRegion*) {
  return {{geom::OuterRegion::Air, "air"}, {geom::OuterRegion::Membrane, "membrane"}};
}
Names<fdtd::Polarization> names(fdtd::Polarization*) {
  return {{fdtd::Polarization::InPlane, "in_plane"}, {fdtd::Polarization::Vertical, "vertical"}};
}
Names<fdtd::Boundary> names(fdtd::Boundary*) { return {{fdtd::Boundary::Pml, "pml"}, {fdtd::Boundary::Pec, "pec"}}; }
Names<photon::ExcitationMode> names(photon::ExcitationMode*) {
  return {{photon::ExcitationMode::Pulsed, "pulsed"}, {photon::ExcitationMode::Cw, "cw"}};
}
Names<analysis::Orientation> names(analysis::Orientation*) {
  return {{analysis::Orientation::Peak, "peak"}, {analysis::Orientation::Dip, "dip"}};
}
Names<WeightingChoice> names(WeightingChoice*) {
  return {{WeightingChoice::Auto, "auto"}, {WeightingChoice::Poisson, "poisson"}, {WeightingChoice::Uniform, "uniform"}};
}

// Field lists shared by the reader, the writer and the schema.

template <typename V>
void fields(V& v, geom::Layer& l) {
  v("name", l.name);
  v("thickness_nm", l.thickness_nm);
  v("index_table", l.index.points);
}

template <typename V>
void fields(V& v, geom::GridSpec& g) {
  v("dr_nm", g.dr_nm);
  v("dz_nm", g.dz_nm);
  v("padding_nm", g.padding_nm);
  v("wavelength_nm", g.wavelength_nm);
}

template <typename V>
void fields(V& v, fdtd::DipoleSource& s) {
  v("r_nm", s.r_nm);
  v("z_nm", s.z_nm);
  v("polarization", s.polarization);
  v("center_wavelength_nm", s.center_wavelength_nm);
  v("bandwidth_nm", s.bandwidth_nm);
  v("amplitude", s.amplitude);
  v("sheet_waist_nm", s.sheet_waist_nm);
}

template <typename V>
void fields(V& v, fdtd::ProbePoint& p) {
  v("r_nm", p.r_nm);
  v("z_nm", p.z_nm);
}

template <typename V>
void fields(V& v, fdtd::SolverConfig& s) {
  v("m", s.m);
  v("courant_factor", s.courant_factor);
  v("total_steps", s.total_steps);
  v("expected_q", s.expected_q);
  v("ringdown_factor", s.ringdown_factor);
  v("pml_thickness", s.pml_thickness);
  v("pml_reflection", s.pml_reflection);
  v("r_boundary", s.r_boundary);
  v("z_boundary", s.z_boundary);
  v("source", s.source);
  v("probes", s.probes);
  v("blowup_guard", s.blowup_guard);
  v("guard_interval", s.guard_interval);
  v("sample_stride", s.sample_stride);
  v("parallel", s.parallel);
}

struct CavitySection {
  cavity::CavityOptions* options;
  DesignExtras* extras;
};

template <typename V>
void fields(V& v, CavitySection& c) {
  v("target_min_nm", c.options->target_min_nm);
  v("target_max_nm", c.options->target_max_nm);
  v("surface_gap_nm", c.options->surface_gap_nm);
  v("locate_fraction", c.options->locate_fraction);
  v("numerical_apertures", c.options->numerical_apertures);
  v("num_angles", c.options->num_angles);
  v("spectrum_min_nm", c.extras->spectrum_min_nm);
  v("spectrum_max_nm", c.extras->spectrum_max_nm);
}

template <typename V>
void fields(V& v, cavity::SweepAxes& a) {
  v("disk_diameter_nm", a.disk_diameter_nm);
  v("period_nm", a.period_nm);
  v("ring_width_nm", a.ring_width_nm);
  v("thickness_nm", a.thickness_nm);
}

template <typename V>
void fields(V& v, photon::EmitterModel& e) {
  v("tau_fast_ps", e.tau_fast_ps);
  v("tau_slow_ps", e.tau_slow_ps);
  v("fast_fraction", e.fast_fraction);
  v("single_photon", e.single_photon);
  v("reexcitation_probability", e.reexcitation_probability);
}

template <typename V>
void fields(V& v, photon::ExcitationConfig& e) {
  v("mode", e.mode);
  v("rep_rate_mhz", e.rep_rate_mhz);
  v("pulse_duration_ps", e.pulse_duration_ps);
  v("power_uw", e.power_uw);
  v("threshold_power_uw", e.threshold_power_uw);
  v("exponent", e.exponent);
  v("cw_rate_per_ps", e.cw_rate_per_ps);
}

template <typename V>
void fields(V& v, photon::BackgroundModel& b) {
  v("rate_cps", b.rate_cps);
}

template <typename V>
void fields(V& v, photon::DetectorModel& d) {
  v("irf_fwhm_ps", d.irf_fwhm_ps);
  v("dead_time_ps", d.dead_time_ps);
  v("dark_rate_cps", d.dark_rate_cps);
  v("efficiency", d.efficiency);
}

template <typename V>
void fields(V& v, HbtCalibration& c) {
  v("enabled", c.enabled);
  v("signal_fraction", c.signal_fraction);
  v("residual_g2", c.residual_g2);
  v("excitation_probability", c.excitation_probability);
}

template <typename V>
void fields(V& v, HistogramSettings& h) {
  v("bin_width_ps", h.bin_width_ps);
  v("max_delay_ps", h.max_delay_ps);
}

template <typename V>
void fields(V& v, photon::DecayConfig& d) {
  v("irf_fwhm_ps", d.irf_fwhm_ps);
  v("bin_width_ps", d.bin_width_ps);
  v("t_min_ps", d.t_min_ps);
  v("t_max_ps", d.t_max_ps);
  v("photons", d.photons);
  v("background_per_bin", d.background_per_bin);
}

template <typename V>
void fields(V& v, SaturationSettings& s) {
  v("saturated_rate_cps", s.series.saturated_rate_cps);
  v("background_cps", s.series.background_cps);
  v("integration_s", s.series.integration_s);
  v("shot_noise", s.series.shot_noise);
  v("powers_uw", s.powers_uw);
}

template <typename V>
void fields(V& v, PhotonSettings& p) {
  v("pulses", p.pulses);
  v("emitter", p.emitter);
  v("excitation", p.excitation);
  v("background", p.background);
  v("detectors", p.detectors);
  v("splitter_ratio", p.splitter_ratio);
  v("calibration", p.calibration);
  v("histogram", p.histogram);
  v("decay", p.decay);
  v("saturation", p.saturation);
}

template <typename V>
void fields(V& v, AnalysisSettings& a) {
  v("signal_fraction", a.signal_fraction);
  v("signal_fraction_sigma", a.signal_fraction_sigma);
  v("signal_cps", a.signal_cps);
  v("background_cps", a.background_cps);
  v("g2_sigma", a.g2_sigma);
  v("irf_fwhm_ps", a.irf_fwhm_ps);
  v("orientation", a.orientation);
  v("weighting", a.weighting);
  v("line_bandwidth_nm", a.line_bandwidth_nm);
  v("detuning_nm", a.detuning_nm);
  v("bulk_tau_ps", a.bulk_tau_ps);
  v("bulk_tau_sigma_ps", a.bulk_tau_sigma_ps);
  v("cavity_i_sat", a.cavity_i_sat);
  v("bulk_i_sat", a.bulk_i_sat);
}

template <typename V>
void fields(V& v, LabConfig& c) {
  auto& g = c.design.geometry;
  v("disk_diameter_nm", g.disk_diameter_nm);
  v("period_nm", g.period_nm);
  v("ring_width_nm", g.ring_width_nm);
  v("num_rings", g.num_rings);
  v("bridge_angle_deg", g.bridge_angle_deg);
  v("etch_depth_nm", g.etch_depth_nm);
  v("outer_region", g.outer);
  v("layers", c.design.stack.layers);
  v("suspended", c.design.stack.suspended);
  v("substrate_index", c.design.stack.substrate_index);
  v("grid", c.design.grid);
  v("solver", c.design.solver);
  CavitySection section{&c.design.options, &c.design_extras};
  v("cavity", section);
  v("sweep", c.sweep);
  v("photon", c.photon);
  v("analysis", c.analysis);
  v("seed", c.seed);
}

template <typename T>
concept Enum = std::is_enum_v<T>;

template <typename V, typename T>
concept HasFields = requires(V& v, T& t) { fields(v, t); };

[[noreturn]] void invalid(const std::string& path, const std::string& what) {
  throw Error(ErrorKind::ConfigInvalid, (path.empty() ? std::string("/") : path) + ": " + what);
}

struct Reader {
  const json& node;
  std::string path;
  std::set<std::string> seen{};

  template <typename T>
  void operator()(const char* key, T& value) {
    seen.insert(key);
    const auto it = node.find(key);
    if (it != node.end()) read(*it, path + "/" + key, value);
  }

  void finish() const {
    for (const auto& item : node.items()) {
      if (!seen.count(item.key())) invalid(path + "/" + item.key(), "unknown key");
    }
  }

  static void read(const json& j, const std::string& p, double& x) {
    if (!j.is_number()) invalid(p, "expected a number");
    x = j.get<double>();
    if (!std::isfinite(x)) invalid(p, "expected a finite number");
  }
  static void read(const json& j, const std::string& p, bool& x) {
    if (!j.is_boolean()) invalid(p, "expected a boolean");
    x = j.get<bool>();
  }
  static void read(const json& j, const std::string& p, std::string& x) {
    if (!j.is_string()) invalid(p, "expected a string");
    x = j.get<std::string>();
  }
  static void read(const json& j, const std::string& p, int& x) {
    long v = 0;
    read(j, p, v);
    if (v < std::numeric_limits<int>::min() || v > std::numeric_limits<int>::max()) invalid(p, "integer out of range");
    x = static_cast<int>(v);
  }
  static void read(const json& j, const std::string& p, long& x) {
    if (!j.is_number_integer()) invalid(p, "expected an integer");
    x = j.get<long>();
  }
  static void read(const json& j, const std::string& p, std::uint64_t& x) {
    if (!j.is_number_unsigned()) invalid(p, "expected a non-negative integer");
    x = j.get<std::uint64_t>();
  }
  template <Enum E>
  static void read(const json& j, const std::string& p, E& x) {
    if (!j.is_string()) invalid(p, "expected a string");
    const auto s = j.get<std::string>();
    std::string allowed;
    for (const auto& [value, name] : names(static_cast<E*>(nullptr))) {
      if (s == name) {
        x = value;
        return;
      }
      allowed += allowed.empty() ? name : std::string(", ") + name;
    }
    invalid(p, "expected one of " + allowed);
  }
  static void read(const json& j, const std::string& p, std::pair<double, double>& x) {
    if (!j.is_array() || j.size() != 2) invalid(p, "expected a [wavelength_nm, n] pair");
    read(j[0], p + "/0", x.first);
    read(j[1], p + "/1", x.second);
  }
  template <typename T>
  static void read(const json& j, const std::string& p, std::vector<T>& x) {
    if (!j.is_array()) invalid(p, "expected an array");
    std::vector<T> out(j.size());
    for (std::size_t k = 0; k < j.size(); ++k) read(j[k], p + "/" + std::to_string(k), out[k]);
    x = std::move(out);
  }
  template <typename T>
    requires HasFields<Reader, T>
  static void read(const json& j, const std::string& p, T& x) {
    if (!j.is_object()) invalid(p, "expected an object");
    Reader r{j, p};
    fields(r, x);
    r.finish();
  }
};

struct Writer {
  json& node;

  template <typename T>
  void operator()(const char* key, T& value) {
    node[key] = write(value);
  }

  static json write(double x) { return x; }
  static json write(bool x) { return x; }
  static json write(const std::string& x) { return x; }
  static json write(int x) { return x; }
  static json write(long x) { return x; }
  static json write(std::uint64_t x) { return x; }
  template <Enum E>
  static json write(E x) {
    for (const auto& [value, name] : names(static_cast<E*>(nullptr))) {
      if (value == x) return name;
    }
    return nullptr;
  }
  static json write(const std::pair<double, double>& x) { return json::array({x.first, x.second}); }
  template <typename T>
  static json write(std::vector<T>& x) {
    json a = json::array();
    for (auto& e : x) a.push_back(write(e));
    return a;
  }
  template <typename T>
    requires HasFields<Writer, T>
  static json write(T& x) {
    json o = json::object();
    Writer w{o};
    fields(w, x);
    return o;
  }
};

// Schema builder: walks the same field lists over default values.
struct SchemaBuilder {
  json& properties;

  template <typename T>
  void operator()(const char* key, T& value) {
    properties[key] = describe(value);
  }

  static json scalar(const char* type, json def) { return json{{"type", type}, {"default", std::move(def)}}; }
  static json describe(double& x) { return scalar("number", x); }
  static json describe(bool& x) { return scalar("boolean", x); }
  static json describe(std::string& x) { return scalar("string", x); }
  static json describe(int& x) { return scalar("integer", x); }
  static json describe(long& x) { return scalar("integer", x); }
  static json describe(std::uint64_t& x) {
    json s = scalar("integer", x);
    s["minimum"] = 0;
    return s;
  }
  template <Enum E>
  static json describe(E& x) {
    json s = scalar("string", Writer::write(x));
    json options = json::array();
    for (const auto& item : names(static_cast<E*>(nullptr))) options.push_back(item.second);
    s["enum"] = options;
    return s;
  }
  static json describe(std::pair<double, double>&) {
    return json{{"type", "array"}, {"items", {{"type", "number"}}}, {"minItems", 2}, {"maxItems", 2}};
  }
  template <typename T>
  static json describe(std::vector<T>& x) {
    T element{};
    json s{{"type", "array"}, {"items", describe(element)}, {"default", Writer::write(x)}};
    return s;
  }
  template <typename T>
    requires HasFields<SchemaBuilder, T>
  static json describe(T& x) {
    json props = json::object();
    SchemaBuilder b{props};
    fields(b, x);
    return json{{"type", "object"}, {"additionalProperties", false}, {"properties", props}};
  }
};

}  // namespace

double AnalysisSettings::effective_signal_fraction() const {
  if (signal_cps > 0.0 || background_cps > 0.0) return analysis::signal_fraction(signal_cps, background_cps);
  return signal_fraction;
}

photon::StreamConfig LabConfig::stream() const {
  photon::StreamConfig s;
  s.emitter = photon.emitter;
  s.excitation = photon.excitation;
  s.background = photon.background;
  s.detectors = {photon.detectors.at(0), photon.detectors.at(1)};
  s.splitter_ratio = photon.splitter_ratio;
  const auto& cal = photon.calibration;
  if (cal.enabled) photon::calibrate_hbt(s, cal.signal_fraction, cal.residual_g2, cal.excitation_probability);
  s.duration_ps = static_cast<double>(photon.pulses) * s.excitation.period_ps();
  s.seed = seed;
  return s;
}

LabConfig from_json(const json& document) {
  LabConfig c;
  Reader::read(document, "", c);
  if (c.photon.detectors.size() != 2) invalid("/photon/detectors", "expected exactly two detectors");
  if (c.photon.pulses <= 0) invalid("/photon/pulses", "must be positive");
  return c;
}

LabConfig load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw Error(ErrorKind::IoFailure, "cannot open config " + path.string());
  json j;
  try {
    j = json::parse(in);
  } catch (const json::parse_error& e) {
    throw Error(ErrorKind::ConfigInvalid, path.string() + ": " + e.what());
  }
  return from_json(j);
}

json to_json(const LabConfig& config) {
  LabConfig copy = config;
  return Writer::write(copy);
}

cavity::SweepAxes sweep_from_json(const json& document) {
  cavity::SweepAxes axes;
  Reader::read(document, "", axes);
  return axes;
}

json sweep_to_json(const cavity::SweepAxes& axes) {
  cavity::SweepAxes copy = axes;
  return Writer::write(copy);
}

json schema() {
  LabConfig defaults;
  json s = SchemaBuilder::describe(defaults);
  s["$schema"] = "https://json-schema.org/draft/2020-12/schema";
  s["title"] = "bullseye_lab configuration";
  return s;
}

}  // namespace bullseye::config
