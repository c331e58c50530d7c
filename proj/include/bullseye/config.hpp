#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "bullseye/analysis.hpp"
#include "bullseye/cavity.hpp"
#include "bullseye/photon.hpp"

// One JSON document configures every command. Geometry keys sit at the top
// level next to `layers`; the other modules have their own sections. Missing
// keys take the defaults below, unknown keys are rejected.
namespace bullseye::config {

using json = nlohmann::json;

struct HbtCalibration {
  /// When set, power, re-excitation and background rate are derived from
  /// the three targets below instead of being read literally.
  bool enabled = true;
  double signal_fraction = 0.86;
  double residual_g2 = 0.12;
  double excitation_probability = 0.05;
};

struct HistogramSettings {
  double bin_width_ps = 16.0;
  double max_delay_ps = 250000.0;
};

struct SaturationSettings {
  photon::SaturationSeriesConfig series;
  std::vector<double> powers_uw = photon::presets::saturation_powers_uw();
};

struct PhotonSettings {
  long pulses = 10000000;
  photon::EmitterModel emitter = photon::presets::cavity_emitter();
  photon::ExcitationConfig excitation;
  photon::BackgroundModel background;
  std::vector<photon::DetectorModel> detectors{photon::DetectorModel{}, photon::DetectorModel{}};
  double splitter_ratio = 0.5;
  HbtCalibration calibration;
  HistogramSettings histogram;
  photon::DecayConfig decay;
  SaturationSettings saturation;
};

enum class WeightingChoice { Auto, Poisson, Uniform };

struct AnalysisSettings {
  /// R for the g2 correction; replaced by S / (S + B) when either rate is set.
  double signal_fraction = 0.86;
  double signal_fraction_sigma = 0.0;
  double signal_cps = 0.0;
  double background_cps = 0.0;
  double g2_sigma = 0.0;
  double irf_fwhm_ps = 50.0;
  analysis::Orientation orientation = analysis::Orientation::Peak;
  WeightingChoice weighting = WeightingChoice::Auto;
  /// Line window for S and B from a spectrum; a zero width skips it.
  double line_bandwidth_nm = 0.0;
  double detuning_nm = 0.3;
  double bulk_tau_ps = 201.6;
  double bulk_tau_sigma_ps = 5.9;
  std::vector<double> cavity_i_sat;
  std::vector<double> bulk_i_sat;

  double effective_signal_fraction() const;
};

struct DesignExtras {
  double spectrum_min_nm = 400.0;
  double spectrum_max_nm = 480.0;
};

struct LabConfig {
  cavity::CavitySetup design;
  DesignExtras design_extras;
  cavity::SweepAxes sweep;
  PhotonSettings photon;
  AnalysisSettings analysis;
  std::uint64_t seed = 1;

  /// Stream configuration with the calibration, duration and seed applied.
  photon::StreamConfig stream() const;
};

/// Throws Error(ConfigInvalid) naming the JSON pointer of the offending value.
LabConfig from_json(const json& document);
LabConfig load(const std::filesystem::path& path);
json to_json(const LabConfig& config);

/// Sweep axes from a standalone document {"disk_diameter_nm": [...], ...}.
cavity::SweepAxes sweep_from_json(const json& document);
json sweep_to_json(const cavity::SweepAxes& axes);

/// JSON Schema (draft 2020-12) with every key, its type and default.
json schema();

}  // namespace bullseye::config
