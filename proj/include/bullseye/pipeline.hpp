#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "bullseye/analysis.hpp"
#include "bullseye/cavity.hpp"
#include "bullseye/config.hpp"
#include "bullseye/photon.hpp"

// Command pipelines behind the bullseye_lab tool. Each command writes its
// artifacts atomically into an output directory and finishes with
// manifest.json; on failure it writes error.json instead.
namespace bullseye::pipeline {

using json = nlohmann::json;
namespace fs = std::filesystem;

struct Request {
  std::string command;  ///< design, simulate, analyze, report, replay, rerun
  std::optional<fs::path> config;
  /// Output directory; for analyze the path of the report file.
  fs::path out;
  std::optional<std::uint64_t> seed;
  std::optional<fs::path> sweep;
  std::string task;  ///< analyze: lorentzian, g2, lifetime, saturation, enhancement
  std::optional<fs::path> spectrum, hist, decay, saturation;
  std::vector<fs::path> cavity_saturation, bulk_saturation;
  std::optional<fs::path> input_dir;  ///< report
  std::string scenario;               ///< replay: paper-cavity, paper-bulk
  std::optional<fs::path> manifest;   ///< rerun
};

struct Outcome {
  int exit_code = 0;
  json result;            ///< report document on success, error document on failure
  std::string manifest_digest;
};

/// Runs one command, mapping errors to exit codes: 2 for usage and
/// configuration errors, 1 for everything else.
Outcome run(const Request& request);

int exit_code_for(ErrorKind kind);

/// Applies BULLSEYE_LAB_THREADS when set to a positive integer.
void apply_thread_cap();

/// Histogram with uniform bins rebuilt from (delay_ps, counts) columns.
photon::CoincidenceHistogram histogram_from_columns(const std::vector<double>& delay_ps,
                                                    const std::vector<double>& counts, double rep_period_ps);

struct ReplayRow {
  std::string quantity;
  double recovered = 0.0;
  double paper = 0.0;
  double low = 0.0;
  double high = 0.0;
  bool pass = false;
};

struct ReplayResult {
  std::string scenario;
  std::uint64_t seed = 0;
  std::vector<ReplayRow> rows;
  photon::DecayHistogram decay_cavity, decay_bulk;
  analysis::BiexpFit fit_cavity, fit_bulk;
  analysis::PurcellEstimate purcell;
  photon::NormalizedBars bars;
  analysis::CorrectedG2 g2;
  std::vector<photon::SaturationPoint> saturation;
  analysis::SaturationFit saturation_fit;

  bool all_pass() const;
};

/// End-to-end replays: simulate with the scenario's emitter presets, run the
/// analysis chain, compare against the published values. `paper-bulk` puts
/// the bulk emitter in the cavity slot, so its Purcell row must mismatch.
ReplayResult replay(const std::string& scenario, std::uint64_t seed);
std::string format_table(const ReplayResult& result);

json to_json(const cavity::CavityReport& report);
json to_json(const analysis::LorentzianFit& fit);
json to_json(const analysis::CorrectedG2& g2);
json to_json(const analysis::BiexpFit& fit);
json to_json(const analysis::PurcellEstimate& p);
json to_json(const analysis::SaturationFit& fit);
json to_json(const photon::NormalizedBars& bars);

}  // namespace bullseye::pipeline
