#include <CLI11.hpp>

#include <cstdio>
#include <iostream>
#include <optional>
#include <string>

#include "bullseye/config.hpp"
#include "bullseye/io.hpp"
#include "bullseye/pipeline.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Bullseye cavity and single-photon source laboratory"};
  app.set_version_flag("--version", bullseye::io::kToolVersion);
  app.require_subcommand(1);

  bullseye::pipeline::Request req;
  std::string config, out, sweep, spectrum, hist, decay, saturation, input_dir, manifest;
  std::optional<std::uint64_t> seed;

  auto add_config = [&](CLI::App* sub) { sub->add_option("--config", config, "configuration JSON")->check(CLI::ExistingFile); };
  auto add_seed = [&](CLI::App* sub) {
    sub->add_option_function<std::uint64_t>("--seed", [&](std::uint64_t v) { seed = v; }, "master RNG seed");
  };

  auto* design = app.add_subcommand("design", "simulate the cavity or sweep its geometry");
  add_config(design);
  design->add_option("--sweep", sweep, "sweep axes JSON")->check(CLI::ExistingFile);
  design->add_option("--out", out, "output directory")->required();

  auto* simulate = app.add_subcommand("simulate", "generate photon-counting data");
  add_config(simulate);
  add_seed(simulate);
  simulate->add_option("--out", out, "output directory")->required();

  auto* analyze = app.add_subcommand("analyze", "fit measured or simulated data");
  add_config(analyze);
  analyze->add_option("--task", req.task, "analysis task")
      ->required()
      ->check(CLI::IsMember({"lorentzian", "g2", "lifetime", "saturation", "enhancement"}));
  analyze->add_option("--spectrum", spectrum, "spectrum CSV (wavelength_nm,counts)");
  analyze->add_option("--hist", hist, "coincidence histogram CSV (delay_ps,counts)");
  analyze->add_option("--decay", decay, "decay histogram CSV (time_ps,counts)");
  analyze->add_option("--saturation", saturation, "power series CSV (power_uW,counts_per_s)");
  analyze->add_option("--cavity-saturation", req.cavity_saturation, "cavity power series CSVs (enhancement)");
  analyze->add_option("--bulk-saturation", req.bulk_saturation, "bulk power series CSVs (enhancement)");
  analyze->add_option("--out", out, "report file")->required();

  auto* report = app.add_subcommand("report", "fit and plot every artifact in a directory");
  add_config(report);
  report->add_option("--in", input_dir, "directory with CSV artifacts")->required();
  report->add_option("--out", out, "output directory")->required();

  auto* replay = app.add_subcommand("replay", "end-to-end comparison against reference values");
  add_seed(replay);
  replay->add_option("--scenario", req.scenario, "paper-cavity or paper-bulk")
      ->required()
      ->check(CLI::IsMember({"paper-cavity", "paper-bulk"}));
  replay->add_option("--out", out, "output directory")->required();

  auto* rerun = app.add_subcommand("rerun", "repeat a completed run from its manifest");
  rerun->add_option("--manifest", manifest, "manifest.json of the run")->required()->check(CLI::ExistingFile);
  rerun->add_option("--out", out, "output directory")->required();

  auto* schema = app.add_subcommand("schema", "print the configuration JSON schema");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 2;
  }

  if (schema->parsed()) {
    std::cout << bullseye::io::dump_json(bullseye::config::schema());
    return 0;
  }

  for (auto* sub : app.get_subcommands()) req.command = sub->get_name();
  if (!config.empty()) req.config = config;
  req.out = out;
  req.seed = seed;
  if (!sweep.empty()) req.sweep = sweep;
  if (!spectrum.empty()) req.spectrum = spectrum;
  if (!hist.empty()) req.hist = hist;
  if (!decay.empty()) req.decay = decay;
  if (!saturation.empty()) req.saturation = saturation;
  if (!input_dir.empty()) req.input_dir = input_dir;
  if (!manifest.empty()) req.manifest = manifest;

  const auto outcome = bullseye::pipeline::run(req);
  if (outcome.exit_code != 0) {
    const auto& err = outcome.result.contains("error") ? outcome.result["error"] : outcome.result;
    std::cerr << "bullseye_lab " << req.command << ": " << err.value("kind", "") << ": " << err.value("message", "")
              << "\n";
    return outcome.exit_code;
  }
  if (outcome.result.contains("scenario")) {
    for (const auto& row : outcome.result["rows"]) {
      std::printf("%-26s %12.5g %10.5g  [%.4g, %.4g]  %s\n", row["quantity"].get<std::string>().c_str(),
                  row["recovered"].get<double>(), row["paper"].get<double>(), row["low"].get<double>(),
                  row["high"].get<double>(), row["pass"].get<bool>() ? "pass" : "MISMATCH");
    }
  }
  std::cout << "manifest_digest " << outcome.manifest_digest << "\n";
  return 0;
}
