#include <doctest.h>

#include <cmath>
#include <fstream>
#include <limits>
#include <random>
#include <unistd.h>

#include "bullseye/config.hpp"
#include "bullseye/io.hpp"
#include "bullseye/pipeline.hpp"
#include "support.hpp"

using namespace bullseye;
using io::json;
namespace fs = std::filesystem;

namespace {

fs::path scratch_dir(const std::string& name) {
  const auto p = fs::temp_directory_path() / ("bullseye_io_" + name + "_" + std::to_string(::getpid()));
  fs::remove_all(p);
  fs::create_directories(p);
  return p;
}

// Every key of `value` must be declared in `schema`, with a matching default
// wherever the schema gives one.
void check_schema_covers(const json& value, const json& schema, const std::string& where) {
  CAPTURE(where);
  if (schema.contains("default")) CHECK(schema["default"] == value);
  if (!value.is_object()) return;
  REQUIRE(schema.contains("properties"));
  for (const auto& [key, v] : value.items()) {
    CAPTURE(key);
    REQUIRE(schema["properties"].contains(key));
    check_schema_covers(v, schema["properties"][key], where + "/" + key);
  }
}

}  // namespace

TEST_CASE("sha256 of the standard test vectors") {
  CHECK(io::sha256_hex("abc") == "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
  CHECK(io::sha256_hex("") == "e3b0c44298fc1c149afbf4c8996fb92427ae41e4649b934ca495991b7852b855");
}

TEST_CASE("numbers survive a text round trip") {
  CHECK(io::format_number(0.1) == "0.1");
  CHECK(io::format_number(250.0) == "250");
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> mant(-1.0, 1.0);
  std::uniform_int_distribution<int> expo(-300, 300);
  for (int k = 0; k < 2000; ++k) {
    const double x = std::ldexp(mant(rng), expo(rng));
    CHECK(std::strtod(io::format_number(x).c_str(), nullptr) == x);
  }
  CHECK(std::strtod(io::format_number(std::numeric_limits<double>::denorm_min()).c_str(), nullptr) ==
        std::numeric_limits<double>::denorm_min());
}

TEST_CASE("CSV tables round-trip bit for bit") {
  io::Table t;
  t.header = {"delay_ps", "counts"};
  std::mt19937_64 rng(3);
  std::normal_distribution<double> g(0.0, 1e4);
  t.columns.resize(2);
  for (int k = 0; k < 500; ++k) {
    t.columns[0].push_back(g(rng));
    t.columns[1].push_back(std::floor(std::abs(g(rng))));
  }
  const auto back = io::parse_csv(io::to_csv(t));
  CHECK(back.header == t.header);
  CHECK(back.columns == t.columns);
  CHECK(&back.column("counts") == &back.columns[1]);
  CHECK_ERROR_KIND(back.column("missing"), ErrorKind::InvalidArgument);

  CHECK_ERROR_KIND(io::parse_csv("a,b\n1,2\n3\n"), ErrorKind::IoFailure);
  CHECK_ERROR_KIND(io::parse_csv("a,b\n1,x\n"), ErrorKind::IoFailure);
  CHECK_ERROR_KIND(io::read_csv("/nonexistent/file.csv"), ErrorKind::IoFailure);
}

TEST_CASE("canonical JSON is sorted and newline-terminated") {
  const json j{{"zeta", 1}, {"alpha", {{"b", 2}, {"a", 1}}}};
  const auto text = io::dump_json(j);
  CHECK(text.find("\"alpha\"") < text.find("\"zeta\""));
  CHECK(text.find("\"a\"") < text.find("\"b\""));
  CHECK(text.back() == '\n');
  CHECK(json::parse(text) == j);
}

TEST_CASE("atomic writes replace the file and leave no temporaries") {
  const auto dir = scratch_dir("atomic");
  const auto f = dir / "out.json";
  io::write_atomic(f, "first");
  io::write_atomic(f, "second");
  CHECK(io::read_file(f) == "second");
  int entries = 0;
  for ([[maybe_unused]] const auto& e : fs::directory_iterator(dir)) ++entries;
  CHECK(entries == 1);
  CHECK_ERROR_KIND(io::write_atomic(dir / "missing" / "x" / "out.json", "x"), ErrorKind::IoFailure);
  fs::remove_all(dir);
}

TEST_CASE("output directory records what it wrote") {
  const auto dir = scratch_dir("outdir");
  io::OutputDir out(dir);
  out.write("a.txt", "hello");
  out.append_line("rows.jsonl", "{}");
  out.append_line("rows.jsonl", "{}");
  out.record("rows.jsonl");
  const auto rec = out.outputs();
  REQUIRE(rec.size() == 2);
  CHECK(rec[0].path == "a.txt");
  CHECK(rec[0].sha256 == io::sha256_hex("hello"));
  CHECK(rec[0].bytes == 5);
  CHECK(io::read_file(dir / "rows.jsonl") == "{}\n{}\n");
  fs::remove_all(dir);
}

TEST_CASE("manifest digest ignores timestamps only") {
  io::RunManifest m;
  m.command = "simulate";
  m.config = json{{"seed", 3}};
  m.config_digest = io::sha256_hex(io::dump_json(m.config));
  m.seed = 3;
  m.outputs = {{"stream.csv", io::sha256_hex("x"), 1}};
  m.started_utc = "2020-01-01T00:00:00Z";
  m.finished_utc = "2020-01-01T00:00:01Z";

  auto later = m;
  later.started_utc = later.finished_utc = "2030-06-01T00:00:00Z";
  CHECK(later.digest() == m.digest());
  auto other = m;
  other.seed = 4;
  CHECK(other.digest() != m.digest());

  const auto back = io::RunManifest::from_json(m.to_json());
  CHECK(back.digest() == m.digest());
  CHECK(back.outputs.size() == 1);
  CHECK(back.started_utc == m.started_utc);
}

TEST_CASE("configuration round trip and rejection") {
  const auto defaults = config::to_json(config::LabConfig{});
  CHECK(config::to_json(config::from_json(json::object())) == defaults);
  CHECK(config::to_json(config::from_json(defaults)) == defaults);

  json edited = defaults;
  edited["grid"]["dr_nm"] = 5.0;
  edited["photon"]["pulses"] = 1234;
  const auto cfg = config::from_json(edited);
  CHECK(cfg.design.grid.dr_nm == 5.0);
  CHECK(cfg.photon.pulses == 1234);

  auto message_of = [](const json& doc) {
    try {
      config::from_json(doc);
    } catch (const Error& e) {
      CHECK(e.kind() == ErrorKind::ConfigInvalid);
      return std::string(e.what());
    }
    return std::string("accepted");
  };
  CHECK(message_of(json{{"grid", {{"dr_nmm", 5.0}}}}).find("/grid/dr_nmm") != std::string::npos);
  CHECK(message_of(json{{"photon", {{"pulses", "many"}}}}).find("/photon/pulses") != std::string::npos);
  CHECK(message_of(json{{"layers", {{{"name", "x"}, {"thickness_nm", 5.0}, {"index_table", {{400.0}}}}}}})
            .find("/layers/0/index_table") != std::string::npos);
  CHECK(message_of(json::array()) != "accepted");
}

TEST_CASE("schema declares every configuration key with its default") {
  const auto schema = config::schema();
  CHECK(schema["additionalProperties"] == false);
  check_schema_covers(config::to_json(config::LabConfig{}), schema, "");
}

TEST_CASE("exit codes by error kind") {
  CHECK(pipeline::exit_code_for(ErrorKind::UsageError) == 2);
  CHECK(pipeline::exit_code_for(ErrorKind::ConfigInvalid) == 2);
  CHECK(pipeline::exit_code_for(ErrorKind::ConfigError) == 2);
  CHECK(pipeline::exit_code_for(ErrorKind::NoResonance) == 1);
  CHECK(pipeline::exit_code_for(ErrorKind::IoFailure) == 1);
}

TEST_CASE("histogram columns from the antibunched fixture") {
  const auto t = io::read_csv(fs::path(BULLSEYE_TEST_DATA) / "hist_antibunched.csv");
  const double period = 1.0e6 / 76.0;
  const auto h = pipeline::histogram_from_columns(t.column("delay_ps"), t.column("counts"), period);
  CHECK(h.bin_width_ps == 256.0);
  CHECK(h.max_delay_ps == 212992.0);
  const auto bars = photon::pulse_normalize(h, period);
  CHECK(bars.g2_zero == doctest::Approx(0.35).epsilon(1e-12));
}
