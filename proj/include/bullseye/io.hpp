#pragma once

#include <cstdint>
#include <filesystem>
#include <mutex>
#include <string>
#include <string_view>
#include <vector>

#include <json.hpp>

// Files: hashing, atomic writes, CSV tables and the run manifest.
namespace bullseye::io {

using json = nlohmann::json;
namespace fs = std::filesystem;

inline constexpr const char* kToolVersion = "0.1.0";

std::string sha256_hex(std::string_view bytes);
/// IoFailure when the file cannot be read.
std::string sha256_file(const fs::path& path);

/// Writes to a sibling temporary file, flushes it and renames it over `path`.
void write_atomic(const fs::path& path, std::string_view bytes);
std::string read_file(const fs::path& path);

/// Canonical JSON text: sorted keys, two-space indent, trailing newline.
std::string dump_json(const json& value);

/// Shortest decimal that reads back to the same double (at most 17 digits).
std::string format_number(double x);

/// Column-major numeric table with a header row.
struct Table {
  std::vector<std::string> header;
  std::vector<std::vector<double>> columns;

  std::size_t rows() const { return columns.empty() ? 0 : columns.front().size(); }
  /// InvalidArgument when the name is missing.
  const std::vector<double>& column(std::string_view name) const;
  const std::vector<double>& column(std::string_view name, std::string_view alias) const;
};

std::string to_csv(const Table& table);
/// Comma separated, one header line; IoFailure on ragged or non-numeric rows.
Table parse_csv(std::string_view text, const std::string& origin = "csv");
Table read_csv(const fs::path& path);

struct FileRecord {
  std::string path;  ///< relative to the output directory when inside it
  std::string sha256;
  std::uintmax_t bytes = 0;
};

/// Output directory that serializes writes and records what it wrote, so the
/// manifest can list every artifact with its hash.
class OutputDir {
 public:
  explicit OutputDir(fs::path root);

  const fs::path& root() const { return root_; }
  fs::path path(const std::string& name) const { return root_ / name; }

  void write(const std::string& name, std::string_view bytes);
  void write_json(const std::string& name, const json& value) { write(name, dump_json(value)); }
  void write_csv(const std::string& name, const Table& table) { write(name, to_csv(table)); }
  /// Appends a line and flushes; used for incremental sweep rows.
  void append_line(const std::string& name, std::string_view line);
  /// Records a file written by `append_line` in the inventory.
  void record(const std::string& name);

  std::vector<FileRecord> outputs() const;

 private:
  fs::path root_;
  mutable std::mutex mutex_;
  std::vector<FileRecord> outputs_;
};

struct RunManifest {
  std::string tool_version = kToolVersion;
  std::string command;
  json config;                 ///< canonical configuration the run used
  std::string config_digest;   ///< sha256 of dump_json(config)
  std::uint64_t seed = 0;
  json arguments = json::object();  ///< command-specific arguments
  std::vector<FileRecord> inputs;
  std::vector<FileRecord> outputs;
  std::string started_utc;
  std::string finished_utc;

  /// Hash over everything except the timestamps; identical runs share it.
  std::string digest() const;
  json to_json() const;
  static RunManifest from_json(const json& j);
};

FileRecord describe_input(const fs::path& path);
std::string utc_now();

}  // namespace bullseye::io
