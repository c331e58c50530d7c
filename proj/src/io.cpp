#include "bullseye/io.hpp"

#include <openssl/evp.h>

#include <charconv>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <fstream>
#include <memory>
#include <sstream>
#include <system_error>

#include <unistd.h>

#include "bullseye/error.hpp"

namespace bullseye::io {

namespace {

[[noreturn]] void io_fail(const std::string& what) { throw Error(ErrorKind::IoFailure, what); }

struct DigestCtx {
  std::unique_ptr<EVP_MD_CTX, decltype(&EVP_MD_CTX_free)> ctx{EVP_MD_CTX_new(), &EVP_MD_CTX_free};

  DigestCtx() {
    if (!ctx || EVP_DigestInit_ex(ctx.get(), EVP_sha256(), nullptr) != 1) io_fail("sha256 init failed");
  }
  void update(const void* data, std::size_t n) {
    if (EVP_DigestUpdate(ctx.get(), data, n) != 1) io_fail("sha256 update failed");
  }
  std::string hex() {
    unsigned char md[EVP_MAX_MD_SIZE];
    unsigned int len = 0;
    if (EVP_DigestFinal_ex(ctx.get(), md, &len) != 1) io_fail("sha256 final failed");
    static constexpr char kHex[] = "0123456789abcdef";
    std::string out(2 * len, '0');
    for (unsigned int k = 0; k < len; ++k) {
      out[2 * k] = kHex[md[k] >> 4];
      out[2 * k + 1] = kHex[md[k] & 15];
    }
    return out;
  }
};

std::string trim(std::string_view s) {
  std::size_t a = 0, b = s.size();
  while (a < b && (s[a] == ' ' || s[a] == '\t' || s[a] == '\r')) ++a;
  while (b > a && (s[b - 1] == ' ' || s[b - 1] == '\t' || s[b - 1] == '\r')) --b;
  return std::string(s.substr(a, b - a));
}

std::vector<std::string> split(std::string_view line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  for (;;) {
    const auto comma = line.find(',', start);
    out.push_back(trim(line.substr(start, comma == std::string_view::npos ? std::string_view::npos : comma - start)));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

json record_json(const FileRecord& r) { return json{{"path", r.path}, {"sha256", r.sha256}, {"bytes", r.bytes}}; }

FileRecord record_from(const json& j) {
  return FileRecord{j.at("path").get<std::string>(), j.at("sha256").get<std::string>(),
                    j.at("bytes").get<std::uintmax_t>()};
}

}  // namespace

std::string sha256_hex(std::string_view bytes) {
  DigestCtx d;
  d.update(bytes.data(), bytes.size());
  return d.hex();
}

std::string sha256_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail("cannot read " + path.string());
  DigestCtx d;
  std::vector<char> buf(1 << 16);
  while (in) {
    in.read(buf.data(), static_cast<std::streamsize>(buf.size()));
    d.update(buf.data(), static_cast<std::size_t>(in.gcount()));
  }
  return d.hex();
}

void write_atomic(const fs::path& path, std::string_view bytes) {
  const fs::path tmp = path.string() + ".tmp." + std::to_string(::getpid());
  {
    std::FILE* f = std::fopen(tmp.c_str(), "wb");
    if (!f) io_fail("cannot create " + tmp.string());
    const bool ok = std::fwrite(bytes.data(), 1, bytes.size(), f) == bytes.size() && std::fflush(f) == 0 &&
                    ::fsync(fileno(f)) == 0;
    if (std::fclose(f) != 0 || !ok) {
      std::error_code ec;
      fs::remove(tmp, ec);
      io_fail("cannot write " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp, ec);
    io_fail("cannot rename onto " + path.string());
  }
}

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) io_fail("cannot read " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

std::string dump_json(const json& value) { return value.dump(2) + "\n"; }

std::string format_number(double x) {
  char buf[64];
  const auto res = std::to_chars(buf, buf + sizeof buf, x);
  return std::string(buf, res.ptr);
}

const std::vector<double>& Table::column(std::string_view name) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name) return columns[k];
  }
  throw Error(ErrorKind::InvalidArgument, "table has no column " + std::string(name));
}

const std::vector<double>& Table::column(std::string_view name, std::string_view alias) const {
  for (std::size_t k = 0; k < header.size(); ++k) {
    if (header[k] == name || header[k] == alias) return columns[k];
  }
  throw Error(ErrorKind::InvalidArgument, "table has no column " + std::string(name));
}

std::string to_csv(const Table& t) {
  if (t.columns.size() != t.header.size()) throw Error(ErrorKind::InvalidArgument, "header and columns differ");
  std::string out;
  for (std::size_t c = 0; c < t.header.size(); ++c) out += (c ? "," : "") + t.header[c];
  out += '\n';
  const std::size_t n = t.rows();
  for (const auto& col : t.columns) {
    if (col.size() != n) throw Error(ErrorKind::InvalidArgument, "columns differ in length");
  }
  for (std::size_t r = 0; r < n; ++r) {
    for (std::size_t c = 0; c < t.columns.size(); ++c) {
      if (c) out += ',';
      out += format_number(t.columns[c][r]);
    }
    out += '\n';
  }
  return out;
}

Table parse_csv(std::string_view text, const std::string& origin) {
  Table t;
  std::size_t pos = 0, line_no = 0;
  bool have_header = false;
  while (pos < text.size()) {
    auto end = text.find('\n', pos);
    if (end == std::string_view::npos) end = text.size();
    const auto line = text.substr(pos, end - pos);
    pos = end + 1;
    ++line_no;
    if (trim(line).empty() || trim(line).front() == '#') continue;
    auto cells = split(line);
    if (!have_header) {
      t.header = cells;
      t.columns.assign(cells.size(), {});
      have_header = true;
      continue;
    }
    if (cells.size() != t.header.size()) {
      io_fail(origin + ":" + std::to_string(line_no) + ": expected " + std::to_string(t.header.size()) + " fields");
    }
    for (std::size_t c = 0; c < cells.size(); ++c) {
      double v = 0.0;
      const auto& s = cells[c];
      const auto res = std::from_chars(s.data(), s.data() + s.size(), v);
      if (res.ec != std::errc() || res.ptr != s.data() + s.size()) {
        io_fail(origin + ":" + std::to_string(line_no) + ": not a number: " + s);
      }
      t.columns[c].push_back(v);
    }
  }
  if (!have_header) io_fail(origin + ": empty file");
  return t;
}

Table read_csv(const fs::path& path) { return parse_csv(read_file(path), path.string()); }

OutputDir::OutputDir(fs::path root) : root_(std::move(root)) {
  std::error_code ec;
  fs::create_directories(root_, ec);
  if (ec || !fs::is_directory(root_)) io_fail("cannot create output directory " + root_.string());
}

void OutputDir::write(const std::string& name, std::string_view bytes) {
  std::lock_guard lock(mutex_);
  write_atomic(root_ / name, bytes);
  FileRecord rec{name, sha256_hex(bytes), bytes.size()};
  for (auto& r : outputs_) {
    if (r.path == name) {
      r = rec;
      return;
    }
  }
  outputs_.push_back(rec);
}

void OutputDir::append_line(const std::string& name, std::string_view line) {
  std::lock_guard lock(mutex_);
  std::ofstream out(root_ / name, std::ios::app | std::ios::binary);
  out << line << '\n';
  out.flush();
  if (!out) io_fail("cannot append to " + (root_ / name).string());
}

void OutputDir::record(const std::string& name) {
  std::lock_guard lock(mutex_);
  const auto p = root_ / name;
  FileRecord rec{name, sha256_file(p), fs::file_size(p)};
  for (auto& r : outputs_) {
    if (r.path == name) {
      r = rec;
      return;
    }
  }
  outputs_.push_back(rec);
}

std::vector<FileRecord> OutputDir::outputs() const {
  std::lock_guard lock(mutex_);
  return outputs_;
}

namespace {

json manifest_body(const RunManifest& m) {
  json in = json::array(), out = json::array();
  for (const auto& r : m.inputs) in.push_back(record_json(r));
  for (const auto& r : m.outputs) out.push_back(record_json(r));
  return json{{"tool_version", m.tool_version}, {"command", m.command}, {"config", m.config},
              {"config_digest", m.config_digest}, {"seed", m.seed}, {"arguments", m.arguments},
              {"inputs", in}, {"outputs", out}};
}

}  // namespace

std::string RunManifest::digest() const { return sha256_hex(manifest_body(*this).dump()); }

json RunManifest::to_json() const {
  json j = manifest_body(*this);
  j["started_utc"] = started_utc;
  j["finished_utc"] = finished_utc;
  j["manifest_digest"] = digest();
  return j;
}

RunManifest RunManifest::from_json(const json& j) {
  RunManifest m;
  try {
    m.tool_version = j.at("tool_version").get<std::string>();
    m.command = j.at("command").get<std::string>();
    m.config = j.at("config");
    m.config_digest = j.at("config_digest").get<std::string>();
    m.seed = j.at("seed").get<std::uint64_t>();
    m.arguments = j.value("arguments", json::object());
    for (const auto& r : j.at("inputs")) m.inputs.push_back(record_from(r));
    for (const auto& r : j.at("outputs")) m.outputs.push_back(record_from(r));
    m.started_utc = j.value("started_utc", "");
    m.finished_utc = j.value("finished_utc", "");
  } catch (const json::exception& e) {
    throw Error(ErrorKind::ConfigInvalid, std::string("manifest: ") + e.what());
  }
  if (j.contains("manifest_digest") && j.at("manifest_digest") != m.digest()) {
    throw Error(ErrorKind::ConfigInvalid, "manifest: digest does not match its contents");
  }
  return m;
}

FileRecord describe_input(const fs::path& path) {
  if (!fs::is_regular_file(path)) io_fail("input not found: " + path.string());
  return FileRecord{path.string(), sha256_file(path), fs::file_size(path)};
}

std::string utc_now() {
  const auto now = std::chrono::system_clock::to_time_t(std::chrono::system_clock::now());
  std::tm tm{};
  gmtime_r(&now, &tm);
  char buf[32];
  std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
  return buf;
}

}  // namespace bullseye::io
