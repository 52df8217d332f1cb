#include "cpforge/trace_io.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <iomanip>
#include <limits>
#include <sstream>

#include "cpforge/data.hpp"
#include "cpforge/error.hpp"

namespace cpforge {

namespace {

std::vector<std::string> split_fields(const std::string& line) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : line) {
    if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur.push_back(c);
    }
  }
  out.push_back(std::move(cur));
  return out;
}

template <class T>
T parse_number(const std::string& s, std::size_t line) {
  T v{};
  const auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  require(ec == std::errc() && ptr == s.data() + s.size(), ErrorKind::data,
          "trace line " + std::to_string(line) + ": bad number '" + s + "'");
  return v;
}

std::optional<double> parse_optional(const std::string& s, std::size_t line) {
  if (s.empty()) return std::nullopt;
  if (s == "inf") return std::numeric_limits<double>::infinity();
  if (s == "nan") return std::numeric_limits<double>::quiet_NaN();
  return parse_number<double>(s, line);
}

std::string cell(const std::optional<double>& v) { return v ? format_double(*v) : std::string(); }

}  // namespace

std::string trace_row(const TraceRecord& r) {
  std::ostringstream out;
  out << r.iteration << ',' << format_double(r.objective) << ',' << cell(r.hsic) << ','
      << cell(r.p_value) << ',' << cell(r.phi_risk) << ',' << cell(r.test_error) << ','
      << cell(r.rcp_bound) << ',' << r.odd_cycles << ',' << r.fixed_points << ',';
  if (r.pair) out << r.pair->first << ',' << r.pair->second;
  else out << ',';
  out << '\n';
  return out.str();
}

std::string trace_to_csv(const std::vector<TraceRecord>& trace) {
  std::string out = std::string(kTraceHeader) + "\n";
  for (const auto& r : trace) out += trace_row(r);
  return out;
}

std::vector<TraceRecord> trace_from_csv(const std::string& text) {
  std::istringstream in(text);
  std::string line;
  require(static_cast<bool>(std::getline(in, line)), ErrorKind::data, "empty trace file");
  if (!line.empty() && line.back() == '\r') line.pop_back();
  require(line == kTraceHeader, ErrorKind::data, "unexpected trace header: " + line);
  std::vector<TraceRecord> out;
  std::size_t n = 1;
  while (std::getline(in, line)) {
    ++n;
    if (line.empty() || line == "\r") continue;
    const auto f = split_fields(line);
    require(f.size() == 11, ErrorKind::data,
            "trace line " + std::to_string(n) + ": expected 11 fields");
    TraceRecord r;
    r.iteration = parse_number<std::size_t>(f[0], n);
    const auto obj = parse_optional(f[1], n);
    require(obj.has_value(), ErrorKind::data, "trace line " + std::to_string(n) + ": no objective");
    r.objective = *obj;
    r.hsic = parse_optional(f[2], n);
    r.p_value = parse_optional(f[3], n);
    r.phi_risk = parse_optional(f[4], n);
    r.test_error = parse_optional(f[5], n);
    r.rcp_bound = parse_optional(f[6], n);
    r.odd_cycles = parse_number<std::size_t>(f[7], n);
    r.fixed_points = parse_number<std::size_t>(f[8], n);
    require(f[9].empty() == f[10].empty(), ErrorKind::data,
            "trace line " + std::to_string(n) + ": half a pair");
    if (!f[9].empty())
      r.pair.emplace(parse_number<std::size_t>(f[9], n), parse_number<std::size_t>(f[10], n));
    out.push_back(r);
  }
  return out;
}

void write_trace(const std::filesystem::path& path, const std::vector<TraceRecord>& trace) {
  write_text_file(path, trace_to_csv(trace));
}

std::vector<TraceRecord> read_trace(const std::filesystem::path& path) {
  return trace_from_csv(read_text_file(path));
}

std::string file_hash(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::data, "cannot open " + path.string());
  std::uint64_t h = 0xcbf29ce484222325ULL;
  char buf[1 << 14];
  while (in.read(buf, sizeof(buf)) || in.gcount() > 0) {
    for (std::streamsize i = 0; i < in.gcount(); ++i) {
      h ^= static_cast<unsigned char>(buf[i]);
      h *= 0x100000001b3ULL;
    }
  }
  std::ostringstream out;
  out << std::hex << std::setw(16) << std::setfill('0') << h;
  return out.str();
}

nlohmann::json to_json(const RunManifest& manifest) {
  nlohmann::json inputs = nlohmann::json::array();
  for (const auto& p : manifest.inputs) {
    std::error_code ec;
    const bool readable = std::filesystem::is_regular_file(p, ec);
    inputs.push_back({{"path", p.string()},
                      {"fnv1a64", readable ? nlohmann::json(file_hash(p)) : nlohmann::json(nullptr)}});
  }
  return {{"tool", "cpforge"},
          {"version", manifest.version},
          {"command", manifest.command},
          {"config", manifest.config},
          {"seed", manifest.seed},
          {"inputs", inputs},
          {"status", manifest.status},
          {"wall_seconds", manifest.wall_seconds},
          {"outputs", manifest.outputs}};
}

void write_manifest(const std::filesystem::path& path, const RunManifest& manifest) {
  write_text_file(path, to_json(manifest).dump(2) + "\n");
}

void write_text_file(const std::filesystem::path& path, const std::string& text) {
  auto tmp = path;
  tmp += ".tmp";
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    require(static_cast<bool>(out), ErrorKind::data, "cannot write " + path.string());
    out << text;
    require(static_cast<bool>(out), ErrorKind::data, "write failed: " + path.string());
  }
  std::error_code ec;
  std::filesystem::rename(tmp, path, ec);
  require(!ec, ErrorKind::data, "cannot write " + path.string() + ": " + ec.message());
}

std::string read_text_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(static_cast<bool>(in), ErrorKind::data, "cannot open " + path.string());
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

}  // namespace cpforge
