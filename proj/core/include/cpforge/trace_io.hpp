#pragma once

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpforge/search.hpp"

namespace cpforge {

/// Column order of trace files. Missing values are empty cells.
inline constexpr const char* kTraceHeader =
    "iteration,objective,hsic,p_value,phi_risk,test_error,rcp_bound,odd_cycles,fixed_points,"
    "pair_l,pair_l2";

/// One data line (with trailing newline) in the trace file format.
std::string trace_row(const TraceRecord& record);
std::string trace_to_csv(const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> trace_from_csv(const std::string& text);

void write_trace(const std::filesystem::path& path, const std::vector<TraceRecord>& trace);
std::vector<TraceRecord> read_trace(const std::filesystem::path& path);

/// 64-bit FNV-1a of a file's bytes, as 16 lowercase hex digits.
std::string file_hash(const std::filesystem::path& path);

/// Run manifest: command, configuration, seed, input hashes, status and timing.
struct RunManifest {
  std::string command;
  std::string version;
  nlohmann::json config = nlohmann::json::object();
  std::uint64_t seed = 0;
  std::vector<std::filesystem::path> inputs;
  std::string status = "running";
  double wall_seconds = 0.0;
  nlohmann::json outputs = nlohmann::json::object();
};

nlohmann::json to_json(const RunManifest& manifest);
void write_manifest(const std::filesystem::path& path, const RunManifest& manifest);

/// Writes text atomically: to a sibling temporary file, then renamed.
void write_text_file(const std::filesystem::path& path, const std::string& text);
std::string read_text_file(const std::filesystem::path& path);

}  // namespace cpforge
