#pragma once

#include <chrono>
#include <filesystem>
#include <string>

#include <json.hpp>

#include "cpforge/trace_io.hpp"
#include "cpforge_cli/commands.hpp"

namespace cpforge::cli {

/// Writes manifest.json as soon as it is built and rewrites it on finish().
/// A guard destroyed without finish() records the run as failed.
class ManifestGuard {
 public:
  ManifestGuard(std::filesystem::path out_dir, RunManifest manifest,
                std::string filename = "manifest.json");
  ManifestGuard(const ManifestGuard&) = delete;
  ManifestGuard& operator=(const ManifestGuard&) = delete;
  ~ManifestGuard();

  void add_output(const std::string& key, const std::filesystem::path& path);
  void set(const std::string& key, nlohmann::json value);
  void finish();

  [[nodiscard]] const std::filesystem::path& dir() const noexcept { return dir_; }

 private:
  void write();

  std::filesystem::path dir_;
  std::string filename_;
  RunManifest manifest_;
  std::chrono::steady_clock::time_point start_;
  bool done_ = false;
};

nlohmann::json to_json(const DataArgs& args);
nlohmann::json to_json(const SearchConfig& config);

}  // namespace cpforge::cli
