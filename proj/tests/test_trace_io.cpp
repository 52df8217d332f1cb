#include <doctest.h>

#include <filesystem>

#include "cpforge/error.hpp"
#include "cpforge/trace_io.hpp"

using namespace cpforge;
namespace fs = std::filesystem;

namespace {

std::vector<TraceRecord> sample_trace() {
  std::vector<TraceRecord> t(3);
  t[0].objective = 1.0 / 3.0;
  t[0].hsic = 1.0 / 3.0;
  t[0].p_value = 0.001;
  t[0].rcp_bound = 0.0;
  t[0].fixed_points = 10;
  t[1].iteration = 1;
  t[1].objective = 0.1 + 0.2;
  t[1].phi_risk = 0.693147180559945;
  t[1].test_error = 0.25;
  t[1].odd_cycles = 0;
  t[1].fixed_points = 8;
  t[1].pair = std::pair<std::size_t, std::size_t>{2, 7};
  t[2].iteration = 2;
  t[2].objective = -1e-300;
  t[2].fixed_points = 8;
  return t;
}

bool same(const TraceRecord& a, const TraceRecord& b) {
  return a.iteration == b.iteration && a.objective == b.objective && a.hsic == b.hsic &&
         a.p_value == b.p_value && a.phi_risk == b.phi_risk && a.test_error == b.test_error &&
         a.rcp_bound == b.rcp_bound && a.odd_cycles == b.odd_cycles &&
         a.fixed_points == b.fixed_points && a.pair == b.pair;
}

}  // namespace

TEST_CASE("trace CSV round-trips bit-exactly") {
  const auto t = sample_trace();
  const std::string csv = trace_to_csv(t);
  CHECK(csv.rfind(std::string(kTraceHeader) + "\n", 0) == 0);
  const auto back = trace_from_csv(csv);
  REQUIRE(back.size() == t.size());
  for (std::size_t i = 0; i < t.size(); ++i) CHECK(same(back[i], t[i]));
  CHECK(trace_to_csv(back) == csv);
  CHECK(trace_row(t[2]).find(",,") != std::string::npos);
}

TEST_CASE("malformed traces are rejected") {
  const std::string h = std::string(kTraceHeader) + "\n";
  CHECK_THROWS_AS(trace_from_csv("iteration,objective\n0,1\n"), Error);
  CHECK_THROWS_AS(trace_from_csv(h + "0,1,,,,,,0,5,3\n"), Error);
  CHECK_THROWS_AS(trace_from_csv(h + "0,1,,,,,,0,5,3,\n"), Error);
  CHECK_THROWS_AS(trace_from_csv(h + "0,abc,,,,,,0,5,,\n"), Error);
  CHECK(trace_from_csv(h + "0,1,,,,,,0,5,,\n").size() == 1);
}

TEST_CASE("files, hashes and manifests") {
  const fs::path dir = fs::temp_directory_path() / "cpforge_trace_io_test";
  fs::remove_all(dir);
  fs::create_directories(dir);
  write_text_file(dir / "empty.txt", "");
  write_text_file(dir / "a.txt", "a");
  // FNV-1a 64 reference values.
  CHECK(file_hash(dir / "empty.txt") == "cbf29ce484222325");
  CHECK(file_hash(dir / "a.txt") == "af63dc4c8601ec8c");
  CHECK(read_text_file(dir / "a.txt") == "a");
  CHECK_THROWS_AS(read_text_file(dir / "missing.txt"), Error);

  write_trace(dir / "trace.csv", sample_trace());
  CHECK(read_trace(dir / "trace.csv").size() == 3);

  RunManifest m;
  m.command = "protect-hsic";
  m.version = "test";
  m.seed = 7;
  m.inputs = {dir / "a.txt"};
  m.outputs["trace"] = "trace.csv";
  write_manifest(dir / "manifest.json", m);
  const auto j = nlohmann::json::parse(read_text_file(dir / "manifest.json"));
  CHECK(j.at("command") == "protect-hsic");
  CHECK(j.at("seed") == 7);
  CHECK(j.at("status") == "running");
  CHECK(j.at("inputs").at(0).at("fnv1a64") == "af63dc4c8601ec8c");
  for (const auto& e : fs::directory_iterator(dir))
    CHECK(e.path().extension() != ".tmp");
  fs::remove_all(dir);
}
