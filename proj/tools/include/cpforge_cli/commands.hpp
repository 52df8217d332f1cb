#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpforge/cp_engine.hpp"
#include "cpforge/data.hpp"
#include "cpforge/search.hpp"

namespace cpforge::cli {

struct DataArgs {
  std::filesystem::path data;
  std::string label;
  std::string positive = "1";
  std::string missing = "error";  // zero | error
};

struct SplitArgs {
  std::string mode = "first-half";  // first-half | explicit
  std::vector<std::string> shuffle;
  std::optional<std::filesystem::path> file;
};

struct SearchArgs {
  std::size_t iters = 100;
  std::string candidates = "auto";  // auto | exhaustive | sampled
  std::size_t samples = kDefaultSampleCount;
  std::size_t patience = 1;
  std::size_t pvalue_every = 10;
  std::size_t pvalue_resamples = 999;
  bool cross_class = false;
};

struct ProtectHsicArgs {
  DataArgs data;
  SplitArgs split;
  SearchArgs search;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
};

struct ProtectOddsArgs {
  DataArgs data;
  std::string xc;
  std::string xa;
  std::string predicate;
  std::optional<double> target_rho;
  std::optional<std::int64_t> shift_i;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
};

struct OptimizeArgs {
  DataArgs data;
  SplitArgs split;
  SearchArgs search;
  std::string loss = "logistic";
  std::vector<double> cv_grid;  // empty: default grid
  std::size_t folds = 5;
  std::size_t retrain_every = 0;
  double holdout = 0.2;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
};

struct CausalArgs {
  std::string mode;  // adjustments | split | jam
  std::optional<std::filesystem::path> dag;
  std::size_t max_adjust = SIZE_MAX;
  // jam mode
  std::optional<DataArgs> data;
  std::string x1, x2, x3;
  std::optional<double> epsilon;
  std::size_t iters = 100000;
  std::uint64_t seed = 0;
  std::filesystem::path out_dir = ".";
};

struct ReportArgs {
  std::vector<std::filesystem::path> traces;
  std::string format = "json";  // json | csv
  std::optional<std::filesystem::path> out;
};

int cmd_protect_hsic(const ProtectHsicArgs& args, std::ostream& log);
int cmd_protect_odds(const ProtectOddsArgs& args, std::ostream& log);
int cmd_optimize(const OptimizeArgs& args, std::ostream& log);
int cmd_causal(const CausalArgs& args, std::ostream& log);
int cmd_report(const ReportArgs& args, std::ostream& out);

/// Parses argv and dispatches; returns the process exit code.
int run(int argc, char** argv);

// Helpers shared by the commands; exposed for tests.

Dataset load_dataset(const DataArgs& args);
FeatureSplit resolve_split(const Dataset& ds, const SplitArgs& args);
SearchConfig make_search_config(const SearchArgs& args, std::uint64_t seed);

/// Rewrites the input CSV text with the shuffle columns of every data row
/// taken from the row selected by `perm` (indices in the dataset's class-sorted
/// order). Cells are moved verbatim, so the identity returns the input bytes.
std::string permute_csv_text(const std::string& text, const Dataset& ds, const FeatureSplit& split,
                             const Permutation& perm);

/// Per-iteration mean and standard error (n - 1 denominator) of every numeric
/// trace column over several traces of equal length.
nlohmann::json aggregate_traces(const std::vector<std::vector<TraceRecord>>& traces);
std::string aggregate_to_csv(const nlohmann::json& aggregate);

}  // namespace cpforge::cli
