#include "cpforge_cli/commands.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <ostream>

#include <boost/rational.hpp>

#include "common.hpp"
#include "cpforge/causal.hpp"
#include "cpforge/complexity.hpp"
#include "cpforge/error.hpp"
#include "cpforge/fairness.hpp"
#include "cpforge/kernels_hsic.hpp"
#include "cpforge/learn.hpp"
#include "cpforge/trace_io.hpp"

#ifndef CPFORGE_VERSION
#define CPFORGE_VERSION "unknown"
#endif

namespace cpforge::cli {

namespace {

RunManifest make_manifest(const std::string& command, std::uint64_t seed,
                          std::vector<std::filesystem::path> inputs, nlohmann::json config) {
  RunManifest m;
  m.command = command;
  m.version = CPFORGE_VERSION;
  m.seed = seed;
  m.inputs = std::move(inputs);
  m.config = std::move(config);
  return m;
}

std::size_t feature(const Dataset& ds, const std::string& name, const char* flag) {
  require(!name.empty(), ErrorKind::usage, std::string(flag) + " is required");
  const auto j = ds.feature_index(name);
  require(j.has_value(), ErrorKind::usage, std::string(flag) + ": no feature named '" + name + "'");
  return *j;
}

nlohmann::json split_json(const Dataset& ds, const FeatureSplit& split) {
  nlohmann::json a = nlohmann::json::array(), s = nlohmann::json::array();
  for (std::size_t j : split.anchor()) a.push_back(ds.feature_names()[j]);
  for (std::size_t j : split.shuffle()) s.push_back(ds.feature_names()[j]);
  return {{"anchor", a}, {"shuffle", s}};
}

std::string rational_text(const Rational& r) {
  return std::to_string(r.numerator()) + "/" + std::to_string(r.denominator());
}

/// Streams trace lines to disk as the search produces them.
class TraceStream {
 public:
  explicit TraceStream(const std::filesystem::path& path) : out_(path, std::ios::binary) {
    require(static_cast<bool>(out_), ErrorKind::data, "cannot write " + path.string());
    out_ << kTraceHeader << '\n';
  }
  void operator()(const TraceRecord& r) { out_ << trace_row(r) << std::flush; }

 private:
  std::ofstream out_;
};

void write_json(const std::filesystem::path& path, const nlohmann::json& j) {
  write_text_file(path, j.dump(2) + "\n");
}

}  // namespace

// ---------------------------------------------------------------- protect-hsic

int cmd_protect_hsic(const ProtectHsicArgs& args, std::ostream& log) {
  const SearchConfig config = make_search_config(args.search, args.seed);
  nlohmann::json cfg = {{"data", to_json(args.data)}, {"search", to_json(config)},
                        {"split_mode", args.split.mode}};
  ManifestGuard guard(args.out_dir, make_manifest("protect-hsic", args.seed, {args.data.data}, cfg));

  const std::string text = read_text_file(args.data.data);
  const Dataset ds = load_dataset(args.data);
  const FeatureSplit split = resolve_split(ds, args.split);
  guard.set("split", split_json(ds, split));

  // Kernels and bounds are computed on standardized features; the output CSV
  // keeps the raw cells.
  const Dataset std_ds = standardize(ds).data;
  const KernelMatrix ku = gaussian_kernel(std_ds, split.anchor());
  const KernelMatrix kv = gaussian_kernel(std_ds, split.shuffle());
  guard.set("bandwidth", {{"anchor", ku.bandwidth}, {"shuffle", kv.bandwidth},
                          {"anchor_fallback", ku.bandwidth_fallback},
                          {"shuffle_fallback", kv.bandwidth_fallback}});

  HsicObjective objective(ku.mat, kv.mat);
  const auto trace_path = args.out_dir / "trace.csv";
  TraceStream stream(trace_path);
  SearchContext ctx;
  ctx.on_record = [&stream](const TraceRecord& r) { stream(r); };
  const SearchResult res = crossover_learn(std_ds, split, config, objective, std::move(ctx));

  const auto perm_path = args.out_dir / "permutation.json";
  const auto csv_path = args.out_dir / "protected.csv";
  write_json(perm_path, permutation_to_json(res.permutation,
                                            {config.block_class, args.seed, config.iterations}));
  write_text_file(csv_path, permute_csv_text(text, ds, split, res.permutation));
  guard.add_output("trace", trace_path);
  guard.add_output("permutation", perm_path);
  guard.add_output("protected", csv_path);
  guard.finish();

  const auto& first = res.trace.front();
  const auto& last = res.trace.back();
  log << "hsic " << format_double(first.objective) << " -> " << format_double(last.objective)
      << " after " << res.accepted << " swaps";
  if (res.stopped_early) log << " (no improving swap from iteration " << res.stop_iteration << ")";
  log << '\n';
  return 0;
}

// ---------------------------------------------------------------- protect-odds

int cmd_protect_odds(const ProtectOddsArgs& args, std::ostream& log) {
  require(args.target_rho.has_value() != args.shift_i.has_value(), ErrorKind::usage,
          "give exactly one of --target-rho and --shift-i");
  nlohmann::json cfg = {{"data", to_json(args.data)}, {"xc", args.xc}, {"xa", args.xa},
                        {"predicate", args.predicate}};
  if (args.target_rho) cfg["target_rho"] = *args.target_rho;
  if (args.shift_i) cfg["shift_i"] = *args.shift_i;
  ManifestGuard guard(args.out_dir, make_manifest("protect-odds", args.seed, {args.data.data}, cfg));

  const std::string text = read_text_file(args.data.data);
  const Dataset ds = load_dataset(args.data);
  const std::size_t xc = feature(ds, args.xc, "--xc");
  const std::size_t xa = feature(ds, args.xa, "--xa");
  const Predicate pi = Predicate::parse(ds, args.predicate);
  const ContingencyTable before = contingency(ds, xc, xa, pi);
  const std::int64_t i = args.shift_i ? *args.shift_i : shift_for_target(before, *args.target_rho);
  const OddsCp cp = build_odds_cp(ds, xc, xa, pi, i);

  const auto range = legal_shift_range(before);
  nlohmann::json report = {{"before", to_json(cp.before)},
                           {"after", to_json(cp.after)},
                           {"shift_i", i},
                           {"legal_range", {range.lo, range.hi}},
                           {"delta", rational_text(cp.delta)},
                           {"delta_value", boost::rational_cast<double>(cp.delta)},
                           {"cross_class", cp.cross_class},
                           {"swaps", cp.permutation.size() - cycle_stats(cp.permutation).fixed_points}};
  if (cp.before.d > 0) report["odds_before"] = rational_text(odds_ratio_exact(cp.before));
  if (cp.after.d > 0) {
    report["odds_after"] = rational_text(odds_ratio_exact(cp.after));
    report["disparate_impact_ok"] = fairness_check(cp.after, FairnessCriterion::disparate_impact());
  }

  const auto report_path = args.out_dir / "odds_report.json";
  const auto perm_path = args.out_dir / "permutation.json";
  const auto csv_path = args.out_dir / "protected.csv";
  write_json(report_path, report);
  write_json(perm_path, permutation_to_json(cp.permutation, {!cp.cross_class, args.seed, 0}));
  write_text_file(csv_path, permute_csv_text(text, ds, cp.split, cp.permutation));
  guard.add_output("report", report_path);
  guard.add_output("permutation", perm_path);
  guard.add_output("protected", csv_path);
  guard.finish();

  log << "odds shift i=" << i << ": b/d " << cp.before.b << "/" << cp.before.d << " -> "
      << cp.after.b << "/" << cp.after.d;
  if (cp.cross_class) log << " (cross-class swaps: not block-class)";
  log << '\n';
  return 0;
}

// ---------------------------------------------------------------- optimize

int cmd_optimize(const OptimizeArgs& args, std::ostream& log) {
  SearchConfig config = make_search_config(args.search, args.seed);
  config.retrain_every = args.retrain_every;
  require(args.holdout > 0.0 && args.holdout < 1.0, ErrorKind::usage,
          "--holdout must lie in (0, 1)");
  require(args.folds >= 2, ErrorKind::usage, "--folds must be at least 2");
  const LossKind loss = parse_loss(args.loss);
  const std::vector<double> grid = args.cv_grid.empty() ? default_lambda_grid() : args.cv_grid;
  nlohmann::json cfg = {{"data", to_json(args.data)}, {"search", to_json(config)},
                        {"loss", args.loss},          {"cv_grid", grid},
                        {"folds", args.folds},        {"holdout", args.holdout},
                        {"split_mode", args.split.mode}};
  ManifestGuard guard(args.out_dir, make_manifest("optimize", args.seed, {args.data.data}, cfg));

  const Dataset ds = load_dataset(args.data);
  const FeatureSplit split = resolve_split(ds, args.split);
  guard.set("split", split_json(ds, split));

  std::vector<std::size_t> order(ds.m());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(args.seed, "holdout");
  std::shuffle(order.begin(), order.end(), rng);
  const auto n_test = static_cast<std::size_t>(
      std::max(1.0, std::round(args.holdout * static_cast<double>(ds.m()))));
  require(n_test < ds.m(), ErrorKind::data, "holdout leaves no training data");
  std::vector<std::size_t> test_rows(order.begin(), order.begin() + static_cast<long>(n_test));
  std::vector<std::size_t> train_rows(order.begin() + static_cast<long>(n_test), order.end());
  std::sort(test_rows.begin(), test_rows.end());
  std::sort(train_rows.begin(), train_rows.end());

  const Standardized st = standardize(ds.subset(train_rows));
  const Dataset test = apply_scaling(ds.subset(test_rows), st.params);

  TrainOptions opts;
  opts.loss = loss;
  const CvResult cv = cross_validate(st.data, opts, grid, args.folds, args.seed);
  opts.lambda = cv.lambda;
  const LinearModel baseline = train(st.data, opts);
  const double baseline_error = zero_one_error(baseline, test);

  PhiRiskObjective objective(st.data, split, baseline);
  const auto trace_path = args.out_dir / "trace.csv";
  TraceStream stream(trace_path);
  SearchContext ctx;
  ctx.model = baseline;
  ctx.train_options = opts;
  ctx.holdout = test;
  ctx.on_record = [&stream](const TraceRecord& r) { stream(r); };
  const SearchResult res = crossover_learn(st.data, split, config, objective, std::move(ctx));
  const LinearModel& final_model = *res.model;
  const double final_error = zero_one_error(final_model, test);

  nlohmann::json out = {
      {"model", model_to_json(final_model)},
      {"cv", {{"lambda", cv.lambda}, {"grid", cv.grid}, {"mean_error", cv.mean_error}}},
      {"scaling",
       {{"mean", std::vector<double>(st.params.mean.begin(), st.params.mean.end())},
        {"stddev", std::vector<double>(st.params.stddev.begin(), st.params.stddev.end())}}},
      {"baseline_test_error", baseline_error},
      {"final_test_error", final_error},
      {"train_rows", train_rows.size()},
      {"test_rows", test_rows.size()}};
  const auto model_path = args.out_dir / "model.json";
  const auto perm_path = args.out_dir / "permutation.json";
  write_json(model_path, out);
  write_json(perm_path, permutation_to_json(res.permutation,
                                            {config.block_class, args.seed, config.iterations}));
  guard.add_output("model", model_path);
  guard.add_output("trace", trace_path);
  guard.add_output("permutation", perm_path);
  guard.finish();

  log << "lambda " << format_double(cv.lambda) << ", test error " << format_double(baseline_error)
      << " -> " << format_double(final_error) << " after " << res.accepted << " swaps\n";
  return 0;
}

// ---------------------------------------------------------------- causal

int cmd_causal(const CausalArgs& args, std::ostream& log) {
  nlohmann::json cfg = {{"mode", args.mode}};
  std::vector<std::filesystem::path> inputs;
  if (args.dag) {
    cfg["dag"] = args.dag->string();
    inputs.push_back(*args.dag);
  }
  if (args.data) {
    cfg["data"] = to_json(*args.data);
    inputs.push_back(args.data->data);
  }
  require(args.mode == "adjustments" || args.mode == "split" || args.mode == "jam",
          ErrorKind::usage, "--mode must be adjustments, split or jam");
  ManifestGuard guard(args.out_dir, make_manifest("causal", args.seed, inputs, cfg));
  const auto out_path = args.out_dir / "causal.json";
  nlohmann::json out = {{"mode", args.mode}};
  int code = 0;

  if (args.mode == "adjustments" || args.mode == "split") {
    require(args.dag.has_value(), ErrorKind::usage, "--dag is required for mode " + args.mode);
    const CausalDag dag = CausalDag::from_json(nlohmann::json::parse(read_text_file(*args.dag)));
    require(!dag.queries().empty(), ErrorKind::usage, "the DAG lists no queries");
    if (args.mode == "adjustments") {
      nlohmann::json queries = nlohmann::json::array();
      for (const auto& q : dag.queries()) {
        nlohmann::json sets = nlohmann::json::array();
        for (const auto& z : backdoor_adjustments(dag, q.x, q.y, args.max_adjust)) {
          nlohmann::json names = nlohmann::json::array();
          for (std::size_t v : z) names.push_back(dag.vertices()[v].name);
          sets.push_back(names);
        }
        log << dag.vertices()[q.x].name << " -> " << dag.vertices()[q.y].name << ": "
            << sets.size() << " minimal adjustment set(s)\n";
        queries.push_back({{"y", dag.vertices()[q.y].name},
                           {"x", dag.vertices()[q.x].name},
                           {"adjustments", sets}});
      }
      out["queries"] = queries;
    } else {
      const InterferingSplit split = interfering_split(dag, args.max_adjust, args.seed);
      out["result"] = to_json(split);
      if (split.search.feasible) {
        log << "split found: " << split.shuffle.size() << " shuffle feature(s)\n";
      } else {
        log << "no interfering split"
            << (split.search.exhaustive ? " (all " + std::to_string(split.search.splits_checked) +
                                              " splits checked)"
                                        : " found by local search")
            << '\n';
        code = static_cast<int>(ErrorKind::infeasible);
      }
    }
  } else {
    require(args.data.has_value(), ErrorKind::usage, "--data and --label are required for jam");
    const Dataset ds = load_dataset(*args.data);
    const CmTriple t{feature(ds, args.x1, "--x1"), feature(ds, args.x2, "--x2"),
                     feature(ds, args.x3, "--x3")};
    const double eps = args.epsilon ? *args.epsilon : cm_default_epsilon(ds, t);
    const JamResult jam = greedy_partial_corr_jam(ds, t, eps, args.iters);
    const FeatureSplit split = [&] {
      std::vector<std::size_t> anchor;
      for (std::size_t j = 0; j < ds.d(); ++j)
        if (j != t.x3) anchor.push_back(j);
      return FeatureSplit(std::move(anchor), {t.x3}, ds.d());
    }();
    const Dataset after = apply_cp(ds, split, jam.permutation);
    out["epsilon"] = eps;
    out["bound_R"] = jam.bound;
    out["reached_bound"] = jam.reached_bound;
    out["precondition_violated"] = jam.precondition_violated;
    out["rho12_before"] = correlation(ds.x(), t.x1, t.x2);
    out["rho12_after"] = correlation(after.x(), t.x1, t.x2);
    out["trace"] = jam.trace;
    out["steps"] = jam.trace.size() - 1;
    const auto perm_path = args.out_dir / "permutation.json";
    write_json(perm_path, permutation_to_json(jam.permutation, {true, args.seed, jam.trace.size() - 1}));
    guard.add_output("permutation", perm_path);
    log << "rho_(13).2 " << format_double(jam.trace.front()) << " -> "
        << format_double(jam.trace.back()) << " (R = " << format_double(jam.bound) << ")\n";
  }

  write_json(out_path, out);
  guard.add_output("result", out_path);
  guard.finish();
  return code;
}

// ---------------------------------------------------------------- report

namespace {

nlohmann::json record_json(const TraceRecord& r) {
  const auto opt = [](const std::optional<double>& v) -> nlohmann::json {
    return v ? nlohmann::json(*v) : nlohmann::json(nullptr);
  };
  nlohmann::json j = {{"iteration", r.iteration},   {"objective", r.objective},
                      {"hsic", opt(r.hsic)},         {"p_value", opt(r.p_value)},
                      {"phi_risk", opt(r.phi_risk)}, {"test_error", opt(r.test_error)},
                      {"rcp_bound", opt(r.rcp_bound)}, {"odd_cycles", r.odd_cycles},
                      {"fixed_points", r.fixed_points}};
  j["pair"] = r.pair ? nlohmann::json::array({r.pair->first, r.pair->second}) : nlohmann::json(nullptr);
  return j;
}

}  // namespace

int cmd_report(const ReportArgs& args, std::ostream& out) {
  require(!args.traces.empty(), ErrorKind::usage, "--trace is required");
  require(args.format == "json" || args.format == "csv", ErrorKind::usage,
          "--format must be json or csv");

  std::optional<ManifestGuard> guard;
  if (args.out) {
    const auto dir = args.out->has_parent_path() ? args.out->parent_path() : std::filesystem::path(".");
    guard.emplace(dir,
                  make_manifest("report", 0, args.traces,
                                {{"format", args.format}, {"out", args.out->string()}}),
                  args.out->filename().string() + ".manifest.json");
  }

  std::vector<std::vector<TraceRecord>> traces;
  for (const auto& p : args.traces) traces.push_back(read_trace(p));

  std::string text;
  if (traces.size() == 1) {
    if (args.format == "csv") {
      text = trace_to_csv(traces.front());
    } else {
      nlohmann::json arr = nlohmann::json::array();
      for (const auto& r : traces.front()) arr.push_back(record_json(r));
      text = arr.dump(2) + "\n";
    }
  } else {
    const nlohmann::json agg = aggregate_traces(traces);
    text = args.format == "csv" ? aggregate_to_csv(agg) : agg.dump(2) + "\n";
  }

  if (args.out) {
    write_text_file(*args.out, text);
    guard->add_output("report", *args.out);
    guard->finish();
  } else {
    out << text;
  }
  return 0;
}

}  // namespace cpforge::cli
