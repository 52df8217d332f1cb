#include <iostream>

#include <CLI11.hpp>

#include "cpforge/error.hpp"
#include "cpforge_cli/commands.hpp"

namespace cpforge::cli {

namespace {

void add_data_options(CLI::App& cmd, DataArgs& d) {
  cmd.add_option("--data", d.data, "input CSV")->required();
  cmd.add_option("--label", d.label, "label column name");
  cmd.add_option("--positive", d.positive, "label value of the positive class")
      ->capture_default_str();
  cmd.add_option("--missing", d.missing, "missing cells: zero | error")->capture_default_str();
}

void add_split_options(CLI::App& cmd, SplitArgs& s) {
  cmd.add_option("--split", s.mode, "first-half | explicit")->capture_default_str();
  cmd.add_option("--shuffle", s.shuffle, "shuffle feature names (explicit split)")->delimiter(',');
  cmd.add_option("--split-file", s.file, "file listing shuffle feature names");
}

void add_search_options(CLI::App& cmd, SearchArgs& s) {
  cmd.add_option("--iters", s.iters, "greedy iterations")->capture_default_str();
  cmd.add_option("--candidates", s.candidates, "auto | exhaustive | sampled")->capture_default_str();
  cmd.add_option("--samples", s.samples, "pairs per iteration in sampled mode")
      ->capture_default_str();
  cmd.add_option("--patience", s.patience,
                 "iterations without an accepted swap before stopping (0: never)")
      ->capture_default_str();
  cmd.add_option("--pvalue-every", s.pvalue_every, "p-value period (0: never)")
      ->capture_default_str();
  cmd.add_option("--pvalue-resamples", s.pvalue_resamples, "permutation-test resamples")
      ->capture_default_str();
  cmd.add_flag("--cross-class", s.cross_class, "allow swaps across classes");
}

}  // namespace

int run(int argc, char** argv) {
  CLI::App app{"cpforge: crossover-process data protection and learning"};
  app.require_subcommand(1);

  ProtectHsicArgs hsic;
  auto* c_hsic = app.add_subcommand("protect-hsic", "reduce HSIC between anchor and shuffle features");
  add_data_options(*c_hsic, hsic.data);
  add_split_options(*c_hsic, hsic.split);
  add_search_options(*c_hsic, hsic.search);
  c_hsic->add_option("--seed", hsic.seed)->capture_default_str();
  c_hsic->add_option("--out-dir", hsic.out_dir)->capture_default_str();

  ProtectOddsArgs odds;
  double target_rho = 0.0;
  std::int64_t shift_i = 0;
  auto* c_odds = app.add_subcommand("protect-odds", "shift an odds ratio by a block of swaps");
  add_data_options(*c_odds, odds.data);
  c_odds->add_option("--xc", odds.xc, "binary outcome feature")->required();
  c_odds->add_option("--xa", odds.xa, "binary attribute feature (shuffled)")->required();
  c_odds->add_option("--predicate", odds.predicate, "conjunction name=v,...");
  auto* o_target = c_odds->add_option("--target-rho", target_rho, "target counts odds ratio b/d");
  auto* o_shift = c_odds->add_option("--shift-i", shift_i, "explicit shift i");
  o_target->excludes(o_shift);
  c_odds->add_option("--seed", odds.seed)->capture_default_str();
  c_odds->add_option("--out-dir", odds.out_dir)->capture_default_str();

  OptimizeArgs opt;
  auto* c_opt = app.add_subcommand("optimize", "greedy CP on the training data with retraining");
  add_data_options(*c_opt, opt.data);
  add_split_options(*c_opt, opt.split);
  add_search_options(*c_opt, opt.search);
  c_opt->add_option("--loss", opt.loss, "logistic | square")->capture_default_str();
  c_opt->add_option("--cv-grid", opt.cv_grid, "lambda grid")->delimiter(',');
  c_opt->add_option("--folds", opt.folds)->capture_default_str();
  c_opt->add_option("--retrain-every", opt.retrain_every, "0: never")->capture_default_str();
  c_opt->add_option("--holdout", opt.holdout, "held-out fraction")->capture_default_str();
  c_opt->add_option("--seed", opt.seed)->capture_default_str();
  c_opt->add_option("--out-dir", opt.out_dir)->capture_default_str();

  CausalArgs causal;
  DataArgs causal_data;
  double epsilon = 0.0;
  std::size_t max_adjust = 0;
  auto* c_causal = app.add_subcommand("causal", "adjustment sets, interfering splits, jamming");
  c_causal->add_option("--mode", causal.mode, "adjustments | split | jam")->required();
  c_causal->add_option("--dag", causal.dag, "DAG JSON");
  auto* o_max = c_causal->add_option("--max-adjust", max_adjust, "largest adjustment set size");
  c_causal->add_option("--data", causal_data.data, "CSV for jam mode");
  c_causal->add_option("--label", causal_data.label);
  c_causal->add_option("--positive", causal_data.positive)->capture_default_str();
  c_causal->add_option("--missing", causal_data.missing)->capture_default_str();
  c_causal->add_option("--x1", causal.x1);
  c_causal->add_option("--x2", causal.x2);
  c_causal->add_option("--x3", causal.x3, "shuffled feature");
  auto* o_eps = c_causal->add_option("--epsilon", epsilon);
  c_causal->add_option("--iters", causal.iters)->capture_default_str();
  c_causal->add_option("--seed", causal.seed)->capture_default_str();
  c_causal->add_option("--out-dir", causal.out_dir)->capture_default_str();

  ReportArgs report;
  auto* c_report = app.add_subcommand("report", "re-emit or aggregate trace files");
  c_report->add_option("--trace", report.traces, "trace CSV (repeatable)")->required();
  c_report->add_option("--format", report.format, "json | csv")->capture_default_str();
  c_report->add_option("--out", report.out, "output file (default stdout)");

  try {
    app.parse(argc, argv);
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e);
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e);
  } catch (const CLI::ParseError& e) {
    app.exit(e);
    return static_cast<int>(ErrorKind::usage);
  }

  try {
    if (c_hsic->parsed()) return cmd_protect_hsic(hsic, std::cout);
    if (c_odds->parsed()) {
      if (o_target->count() > 0) odds.target_rho = target_rho;
      if (o_shift->count() > 0) odds.shift_i = shift_i;
      return cmd_protect_odds(odds, std::cout);
    }
    if (c_opt->parsed()) return cmd_optimize(opt, std::cout);
    if (c_causal->parsed()) {
      if (!causal_data.data.empty()) causal.data = causal_data;
      if (o_eps->count() > 0) causal.epsilon = epsilon;
      if (o_max->count() > 0) causal.max_adjust = max_adjust;
      return cmd_causal(causal, std::cout);
    }
    if (c_report->parsed()) return cmd_report(report, std::cout);
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return e.exit_code();
  } catch (const nlohmann::json::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ErrorKind::data);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return static_cast<int>(ErrorKind::usage);
}

}  // namespace cpforge::cli
