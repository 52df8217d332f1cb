#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include "cpforge/causal.hpp"
#include "cpforge/cp_engine.hpp"
#include "cpforge/data.hpp"
#include "cpforge/fairness.hpp"
#include "cpforge/kernels_hsic.hpp"
#include "cpforge/learn.hpp"
#include "cpforge/rng.hpp"

namespace cpforge {

/// Quantity minimized by the greedy search. The state is the current
/// permutation of the shuffle-feature rows; delta() must be exact and safe to
/// call concurrently.
class Objective {
 public:
  virtual ~Objective() = default;

  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual double value() const = 0;
  /// Change of value() if rows l and l2 of the shuffle features were swapped.
  [[nodiscard]] virtual double delta(std::size_t l, std::size_t l2) const = 0;
  virtual void apply(std::size_t l, std::size_t l2) = 0;
  /// value() recomputed from scratch.
  [[nodiscard]] virtual double recompute() const = 0;
  /// Called after the classifier is retrained.
  virtual void on_retrain(const LinearModel& /*model*/) {}
};

/// HSIC between the anchor kernel and the (shuffled) shuffle kernel.
class HsicObjective final : public Objective {
 public:
  HsicObjective(Matrix ku, Matrix kv) : tracker_(std::move(ku), std::move(kv)) {}

  [[nodiscard]] std::string name() const override { return "hsic"; }
  [[nodiscard]] double value() const override { return tracker_.value(); }
  [[nodiscard]] double delta(std::size_t l, std::size_t l2) const override {
    return tracker_.delta(l, l2);
  }
  void apply(std::size_t l, std::size_t l2) override { tracker_.apply(l, l2); }
  [[nodiscard]] double recompute() const override { return tracker_.recompute(); }
  [[nodiscard]] const HsicTracker& tracker() const noexcept { return tracker_; }

 private:
  HsicTracker tracker_;
};

/// Empirical phi-risk of a fixed linear model on the CP'ed sample.
class PhiRiskObjective final : public Objective {
 public:
  PhiRiskObjective(const Dataset& ds, const FeatureSplit& split, LinearModel model);

  [[nodiscard]] std::string name() const override { return "phi_risk"; }
  [[nodiscard]] double value() const override { return sum_ / static_cast<double>(labels_.size()); }
  [[nodiscard]] double delta(std::size_t l, std::size_t l2) const override;
  void apply(std::size_t l, std::size_t l2) override;
  [[nodiscard]] double recompute() const override;
  void on_retrain(const LinearModel& model) override;

 private:
  void rescore();

  Matrix x_;  // current CP'ed observations
  std::vector<int> labels_;
  std::vector<std::size_t> shuffle_;
  LinearModel model_;
  Vector scores_;
  Vector shuffle_part_;  // theta_s . x_s per row
  double sum_ = 0.0;
};

/// |rho(counts) - target| for a contingency table whose x_A column is shuffled.
class OddsTargetObjective final : public Objective {
 public:
  OddsTargetObjective(const Dataset& ds, std::size_t xc, std::size_t xa, const Predicate& pi,
                      double target);

  [[nodiscard]] std::string name() const override { return "odds_target"; }
  [[nodiscard]] double value() const override { return gap(table_); }
  [[nodiscard]] double delta(std::size_t l, std::size_t l2) const override;
  void apply(std::size_t l, std::size_t l2) override;
  [[nodiscard]] double recompute() const override;
  [[nodiscard]] const ContingencyTable& table() const noexcept { return table_; }

 private:
  [[nodiscard]] double gap(const ContingencyTable& t) const;
  [[nodiscard]] ContingencyTable swapped(std::size_t l, std::size_t l2) const;

  std::vector<int> xc_, xa_;
  std::vector<char> in_pi_;
  ContingencyTable table_;
  double target_;
};

/// rho_(13).2 with x3 shuffled.
class PartialCorrObjective final : public Objective {
 public:
  PartialCorrObjective(const Dataset& ds, const CmTriple& t);

  [[nodiscard]] std::string name() const override { return "partial_corr"; }
  [[nodiscard]] double value() const override { return rho(c13_, c23_); }
  [[nodiscard]] double delta(std::size_t l, std::size_t l2) const override;
  void apply(std::size_t l, std::size_t l2) override;
  [[nodiscard]] double recompute() const override;

 private:
  [[nodiscard]] double rho(double c13, double c23) const;

  Vector c1_, c2_, c3_;
  double c13_ = 0.0, c23_ = 0.0, s13_ = 1.0, s23_ = 1.0, r12_ = 0.0, mean1_ = 0.0, mean2_ = 0.0,
         mean3_ = 0.0;
};

enum class CandidateMode { automatic, exhaustive, sampled };

inline constexpr std::size_t kExhaustiveScanLimit = 500;
inline constexpr std::size_t kDefaultSampleCount = 4096;

struct SearchConfig {
  std::size_t iterations = 0;
  CandidateMode candidate_mode = CandidateMode::automatic;
  std::size_t sample_count = kDefaultSampleCount;
  bool block_class = true;
  std::size_t retrain_every = 0;  // 0: never
  /// Consecutive iterations without an accepted move before the search stops.
  std::size_t early_stop_patience = 1;
  std::uint64_t seed = 0;
  std::size_t pvalue_every = 10;  // 0: never
  std::size_t pvalue_resamples = 999;
  double rcp_radius = 1.0;
  bool record_rcp = true;
};

/// All candidate transpositions (l < l2), lexicographically sorted. Exhaustive
/// mode lists every pair (same-class only when block_class); sampled mode
/// draws `sample_count` distinct uniform pairs.
std::vector<std::pair<std::size_t, std::size_t>> candidate_pairs(std::span<const int> labels,
                                                                 const SearchConfig& config,
                                                                 Rng& rng);

struct Candidate {
  std::size_t l = 0;
  std::size_t l2 = 0;
  double delta = 0.0;
};

/// Best (smallest-delta) candidate, ties to the lexicographically lowest pair.
std::optional<Candidate> best_candidate(const Objective& objective,
                                        const std::vector<std::pair<std::size_t, std::size_t>>& pairs);

/// Acceptance threshold: a move must lower the objective by more than
/// 1e-12 max(1, |value|).
bool strictly_improves(double delta, double value);

struct TraceRecord {
  std::size_t iteration = 0;
  double objective = 0.0;
  std::optional<double> hsic;
  std::optional<double> p_value;
  std::optional<double> phi_risk;
  std::optional<double> test_error;
  std::optional<double> rcp_bound;
  std::size_t odd_cycles = 0;
  std::size_t fixed_points = 0;
  std::optional<std::pair<std::size_t, std::size_t>> pair;
};

/// Optional side inputs for the trace columns and retraining.
struct SearchContext {
  /// Anchor / shuffle kernels for the hsic and p_value columns.
  std::optional<std::pair<Matrix, Matrix>> kernels;
  /// Model trained on the unshuffled data; enables phi_risk / test_error and
  /// retraining with `train_options`.
  std::optional<LinearModel> model;
  TrainOptions train_options;
  std::optional<Dataset> holdout;
  /// Called with every record as soon as it is built, so a failing run still
  /// leaves its partial trace behind.
  std::function<void(const TraceRecord&)> on_record;
};

struct SearchResult {
  Permutation permutation;
  std::optional<LinearModel> model;
  std::vector<TraceRecord> trace;  // config.iterations + 1 records
  std::size_t accepted = 0;
  bool stopped_early = false;
  std::size_t stop_iteration = 0;  // first padded iteration when stopped early
};

/// Greedy composition of elementary permutations: at every iteration the best
/// candidate transposition is accepted iff it strictly improves the
/// objective. After an early stop the remaining records repeat the final
/// state with no pair.
SearchResult crossover_learn(const Dataset& ds, const FeatureSplit& split,
                             const SearchConfig& config, Objective& objective,
                             SearchContext context = {});

}  // namespace cpforge
