#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <utility>
#include <vector>

#include <json.hpp>

#include "cpforge/cp_engine.hpp"
#include "cpforge/data.hpp"

namespace cpforge {

// ---------------------------------------------------------------- partial correlation

/// rho_(jk).l = (rho_jk - rho_jl rho_kl) / sqrt((1 - rho_jl^2)(1 - rho_kl^2)).
double partial_correlation(const Matrix& x, std::size_t j, std::size_t k, std::size_t l);
double partial_correlation(const Dataset& ds, std::size_t j, std::size_t k, std::size_t l);

/// Pearson correlation of two columns.
double correlation(const Matrix& x, std::size_t j, std::size_t k);

/// Roles in the three-variable model: x1 and x2 stay in the anchor, x3 is shuffled.
struct CmTriple {
  std::size_t x1 = 0;
  std::size_t x2 = 1;
  std::size_t x3 = 2;
};

/// 1 - max(rho_12^2, rho_23^2) on the current data.
double cm_default_epsilon(const Dataset& ds, const CmTriple& t);

/// R = (1 - eps)^-1 p+(1 - p+) (mu~_1 - rho_12 mu~_2) mu~_3 with
/// mu~_j = (E[x_j | y=+1] - E[x_j | y=-1]) / (2 sqrt(v_j)).
double cm_bound_R(const Dataset& ds, const CmTriple& t, double epsilon);

inline constexpr double kJamStrictDecrease = 1e-12;

struct JamResult {
  Permutation permutation;
  std::vector<double> trace;  // rho_(13).2 before the first step and after each accepted step
  double bound = 0.0;
  bool reached_bound = false;
  /// rho_12^2 or some rho_23^2 along the run exceeded 1 - epsilon.
  bool precondition_violated = false;
};

/// Greedy block-class transpositions on the x3 column, each step taking the
/// largest strict decrease of rho_(13).2. Stops once rho <= R, when no pair
/// decreases it, or after max_iter steps. Each candidate is scored in O(1)
/// from the two affected covariances.
JamResult greedy_partial_corr_jam(const Dataset& ds, const CmTriple& t, double epsilon,
                                  std::size_t max_iter);

struct RandomJam {
  Permutation permutation;
  double rho = 0.0;
};

/// One uniform block-class permutation (independent uniform shuffles of each
/// class) applied to x3.
RandomJam random_blockclass_jam(const Dataset& ds, const CmTriple& t, std::uint64_t seed);

/// Uniform block-class permutation of the dataset's rows.
Permutation random_blockclass_permutation(std::span<const int> labels, std::uint64_t seed);

// ---------------------------------------------------------------- causal DAGs

class CausalDag {
 public:
  struct Vertex {
    std::string name;
    bool latent = false;
  };
  struct Query {
    std::size_t y;
    std::size_t x;
  };

  CausalDag(std::vector<Vertex> vertices, std::vector<std::pair<std::size_t, std::size_t>> arcs,
            std::vector<Query> queries = {});

  static CausalDag from_json(const nlohmann::json& j);
  [[nodiscard]] nlohmann::json to_json() const;

  [[nodiscard]] std::size_t size() const noexcept { return vertices_.size(); }
  [[nodiscard]] const std::vector<Vertex>& vertices() const noexcept { return vertices_; }
  [[nodiscard]] const std::vector<Query>& queries() const noexcept { return queries_; }
  [[nodiscard]] const std::vector<std::size_t>& children(std::size_t v) const { return children_[v]; }
  [[nodiscard]] const std::vector<std::size_t>& parents(std::size_t v) const { return parents_[v]; }
  [[nodiscard]] std::vector<std::size_t> observables() const;
  [[nodiscard]] std::optional<std::size_t> index_of(const std::string& name) const;

  /// Descendants of v, including v.
  [[nodiscard]] std::vector<bool> descendants(std::size_t v) const;

  /// Copy without the arcs leaving v.
  [[nodiscard]] CausalDag without_outgoing(std::size_t v) const;

  /// d-separation of a and b given z, via the moralized ancestral graph.
  [[nodiscard]] bool d_separated(std::size_t a, std::size_t b, const std::vector<std::size_t>& z) const;

 private:
  std::vector<Vertex> vertices_;
  std::vector<std::pair<std::size_t, std::size_t>> arcs_;
  std::vector<Query> queries_;
  std::vector<std::vector<std::size_t>> children_;
  std::vector<std::vector<std::size_t>> parents_;
};

inline constexpr std::size_t kMaxBackdoorObservables = 20;

/// Back-door criterion: z holds no descendant of x and d-separates x from y
/// once x's outgoing arcs are removed.
bool satisfies_backdoor(const CausalDag& dag, std::size_t x, std::size_t y,
                        const std::vector<std::size_t>& z);

/// All inclusion-minimal observable back-door sets of size <= max_size, each
/// sorted, listed by size then lexicographically. Empty means no adjustment.
std::vector<std::vector<std::size_t>> backdoor_adjustments(const CausalDag& dag, std::size_t x,
                                                           std::size_t y,
                                                           std::size_t max_size = SIZE_MAX);

// ---------------------------------------------------------------- set splitting

inline constexpr std::size_t kExhaustiveSplitLimit = 24;

struct SetSplitResult {
  bool feasible = false;
  bool exhaustive = false;
  /// shuffle[v] is true for elements on the shuffle side.
  std::vector<bool> shuffle;
  /// Splits examined; in exhaustive mode an infeasible result examined every
  /// split with `anchor_hint` in the anchor, which is a certificate since the
  /// condition is symmetric in the two sides.
  std::uint64_t splits_checked = 0;
};

/// Two-colours the elements [0, n) so that every set has an element on each
/// side. Exhaustive for n <= 24, otherwise randomized flip local search with
/// `restarts` restarts.
SetSplitResult set_splitting(std::size_t n, const std::vector<std::vector<std::size_t>>& sets,
                             std::size_t anchor_hint = 0, std::uint64_t seed = 0,
                             std::size_t restarts = 10000);

struct InterferingSplit {
  std::vector<std::string> anchor;
  std::vector<std::string> shuffle;
  std::vector<std::vector<std::string>> v_sets;  // x, y and one minimal adjustment each
  SetSplitResult search;
  /// Queries for which no adjustment exists; they contribute no constraint.
  std::vector<std::size_t> unadjustable_queries;
};

/// Split of the observable vertices such that every query's x, y and each of
/// its minimal adjustments straddle anchor and shuffle. The first query's x is
/// placed in the anchor.
InterferingSplit interfering_split(const CausalDag& dag, std::size_t max_adjust_size = SIZE_MAX,
                                   std::uint64_t seed = 0);

nlohmann::json to_json(const InterferingSplit& split);

}  // namespace cpforge
