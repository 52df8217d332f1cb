#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <string>
#include <utility>
#include <vector>

#include <boost/rational.hpp>
#include <json.hpp>

#include "cpforge/cp_engine.hpp"
#include "cpforge/data.hpp"

namespace cpforge {

using Rational = boost::rational<std::int64_t>;

/// Counts conditioned on a predicate. Rows are x_A, columns x_C:
///
///            x_C = 0   x_C = 1
///   x_A = 0     a         b
///   x_A = 1     c         d
struct ContingencyTable {
  std::int64_t a = 0;
  std::int64_t b = 0;
  std::int64_t c = 0;
  std::int64_t d = 0;
  std::int64_t predicate_support = 0;

  [[nodiscard]] std::int64_t total() const noexcept { return a + b + c + d; }
  friend bool operator==(const ContingencyTable&, const ContingencyTable&) = default;
};

/// Conjunction of equality tests on binary features; empty means TRUE.
struct Predicate {
  std::vector<std::pair<std::size_t, int>> terms;

  static Predicate always() { return {}; }
  /// Parses "name=v,name=v" against the dataset's feature names. Empty or
  /// "true" gives TRUE.
  static Predicate parse(const Dataset& ds, const std::string& text);
  [[nodiscard]] bool holds(const Dataset& ds, std::size_t row) const;
};

ContingencyTable contingency(const Dataset& ds, std::size_t xc, std::size_t xa,
                             const Predicate& pi);

enum class OddsConvention { counts, probability };

/// counts: b/d. probability: (b/(a+b)) / (d/(c+d)).
Rational odds_ratio_exact(const ContingencyTable& t,
                          OddsConvention convention = OddsConvention::counts);
double odds_ratio(const ContingencyTable& t, OddsConvention convention = OddsConvention::counts);

struct ShiftRange {
  std::int64_t lo = 0;  // -min(b, c)
  std::int64_t hi = 0;  // min(a, d); i == d is still rejected by plan_odds_shift
};

ShiftRange legal_shift_range(const ContingencyTable& t);

struct OddsShiftPlan {
  ContingencyTable new_table;
  Rational delta;
};

/// Moves i rows from (x_A=1, x_C=1) and (x_A=0, x_C=0) into the opposite
/// x_A cells (negative i moves the other way). delta = (b+d)/(d-i) * i/d.
OddsShiftPlan plan_odds_shift(const ContingencyTable& t, std::int64_t i);

/// Closed-form odds delta; no range checks beyond d != 0 and d != i.
Rational odds_shift_delta(std::int64_t b, std::int64_t d, std::int64_t i);

struct OddsCp {
  FeatureSplit split;
  Permutation permutation;
  ContingencyTable before;
  ContingencyTable after;
  Rational delta;
  /// Some transfer pairs straddle the two classes, so the permutation is not
  /// block-class and the learnability guarantee does not cover it.
  bool cross_class = false;
};

/// Realizes plan_odds_shift with a product of disjoint transpositions on the
/// x_A column. The shuffle set is {x_A}; everything else is anchor. Rows are
/// paired lowest index first, same-class pairs before cross-class ones.
OddsCp build_odds_cp(const Dataset& ds, std::size_t xc, std::size_t xa, const Predicate& pi,
                     std::int64_t i);

/// Integer shift whose resulting counts odds ratio (b+i)/(d-i) is nearest to
/// the target. Throws infeasible when the target lies outside the reachable
/// interval.
std::int64_t shift_for_target(const ContingencyTable& t, double target_rho);

struct FairnessCriterion {
  enum class Kind { exact, band, disparate_impact };
  Kind kind = Kind::exact;
  double epsilon = 0.0;  // band half-width

  static FairnessCriterion exact() { return {}; }
  static FairnessCriterion band(double eps) { return {Kind::band, eps}; }
  static FairnessCriterion disparate_impact() { return {Kind::disparate_impact, 0.0}; }
};

inline constexpr double kDisparateImpactThreshold = 0.8;

/// exact: rho == 1; band: rho in [1-eps, 1+eps]; disparate impact: rho > 0.8.
bool fairness_check(const ContingencyTable& t, const FairnessCriterion& criterion,
                    OddsConvention convention = OddsConvention::counts);

nlohmann::json to_json(const ContingencyTable& t);

}  // namespace cpforge
