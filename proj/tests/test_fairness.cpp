#include <doctest.h>

#include <random>

#include "cpforge/error.hpp"
#include "cpforge/fairness.hpp"
#include "support/synthetic.hpp"

using namespace cpforge;
using testing::Idx;

namespace {

// Rows (x_C, x_A, z, noise) built from explicit cell counts; z = 1 everywhere
// except `off_support` extra rows with z = 0.
Dataset table_dataset(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d,
                      std::mt19937_64& rng, std::int64_t off_support = 0) {
  std::vector<std::array<double, 3>> rows;
  const auto push = [&](int xc, int xa, int z, std::int64_t n) {
    for (std::int64_t k = 0; k < n; ++k) rows.push_back({double(xc), double(xa), double(z)});
  };
  push(0, 0, 1, a);
  push(1, 0, 1, b);
  push(0, 1, 1, c);
  push(1, 1, 1, d);
  push(1, 1, 0, off_support);
  std::shuffle(rows.begin(), rows.end(), rng);
  Matrix x(static_cast<Idx>(rows.size()), 3);
  std::vector<int> y(rows.size());
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    for (Idx j = 0; j < 3; ++j) x(static_cast<Idx>(i), j) = rows[i][static_cast<std::size_t>(j)];
    y[i] = i < 2 ? (i == 0 ? 1 : -1) : (coin(rng) ? 1 : -1);
  }
  return Dataset::from_unsorted(std::move(x), std::move(y), {"xc", "xa", "z"});
}

// Independent recount from the observation matrix.
ContingencyTable recount(const Matrix& x, const Predicate& pi, const Dataset& ds) {
  ContingencyTable t;
  for (Idx r = 0; r < x.rows(); ++r) {
    if (!pi.holds(ds, static_cast<std::size_t>(r))) continue;
    ++t.predicate_support;
    const bool c = x(r, 0) != 0.0, a = x(r, 1) != 0.0;
    if (!a && !c) ++t.a;
    if (!a && c) ++t.b;
    if (a && !c) ++t.c;
    if (a && c) ++t.d;
  }
  return t;
}

}  // namespace

TEST_CASE("contingency table counts and predicate support") {
  std::mt19937_64 rng(1);
  const Dataset ds = table_dataset(3, 4, 5, 6, rng, 2);
  const ContingencyTable all = contingency(ds, 0, 1, Predicate::always());
  CHECK(all == ContingencyTable{3, 4, 5, 8, 20});
  const ContingencyTable z = contingency(ds, 0, 1, Predicate::parse(ds, "z=1"));
  CHECK(z == ContingencyTable{3, 4, 5, 6, 18});
  CHECK(Predicate::parse(ds, "true").terms.empty());
  CHECK_THROWS_AS(Predicate::parse(ds, "nope=1"), Error);
  CHECK_THROWS_AS(contingency(ds, 0, 0, Predicate::always()), Error);
  CHECK_THROWS_AS(contingency(ds, 0, 1, Predicate::parse(ds, "xc=1")), Error);
  CHECK_THROWS_AS(contingency(ds, 0, 1, Predicate::parse(ds, "z=5")), Error);
}

TEST_CASE("odds ratio conventions") {
  const ContingencyTable t{2, 3, 4, 6, 15};
  CHECK(odds_ratio_exact(t) == Rational(1, 2));
  CHECK(odds_ratio_exact(t, OddsConvention::probability) == Rational(3, 5) / Rational(6, 10));
  CHECK_THROWS_AS(odds_ratio(ContingencyTable{1, 1, 1, 0, 3}), Error);
}

TEST_CASE("shift closed form and plan") {
  const ContingencyTable t{5, 3, 4, 6, 18};
  CHECK(odds_shift_delta(3, 6, 2) == Rational(9, 4) * Rational(2, 6));
  const OddsShiftPlan plan = plan_odds_shift(t, 2);
  CHECK(plan.new_table == ContingencyTable{3, 5, 6, 4, 18});
  CHECK(plan.delta == odds_ratio_exact(plan.new_table) - odds_ratio_exact(t));
  CHECK(plan_odds_shift(t, 0).new_table == t);
  CHECK(plan_odds_shift(t, -3).new_table == ContingencyTable{8, 0, 1, 9, 18});

  const ShiftRange r = legal_shift_range(t);
  CHECK(r.lo == -3);
  CHECK(r.hi == 5);
  try {
    plan_odds_shift(t, 6);
    FAIL("no error");
  } catch (const Error& e) {
    CHECK(e.kind() == ErrorKind::infeasible);
    CHECK(std::string(e.what()).find("[-3, 5]") != std::string::npos);
  }
  CHECK_THROWS_AS(plan_odds_shift(ContingencyTable{7, 1, 1, 4, 13}, 4), Error);  // d - i = 0
}

TEST_CASE("built CP reproduces the planned shift by recount, marginals unchanged") {
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::int64_t> cell(1, 9);
  for (int t = 0; t < 30; ++t) {
    const Dataset ds = table_dataset(cell(rng), cell(rng), cell(rng), cell(rng), rng, t % 3);
    const Predicate pi = t % 2 == 0 ? Predicate::always() : Predicate::parse(ds, "z=1");
    const ContingencyTable before = contingency(ds, 0, 1, pi);
    const ShiftRange r = legal_shift_range(before);
    for (std::int64_t i = r.lo; i <= r.hi; ++i) {
      if (i == before.d) continue;
      const OddsCp cp = build_odds_cp(ds, 0, 1, pi, i);
      const Dataset after = apply_cp(ds, cp.split, cp.permutation);
      const ContingencyTable counted = recount(after.x(), pi, ds);
      CHECK(counted == cp.after);
      CHECK(counted == plan_odds_shift(before, i).new_table);
      CHECK(odds_ratio_exact(counted) - odds_ratio_exact(before) == odds_shift_delta(before.b, before.d, i));
      CHECK(counted.a + counted.c == before.a + before.c);
      CHECK(counted.a + counted.b == before.a + before.b);
      CHECK(cp.split.shuffle() == std::vector<std::size_t>{1});
      CHECK(is_block_class(ShuffleSpec{cp.permutation}, ds.labels()) == !cp.cross_class);
    }
  }
}

TEST_CASE("shift for a target ratio") {
  const ContingencyTable t{6, 2, 3, 6, 17};
  const std::int64_t i = shift_for_target(t, 1.0);
  CHECK(i == 2);  // (2+2)/(6-2) = 1
  CHECK(fairness_check(plan_odds_shift(t, i).new_table, FairnessCriterion::exact()));
  CHECK_THROWS_AS(shift_for_target(t, 100.0), Error);
}

TEST_CASE("fairness criteria") {
  CHECK(fairness_check(ContingencyTable{1, 5, 1, 5, 12}, FairnessCriterion::exact()));
  CHECK(fairness_check(ContingencyTable{1, 9, 1, 10, 21}, FairnessCriterion::band(0.1)));
  CHECK_FALSE(fairness_check(ContingencyTable{1, 8, 1, 10, 20}, FairnessCriterion::band(0.1)));
  CHECK(fairness_check(ContingencyTable{1, 9, 1, 10, 21}, FairnessCriterion::disparate_impact()));
  CHECK_FALSE(fairness_check(ContingencyTable{1, 8, 1, 10, 20}, FairnessCriterion::disparate_impact()));
}
