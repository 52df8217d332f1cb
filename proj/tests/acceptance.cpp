// Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fails.

#include <chrono>
#include <cmath>
#include <cstdio>
#include <functional>
#include <random>
#include <sstream>
#include <string>

#include "cpforge/causal.hpp"
#include "cpforge/complexity.hpp"
#include "cpforge/cp_engine.hpp"
#include "cpforge/fairness.hpp"
#include "cpforge/kernels_hsic.hpp"
#include "cpforge/learn.hpp"
#include "cpforge/search.hpp"
#include "support/synthetic.hpp"

using namespace cpforge;
using testing::Idx;

namespace acc {

struct Outcome {
  bool pass = true;
  std::string detail;
};

std::string fmt(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.6g", v);
  return buf;
}


Permutation random_blockclass(std::span<const int> labels, std::mt19937_64& rng) {
  std::vector<std::size_t> src(labels.size());
  std::iota(src.begin(), src.end(), std::size_t{0});
  std::size_t mp = 0;
  while (mp < labels.size() && labels[mp] == 1) ++mp;
  std::shuffle(src.begin(), src.begin() + static_cast<long>(mp), rng);
  std::shuffle(src.begin() + static_cast<long>(mp), src.end(), rng);
  return Permutation(src);
}

Permutation random_permutation(std::size_t m, std::mt19937_64& rng) {
  std::vector<std::size_t> src(m);
  std::iota(src.begin(), src.end(), std::size_t{0});
  std::shuffle(src.begin(), src.end(), rng);
  return Permutation(src);
}

std::pair<Matrix, Matrix> split_kernels(const Dataset& ds, const FeatureSplit& split) {
  return {gaussian_kernel(ds, split.anchor()).mat, gaussian_kernel(ds, split.shuffle()).mat};
}

// ---------------------------------------------------------------- 1

Outcome toy_domain() {
  Outcome o;
  const Dataset s = testing::toy_dataset();
  const FeatureSplit split({0}, {1}, 2);
  const Permutation perm({2, 3, 0, 1, 4});
  TrainOptions opts;
  opts.loss = LossKind::square;
  opts.fit_intercept = false;
  opts.tol = 1e-13;
  const LinearModel on_s = train(s, opts);
  const Dataset st = apply_cp(s, split, perm);
  const LinearModel on_t = train(st, opts);
  const double risk_s = phi_risk(on_s, s), risk_t = phi_risk(on_t, st);
  const double rcp = rcp_exact_linear(s, split, perm, 0.75, kDefaultExactCap, BallNorm::linf);
  const double tol = 1e-10;
  o.pass = std::abs(risk_s - 0.4) <= tol && std::abs(on_s.weights(0) - 0.5) <= tol &&
           std::abs(on_s.weights(1) - 0.5) <= tol && std::abs(risk_t - 0.1) <= tol &&
           std::abs(on_t.weights(0) - 0.75) <= tol && std::abs(on_t.weights(1) - 0.75) <= tol &&
           std::abs(rcp - 9.0 / 40.0) <= tol && risk_t + rcp < risk_s &&
           Rational(1, 10) + Rational(9, 40) == Rational(13, 40) && Rational(13, 40) < Rational(2, 5);
  o.detail = "risk S " + fmt(risk_s) + ", risk S^T " + fmt(risk_t) + ", RCP " + fmt(rcp) + ", " +
             fmt(risk_t + rcp) + " < " + fmt(risk_s);
  return o;
}

// ---------------------------------------------------------------- 2

Outcome mean_operator() {
  Outcome o;
  std::mt19937_64 rng(2);
  std::uniform_int_distribution<std::size_t> mdist(4, 200), ddist(2, 20);
  double worst = 0.0;
  for (int t = 0; t < 1000; ++t) {
    const Dataset ds = testing::shifted_dataset(mdist(rng), ddist(rng), rng);
    const auto split = FeatureSplit::first_half(ds.d());
    const auto check = mean_operator_invariant(ds, split, random_blockclass(ds.labels(), rng));
    worst = std::max(worst, check.max_abs_deviation);
  }
  const Dataset asym = testing::shifted_dataset(50, 6, rng);
  const auto cross = mean_operator_invariant(asym, FeatureSplit::first_half(6),
                                             Permutation::transposition(50, 0, 49));
  o.pass = worst <= 1e-10 && !cross.holds;
  o.detail = "max deviation " + fmt(worst) + " over 1000 block-class CPs; cross-class deviation " +
             fmt(cross.max_abs_deviation);
  return o;
}

// ---------------------------------------------------------------- 3

Outcome hsic_incremental() {
  Outcome o;
  std::mt19937_64 rng(3);
  double worst_delta = 0.0, worst_printed = 0.0, worst_exact_avg = 0.0;
  for (int t = 0; t < 20; ++t) {
    const Matrix ku = testing::random_kernel(6, 2, rng), kv = testing::random_kernel(6, 2, rng);
    const double base = hsic(ku, kv);
    double sum = 0.0;
    for (std::size_t l = 0; l < 6; ++l)
      for (std::size_t l2 = l + 1; l2 < 6; ++l2) {
        const Matrix p = Permutation::transposition(6, l, l2).to_dense();
        const double after = hsic(ku, p * kv * p.transpose());
        sum += after;
        const double direct = after - base;
        worst_delta = std::max(worst_delta, std::abs(hsic_delta_elementary(ku, kv, l, l2) - direct) /
                                                std::max(1.0, std::abs(direct)));
      }
    const double avg = sum / 15.0;
    worst_printed = std::max(worst_printed, std::abs(expected_hsic_after_elementary_printed(ku, kv) - avg) /
                                                std::abs(avg));
    worst_exact_avg =
        std::max(worst_exact_avg, std::abs(expected_hsic_after_elementary(ku, kv) - avg) / std::abs(avg));
  }
  o.pass = worst_delta <= 1e-9 && worst_printed <= 1e-9;
  o.detail = "15 deltas rel err " + fmt(worst_delta) + "; printed average closed form rel err " +
             fmt(worst_printed) + " (corrected closed form " + fmt(worst_exact_avg) + ")";
  return o;
}

// ---------------------------------------------------------------- 4

Outcome spectral_shift() {
  Outcome o;
  std::mt19937_64 rng(4);
  std::uniform_int_distribution<std::size_t> mdist(4, 50);
  double worst = 0.0, worst_decomposed = 0.0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = mdist(rng);
    const Matrix ku = testing::random_kernel(m, 2, rng), kv = testing::random_kernel(m, 2, rng);
    const Matrix p = random_permutation(m, rng).to_dense();
    const double direct = hsic_shift_direct(ku, kv, p);
    const double denom = std::max(std::abs(direct), 1e-300);
    worst = std::max(worst, std::abs(hsic_shift_spectral(ku, kv, p) - direct) / denom);
    worst_decomposed = std::max(worst_decomposed, std::abs(hsic_shift_decomposed(ku, kv, p).total() - direct) / denom);
  }
  o.pass = worst <= 1e-7;
  o.detail = "2m u~^T(I-M)v~ vs direct rel err " + fmt(worst) + " (with alignment term " +
             fmt(worst_decomposed) + ")";
  return o;
}

// ---------------------------------------------------------------- 5

Outcome greedy_guarantee() {
  Outcome o;
  const std::size_t m = 100;
  const double factor = 1.0 - std::exp(-2.0);
  int ok = 0, eligible = 0;
  double worst_ratio = std::numeric_limits<double>::infinity();
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    std::mt19937_64 rng(500 + seed);
    std::normal_distribution<double> g;
    Matrix x(static_cast<Idx>(m), 4);
    std::vector<int> y(m);
    for (std::size_t i = 0; i < m; ++i) {
      const auto r = static_cast<Idx>(i);
      x(r, 0) = g(rng);
      x(r, 1) = g(rng);
      x(r, 2) = x(r, 0) + 0.1 * g(rng);
      x(r, 3) = x(r, 1) + 0.1 * g(rng);
      y[i] = i % 2 ? 1 : -1;
    }
    const Dataset ds = testing::make_dataset(x, y);
    const auto split = FeatureSplit::first_half(4);
    auto [ku, kv] = split_kernels(ds, split);
    const double h0 = hsic(ku, kv), r = remainder_general(ku, kv);
    if (h0 <= r) continue;
    ++eligible;
    SearchConfig c;
    c.iterations = (m + 3) / 4;
    c.block_class = false;
    c.early_stop_patience = 0;
    c.pvalue_every = 0;
    c.record_rcp = false;
    HsicObjective obj(ku, kv);
    (void)crossover_learn(ds, split, c, obj);
    const double shift = obj.recompute() - h0;
    const double target = -factor * (h0 - r);
    worst_ratio = std::min(worst_ratio, shift / target);
    if (shift <= target) ++ok;
  }
  o.pass = eligible == 20 && ok == 20;
  o.detail = std::to_string(ok) + "/" + std::to_string(eligible) + " instances with HSIC > R meet the shift; min shift/target " +
             fmt(worst_ratio);
  return o;
}

// ---------------------------------------------------------------- 6

struct BlowupStats {
  int ok = 0, min_p = 0, high_p = 0, err_ok = 0;
  double worst_gap = 0.0;
};

BlowupStats run_blowup(Dataset (*generator)(std::size_t, std::uint64_t, double)) {
  BlowupStats st;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset raw = generator(200, 600 + seed, 0.3);
    const Dataset raw_test = generator(400, 900 + seed, 0.3);
    const Standardized scaled = standardize(raw);
    const Dataset test = apply_scaling(raw_test, scaled.params);
    const auto split = FeatureSplit::first_half(4);
    auto [ku, kv] = split_kernels(scaled.data, split);
    const double p0 = pvalue_permutation_test(ku, kv, 999, mix64(seed)).smoothed;

    SearchConfig c;
    c.iterations = 200;
    c.seed = seed;
    c.early_stop_patience = 0;
    c.pvalue_every = 0;
    c.record_rcp = false;
    HsicObjective obj(ku, kv);
    const SearchResult res = crossover_learn(scaled.data, split, c, obj);
    const Matrix p = res.permutation.to_dense();
    const double p1 = pvalue_permutation_test(ku, p * kv * p.transpose(), 999, mix64(seed + 1)).smoothed;

    TrainOptions opts;
    opts.lambda = 1e-3;
    const double base_err = zero_one_error(train(scaled.data, opts), test);
    const double cp_err = zero_one_error(train(apply_cp(scaled.data, split, res.permutation), opts), test);
    const double gap = std::abs(cp_err - base_err);
    st.worst_gap = std::max(st.worst_gap, gap);
    const bool a = p0 == 1.0 / 1000.0, b = p1 > 0.05, e = gap <= 0.05;
    st.min_p += a;
    st.high_p += b;
    st.err_ok += e;
    st.ok += a && b && e;
  }
  return st;
}

// The shuffle features copy an anchor feature the label ignores. When the
// label drives both sides instead, block-class swaps cannot remove the
// class-mediated part of the dependence; that variant is reported alongside.
Outcome pvalue_blowup() {
  Outcome o;
  const BlowupStats side = run_blowup(testing::side_dependent_dataset);
  const BlowupStats coupled = run_blowup(testing::dependent_dataset);
  o.pass = side.ok >= 18;
  o.detail = std::to_string(side.ok) + "/20 seeds (initial p minimal " + std::to_string(side.min_p) +
             ", final p > 0.05 " + std::to_string(side.high_p) + ", error within 0.05 " +
             std::to_string(side.err_ok) + ", max gap " + fmt(side.worst_gap) +
             "); label-coupled dependence: final p > 0.05 in " + std::to_string(coupled.high_p) + "/20";
  return o;
}

// ---------------------------------------------------------------- 7

Dataset table_dataset(std::int64_t a, std::int64_t b, std::int64_t c, std::int64_t d, std::mt19937_64& rng) {
  std::vector<std::array<double, 2>> rows;
  const auto push = [&](int xc, int xa, std::int64_t n) {
    for (std::int64_t k = 0; k < n; ++k) rows.push_back({double(xc), double(xa)});
  };
  push(0, 0, a);
  push(1, 0, b);
  push(0, 1, c);
  push(1, 1, d);
  std::shuffle(rows.begin(), rows.end(), rng);
  Matrix x(static_cast<Idx>(rows.size()), 2);
  std::vector<int> y(rows.size());
  std::bernoulli_distribution coin(0.5);
  for (std::size_t i = 0; i < rows.size(); ++i) {
    x(static_cast<Idx>(i), 0) = rows[i][0];
    x(static_cast<Idx>(i), 1) = rows[i][1];
    y[i] = i == 0 ? 1 : i == 1 ? -1 : (coin(rng) ? 1 : -1);
  }
  return testing::make_dataset(std::move(x), std::move(y));
}

Outcome odds_shifts() {
  Outcome o;
  std::mt19937_64 rng(7);
  std::uniform_int_distribution<std::int64_t> cell(1, 15);
  std::size_t shifts = 0, bad = 0;
  for (int t = 0; t < 100; ++t) {
    const std::int64_t a = cell(rng), b = cell(rng), c = cell(rng), d = cell(rng);
    const Dataset ds = table_dataset(a, b, c, d, rng);
    const ContingencyTable before = contingency(ds, 0, 1, Predicate::always());
    const ShiftRange range = legal_shift_range(before);
    for (std::int64_t i = range.lo; i <= range.hi; ++i) {
      if (i == d) continue;
      ++shifts;
      const OddsCp cp = build_odds_cp(ds, 0, 1, Predicate::always(), i);
      const Dataset after = apply_cp(ds, cp.split, cp.permutation);
      ContingencyTable n;
      for (Idx r = 0; r < after.x().rows(); ++r) {
        const bool xc = after.x()(r, 0) != 0.0, xa = after.x()(r, 1) != 0.0;
        (xa ? (xc ? n.d : n.c) : (xc ? n.b : n.a)) += 1;
      }
      const Rational expected = Rational(b + d, d - i) * Rational(i, d);
      const Rational got = Rational(n.b, n.d) - Rational(b, d);
      const bool marginals = n.a + n.b == a + b && n.c + n.d == c + d && n.a + n.c == a + c && n.b + n.d == b + d;
      if (got != expected || !marginals) ++bad;
    }
  }
  o.pass = bad == 0;
  o.detail = std::to_string(shifts - bad) + "/" + std::to_string(shifts) + " shifts exact over 100 tables";
  return o;
}

// ---------------------------------------------------------------- 8

Outcome rcp_soundness() {
  Outcome o;
  std::mt19937_64 rng(8);
  std::uniform_int_distribution<std::size_t> mdist(4, 12), ddist(2, 6);
  int bound_ok = 0, twice_ok = 0, expect_ok = 0;
  for (int t = 0; t < 100; ++t) {
    const std::size_t m = mdist(rng);
    std::uniform_int_distribution<std::size_t> pdist(1, m - 1);
    const Dataset ds = testing::gaussian_dataset(m, ddist(rng), pdist(rng), rng);
    const auto split = FeatureSplit::first_half(ds.d());
    const Permutation perm = random_blockclass(ds.labels(), rng);
    const double exact = rcp_exact_linear(ds, split, perm, 1.0);
    bound_ok += exact <= rcp_bound_linear(ds, split, perm, 1.0).value + 1e-12;

    Matrix s(ds.x().rows(), static_cast<Idx>(split.shuffle().size()));
    for (std::size_t k = 0; k < split.shuffle().size(); ++k)
      s.col(static_cast<Idx>(k)) = ds.x().col(static_cast<Idx>(split.shuffle()[k]));
    twice_ok += exact <= 2.0 * rademacher_exact_linear(s, 1.0) + 1e-12;

    double sum = 0.0;
    std::size_t n = 0;
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b, ++n)
        sum += rcp_exact_linear(ds, split, Permutation::transposition(m, a, b), 1.0);
    expect_ok += expected_rcp_bound(ds, split, 2, ClassRestriction::all, 1.0) >= sum / static_cast<double>(n);
  }
  o.pass = bound_ok == 100 && twice_ok == 100 && expect_ok == 100;
  o.detail = "linear bound " + std::to_string(bound_ok) + "/100, twice Rademacher " + std::to_string(twice_ok) +
             "/100, k=2 expectation bound " + std::to_string(expect_ok) + "/100";
  return o;
}

// ---------------------------------------------------------------- 9

Outcome cm_jamming() {
  Outcome o;
  const Dataset cm = testing::cm_dataset(500, 9);
  const CmTriple t;
  const double eps = cm_default_epsilon(cm, t);
  const JamResult jam = greedy_partial_corr_jam(cm, t, eps, 1000000);
  const Dataset after = apply_cp(cm, FeatureSplit({0, 1}, {2}, 3), jam.permutation);
  const double rho = partial_correlation(after, 0, 2, 1);
  const double r12_drift = std::abs(correlation(after.x(), 0, 1) - correlation(cm.x(), 0, 1));
  int near = 0;
  for (std::uint64_t s = 0; s < 100; ++s) near += std::abs(random_blockclass_jam(cm, t, s).rho - jam.bound) <= 0.1;
  o.pass = rho <= jam.bound + 1e-6 && r12_drift <= 1e-12 && near >= 90;
  o.detail = "greedy rho " + fmt(rho) + " vs R " + fmt(jam.bound) + " after " + std::to_string(jam.trace.size() - 1) +
             " swaps, rho_12 drift " + fmt(r12_drift) + ", random within R +- 0.1: " + std::to_string(near) + "/100";
  return o;
}

// ---------------------------------------------------------------- 10

Outcome causal_split() {
  Outcome o;
  std::mt19937_64 rng(10);
  int dag_ok = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t latent = static_cast<std::size_t>(t) % 3;
    const std::size_t n = 5 + latent + static_cast<std::size_t>(t) % 4;
    const CausalDag dag = testing::random_dag(n, 0.3, latent, rng);
    bool all = true;
    for (std::size_t x = latent; x < n && all; ++x)
      for (std::size_t y = latent; y < n && all; ++y) {
        if (x == y) continue;
        std::vector<std::vector<std::size_t>> valid;
        for (std::uint32_t mask = 0; mask < (1U << n); ++mask) {
          std::vector<std::size_t> z;
          for (std::size_t v = 0; v < n; ++v)
            if ((mask >> v) & 1U) z.push_back(v);
          const auto desc = dag.descendants(x);
          bool admissible = true;
          for (auto v : z) admissible = admissible && v != x && v != y && !desc[v] && !dag.vertices()[v].latent;
          if (admissible && testing::d_separated_by_paths(dag.without_outgoing(x), x, y, z)) valid.push_back(z);
        }
        std::vector<std::vector<std::size_t>> minimal;
        for (const auto& z : valid)
          if (std::none_of(valid.begin(), valid.end(), [&](const auto& w) {
                return w.size() < z.size() && std::includes(z.begin(), z.end(), w.begin(), w.end());
              }))
            minimal.push_back(z);
        std::sort(minimal.begin(), minimal.end(),
                  [](const auto& a, const auto& b) { return a.size() != b.size() ? a.size() < b.size() : a < b; });
        all = backdoor_adjustments(dag, x, y) == minimal;
      }
    dag_ok += all;
  }

  const auto tri = set_splitting(3, {{0, 1}, {0, 2}, {1, 2}});
  const bool certificate = !tri.feasible && tri.exhaustive;
  int split_ok = 0, feasible = 0;
  for (int t = 0; t < 50; ++t) {
    const std::size_t n = 4 + static_cast<std::size_t>(t) % 8;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    std::vector<std::vector<std::size_t>> sets;
    for (int s = 0; s < 3 + t % 5; ++s) {
      std::vector<std::size_t> set{pick(rng), pick(rng), pick(rng)};
      std::sort(set.begin(), set.end());
      set.erase(std::unique(set.begin(), set.end()), set.end());
      if (set.size() >= 2) sets.push_back(set);
    }
    bool exists = false;
    for (std::uint32_t mask = 0; mask < (1U << n) && !exists; ++mask)
      exists = std::all_of(sets.begin(), sets.end(), [&](const auto& s) {
        return std::any_of(s.begin(), s.end(), [&](auto v) { return (mask >> v) & 1U; }) &&
               std::any_of(s.begin(), s.end(), [&](auto v) { return !((mask >> v) & 1U); });
      });
    const auto r = set_splitting(n, sets);
    bool valid = r.feasible == exists;
    if (r.feasible) {
      ++feasible;
      for (const auto& s : sets)
        valid = valid && std::any_of(s.begin(), s.end(), [&](auto v) { return r.shuffle[v]; }) &&
                std::any_of(s.begin(), s.end(), [&](auto v) { return !r.shuffle[v]; });
    }
    split_ok += valid;
  }
  o.pass = dag_ok == 50 && certificate && split_ok == 50;
  o.detail = "back-door sets match the path oracle on " + std::to_string(dag_ok) + "/50 DAGs; triangle " +
             (certificate ? "infeasible after " + std::to_string(tri.splits_checked) + " splits" : "not certified") +
             "; set systems " + std::to_string(split_ok) + "/50 (" + std::to_string(feasible) + " feasible)";
  return o;
}

// ---------------------------------------------------------------- 11

Outcome data_optimization() {
  Outcome o;
  double base_sum = 0.0, cp_sum = 0.0;
  int monotone = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Dataset all = testing::two_spirals(400, 1100 + seed);
    std::vector<std::size_t> order(all.m());
    std::iota(order.begin(), order.end(), std::size_t{0});
    auto rng = make_rng(seed, "holdout");
    std::shuffle(order.begin(), order.end(), rng);
    std::vector<std::size_t> test_rows(order.begin(), order.begin() + 80), train_rows(order.begin() + 80, order.end());
    std::sort(test_rows.begin(), test_rows.end());
    std::sort(train_rows.begin(), train_rows.end());
    const Standardized st = standardize(all.subset(train_rows));
    const Dataset test = apply_scaling(all.subset(test_rows), st.params);
    const auto split = FeatureSplit::first_half(2);

    TrainOptions opts;
    opts.lambda = cross_validate(st.data, opts, default_lambda_grid(), 5, seed).lambda;
    const LinearModel base = train(st.data, opts);
    SearchConfig c;
    c.iterations = 100;
    c.seed = seed;
    c.retrain_every = 10;
    c.early_stop_patience = 0;
    c.pvalue_every = 0;
    c.record_rcp = false;
    SearchContext ctx;
    ctx.model = base;
    ctx.train_options = opts;
    PhiRiskObjective obj(st.data, split, base);
    const SearchResult res = crossover_learn(st.data, split, c, obj, ctx);
    base_sum += zero_one_error(base, test);
    cp_sum += zero_one_error(*res.model, test);
    bool mono = true;
    for (std::size_t k = 1; k < res.trace.size(); ++k) mono = mono && res.trace[k].objective <= res.trace[k - 1].objective;
    monotone += mono;
  }
  o.pass = cp_sum <= base_sum && monotone == 20;
  o.detail = "mean holdout error " + fmt(cp_sum / 20.0) + " (CP-optimized) vs " + fmt(base_sum / 20.0) +
             " (baseline); non-increasing traces " + std::to_string(monotone) + "/20";
  return o;
}

}  // namespace acc

int main() {
  struct Criterion {
    int id;
    double limit_seconds;
    std::function<acc::Outcome()> run;
  };
  const std::vector<Criterion> criteria = {
      {1, 1.0, acc::toy_domain},         {2, 10.0, acc::mean_operator},   {3, 1.0, acc::hsic_incremental},
      {4, 30.0, acc::spectral_shift},    {5, 300.0, acc::greedy_guarantee}, {6, 600.0, acc::pvalue_blowup},
      {7, 10.0, acc::odds_shifts},       {8, 120.0, acc::rcp_soundness},   {9, 300.0, acc::cm_jamming},
      {10, 60.0, acc::causal_split},     {11, 600.0, acc::data_optimization}};
  int failed = 0;
  for (const auto& c : criteria) {
    const auto start = std::chrono::steady_clock::now();
    acc::Outcome out;
    try {
      out = c.run();
    } catch (const std::exception& e) {
      out = {false, std::string("exception: ") + e.what()};
    }
    const double secs = std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
    const bool in_time = secs <= c.limit_seconds;
    const bool pass = out.pass && in_time;
    failed += !pass;
    std::printf("criterion %2d: %s  [%.2f s / %.0f s] %s%s\n", c.id, pass ? "PASS" : "FAIL", secs, c.limit_seconds,
                out.detail.c_str(), in_time ? "" : " (time limit exceeded)");
    std::fflush(stdout);
  }
  return failed == 0 ? 0 : 1;
}
