#include <doctest.h>

#include <algorithm>
#include <map>
#include <random>

#include "cpforge/causal.hpp"
#include "cpforge/error.hpp"
#include "support/synthetic.hpp"

using namespace cpforge;
using testing::Idx;

namespace {

// Correlation of the residuals of x_j and x_k after regressing each on x_l.
double residual_partial_corr(const Matrix& x, Idx j, Idx k, Idx l) {
  const auto resid = [&](Idx c) {
    const Vector a = x.col(c).array() - x.col(c).mean();
    const Vector b = x.col(l).array() - x.col(l).mean();
    return Vector(a - a.dot(b) / b.dot(b) * b);
  };
  const Vector rj = resid(j), rk = resid(k);
  return rj.dot(rk) / (rj.norm() * rk.norm());
}

CausalDag named_dag(std::vector<std::string> names, std::vector<std::pair<std::string, std::string>> arcs,
                    std::vector<std::string> latent = {}) {
  nlohmann::json j;
  for (const auto& n : names) {
    const bool lat = std::find(latent.begin(), latent.end(), n) != latent.end();
    j["vertices"].push_back({{"name", n}, {"latent", lat}});
  }
  j["arcs"] = nlohmann::json::array();
  for (const auto& [a, b] : arcs) j["arcs"].push_back(nlohmann::json::array({a, b}));
  return CausalDag::from_json(j);
}

bool backdoor_oracle(const CausalDag& dag, std::size_t x, std::size_t y, const std::vector<std::size_t>& z) {
  const auto desc = dag.descendants(x);
  for (auto v : z)
    if (v == x || v == y || desc[v] || dag.vertices()[v].latent) return false;
  return testing::d_separated_by_paths(dag.without_outgoing(x), x, y, z);
}

}  // namespace

TEST_CASE("partial correlation") {
  std::mt19937_64 rng(1);
  std::normal_distribution<double> g;
  Matrix x(1000, 3);
  for (Idx i = 0; i < 1000; ++i) {
    x(i, 0) = g(rng);
    x(i, 1) = g(rng);
    x(i, 2) = x(i, 0);
  }
  CHECK(partial_correlation(x, 0, 2, 1) == doctest::Approx(1.0).epsilon(0.05));

  Matrix n(2000, 3);
  for (Idx i = 0; i < n.rows(); ++i)
    for (Idx j = 0; j < 3; ++j) n(i, j) = g(rng);
  CHECK(std::abs(partial_correlation(n, 0, 2, 1)) < 0.08);

  const Dataset cm = testing::cm_dataset(300, 4);
  CHECK(partial_correlation(cm.x(), 0, 2, 1) ==
        doctest::Approx(residual_partial_corr(cm.x(), 0, 2, 1)).epsilon(1e-10));

  Matrix flat = n.topRows(10);
  flat.col(1).setConstant(2.0);
  CHECK_THROWS_AS(partial_correlation(flat, 0, 2, 1), Error);
}

TEST_CASE("bound R") {
  Matrix x(6, 3);
  x << 1, 1, 2, 1, 1, 0, 1, -1, 1, -1, -1, 0, -1, -1, -1, -1, 1, -2;
  const Dataset ds = Dataset::from_sorted(x, {1, 1, 1, -1, -1, -1}, {"a", "b", "c"}, {0, 1, 2, 3, 4, 5});
  // mu~ = (1, 1/3, sqrt(3/5)), rho_12 = 1/3, p = 1/2.
  CHECK(cm_bound_R(ds, {}, 0.5) == doctest::Approx(4.0 / 9.0 * std::sqrt(0.6)).epsilon(1e-12));

  Matrix scaled = x;
  scaled.col(0) *= 7.0;
  scaled.col(2) *= 0.1;
  CHECK(cm_bound_R(ds.with_observations(scaled), {}, 0.5) == doctest::Approx(cm_bound_R(ds, {}, 0.5)));

  Matrix same(4, 3);
  same << 1, 2, 3, -1, 0, 1, 1, 2, 3, -1, 0, 1;
  const Dataset eq = Dataset::from_sorted(same, {1, 1, -1, -1}, {"a", "b", "c"}, {0, 1, 2, 3});
  CHECK(cm_bound_R(eq, {}, 0.5) == 0.0);
  CHECK_THROWS_AS(cm_bound_R(ds, {}, 1.0), Error);
}

TEST_CASE("greedy jam") {
  const Dataset cm = testing::cm_dataset(200, 7);
  const CmTriple t;
  const double eps = cm_default_epsilon(cm, t);
  const JamResult res = greedy_partial_corr_jam(cm, t, eps, 10000);
  CHECK(res.trace.back() <= res.bound + 1e-6);
  CHECK(res.reached_bound);
  for (std::size_t k = 1; k < res.trace.size(); ++k) CHECK(res.trace[k] < res.trace[k - 1]);
  CHECK(is_block_class(ShuffleSpec{res.permutation}, cm.labels()));

  const Dataset after = apply_cp(cm, FeatureSplit({0, 1}, {2}, 3), res.permutation);
  CHECK(partial_correlation(after, 0, 2, 1) == doctest::Approx(res.trace.back()).epsilon(1e-9));
  CHECK(correlation(after.x(), 0, 1) == correlation(cm.x(), 0, 1));
  CHECK(after.x().col(2).mean() == doctest::Approx(cm.x().col(2).mean()).epsilon(1e-14));

  // Already below the bound: nothing to do.
  Matrix flipped = cm.x();
  flipped.col(2) = -flipped.col(2);
  const Dataset low = cm.with_observations(flipped);
  if (partial_correlation(low, 0, 2, 1) <= cm_bound_R(low, t, eps)) {
    const JamResult none = greedy_partial_corr_jam(low, t, eps, 100);
    CHECK(none.permutation.is_identity());
    CHECK(none.trace.size() == 1);
  }
}

TEST_CASE("random block-class jam") {
  std::vector<int> labels{1, 1, -1, -1};
  std::map<std::vector<std::size_t>, int> seen;
  for (std::uint64_t s = 0; s < 4000; ++s) {
    const Permutation p = random_blockclass_permutation(labels, s);
    CHECK(is_block_class(ShuffleSpec{p}, labels));
    ++seen[p.indices()];
  }
  CHECK(seen.size() == 4);
  for (const auto& [src, n] : seen) CHECK(std::abs(n - 1000) < 150);

  const Dataset cm = testing::cm_dataset(500, 11);
  const CmTriple t;
  const double bound = cm_bound_R(cm, t, cm_default_epsilon(cm, t));
  int ok = 0;
  for (std::uint64_t s = 0; s < 100; ++s)
    if (random_blockclass_jam(cm, t, s).rho <= bound + 0.1) ++ok;
  CHECK(ok >= 90);
}

TEST_CASE("back-door adjustments on small graphs") {
  const CausalDag chain = named_dag({"x", "y"}, {{"x", "y"}});
  CHECK(backdoor_adjustments(chain, 0, 1) == std::vector<std::vector<std::size_t>>{{}});

  const CausalDag fork = named_dag({"x", "y", "z"}, {{"z", "x"}, {"z", "y"}, {"x", "y"}});
  CHECK(backdoor_adjustments(fork, 0, 1) == std::vector<std::vector<std::size_t>>{{2}});

  const CausalDag cm = named_dag({"x1", "x2", "x3", "u"},
                                 {{"x1", "x2"}, {"x2", "x3"}, {"u", "x2"}, {"u", "x3"}}, {"u"});
  CHECK(backdoor_adjustments(cm, 1, 2).empty());
  CHECK_FALSE(satisfies_backdoor(cm, 1, 2, {0}));
}

TEST_CASE("d-separation and back-door sets agree with the path oracle") {
  std::mt19937_64 rng(3);
  for (int t = 0; t < 40; ++t) {
    const std::size_t n = 5 + static_cast<std::size_t>(t) % 4;
    const CausalDag dag = testing::random_dag(n, 0.35, t % 2, rng);
    for (std::uint32_t mask = 0; mask < (1U << n); mask += 3) {
      std::vector<std::size_t> z;
      for (std::size_t v = 0; v < n; ++v)
        if ((mask >> v) & 1U) z.push_back(v);
      for (std::size_t a = 0; a < n; ++a)
        for (std::size_t b = a + 1; b < n; ++b) {
          if ((mask >> a) & 1U || (mask >> b) & 1U) continue;
          CHECK(dag.d_separated(a, b, z) == testing::d_separated_by_paths(dag, a, b, z));
        }
    }

    const std::size_t x = n - 2, y = n - 1;
    std::vector<std::vector<std::size_t>> valid;
    for (std::uint32_t mask = 0; mask < (1U << n); ++mask) {
      std::vector<std::size_t> z;
      for (std::size_t v = 0; v < n; ++v)
        if ((mask >> v) & 1U) z.push_back(v);
      if (backdoor_oracle(dag, x, y, z)) valid.push_back(z);
    }
    std::vector<std::vector<std::size_t>> minimal;
    for (const auto& z : valid) {
      const bool has_smaller = std::any_of(valid.begin(), valid.end(), [&](const auto& w) {
        return w.size() < z.size() && std::includes(z.begin(), z.end(), w.begin(), w.end());
      });
      if (!has_smaller) minimal.push_back(z);
    }
    std::sort(minimal.begin(), minimal.end(), [](const auto& a, const auto& b) {
      return a.size() != b.size() ? a.size() < b.size() : a < b;
    });
    CHECK(backdoor_adjustments(dag, x, y) == minimal);
  }
}

TEST_CASE("set splitting") {
  const auto tri = set_splitting(3, {{0, 1}, {0, 2}, {1, 2}});
  CHECK_FALSE(tri.feasible);
  CHECK(tri.exhaustive);
  // Element 0 is pinned to the anchor and the shuffle side must be non-empty.
  CHECK(tri.splits_checked == 3);

  const auto two = set_splitting(4, {{0, 1}, {2, 3}});
  REQUIRE(two.feasible);
  CHECK(two.shuffle[0] != two.shuffle[1]);
  CHECK(two.shuffle[2] != two.shuffle[3]);

  std::mt19937_64 rng(5);
  for (int t = 0; t < 30; ++t) {
    const std::size_t n = 4 + static_cast<std::size_t>(t) % 5;
    std::vector<std::vector<std::size_t>> sets;
    std::uniform_int_distribution<std::size_t> pick(0, n - 1);
    for (int s = 0; s < 2 + t % 6; ++s) {
      std::size_t a = pick(rng), b = pick(rng);
      if (a == b) b = (a + 1) % n;
      sets.push_back({std::min(a, b), std::max(a, b)});
    }
    bool any = false;
    for (std::uint32_t mask = 0; mask < (1U << n) && !any; ++mask)
      any = std::all_of(sets.begin(), sets.end(), [&](const auto& s) {
        return ((mask >> s[0]) & 1U) != ((mask >> s[1]) & 1U);
      });
    const auto r = set_splitting(n, sets);
    CHECK(r.feasible == any);
    if (r.feasible)
      for (const auto& s : sets) CHECK(r.shuffle[s[0]] != r.shuffle[s[1]]);
  }
}

TEST_CASE("interfering split") {
  nlohmann::json j;
  j["vertices"] = {"x", "y"};
  j["arcs"] = nlohmann::json::array({nlohmann::json::array({"x", "y"})});
  j["queries"] = nlohmann::json::array({nlohmann::json::array({"y", "x"})});
  const CausalDag dag = CausalDag::from_json(j);
  const InterferingSplit s = interfering_split(dag);
  CHECK(s.search.feasible);
  CHECK(s.anchor == std::vector<std::string>{"x"});
  CHECK(s.shuffle == std::vector<std::string>{"y"});
  CHECK(to_json(s).contains("anchor"));

  nlohmann::json cyc;
  cyc["vertices"] = {"a", "b"};
  cyc["arcs"] = nlohmann::json::array({nlohmann::json::array({"a", "b"}), nlohmann::json::array({"b", "a"})});
  CHECK_THROWS_AS(CausalDag::from_json(cyc), Error);
  CHECK(CausalDag::from_json(dag.to_json()).to_json() == dag.to_json());
}
