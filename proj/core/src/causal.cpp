#include "cpforge/causal.hpp"

#include <algorithm>
#include <cmath>
#include <bit>
#include <numeric>
#include <queue>
#include <random>

#include "cpforge/error.hpp"
#include "cpforge/rng.hpp"

namespace cpforge {

namespace {

using Idx = Eigen::Index;

struct Moments {
  double mean = 0.0;
  double var = 0.0;
};

Moments moments(const Matrix& x, std::size_t j) {
  const auto col = x.col(static_cast<Idx>(j));
  const double mean = col.mean();
  return {mean, (col.array() - mean).square().mean()};
}

double covariance(const Matrix& x, std::size_t j, std::size_t k) {
  const auto a = x.col(static_cast<Idx>(j));
  const auto b = x.col(static_cast<Idx>(k));
  return ((a.array() - a.mean()) * (b.array() - b.mean())).mean();
}

constexpr double kDegenerate = 1e-12;

double partial_from(double r13, double r12, double r23) {
  const double den = (1.0 - r12 * r12) * (1.0 - r23 * r23);
  require(r12 * r12 < 1.0 - kDegenerate && r23 * r23 < 1.0 - kDegenerate, ErrorKind::numeric,
          "degenerate conditioning variable: squared correlation reaches 1");
  return (r13 - r12 * r23) / std::sqrt(den);
}

void check_triple(const Dataset& ds, const CmTriple& t) {
  require(t.x1 < ds.d() && t.x2 < ds.d() && t.x3 < ds.d(), ErrorKind::usage,
          "feature index out of range");
  require(t.x1 != t.x2 && t.x1 != t.x3 && t.x2 != t.x3, ErrorKind::usage,
          "x1, x2 and x3 must be distinct features");
}

}  // namespace

double correlation(const Matrix& x, std::size_t j, std::size_t k) {
  const double vj = moments(x, j).var, vk = moments(x, k).var;
  require(vj > 0.0 && vk > 0.0, ErrorKind::numeric, "correlation of a constant column");
  return std::clamp(covariance(x, j, k) / std::sqrt(vj * vk), -1.0, 1.0);
}

double partial_correlation(const Matrix& x, std::size_t j, std::size_t k, std::size_t l) {
  require(j < static_cast<std::size_t>(x.cols()) && k < static_cast<std::size_t>(x.cols()) &&
              l < static_cast<std::size_t>(x.cols()),
          ErrorKind::usage, "feature index out of range");
  return std::clamp(partial_from(correlation(x, j, k), correlation(x, j, l), correlation(x, l, k)),
                    -1.0, 1.0);
}

double partial_correlation(const Dataset& ds, std::size_t j, std::size_t k, std::size_t l) {
  return partial_correlation(ds.x(), j, k, l);
}

double cm_default_epsilon(const Dataset& ds, const CmTriple& t) {
  check_triple(ds, t);
  const double r12 = correlation(ds.x(), t.x1, t.x2);
  const double r23 = correlation(ds.x(), t.x2, t.x3);
  return 1.0 - std::max(r12 * r12, r23 * r23);
}

double cm_bound_R(const Dataset& ds, const CmTriple& t, double epsilon) {
  check_triple(ds, t);
  require(epsilon > 0.0 && epsilon < 1.0, ErrorKind::usage, "epsilon must lie in (0, 1)");
  const auto mp = static_cast<Idx>(ds.m_pos());
  const auto mn = static_cast<Idx>(ds.m_neg());
  require(mp > 0 && mn > 0, ErrorKind::data, "both classes must be present");
  const auto mu_tilde = [&](std::size_t j) {
    const auto col = ds.x().col(static_cast<Idx>(j));
    const double v = moments(ds.x(), j).var;
    require(v > 0.0, ErrorKind::numeric, "constant feature in the bound");
    return (col.head(mp).mean() - col.tail(mn).mean()) / (2.0 * std::sqrt(v));
  };
  const double p = static_cast<double>(mp) / static_cast<double>(ds.m());
  const double r12 = correlation(ds.x(), t.x1, t.x2);
  return p * (1.0 - p) * (mu_tilde(t.x1) - r12 * mu_tilde(t.x2)) * mu_tilde(t.x3) /
         (1.0 - epsilon);
}

JamResult greedy_partial_corr_jam(const Dataset& ds, const CmTriple& t, double epsilon,
                                  std::size_t max_iter) {
  check_triple(ds, t);
  const Matrix& x = ds.x();
  const std::size_t m = ds.m();
  const double md = static_cast<double>(m);
  const double v1 = moments(x, t.x1).var, v2 = moments(x, t.x2).var, v3 = moments(x, t.x3).var;
  require(v1 > 0.0 && v2 > 0.0 && v3 > 0.0, ErrorKind::numeric, "constant feature in the jam");
  const double r12 = correlation(x, t.x1, t.x2);

  JamResult res;
  res.bound = cm_bound_R(ds, t, epsilon);
  res.permutation = Permutation::identity(m);
  const auto c1 = x.col(static_cast<Idx>(t.x1));
  const auto c2 = x.col(static_cast<Idx>(t.x2));
  Vector c3 = x.col(static_cast<Idx>(t.x3));
  double c13 = covariance(x, t.x1, t.x3);
  double c23 = covariance(x, t.x2, t.x3);
  const double s13 = std::sqrt(v1 * v3), s23 = std::sqrt(v2 * v3);
  const auto rho_of = [&](double a13, double a23) {
    return partial_from(a13 / s13, r12, a23 / s23);
  };
  if (r12 * r12 > 1.0 - epsilon) res.precondition_violated = true;

  double rho = rho_of(c13, c23);
  res.trace.push_back(rho);
  for (std::size_t it = 0; it < max_iter; ++it) {
    if (rho <= res.bound) break;
    double best = rho;
    std::size_t ba = 0, bb = 0;
    bool found = false;
    for (std::size_t a = 0; a < m; ++a) {
      const auto ia = static_cast<Idx>(a);
      for (std::size_t b = a + 1; b < m; ++b) {
        if (ds.label(a) != ds.label(b)) break;  // rows are class-sorted
        const auto ib = static_cast<Idx>(b);
        const double d3 = c3(ib) - c3(ia);
        const double n13 = c13 + (c1(ia) - c1(ib)) * d3 / md;
        const double n23 = c23 + (c2(ia) - c2(ib)) * d3 / md;
        const double r23 = n23 / s23;
        if (r23 * r23 >= 1.0 - kDegenerate) continue;
        const double cand = rho_of(n13, n23);
        if (cand < best) {
          best = cand;
          ba = a;
          bb = b;
          found = true;
        }
      }
    }
    if (!found || best >= rho - kJamStrictDecrease) break;
    const auto ia = static_cast<Idx>(ba), ib = static_cast<Idx>(bb);
    const double d3 = c3(ib) - c3(ia);
    c13 += (c1(ia) - c1(ib)) * d3 / md;
    c23 += (c2(ia) - c2(ib)) * d3 / md;
    std::swap(c3(ia), c3(ib));
    res.permutation.swap_positions(ba, bb);
    rho = best;
    res.trace.push_back(rho);
    const double r23 = c23 / s23;
    if (r23 * r23 > 1.0 - epsilon) res.precondition_violated = true;
  }
  res.reached_bound = rho <= res.bound;
  return res;
}

Permutation random_blockclass_permutation(std::span<const int> labels, std::uint64_t seed) {
  auto rng = make_rng(seed, "blockclass-permutation");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) (labels[i] == 1 ? pos : neg).push_back(i);
  std::vector<std::size_t> src(labels.size());
  for (auto* cls : {&pos, &neg}) {
    auto shuffled = *cls;
    std::shuffle(shuffled.begin(), shuffled.end(), rng);
    for (std::size_t k = 0; k < cls->size(); ++k) src[(*cls)[k]] = shuffled[k];
  }
  return Permutation(std::move(src));
}

RandomJam random_blockclass_jam(const Dataset& ds, const CmTriple& t, std::uint64_t seed) {
  check_triple(ds, t);
  RandomJam out{random_blockclass_permutation(ds.labels(), seed), 0.0};
  const FeatureSplit split = [&] {
    std::vector<std::size_t> anchor;
    for (std::size_t j = 0; j < ds.d(); ++j)
      if (j != t.x3) anchor.push_back(j);
    return FeatureSplit(std::move(anchor), {t.x3}, ds.d());
  }();
  out.rho = partial_correlation(apply_cp(ds, split, out.permutation), t.x1, t.x3, t.x2);
  return out;
}

// ---------------------------------------------------------------- DAG

CausalDag::CausalDag(std::vector<Vertex> vertices,
                     std::vector<std::pair<std::size_t, std::size_t>> arcs,
                     std::vector<Query> queries)
    : vertices_(std::move(vertices)), arcs_(std::move(arcs)), queries_(std::move(queries)) {
  const std::size_t n = vertices_.size();
  require(n > 0, ErrorKind::data, "DAG has no vertices");
  children_.assign(n, {});
  parents_.assign(n, {});
  for (const auto& [from, to] : arcs_) {
    require(from < n && to < n, ErrorKind::data, "arc endpoint out of range");
    require(from != to, ErrorKind::data, "self-loop on '" + vertices_[from].name + "'");
    children_[from].push_back(to);
    parents_[to].push_back(from);
  }
  std::vector<std::size_t> indeg(n);
  for (std::size_t v = 0; v < n; ++v) indeg[v] = parents_[v].size();
  std::vector<std::size_t> ready;
  for (std::size_t v = 0; v < n; ++v)
    if (indeg[v] == 0) ready.push_back(v);
  std::size_t seen = 0;
  while (!ready.empty()) {
    const auto v = ready.back();
    ready.pop_back();
    ++seen;
    for (auto c : children_[v])
      if (--indeg[c] == 0) ready.push_back(c);
  }
  require(seen == n, ErrorKind::data, "causal graph has a directed cycle");
  for (const auto& q : queries_) {
    require(q.x < n && q.y < n && q.x != q.y, ErrorKind::data, "malformed query");
    require(!vertices_[q.x].latent && !vertices_[q.y].latent, ErrorKind::data,
            "query variables must be observable");
  }
}

std::optional<std::size_t> CausalDag::index_of(const std::string& name) const {
  for (std::size_t v = 0; v < vertices_.size(); ++v)
    if (vertices_[v].name == name) return v;
  return std::nullopt;
}

CausalDag CausalDag::from_json(const nlohmann::json& j) {
  try {
    std::vector<Vertex> vs;
    for (const auto& v : j.at("vertices")) {
      if (v.is_string()) vs.push_back({v.get<std::string>(), false});
      else vs.push_back({v.at("name").get<std::string>(), v.value("latent", false)});
    }
    const auto lookup = [&vs](const nlohmann::json& ref) -> std::size_t {
      if (ref.is_number_integer()) return ref.get<std::size_t>();
      const auto name = ref.get<std::string>();
      for (std::size_t k = 0; k < vs.size(); ++k)
        if (vs[k].name == name) return k;
      fail(ErrorKind::data, "unknown vertex '" + name + "'");
    };
    std::vector<std::pair<std::size_t, std::size_t>> arcs;
    for (const auto& a : j.value("arcs", nlohmann::json::array()))
      arcs.emplace_back(lookup(a.at(0)), lookup(a.at(1)));
    std::vector<Query> qs;
    for (const auto& q : j.value("queries", nlohmann::json::array()))
      qs.push_back({lookup(q.at(0)), lookup(q.at(1))});
    return CausalDag(std::move(vs), std::move(arcs), std::move(qs));
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, std::string("malformed DAG file: ") + e.what());
  }
}

nlohmann::json CausalDag::to_json() const {
  nlohmann::json vs = nlohmann::json::array(), as = nlohmann::json::array(),
                 qs = nlohmann::json::array();
  for (const auto& v : vertices_) vs.push_back({{"name", v.name}, {"latent", v.latent}});
  for (const auto& [f, t] : arcs_) as.push_back({vertices_[f].name, vertices_[t].name});
  for (const auto& q : queries_) qs.push_back({vertices_[q.y].name, vertices_[q.x].name});
  return {{"vertices", vs}, {"arcs", as}, {"queries", qs}};
}

std::vector<std::size_t> CausalDag::observables() const {
  std::vector<std::size_t> out;
  for (std::size_t v = 0; v < vertices_.size(); ++v)
    if (!vertices_[v].latent) out.push_back(v);
  return out;
}

std::vector<bool> CausalDag::descendants(std::size_t v) const {
  std::vector<bool> out(size(), false);
  std::vector<std::size_t> stack{v};
  out[v] = true;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (auto c : children_[u])
      if (!out[c]) {
        out[c] = true;
        stack.push_back(c);
      }
  }
  return out;
}

CausalDag CausalDag::without_outgoing(std::size_t v) const {
  std::vector<std::pair<std::size_t, std::size_t>> arcs;
  for (const auto& a : arcs_)
    if (a.first != v) arcs.push_back(a);
  return CausalDag(vertices_, std::move(arcs), queries_);
}

bool CausalDag::d_separated(std::size_t a, std::size_t b, const std::vector<std::size_t>& z) const {
  const std::size_t n = size();
  require(a < n && b < n, ErrorKind::usage, "vertex out of range");
  std::vector<bool> in_z(n, false);
  for (auto v : z) {
    require(v < n, ErrorKind::usage, "vertex out of range");
    in_z[v] = true;
  }
  require(!in_z[a] && !in_z[b], ErrorKind::usage, "conditioning set contains an endpoint");
  if (a == b) return false;

  // ancestral closure of {a, b} and z
  std::vector<bool> anc(n, false);
  std::vector<std::size_t> stack{a, b};
  stack.insert(stack.end(), z.begin(), z.end());
  for (auto v : stack) anc[v] = true;
  while (!stack.empty()) {
    const auto u = stack.back();
    stack.pop_back();
    for (auto p : parents_[u])
      if (!anc[p]) {
        anc[p] = true;
        stack.push_back(p);
      }
  }
  // moral graph restricted to the closure
  std::vector<std::vector<std::size_t>> adj(n);
  for (std::size_t v = 0; v < n; ++v) {
    if (!anc[v]) continue;
    const auto& ps = parents_[v];
    for (std::size_t i = 0; i < ps.size(); ++i) {
      adj[v].push_back(ps[i]);
      adj[ps[i]].push_back(v);
      for (std::size_t k = i + 1; k < ps.size(); ++k) {
        adj[ps[i]].push_back(ps[k]);
        adj[ps[k]].push_back(ps[i]);
      }
    }
  }
  std::vector<bool> seen(n, false);
  std::queue<std::size_t> q;
  q.push(a);
  seen[a] = true;
  while (!q.empty()) {
    const auto u = q.front();
    q.pop();
    if (u == b) return false;
    for (auto w : adj[u])
      if (!seen[w] && !in_z[w]) {
        seen[w] = true;
        q.push(w);
      }
  }
  return true;
}

bool satisfies_backdoor(const CausalDag& dag, std::size_t x, std::size_t y,
                        const std::vector<std::size_t>& z) {
  const auto desc = dag.descendants(x);
  for (auto v : z) {
    require(v < dag.size(), ErrorKind::usage, "vertex out of range");
    if (v == x || v == y || desc[v] || dag.vertices()[v].latent) return false;
  }
  return dag.without_outgoing(x).d_separated(x, y, z);
}

std::vector<std::vector<std::size_t>> backdoor_adjustments(const CausalDag& dag, std::size_t x,
                                                           std::size_t y, std::size_t max_size) {
  require(x < dag.size() && y < dag.size() && x != y, ErrorKind::usage, "malformed query");
  require(dag.observables().size() <= kMaxBackdoorObservables, ErrorKind::usage,
          "graph too large for brute-force adjustment search (more than " +
              std::to_string(kMaxBackdoorObservables) + " observables)");
  const auto desc = dag.descendants(x);
  std::vector<std::size_t> cand;
  for (auto v : dag.observables())
    if (v != x && v != y && !desc[v]) cand.push_back(v);
  const CausalDag cut = dag.without_outgoing(x);

  std::vector<std::uint32_t> found;
  std::vector<std::vector<std::size_t>> out;
  const std::size_t limit = std::min(max_size, cand.size());
  for (std::size_t size = 0; size <= limit; ++size) {
    std::vector<std::uint32_t> masks;
    for (std::uint32_t mask = 0; mask < (1u << cand.size()); ++mask)
      if (static_cast<std::size_t>(std::popcount(mask)) == size) masks.push_back(mask);
    std::vector<std::pair<std::vector<std::size_t>, std::uint32_t>> level;
    for (auto mask : masks) {
      if (std::any_of(found.begin(), found.end(),
                      [mask](std::uint32_t f) { return (f & mask) == f; }))
        continue;
      std::vector<std::size_t> z;
      for (std::size_t k = 0; k < cand.size(); ++k)
        if (mask >> k & 1u) z.push_back(cand[k]);
      if (cut.d_separated(x, y, z)) level.emplace_back(std::move(z), mask);
    }
    std::sort(level.begin(), level.end());
    for (auto& [z, mask] : level) {
      found.push_back(mask);
      out.push_back(std::move(z));
    }
  }
  return out;
}

// ---------------------------------------------------------------- set splitting

SetSplitResult set_splitting(std::size_t n, const std::vector<std::vector<std::size_t>>& sets,
                             std::size_t anchor_hint, std::uint64_t seed, std::size_t restarts) {
  require(n >= 2, ErrorKind::usage, "set splitting needs at least two elements");
  require(anchor_hint < n, ErrorKind::usage, "anchor hint out of range");
  SetSplitResult res;
  res.shuffle.assign(n, false);
  for (const auto& s : sets)
    for (auto v : s) require(v < n, ErrorKind::usage, "set element out of range");

  const auto violations = [&](const std::vector<bool>& side) {
    std::size_t bad = 0;
    for (const auto& s : sets) {
      bool any_a = false, any_s = false;
      for (auto v : s) (side[v] ? any_s : any_a) = true;
      if (!(any_a && any_s)) ++bad;
    }
    return bad;
  };

  if (n <= kExhaustiveSplitLimit) {
    res.exhaustive = true;
    std::vector<std::uint32_t> set_masks;
    for (const auto& s : sets) {
      std::uint32_t mk = 0;
      for (auto v : s) mk |= 1u << v;
      set_masks.push_back(mk);
    }
    const std::uint32_t full = n == 32 ? ~0u : (1u << n) - 1u;
    const std::uint32_t hint = 1u << anchor_hint;
    for (std::uint32_t mask = 1; mask <= full && mask != 0; ++mask) {
      if (mask & hint) continue;
      ++res.splits_checked;
      const bool ok = std::all_of(set_masks.begin(), set_masks.end(), [&](std::uint32_t s) {
        return (s & mask) != 0 && (s & ~mask) != 0;
      });
      if (ok) {
        res.feasible = true;
        for (std::size_t v = 0; v < n; ++v) res.shuffle[v] = (mask >> v) & 1u;
        return res;
      }
    }
    return res;
  }

  auto rng = make_rng(seed, "set-splitting");
  std::bernoulli_distribution coin(0.5);
  for (std::size_t r = 0; r < restarts; ++r) {
    std::vector<bool> side(n);
    for (std::size_t v = 0; v < n; ++v) side[v] = v != anchor_hint && coin(rng);
    std::size_t cur = violations(side);
    while (cur > 0) {
      std::size_t best_v = n, best = cur;
      for (std::size_t v = 0; v < n; ++v) {
        if (v == anchor_hint) continue;
        side[v] = !side[v];
        const auto c = violations(side);
        side[v] = !side[v];
        if (c < best) {
          best = c;
          best_v = v;
        }
      }
      if (best_v == n) break;
      side[best_v] = !side[best_v];
      cur = best;
    }
    ++res.splits_checked;
    const bool both = std::any_of(side.begin(), side.end(), [](bool b) { return b; });
    if (cur == 0 && both) {
      res.feasible = true;
      res.shuffle = side;
      return res;
    }
  }
  return res;
}

InterferingSplit interfering_split(const CausalDag& dag, std::size_t max_adjust_size,
                                   std::uint64_t seed) {
  require(!dag.queries().empty(), ErrorKind::usage, "no queries in the causal graph");
  const auto obs = dag.observables();
  std::vector<std::size_t> local(dag.size(), SIZE_MAX);
  for (std::size_t k = 0; k < obs.size(); ++k) local[obs[k]] = k;

  InterferingSplit out;
  std::vector<std::vector<std::size_t>> sets;
  for (std::size_t qi = 0; qi < dag.queries().size(); ++qi) {
    const auto& q = dag.queries()[qi];
    const auto adj = backdoor_adjustments(dag, q.x, q.y, max_adjust_size);
    if (adj.empty()) out.unadjustable_queries.push_back(qi);
    for (const auto& z : adj) {
      std::vector<std::size_t> v{q.x, q.y};
      v.insert(v.end(), z.begin(), z.end());
      std::vector<std::size_t> lv;
      std::vector<std::string> names;
      for (auto u : v) {
        lv.push_back(local[u]);
        names.push_back(dag.vertices()[u].name);
      }
      sets.push_back(std::move(lv));
      out.v_sets.push_back(std::move(names));
    }
  }
  out.search = set_splitting(obs.size(), sets, local[dag.queries().front().x], seed);
  if (out.search.feasible) {
    for (std::size_t k = 0; k < obs.size(); ++k)
      (out.search.shuffle[k] ? out.shuffle : out.anchor).push_back(dag.vertices()[obs[k]].name);
  }
  return out;
}

nlohmann::json to_json(const InterferingSplit& s) {
  nlohmann::json j{{"feasible", s.search.feasible},
                   {"exhaustive", s.search.exhaustive},
                   {"splits_checked", s.search.splits_checked},
                   {"v_sets", s.v_sets},
                   {"unadjustable_queries", s.unadjustable_queries}};
  if (s.search.feasible) {
    j["anchor"] = s.anchor;
    j["shuffle"] = s.shuffle;
  } else {
    j["certificate"] = s.search.exhaustive
                           ? "every split with the first query's cause in the anchor leaves some "
                             "set on one side"
                           : "local search found no split; no completeness claim";
  }
  return j;
}

}  // namespace cpforge
