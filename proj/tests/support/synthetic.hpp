#pragma once

// Data generators and small oracles shared by the unit and acceptance tests.

#include <cmath>
#include <cstdint>
#include <numbers>
#include <random>
#include <string>
#include <utility>
#include <vector>

#include "cpforge/causal.hpp"
#include "cpforge/data.hpp"
#include "cpforge/linalg.hpp"

namespace cpforge::testing {

using Idx = Eigen::Index;

inline std::vector<std::string> feature_names(std::size_t d) {
  std::vector<std::string> names;
  for (std::size_t j = 0; j < d; ++j) names.push_back("f" + std::to_string(j));
  return names;
}

inline Dataset make_dataset(Matrix x, std::vector<int> labels) {
  const auto d = static_cast<std::size_t>(x.cols());
  return Dataset::from_unsorted(std::move(x), std::move(labels), feature_names(d));
}

/// Five-example domain: 2 x (0,0)+, 2 x (1,1)+, 1 x (-1,-1)-.
inline Dataset toy_dataset() {
  Matrix x(5, 2);
  x << 0, 0, 0, 0, 1, 1, 1, 1, -1, -1;
  return Dataset::from_sorted(x, {1, 1, 1, 1, -1}, {"x", "y"}, {0, 1, 2, 3, 4});
}

/// Standard normal features; the first m_pos rows are positive.
inline Dataset gaussian_dataset(std::size_t m, std::size_t d, std::size_t m_pos, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix x(static_cast<Idx>(m), static_cast<Idx>(d));
  std::vector<int> y(m);
  for (std::size_t i = 0; i < m; ++i) {
    y[i] = i < m_pos ? 1 : -1;
    for (std::size_t j = 0; j < d; ++j) x(static_cast<Idx>(i), static_cast<Idx>(j)) = g(rng);
  }
  return make_dataset(std::move(x), std::move(y));
}

/// Gaussian features with class-dependent means, so the mean operator is not
/// symmetric across classes.
inline Dataset shifted_dataset(std::size_t m, std::size_t d, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  std::bernoulli_distribution coin(0.5);
  Matrix x(static_cast<Idx>(m), static_cast<Idx>(d));
  std::vector<int> y(m);
  for (std::size_t i = 0; i < m; ++i) {
    y[i] = i < 2 ? (i == 0 ? 1 : -1) : (coin(rng) ? 1 : -1);
    for (std::size_t j = 0; j < d; ++j)
      x(static_cast<Idx>(i), static_cast<Idx>(j)) = g(rng) + (y[i] == 1 ? 1.0 + 0.3 * j : -0.5);
  }
  return make_dataset(std::move(x), std::move(y));
}

/// Random PSD Gaussian kernel over k-dimensional normal points.
inline Matrix random_kernel(std::size_t m, std::size_t k, std::mt19937_64& rng) {
  std::normal_distribution<double> g;
  Matrix p(static_cast<Idx>(m), static_cast<Idx>(k));
  for (Idx i = 0; i < p.rows(); ++i)
    for (Idx j = 0; j < p.cols(); ++j) p(i, j) = g(rng);
  Matrix out(p.rows(), p.rows());
  for (Idx i = 0; i < p.rows(); ++i)
    for (Idx j = 0; j < p.rows(); ++j) out(i, j) = std::exp(-(p.row(i) - p.row(j)).squaredNorm() / 2.0);
  return out;
}

/// Two anchor and two shuffle features; the shuffle pair is a noisy copy of
/// the anchor pair and the label follows the first anchor feature.
inline Dataset dependent_dataset(std::size_t m, std::uint64_t seed, double noise = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix x(static_cast<Idx>(m), 4);
  std::vector<int> y(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto r = static_cast<Idx>(i);
    x(r, 0) = g(rng);
    x(r, 1) = g(rng);
    x(r, 2) = x(r, 0) + noise * g(rng);
    x(r, 3) = x(r, 1) + noise * g(rng);
    y[i] = x(r, 0) + 0.5 * x(r, 1) + 0.3 * g(rng) > 0.0 ? 1 : -1;
  }
  return make_dataset(std::move(x), std::move(y));
}

/// Like dependent_dataset, but the shuffle pair copies the anchor feature the
/// label does not use, so the dependence is not mediated by the class.
inline Dataset side_dependent_dataset(std::size_t m, std::uint64_t seed, double noise = 0.3) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix x(static_cast<Idx>(m), 4);
  std::vector<int> y(m);
  for (std::size_t i = 0; i < m; ++i) {
    const auto r = static_cast<Idx>(i);
    x(r, 0) = g(rng);
    x(r, 1) = g(rng);
    x(r, 2) = x(r, 1) + noise * g(rng);
    x(r, 3) = x(r, 1) * x(r, 1) + noise * g(rng);
    y[i] = x(r, 0) + 0.3 * g(rng) > 0.0 ? 1 : -1;
  }
  return make_dataset(std::move(x), std::move(y));
}

/// Two interleaved spirals in the plane with Gaussian jitter.
inline Dataset two_spirals(std::size_t m, std::uint64_t seed, double noise = 0.1) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  std::uniform_real_distribution<double> u(0.0, 1.0);
  Matrix x(static_cast<Idx>(m), 2);
  std::vector<int> y(m);
  for (std::size_t i = 0; i < m; ++i) {
    const int cls = i % 2 == 0 ? 1 : -1;
    const double t = std::sqrt(u(rng));
    const double angle = 3.0 * std::numbers::pi * t + (cls == 1 ? 0.0 : std::numbers::pi);
    const auto r = static_cast<Idx>(i);
    x(r, 0) = t * std::cos(angle) + noise * g(rng);
    x(r, 1) = t * std::sin(angle) + noise * g(rng);
    y[i] = cls;
  }
  return make_dataset(std::move(x), std::move(y));
}

/// Three-variable model: x2 = x1 + u + noise and x3 = x2 - 2u + noise with a
/// latent u; the label shifts the means of all three variables.
inline Dataset cm_dataset(std::size_t m, std::uint64_t seed) {
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> g;
  Matrix x(static_cast<Idx>(m), 3);
  std::vector<int> y(m);
  for (std::size_t i = 0; i < m; ++i) {
    y[i] = i % 2 == 0 ? 1 : -1;
    const auto r = static_cast<Idx>(i);
    const double latent = g(rng);
    x(r, 0) = g(rng) + 0.2 * y[i];
    x(r, 1) = x(r, 0) + latent + 0.5 * g(rng);
    x(r, 2) = x(r, 1) - 2.0 * latent + 0.5 * g(rng);
  }
  return make_dataset(std::move(x), std::move(y));
}

/// Random DAG over n vertices in topological order with arc probability p.
/// Vertices are named v0..v{n-1}; a few may be latent.
inline CausalDag random_dag(std::size_t n, double p, std::size_t latent, std::mt19937_64& rng) {
  std::bernoulli_distribution arc(p);
  std::vector<CausalDag::Vertex> vs;
  for (std::size_t v = 0; v < n; ++v) vs.push_back({"v" + std::to_string(v), v < latent});
  std::vector<std::pair<std::size_t, std::size_t>> arcs;
  for (std::size_t a = 0; a < n; ++a)
    for (std::size_t b = a + 1; b < n; ++b)
      if (arc(rng)) arcs.emplace_back(a, b);
  return CausalDag(std::move(vs), std::move(arcs));
}

/// Independent d-separation oracle: a and b are d-connected given z iff some
/// simple path between them has every collider in An(z) and no non-collider
/// in z. Exponential; for small graphs only.
inline bool d_separated_by_paths(const CausalDag& dag, std::size_t a, std::size_t b,
                                 const std::vector<std::size_t>& z) {
  const std::size_t n = dag.size();
  std::vector<bool> in_z(n, false), anc_z(n, false);
  for (std::size_t v : z) in_z[v] = true;
  for (std::size_t v = 0; v < n; ++v) {
    const auto desc = dag.descendants(v);
    for (std::size_t w : z)
      if (desc[w]) anc_z[v] = true;
  }
  std::vector<std::vector<std::pair<std::size_t, bool>>> adj(n);  // (neighbour, arc points to neighbour)
  for (std::size_t v = 0; v < n; ++v)
    for (std::size_t c : dag.children(v)) {
      adj[v].emplace_back(c, true);
      adj[c].emplace_back(v, false);
    }
  std::vector<bool> on_path(n, false);
  std::vector<std::size_t> path{a};
  std::vector<bool> into;  // into[k]: arc between path[k] and path[k+1] points to path[k+1]
  on_path[a] = true;
  bool connected = false;
  const auto check = [&]() {
    for (std::size_t k = 1; k + 1 < path.size(); ++k) {
      const bool collider = into[k - 1] && !into[k];
      if (collider ? !anc_z[path[k]] : in_z[path[k]]) return false;
    }
    return true;
  };
  auto dfs = [&](auto&& self, std::size_t v) -> void {
    if (connected) return;
    if (v == b) {
      if (check()) connected = true;
      return;
    }
    for (const auto& [w, fwd] : adj[v]) {
      if (on_path[w]) continue;
      on_path[w] = true;
      path.push_back(w);
      into.push_back(fwd);
      self(self, w);
      into.pop_back();
      path.pop_back();
      on_path[w] = false;
    }
  };
  dfs(dfs, a);
  return !connected;
}

}  // namespace cpforge::testing
