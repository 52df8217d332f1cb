#include "cpforge/complexity.hpp"

#include <algorithm>
#include <bit>
#include <limits>
#include <random>

#include "cpforge/error.hpp"
#include "cpforge/parallel.hpp"
#include "cpforge/rng.hpp"

namespace cpforge {

namespace {

using Idx = Eigen::Index;

double dual_norm(const Vector& v, BallNorm norm) {
  return norm == BallNorm::l2 ? v.norm() : v.lpNorm<1>();
}

/// E_sigma |sum_i sigma_i rows_i| over all 2^m sign vectors. sigma and -sigma
/// give the same norm, so sigma_0 is pinned to +1 and the remaining m-1 signs
/// are walked in Gray-code order, one row update per step.
double expected_signed_norm(const Matrix& rows, BallNorm norm, std::size_t m_cap) {
  const auto m = static_cast<std::size_t>(rows.rows());
  require(m >= 1, ErrorKind::data, "need at least one row");
  require(m <= m_cap && m <= 62, ErrorKind::usage,
          "exact enumeration needs m <= " + std::to_string(std::min<std::size_t>(m_cap, 62)) +
              " (got m = " + std::to_string(m) + ")");
  const std::uint64_t total = std::uint64_t{1} << (m - 1);
  const std::size_t chunks = chunk_count(static_cast<std::size_t>(std::min<std::uint64_t>(total, 1u << 20)));
  std::vector<double> partial(chunks, 0.0);
  parallel_chunks(
      chunks,
      [&](std::size_t, std::size_t cb, std::size_t ce) {
        for (std::size_t c = cb; c < ce; ++c) {
          const std::uint64_t begin = total * c / chunks;
          const std::uint64_t end = total * (c + 1) / chunks;
          if (begin >= end) continue;
          std::uint64_t gray = begin ^ (begin >> 1);
          Vector sum = rows.row(0).transpose();
          for (std::size_t b = 0; b + 1 < m; ++b)
            sum += ((gray >> b) & 1u ? -1.0 : 1.0) * rows.row(static_cast<Idx>(b + 1)).transpose();
          double acc = dual_norm(sum, norm);
          for (std::uint64_t g = begin + 1; g < end; ++g) {
            const auto bit = static_cast<unsigned>(std::countr_zero(g));
            gray ^= std::uint64_t{1} << bit;
            const double s = (gray >> bit) & 1u ? -2.0 : 2.0;
            sum += s * rows.row(static_cast<Idx>(bit + 1)).transpose();
            acc += dual_norm(sum, norm);
          }
          partial[c] = acc;
        }
      },
      chunks);
  double acc = 0.0;
  for (double p : partial) acc += p;
  return acc / static_cast<double>(total);
}

Matrix shuffle_columns(const Dataset& ds, const FeatureSplit& split) {
  require(split.d() == ds.d(), ErrorKind::data, "split dimension does not match dataset");
  Matrix out(ds.x().rows(), static_cast<Idx>(split.shuffle().size()));
  for (std::size_t c = 0; c < split.shuffle().size(); ++c)
    out.col(static_cast<Idx>(c)) = ds.x().col(static_cast<Idx>(split.shuffle()[c]));
  return out;
}

}  // namespace

Matrix shuffle_differences(const Dataset& ds, const FeatureSplit& split, const ShuffleSpec& shuffle) {
  const Matrix s = shuffle_columns(ds, split);
  const Matrix moved = shuffle_columns(apply_cp(ds, split, shuffle), split);
  return s - moved;
}

double rcp_exact_linear(const Matrix& deltas, double r, BallNorm norm, std::size_t m_cap) {
  require(r >= 0.0, ErrorKind::usage, "ball radius must be non-negative");
  return r / static_cast<double>(deltas.rows()) * expected_signed_norm(deltas, norm, m_cap);
}

double rcp_exact_linear(const Dataset& ds, const FeatureSplit& split, const Permutation& perm,
                        double r, std::size_t m_cap, BallNorm norm) {
  return rcp_exact_linear(shuffle_differences(ds, split, perm), r, norm, m_cap);
}

MonteCarloEstimate rcp_monte_carlo_linear(const Matrix& deltas, double r, std::size_t draws,
                                          std::uint64_t seed, BallNorm norm) {
  require(draws >= 2, ErrorKind::usage, "Monte Carlo needs at least two draws");
  auto rng = make_rng(seed, "rcp-monte-carlo");
  std::bernoulli_distribution coin(0.5);
  double sum = 0.0, sq = 0.0;
  Vector acc(deltas.cols());
  for (std::size_t t = 0; t < draws; ++t) {
    acc.setZero();
    for (Idx i = 0; i < deltas.rows(); ++i)
      acc += (coin(rng) ? 1.0 : -1.0) * deltas.row(i).transpose();
    const double v = dual_norm(acc, norm);
    sum += v;
    sq += v * v;
  }
  const double n = static_cast<double>(draws);
  const double mean = sum / n;
  const double var = std::max(0.0, (sq - n * mean * mean) / (n - 1.0));
  const double scale = r / static_cast<double>(deltas.rows());
  return {scale * mean, scale * std::sqrt(var / n)};
}

double rademacher_exact_linear(const Matrix& points, double r, std::size_t m_cap) {
  return r / static_cast<double>(points.rows()) * expected_signed_norm(points, BallNorm::l2, m_cap);
}

CorrelationParams estimate_correlation_params(const Matrix& delta_rows) {
  const Matrix g = delta_rows * delta_rows.transpose();
  const Idx m = g.rows();
  CorrelationParams out;
  const double tr = g.trace();
  if (m == 0 || tr <= 0.0) {
    out.zero_rows = static_cast<std::size_t>(m);
    return out;  // no mass at all: (1, 1)
  }
  out.delta = 1.0 - static_cast<double>(m) * g.diagonal().minCoeff() / tr;
  double min_cos = std::numeric_limits<double>::infinity();
  for (Idx i = 0; i < m; ++i) {
    if (g(i, i) <= 0.0) {
      ++out.zero_rows;
      continue;
    }
    for (Idx j = i + 1; j < m; ++j) {
      if (g(j, j) <= 0.0) continue;
      min_cos = std::min(min_cos, std::abs(g(i, j)) / std::sqrt(g(i, i) * g(j, j)));
    }
  }
  out.gamma = std::isfinite(min_cos) ? std::clamp(1.0 - min_cos, 0.0, 1.0) : 0.0;
  out.delta = std::clamp(out.delta, 0.0, 1.0);
  return out;
}

double kappa(double delta, double gamma, double epsilon) {
  const double p = (1.0 - delta) * (1.0 - epsilon) * (1.0 - gamma);
  return 1.0 - p * p;
}

double u_factor(std::size_t m, double kappa_value) {
  require(m >= 1, ErrorKind::usage, "m must be positive");
  const double inv = 1.0 / static_cast<double>(m);
  return inv + kappa_value * (1.0 - inv);
}

double centered_inner_product(const Matrix& a, const Matrix& b, const Matrix& shuffle) {
  require(a.rows() == a.cols() && b.rows() == b.cols() && shuffle.rows() == shuffle.cols() &&
              a.rows() == b.rows() && a.rows() == shuffle.rows(),
          ErrorKind::data, "centered inner product needs square matrices of equal size");
  const Matrix c = Matrix::Identity(a.rows(), a.cols()) - shuffle;
  return (c.transpose() * a * c * b).trace();
}

LinearBound rcp_bound_linear(const Dataset& ds, const FeatureSplit& split,
                             const ShuffleSpec& shuffle, double r) {
  require(r >= 0.0, ErrorKind::usage, "ball radius must be non-negative");
  const Matrix deltas = shuffle_differences(ds, split, shuffle);
  LinearBound out;
  out.params = estimate_correlation_params(deltas);
  out.kappa = kappa(out.params.delta, out.params.gamma);
  out.u = u_factor(ds.m(), out.kappa);
  out.centered_ip = deltas.squaredNorm();
  out.value = out.u * r / static_cast<double>(ds.m()) * std::sqrt(out.centered_ip);
  if (const auto* perm = std::get_if<Permutation>(&shuffle)) {
    double acc = 0.0;
    for (auto j : split.shuffle()) {
      const Vector col = ds.x().col(static_cast<Idx>(j));
      Vector moved(col.size());
      for (Idx i = 0; i < col.size(); ++i) moved(i) = col(static_cast<Idx>((*perm)[static_cast<std::size_t>(i)]));
      const double mean = col.mean();
      const double var = (col.array() - mean).square().mean();
      if (var <= 0.0) continue;
      const double cov = ((col.array() - mean) * (moved.array() - mean)).mean();
      acc += var * (1.0 - cov / var);
    }
    out.per_feature_form = 2.0 * acc;
  }
  return out;
}

double rcp_bound_dag(double log_h_plus, std::size_t m, double k_s, std::size_t odd_cycles,
                     double epsilon) {
  require(m >= 1, ErrorKind::usage, "m must be positive");
  require(epsilon > 0.0 && k_s >= 0.0 && std::isfinite(log_h_plus), ErrorKind::usage,
          "DAG bound needs epsilon > 0, K_s >= 0 and finite log|H+|");
  const double need = 4.0 * epsilon / 3.0 * static_cast<double>(m);
  require(log_h_plus >= need, ErrorKind::infeasible,
          "DAG bound precondition fails: log|H+| = " + std::to_string(log_h_plus) +
              " < (4 eps / 3) m = " + std::to_string(need));
  const double inner = log_h_plus - static_cast<double>(odd_cycles) * std::log1p(epsilon);
  require(inner >= 0.0, ErrorKind::numeric, "DAG bound log argument below 1");
  return k_s * std::sqrt(2.0 / static_cast<double>(m) * inner);
}

double mean_pairwise_sq_distance(const Dataset& ds, const FeatureSplit& split,
                                 ClassRestriction restriction) {
  const Matrix s = shuffle_columns(ds, split);
  std::vector<Idx> idx;
  for (std::size_t i = 0; i < ds.m(); ++i) {
    const bool pos = ds.label(i) == 1;
    if (restriction == ClassRestriction::all || (restriction == ClassRestriction::pos) == pos)
      idx.push_back(static_cast<Idx>(i));
  }
  require(idx.size() >= 2, ErrorKind::data, "need at least two examples in the index set");
  double acc = 0.0;
  for (std::size_t a = 0; a < idx.size(); ++a)
    for (std::size_t b = a + 1; b < idx.size(); ++b)
      acc += (s.row(idx[a]) - s.row(idx[b])).squaredNorm();
  const double pairs = static_cast<double>(idx.size()) * static_cast<double>(idx.size() - 1) / 2.0;
  return acc / pairs;
}

double expected_rcp_bound(const Dataset& ds, const FeatureSplit& split, std::size_t k,
                          ClassRestriction restriction, double r, double u) {
  require(k <= ds.m(), ErrorKind::usage, "k exceeds m");
  if (k == 0) return 0.0;
  const double m = static_cast<double>(ds.m());
  const double q = mean_pairwise_sq_distance(ds, split, restriction);
  return u * r / std::sqrt(m) * std::sqrt(static_cast<double>(k) / m * q);
}

ImprovedRademacher rademacher_bound_linear_improved(const Matrix& x, double r_x, double r_theta) {
  const Idx m = x.rows();
  require(m >= 2, ErrorKind::data, "need at least two observations");
  require(r_theta > 0.0, ErrorKind::usage, "r_theta must be positive");
  const Vector sq = x.rowwise().squaredNorm();
  if (r_x <= 0.0) r_x = std::sqrt(sq.maxCoeff());
  ImprovedRademacher out;
  out.baseline = r_x * r_theta / std::sqrt(static_cast<double>(m));
  const double total = sq.sum();
  if (total > 0.0) out.delta = std::clamp(1.0 - static_cast<double>(m) * sq.minCoeff() / total, 0.0, 1.0);
  double cos_sum = 0.0;
  std::size_t pairs = 0;
  for (Idx i = 0; i < m; ++i) {
    if (sq(i) <= 0.0) continue;
    for (Idx j = i + 1; j < m; ++j) {
      if (sq(j) <= 0.0) continue;
      cos_sum += std::abs(x.row(i).dot(x.row(j))) / std::sqrt(sq(i) * sq(j));
      ++pairs;
    }
  }
  out.gamma = pairs ? std::clamp(1.0 - cos_sum / static_cast<double>(pairs), 0.0, 1.0) : 1.0;
  out.kappa = kappa(out.delta, out.gamma);
  out.u = u_factor(static_cast<std::size_t>(m), out.kappa);
  out.value = out.u * out.baseline;
  return out;
}

double generalization_bound_report(const GeneralizationTerms& t) {
  require(t.m >= 1 && t.b_phi > 0.0 && t.delta_conf > 0.0 && t.delta_conf < 1.0,
          ErrorKind::usage, "bound needs m >= 1, b_phi > 0 and delta in (0, 1)");
  const double conf = (2.0 * t.k_phi + t.k_s) *
                      std::sqrt(2.0 / static_cast<double>(t.m) * std::log(3.0 / t.delta_conf));
  return t.phi_risk_cp + t.rcp_bound + 4.0 / t.b_phi * t.rademacher_bound + conf;
}

RcpReport rcp_report(const Dataset& ds, const FeatureSplit& split, const Permutation& perm,
                     double r, std::size_t m_cap) {
  RcpReport rep;
  const auto bound = rcp_bound_linear(ds, split, perm, r);
  rep.bound_linear = bound.value;
  rep.u_factor = bound.u;
  rep.delta = bound.params.delta;
  rep.gamma = bound.params.gamma;
  rep.cycle_stats = cycle_stats(perm);
  if (ds.m() <= m_cap) rep.exact = rcp_exact_linear(ds, split, perm, r, m_cap);
  return rep;
}

nlohmann::json to_json(const RcpReport& rep) {
  nlohmann::json j{{"bound_linear", rep.bound_linear},
                   {"u_factor", rep.u_factor},
                   {"delta", rep.delta},
                   {"gamma", rep.gamma},
                   {"epsilon_star", rep.epsilon_star},
                   {"cycle_stats",
                    {{"odd_cycles", rep.cycle_stats.odd_cycles},
                     {"fixed_points", rep.cycle_stats.fixed_points},
                     {"non_fixed", rep.cycle_stats.non_fixed}}}};
  j["exact"] = rep.exact ? nlohmann::json(*rep.exact) : nlohmann::json(nullptr);
  j["bound_dag"] = rep.bound_dag ? nlohmann::json(*rep.bound_dag) : nlohmann::json(nullptr);
  j["expected_bound"] =
      rep.expected_bound ? nlohmann::json(*rep.expected_bound) : nlohmann::json(nullptr);
  return j;
}

}  // namespace cpforge
