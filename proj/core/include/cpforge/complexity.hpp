#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <optional>

#include <json.hpp>

#include "cpforge/cp_engine.hpp"
#include "cpforge/data.hpp"
#include "cpforge/linalg.hpp"

namespace cpforge {

/// epsilon* = 1 - 1/(2 sqrt 2).
inline const double kEpsilonStar = 1.0 - 1.0 / (2.0 * std::sqrt(2.0));

inline constexpr std::size_t kDefaultExactCap = 20;

/// Rows delta_i of (I - M) s F^s, one per example.
Matrix shuffle_differences(const Dataset& ds, const FeatureSplit& split, const ShuffleSpec& shuffle);

enum class BallNorm { l2, linf };

/// Exact RCP of the linear shuffle-feature class |theta| <= r:
/// (r/m) E_sigma |sum_i sigma_i delta_i|, with the dual norm of the ball
/// (l2 for the l2 ball, l1 for the l_inf ball). Enumerates all 2^m signs.
double rcp_exact_linear(const Matrix& deltas, double r, BallNorm norm = BallNorm::l2,
                        std::size_t m_cap = kDefaultExactCap);
double rcp_exact_linear(const Dataset& ds, const FeatureSplit& split, const Permutation& perm,
                        double r, std::size_t m_cap = kDefaultExactCap,
                        BallNorm norm = BallNorm::l2);

struct MonteCarloEstimate {
  double mean = 0.0;
  double stderr_ = 0.0;
};

/// Same quantity estimated from random sign draws.
MonteCarloEstimate rcp_monte_carlo_linear(const Matrix& deltas, double r, std::size_t draws,
                                          std::uint64_t seed, BallNorm norm = BallNorm::l2);

/// Exact empirical Rademacher complexity (r/m) E |sum sigma_i x_i|_2 of the
/// linear class over the rows of `points`.
double rademacher_exact_linear(const Matrix& points, double r,
                               std::size_t m_cap = kDefaultExactCap);

struct CorrelationParams {
  double delta = 1.0;
  double gamma = 1.0;
  std::size_t zero_rows = 0;  // rows with G_ii = 0, left out of gamma
};

/// Smallest (delta, gamma) satisfying the correlation assumptions on
/// G = Delta Delta^T: delta = 1 - m min_i G_ii / tr G and
/// gamma = 1 - min_{i != i'} |G_ii'| / sqrt(G_ii G_i'i').
CorrelationParams estimate_correlation_params(const Matrix& delta_rows);

/// kappa = 1 - ((1 - delta)(1 - eps)(1 - gamma))^2.
double kappa(double delta, double gamma, double epsilon = kEpsilonStar);
/// u = 1/m + kappa (1 - 1/m).
double u_factor(std::size_t m, double kappa_value);

/// tr((I - M)^T A (I - M) B).
double centered_inner_product(const Matrix& a, const Matrix& b, const Matrix& shuffle);

struct LinearBound {
  double value = 0.0;
  double u = 1.0;
  double kappa = 1.0;
  CorrelationParams params;
  double centered_ip = 0.0;  // <I, K^s>_M = sum_i |delta_i|^2
  /// 2 sum_j var(col j)(1 - rho(col j, M col j)), the per-feature form of
  /// (1/m) <I, K^s>_M; set for permutation shuffles.
  std::optional<double> per_feature_form;
};

/// (u r / m) sqrt(<I, K^s>_M) with u from the correlation parameters of
/// (I - M) K^s (I - M)^T at epsilon*.
LinearBound rcp_bound_linear(const Dataset& ds, const FeatureSplit& split,
                             const ShuffleSpec& shuffle, double r);

/// K_s sqrt((2/m) (log|H+| - |oc| log(1 + eps))). Requires
/// log|H+| >= (4 eps / 3) m.
double rcp_bound_dag(double log_h_plus, std::size_t m, double k_s, std::size_t odd_cycles,
                     double epsilon);

enum class ClassRestriction { all, pos, neg };

/// Mean of |x_i - x_i'|^2 over unordered pairs of distinct indices, restricted
/// to one class if requested; x is the shuffle-feature part.
double mean_pairwise_sq_distance(const Dataset& ds, const FeatureSplit& split,
                                 ClassRestriction restriction);

/// u (r / sqrt m) sqrt((k/m) Q). u defaults to 1, its value whenever the
/// permutation keeps a fixed point.
double expected_rcp_bound(const Dataset& ds, const FeatureSplit& split, std::size_t k,
                          ClassRestriction restriction, double r, double u = 1.0);

struct ImprovedRademacher {
  double value = 0.0;
  double baseline = 0.0;  // r_x r_theta / sqrt m
  double delta = 1.0;
  double gamma = 1.0;
  double kappa = 1.0;
  double u = 1.0;
};

/// (1/m + kappa (1 - 1/m)) r_x r_theta / sqrt m with delta from the squared
/// norms of the raw observations and gamma from their mean absolute cosine.
/// A non-positive r_x means max_i |x_i|.
ImprovedRademacher rademacher_bound_linear_improved(const Matrix& x, double r_x, double r_theta);

struct GeneralizationTerms {
  double phi_risk_cp = 0.0;
  double rcp_bound = 0.0;
  double rademacher_bound = 0.0;
  double k_phi = 1.0;
  double k_s = 1.0;
  double b_phi = 1.0;
  std::size_t m = 1;
  double delta_conf = 0.05;
};

/// risk + RCP + (4/b_phi) Rad + (2 K_phi + K_s) sqrt((2/m) log(3/delta)).
double generalization_bound_report(const GeneralizationTerms& terms);

struct RcpReport {
  std::optional<double> exact;
  double bound_linear = 0.0;
  std::optional<double> bound_dag;
  std::optional<double> expected_bound;
  double u_factor = 1.0;
  double delta = 1.0;
  double gamma = 1.0;
  double epsilon_star = kEpsilonStar;
  CycleStats cycle_stats;
};

/// Exact value (when m <= m_cap), linear bound and cycle statistics for a
/// permutation CP.
RcpReport rcp_report(const Dataset& ds, const FeatureSplit& split, const Permutation& perm,
                     double r, std::size_t m_cap = kDefaultExactCap);

nlohmann::json to_json(const RcpReport& report);

}  // namespace cpforge
