#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <span>
#include <vector>

#include "cpforge/cp_engine.hpp"
#include "cpforge/data.hpp"
#include "cpforge/linalg.hpp"

namespace cpforge {

struct Bandwidth {
  enum class Kind { median, fixed };
  Kind kind = Kind::median;
  double sigma = 1.0;

  static Bandwidth median() { return {}; }
  static Bandwidth fixed(double s) { return {Kind::fixed, s}; }
};

/// Gaussian kernel over a subset of features.
struct KernelMatrix {
  Matrix mat;
  std::vector<std::size_t> feature_subset;
  double bandwidth = 1.0;
  /// Set when the median heuristic degenerated (all points identical) and
  /// sigma fell back to 1.
  bool bandwidth_fallback = false;
};

inline constexpr double kBandwidthFloor = 1e-12;

/// K_ij = exp(-|x_i - x_j|^2 / (2 sigma^2)) over the columns in `subset`.
KernelMatrix gaussian_kernel(const Dataset& ds, std::span<const std::size_t> subset,
                             Bandwidth bw = Bandwidth::median());
KernelMatrix gaussian_kernel(const Matrix& points, Bandwidth bw = Bandwidth::median());

/// Unnormalised HSIC: tr((I-U) Ku (I-U) Kv) with U = (1/m) 1 1^T.
double hsic(const Matrix& ku, const Matrix& kv);

/// HSIC(Ku, M Kv M^T) - HSIC(Ku, Kv) for the transposition of rows l and l2,
/// in O(m): the -2m cov(du, dv) term over the kernel-row differences plus the
/// exact diagonal remainder.
double hsic_delta_elementary(const Matrix& ku, const Matrix& kv, std::size_t l, std::size_t l2);

/// Remainder term exactly as printed next to the covariance form in the
/// literature; kept for comparison reports only (it does not close the
/// identity, see transposition_remainder).
double printed_transposition_remainder(const Matrix& ku, const Matrix& kv, std::size_t l,
                                       std::size_t l2);

/// Remainder that closes delta = -2m cov(du, dv) + remainder exactly.
double transposition_remainder(const Matrix& ku, const Matrix& kv, std::size_t l, std::size_t l2);

struct SpectralSummary {
  Vector u_tilde;
  Vector v_tilde;
};

/// u~ = (1/m) Ku 1 and v~ = (1/m) Kv 1 (the eigen-sum identity collapses to
/// a row-sum average).
SpectralSummary spectral_summary(const Matrix& ku, const Matrix& kv);
/// Same quantities computed from explicit eigendecompositions:
/// u~ = (1/m) sum_i lambda_i (1^T u_i) u_i.
SpectralSummary spectral_summary_eigen(const Matrix& ku, const Matrix& kv);

/// 2m u~^T (I - M) v~. This is the change of the row-sum cross term of HSIC
/// under M; the full change also includes hsic_shift_decomposed().alignment.
double hsic_shift_spectral(const Matrix& ku, const Matrix& kv, const Matrix& shuffle);
double hsic_shift_spectral(const Matrix& ku, const Matrix& kv, const ShuffleSpec& shuffle,
                           std::span<const int> labels);

struct HsicShiftParts {
  double spectral = 0.0;   // 2m u~^T (I - M) v~
  double alignment = 0.0;  // tr(Ku M Kv M^T) - tr(Ku Kv)
  [[nodiscard]] double total() const { return spectral + alignment; }
};

/// Exact split of HSIC(Ku, M Kv M^T) - HSIC(Ku, Kv) for column-stochastic M.
HsicShiftParts hsic_shift_decomposed(const Matrix& ku, const Matrix& kv, const Matrix& shuffle);

/// Direct HSIC(Ku, M Kv M^T) - HSIC(Ku, Kv).
double hsic_shift_direct(const Matrix& ku, const Matrix& kv, const Matrix& shuffle);

/// R^{u,v} = sum_i Ku_ii Kv_ii - (1/m) (sum_i Ku_ii Kv_.i + sum_i Ku_.i Kv_ii) / 2.
double remainder_general(const Matrix& ku, const Matrix& kv);
/// Unit-diagonal form m (1 - (Ku_.. + Kv_..) / (2 m^2)).
double remainder_unit_diagonal(const Matrix& ku, const Matrix& kv);

/// Exact mean of HSIC(Ku, M Kv M^T) over the m(m-1)/2 transpositions:
/// (1 - 4/(m-1)) HSIC + (4/(m-1)) R*, with
/// R* = P/2 + tr(Ku) tr(Kv)/(2m) - Q/m + S/m where P = sum Ku_ii Kv_ii,
/// Q = sum Ku_ii Kv_.i + Ku_.i Kv_ii and S = sum Ku_ij Kv_ij.
double expected_hsic_after_elementary(const Matrix& ku, const Matrix& kv);

/// (1 - 8/(m-1)) HSIC + (8/(m-1)) R^{u,v}, the closed form as commonly printed.
double expected_hsic_after_elementary_printed(const Matrix& ku, const Matrix& kv);

struct PValue {
  double statistic = 0.0;
  std::size_t exceed = 0;     // resamples with HSIC >= statistic
  std::size_t resamples = 0;
  double smoothed = 1.0;      // (1 + exceed) / (resamples + 1)
  double raw = 0.0;           // exceed / resamples
};

/// Permutation test of independence with unrestricted relabelings of Kv.
PValue pvalue_permutation_test(const Matrix& ku, const Matrix& kv, std::size_t resamples,
                               std::uint64_t seed);

/// Maintains HSIC(Ku, Kv[p, p]) under transpositions of p. Kernel entries are
/// never recomputed, only moved.
class HsicTracker {
 public:
  HsicTracker(Matrix ku, Matrix kv);

  [[nodiscard]] std::size_t m() const noexcept { return static_cast<std::size_t>(ku_.rows()); }
  [[nodiscard]] double value() const noexcept { return value_; }
  [[nodiscard]] const Permutation& permutation() const noexcept { return perm_; }
  [[nodiscard]] const Matrix& ku() const noexcept { return ku_; }

  [[nodiscard]] const Matrix& current_kv() const noexcept { return kv_cur_; }

  /// Exact HSIC change for swapping positions l and l2 of the current state.
  [[nodiscard]] double delta(std::size_t l, std::size_t l2) const;
  void apply(std::size_t l, std::size_t l2);

  /// Full O(m^2) recompute of the current value.
  [[nodiscard]] double recompute() const;

 private:
  Matrix ku_;
  Matrix kv_cur_;  // Kv[p, p], kept in step with perm_ by O(m) row/column swaps
  Vector ku_rowsum_;
  Vector kv_rowsum_;
  Permutation perm_;
  double value_ = 0.0;
};

/// Binary dump: little-endian uint64 m, then m*m row-major doubles.
void write_kernel_dump(const std::filesystem::path& path, const Matrix& k);
Matrix read_kernel_dump(const std::filesystem::path& path);

}  // namespace cpforge
