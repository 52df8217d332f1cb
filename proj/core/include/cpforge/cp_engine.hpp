#pragma once

#include <cstddef>
#include <optional>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include <json.hpp>

#include "cpforge/data.hpp"
#include "cpforge/linalg.hpp"

namespace cpforge {

/// Bipartition of the feature indices into anchor (kept) and shuffle (mixed)
/// sets. Both sides are non-empty and together cover [0, d).
class FeatureSplit {
 public:
  FeatureSplit(std::vector<std::size_t> anchor, std::vector<std::size_t> shuffle, std::size_t d);

  /// First floor(d/2) features are anchor, the rest shuffle.
  static FeatureSplit first_half(std::size_t d);
  /// Builds a split from feature names; every other feature goes to the anchor.
  static FeatureSplit from_shuffle_names(const Dataset& ds, const std::vector<std::string>& shuffle);

  [[nodiscard]] const std::vector<std::size_t>& anchor() const noexcept { return anchor_; }
  [[nodiscard]] const std::vector<std::size_t>& shuffle() const noexcept { return shuffle_; }
  [[nodiscard]] std::size_t d() const noexcept { return d_; }
  [[nodiscard]] bool is_shuffle(std::size_t feature) const;

 private:
  std::vector<std::size_t> anchor_;
  std::vector<std::size_t> shuffle_;
  std::size_t d_;
};

/// Permutation shuffle stored as a source-index array: row i of M*s is row
/// source(i) of s. Zero-based.
class Permutation {
 public:
  Permutation() = default;
  explicit Permutation(std::vector<std::size_t> source);

  static Permutation identity(std::size_t m);
  static Permutation transposition(std::size_t m, std::size_t a, std::size_t b);

  [[nodiscard]] std::size_t size() const noexcept { return source_.size(); }
  [[nodiscard]] std::size_t operator[](std::size_t i) const { return source_[i]; }
  [[nodiscard]] const std::vector<std::size_t>& indices() const noexcept { return source_; }
  [[nodiscard]] bool is_identity() const noexcept;

  /// Left-multiplies by the transposition of positions a and b (in place).
  void swap_positions(std::size_t a, std::size_t b);

  [[nodiscard]] Matrix to_dense() const;

  friend bool operator==(const Permutation&, const Permutation&) = default;

 private:
  std::vector<std::size_t> source_;
};

/// Column-stochastic matrix without the non-negativity constraint.
class DenseShuffle {
 public:
  explicit DenseShuffle(Matrix mat);
  [[nodiscard]] const Matrix& matrix() const noexcept { return mat_; }

 private:
  Matrix mat_;
};

inline constexpr double kColumnSumTolerance = 1e-10;

/// Block matrix averaging each class uniformly: (1/m_b) 1 1^T on every class block.
struct ClassUniform {};

using ShuffleSpec = std::variant<Permutation, DenseShuffle, ClassUniform>;

/// Dense m x m form of any shuffle spec.
Matrix to_dense(const ShuffleSpec& shuffle, std::span<const int> labels);

/// Returns [s F^a | M s F^s] with rows in the original (class-sorted) order.
Dataset apply_cp(const Dataset& ds, const FeatureSplit& split, const ShuffleSpec& shuffle);

/// True iff the shuffle puts no mass across classes.
bool is_block_class(const ShuffleSpec& shuffle, std::span<const int> labels);

/// Matrix product outer * inner as a permutation.
Permutation compose(const Permutation& outer, const Permutation& inner);
Permutation inverse(const Permutation& p);

/// Inverse shuffle; only permutations are invertible here.
Permutation invert_cp(const ShuffleSpec& shuffle);

struct CycleStats {
  std::size_t odd_cycles = 0;  // odd-length cycles of length >= 3
  std::size_t fixed_points = 0;
  std::size_t non_fixed = 0;
  friend bool operator==(const CycleStats&, const CycleStats&) = default;
};

CycleStats cycle_stats(const Permutation& perm);

struct InvarianceCheck {
  bool holds = false;
  double max_abs_deviation = 0.0;
};

inline constexpr double kMeanOperatorTolerance = 1e-10;

/// Compares the mean operator before and after the CP in the sup norm.
InvarianceCheck mean_operator_invariant(const Dataset& ds, const FeatureSplit& split,
                                        const ShuffleSpec& shuffle);

struct PermutationMetadata {
  bool block_class = true;
  std::uint64_t seed = 0;
  std::size_t iterations = 0;
};

nlohmann::json permutation_to_json(const Permutation& p, const PermutationMetadata& meta);
Permutation permutation_from_json(const nlohmann::json& j,
                                  PermutationMetadata* meta = nullptr);

}  // namespace cpforge
