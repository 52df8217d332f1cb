#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "cpforge/linalg.hpp"

namespace cpforge {

struct LabelMeta {
  std::string column = "label";
  std::string positive = "1";
  std::string negative = "-1";
  std::size_t position = 0;  // column position of the label in the source file
};

/// Labeled sample with rows sorted so that every +1 example precedes every -1
/// example. Immutable once built; operations return new datasets.
class Dataset {
 public:
  /// Builds a dataset from rows in arbitrary label order. Rows are stably
  /// sorted by class and the original position of each row is kept in
  /// original_index() for export.
  static Dataset from_unsorted(Matrix observations, std::vector<int> labels,
                               std::vector<std::string> feature_names);

  /// Same as from_unsorted but requires rows to already be class-sorted and
  /// takes an explicit original index map.
  static Dataset from_sorted(Matrix observations, std::vector<int> labels,
                             std::vector<std::string> feature_names,
                             std::vector<std::size_t> original_index);

  [[nodiscard]] const Matrix& x() const noexcept { return x_; }
  [[nodiscard]] std::span<const int> labels() const noexcept { return labels_; }
  [[nodiscard]] const std::vector<std::string>& feature_names() const noexcept { return names_; }
  [[nodiscard]] const std::vector<std::size_t>& original_index() const noexcept { return original_; }

  [[nodiscard]] std::size_t m() const noexcept { return static_cast<std::size_t>(x_.rows()); }
  [[nodiscard]] std::size_t d() const noexcept { return static_cast<std::size_t>(x_.cols()); }
  [[nodiscard]] std::size_t m_pos() const noexcept { return m_pos_; }
  [[nodiscard]] std::size_t m_neg() const noexcept { return m() - m_pos_; }
  [[nodiscard]] int label(std::size_t i) const { return labels_[i]; }

  /// Column index of a feature by name.
  [[nodiscard]] std::optional<std::size_t> feature_index(const std::string& name) const;

  /// Copy of this dataset with a replaced observation matrix (same shape).
  [[nodiscard]] Dataset with_observations(Matrix observations) const;

  /// Rows selected by index, re-sorted by class; original indices follow the rows.
  [[nodiscard]] Dataset subset(std::span<const std::size_t> rows) const;

  /// Label strings carried through from ingestion for export.
  LabelMeta meta;

 private:
  Dataset() = default;
  void validate() const;

  Matrix x_;
  std::vector<int> labels_;
  std::vector<std::string> names_;
  std::vector<std::size_t> original_;
  std::size_t m_pos_ = 0;
};

enum class MissingPolicy { zero, error };

struct CsvOptions {
  std::string label_column;
  std::string positive_label;
  MissingPolicy missing = MissingPolicy::error;
};

/// Reads a comma-separated file with a header row. Exactly two distinct label
/// values must appear; the one equal to positive_label becomes +1.
Dataset ingest_csv(const std::filesystem::path& path, const CsvOptions& options);

/// Same as ingest_csv but from in-memory text.
Dataset parse_csv(const std::string& text, const CsvOptions& options);

/// Writes the dataset in its original row order, label column at its source position.
void export_csv(const Dataset& ds, const std::filesystem::path& path);
std::string to_csv(const Dataset& ds);

/// Shortest round-trip decimal representation of a double.
std::string format_double(double v);

struct ScalingParams {
  Vector mean;
  Vector stddev;
  std::vector<bool> constant;
};

inline constexpr double kStdFloor = 1e-12;

struct Standardized {
  Dataset data;
  ScalingParams params;
};

/// Centers every feature and divides by its population standard deviation.
/// A column whose std falls below kStdFloor is flagged constant and maps to 0.
Standardized standardize(const Dataset& train);
Dataset apply_scaling(const Dataset& ds, const ScalingParams& params);

/// (1/m) sum_i y_i x_i.
Vector mean_operator(const Dataset& ds);
Vector mean_operator(const Matrix& x, std::span<const int> labels);

}  // namespace cpforge
