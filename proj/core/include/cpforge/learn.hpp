#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <json.hpp>

#include "cpforge/data.hpp"
#include "cpforge/linalg.hpp"

namespace cpforge {

enum class LossKind { logistic, square };

/// logistic: log(1 + e^-z); square: (1 - z)^2.
double phi(LossKind loss, double z);
double phi_derivative(LossKind loss, double z);

LossKind parse_loss(const std::string& name);
std::string loss_name(LossKind loss);

struct LinearModel {
  Vector weights;
  double intercept = 0.0;
  double lambda = 0.0;
  LossKind loss = LossKind::logistic;
  bool fit_intercept = true;
  bool converged = false;
  std::size_t iterations = 0;

  [[nodiscard]] double score(const Eigen::Ref<const Vector>& x) const {
    return weights.dot(x) + intercept;
  }
  [[nodiscard]] Vector scores(const Matrix& x) const;
};

struct TrainOptions {
  LossKind loss = LossKind::logistic;
  double lambda = 0.0;
  std::size_t max_iter = 10000;
  double tol = 1e-8;
  bool fit_intercept = true;
};

/// Minimizes (1/m) sum phi(y_i (theta^T x_i + b)) + lambda |theta|^2 by
/// full-batch gradient descent with Armijo backtracking from theta = 0. The
/// intercept is not regularized. Stops when the gradient sup-norm drops to
/// tol; otherwise returns with converged = false after max_iter steps.
LinearModel train(const Matrix& x, std::span<const int> labels, const TrainOptions& opts);
LinearModel train(const Dataset& ds, const TrainOptions& opts);

/// Regularized training objective at the model's parameters.
double training_objective(const LinearModel& model, const Matrix& x, std::span<const int> labels);

double phi_risk(const LinearModel& model, const Matrix& x, std::span<const int> labels);
double phi_risk(const LinearModel& model, const Dataset& ds);
/// Mean of 1{y h(x) <= 0}; a zero score counts as an error.
double zero_one_error(const LinearModel& model, const Matrix& x, std::span<const int> labels);
double zero_one_error(const LinearModel& model, const Dataset& ds);

/// 10^-5, 10^-4, ..., 10^4.
std::vector<double> default_lambda_grid();

struct CvResult {
  double lambda = 0.0;
  std::vector<double> grid;
  std::vector<double> mean_error;  // per grid entry
};

/// k-fold CV on 0/1 validation error. Folds come from a seeded shuffle of the
/// rows; ties go to the smaller lambda.
CvResult cross_validate(const Dataset& ds, const TrainOptions& base, std::vector<double> grid,
                        std::size_t folds, std::uint64_t seed);

nlohmann::json model_to_json(const LinearModel& model);
LinearModel model_from_json(const nlohmann::json& j);

}  // namespace cpforge
