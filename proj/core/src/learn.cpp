#include "cpforge/learn.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>

#include "cpforge/error.hpp"
#include "cpforge/parallel.hpp"
#include "cpforge/rng.hpp"

namespace cpforge {

namespace {

using Idx = Eigen::Index;

void check_xy(const Matrix& x, std::span<const int> labels) {
  require(static_cast<std::size_t>(x.rows()) == labels.size(), ErrorKind::data,
          "observation and label counts differ");
  require(x.rows() >= 1, ErrorKind::data, "cannot train on an empty sample");
}

Vector label_vector(std::span<const int> labels) {
  Vector y(static_cast<Idx>(labels.size()));
  for (std::size_t i = 0; i < labels.size(); ++i) y(static_cast<Idx>(i)) = labels[i];
  return y;
}

struct Evaluation {
  double value;
  Vector grad_w;
  double grad_b;
};

Evaluation evaluate(LossKind loss, const Matrix& x, const Vector& y, const Vector& w, double b,
                    double lambda, bool fit_intercept) {
  const double m = static_cast<double>(x.rows());
  const Vector z = ((x * w).array() + b).matrix().cwiseProduct(y);
  double value = 0.0;
  Vector coef(z.size());
  for (Idx i = 0; i < z.size(); ++i) {
    value += phi(loss, z(i));
    coef(i) = phi_derivative(loss, z(i)) * y(i);
  }
  value = value / m + lambda * w.squaredNorm();
  Evaluation e{value, x.transpose() * coef / m + 2.0 * lambda * w,
               fit_intercept ? coef.sum() / m : 0.0};
  return e;
}

}  // namespace

double phi(LossKind loss, double z) {
  if (loss == LossKind::square) return (1.0 - z) * (1.0 - z);
  // log(1 + e^-z) without overflow
  return z > 0 ? std::log1p(std::exp(-z)) : -z + std::log1p(std::exp(z));
}

double phi_derivative(LossKind loss, double z) {
  if (loss == LossKind::square) return -2.0 * (1.0 - z);
  return z > 0 ? -std::exp(-z) / (1.0 + std::exp(-z)) : -1.0 / (1.0 + std::exp(z));
}

LossKind parse_loss(const std::string& name) {
  if (name == "logistic") return LossKind::logistic;
  if (name == "square") return LossKind::square;
  fail(ErrorKind::usage, "unknown loss '" + name + "' (expected logistic or square)");
}

std::string loss_name(LossKind loss) { return loss == LossKind::square ? "square" : "logistic"; }

Vector LinearModel::scores(const Matrix& x) const {
  return (x * weights).array() + intercept;
}

LinearModel train(const Matrix& x, std::span<const int> labels, const TrainOptions& opts) {
  check_xy(x, labels);
  require(opts.lambda >= 0.0 && std::isfinite(opts.lambda), ErrorKind::usage,
          "lambda must be finite and non-negative");
  const Vector y = label_vector(labels);
  LinearModel model;
  model.weights = Vector::Zero(x.cols());
  model.lambda = opts.lambda;
  model.loss = opts.loss;
  model.fit_intercept = opts.fit_intercept;

  double step = 1.0;
  auto cur = evaluate(opts.loss, x, y, model.weights, 0.0, opts.lambda, opts.fit_intercept);
  for (std::size_t it = 0; it < opts.max_iter; ++it) {
    const double gnorm = std::max(cur.grad_w.cwiseAbs().maxCoeff(), std::abs(cur.grad_b));
    if (gnorm <= opts.tol) {
      model.converged = true;
      break;
    }
    const double gsq = cur.grad_w.squaredNorm() + cur.grad_b * cur.grad_b;
    step = std::min(step * 2.0, 1e6);
    for (;;) {
      const Vector w = model.weights - step * cur.grad_w;
      const double b = model.intercept - step * cur.grad_b;
      auto next = evaluate(opts.loss, x, y, w, b, opts.lambda, opts.fit_intercept);
      // Near the optimum the required decrease drops below the rounding of
      // value, where Armijo accepts any step; require a smaller gradient there.
      const double ulp = 4.0 * std::numeric_limits<double>::epsilon() * std::max(1.0, std::abs(cur.value));
      const bool accept =
          0.5 * step * gsq > ulp
              ? next.value <= cur.value - 0.5 * step * gsq
              : next.value <= cur.value + ulp &&
                    next.grad_w.squaredNorm() + next.grad_b * next.grad_b < gsq;
      if (accept) {
        model.weights = w;
        model.intercept = b;
        cur = std::move(next);
        break;
      }
      step *= 0.5;
      if (step < 1e-20) break;
    }
    model.iterations = it + 1;
    if (step < 1e-20) break;  // stalled at double precision; converged stays false
  }
  require(model.weights.allFinite() && std::isfinite(model.intercept), ErrorKind::numeric,
          "training diverged to non-finite weights");
  return model;
}

LinearModel train(const Dataset& ds, const TrainOptions& opts) {
  return train(ds.x(), ds.labels(), opts);
}

double training_objective(const LinearModel& model, const Matrix& x, std::span<const int> labels) {
  return phi_risk(model, x, labels) + model.lambda * model.weights.squaredNorm();
}

double phi_risk(const LinearModel& model, const Matrix& x, std::span<const int> labels) {
  check_xy(x, labels);
  const Vector s = model.scores(x);
  double sum = 0.0;
  for (std::size_t i = 0; i < labels.size(); ++i) sum += phi(model.loss, labels[i] * s(static_cast<Idx>(i)));
  return sum / static_cast<double>(labels.size());
}

double phi_risk(const LinearModel& model, const Dataset& ds) {
  return phi_risk(model, ds.x(), ds.labels());
}

double zero_one_error(const LinearModel& model, const Matrix& x, std::span<const int> labels) {
  check_xy(x, labels);
  const Vector s = model.scores(x);
  std::size_t errors = 0;
  for (std::size_t i = 0; i < labels.size(); ++i)
    if (labels[i] * s(static_cast<Idx>(i)) <= 0.0) ++errors;
  return static_cast<double>(errors) / static_cast<double>(labels.size());
}

double zero_one_error(const LinearModel& model, const Dataset& ds) {
  return zero_one_error(model, ds.x(), ds.labels());
}

std::vector<double> default_lambda_grid() {
  std::vector<double> g;
  for (int e = -5; e <= 4; ++e) g.push_back(std::pow(10.0, e));
  return g;
}

CvResult cross_validate(const Dataset& ds, const TrainOptions& base, std::vector<double> grid,
                        std::size_t folds, std::uint64_t seed) {
  require(!grid.empty(), ErrorKind::usage, "lambda grid is empty");
  require(folds >= 2, ErrorKind::usage, "cross-validation needs at least two folds");
  require(ds.m() >= folds, ErrorKind::data, "fewer examples than folds");
  std::sort(grid.begin(), grid.end());

  std::vector<std::size_t> order(ds.m());
  std::iota(order.begin(), order.end(), std::size_t{0});
  auto rng = make_rng(seed, "cv-folds");
  std::shuffle(order.begin(), order.end(), rng);
  std::vector<std::size_t> fold_of(ds.m());
  for (std::size_t k = 0; k < order.size(); ++k) fold_of[order[k]] = k % folds;

  const std::size_t jobs = grid.size() * folds;
  std::vector<double> err(jobs, 0.0);
  parallel_chunks(jobs, [&](std::size_t, std::size_t begin, std::size_t end) {
    for (std::size_t job = begin; job < end; ++job) {
      const std::size_t g = job / folds, f = job % folds;
      std::vector<Idx> tr, va;
      for (std::size_t i = 0; i < ds.m(); ++i) (fold_of[i] == f ? va : tr).push_back(static_cast<Idx>(i));
      const Matrix xtr = ds.x()(tr, Eigen::all);
      const Matrix xva = ds.x()(va, Eigen::all);
      std::vector<int> ytr, yva;
      for (auto i : tr) ytr.push_back(ds.label(static_cast<std::size_t>(i)));
      for (auto i : va) yva.push_back(ds.label(static_cast<std::size_t>(i)));
      TrainOptions opts = base;
      opts.lambda = grid[g];
      err[job] = zero_one_error(train(xtr, ytr, opts), xva, yva);
    }
  });

  CvResult out;
  out.grid = grid;
  out.mean_error.assign(grid.size(), 0.0);
  for (std::size_t job = 0; job < jobs; ++job) out.mean_error[job / folds] += err[job] / static_cast<double>(folds);
  std::size_t best = 0;
  for (std::size_t g = 1; g < grid.size(); ++g)
    if (out.mean_error[g] < out.mean_error[best]) best = g;
  out.lambda = grid[best];
  return out;
}

nlohmann::json model_to_json(const LinearModel& model) {
  return {{"weights", std::vector<double>(model.weights.data(),
                                          model.weights.data() + model.weights.size())},
          {"intercept", model.intercept},
          {"lambda", model.lambda},
          {"loss", loss_name(model.loss)},
          {"converged", model.converged},
          {"iterations", model.iterations}};
}

LinearModel model_from_json(const nlohmann::json& j) {
  try {
    LinearModel m;
    const auto w = j.at("weights").get<std::vector<double>>();
    m.weights = Eigen::Map<const Vector>(w.data(), static_cast<Idx>(w.size()));
    m.intercept = j.at("intercept").get<double>();
    m.lambda = j.at("lambda").get<double>();
    m.loss = parse_loss(j.at("loss").get<std::string>());
    m.converged = j.value("converged", true);
    m.iterations = j.value("iterations", std::size_t{0});
    require(m.weights.allFinite() && std::isfinite(m.intercept), ErrorKind::data,
            "model has non-finite weights");
    return m;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, std::string("malformed model file: ") + e.what());
  }
}

}  // namespace cpforge
