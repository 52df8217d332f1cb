#include "cpforge/cp_engine.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>

#include "cpforge/error.hpp"

namespace cpforge {

FeatureSplit::FeatureSplit(std::vector<std::size_t> anchor, std::vector<std::size_t> shuffle,
                           std::size_t d)
    : anchor_(std::move(anchor)), shuffle_(std::move(shuffle)), d_(d) {
  require(!anchor_.empty() && !shuffle_.empty(), ErrorKind::usage,
          "feature split needs non-empty anchor and shuffle sets");
  std::vector<int> seen(d, 0);
  for (auto j : anchor_) {
    require(j < d, ErrorKind::usage, "anchor feature index out of range");
    ++seen[j];
  }
  for (auto j : shuffle_) {
    require(j < d, ErrorKind::usage, "shuffle feature index out of range");
    ++seen[j];
  }
  require(std::all_of(seen.begin(), seen.end(), [](int c) { return c == 1; }), ErrorKind::usage,
          "feature split must be a partition of all features");
  std::sort(anchor_.begin(), anchor_.end());
  std::sort(shuffle_.begin(), shuffle_.end());
}

FeatureSplit FeatureSplit::first_half(std::size_t d) {
  require(d >= 2, ErrorKind::usage, "split needs at least two features");
  const std::size_t da = d / 2;
  std::vector<std::size_t> a(da), s(d - da);
  std::iota(a.begin(), a.end(), std::size_t{0});
  std::iota(s.begin(), s.end(), da);
  return {std::move(a), std::move(s), d};
}

FeatureSplit FeatureSplit::from_shuffle_names(const Dataset& ds,
                                              const std::vector<std::string>& shuffle) {
  std::vector<std::size_t> s;
  for (const auto& name : shuffle) {
    const auto idx = ds.feature_index(name);
    require(idx.has_value(), ErrorKind::usage, "unknown feature '" + name + "'");
    s.push_back(*idx);
  }
  std::vector<std::size_t> a;
  for (std::size_t j = 0; j < ds.d(); ++j)
    if (std::find(s.begin(), s.end(), j) == s.end()) a.push_back(j);
  return {std::move(a), std::move(s), ds.d()};
}

bool FeatureSplit::is_shuffle(std::size_t feature) const {
  return std::binary_search(shuffle_.begin(), shuffle_.end(), feature);
}

Permutation::Permutation(std::vector<std::size_t> source) : source_(std::move(source)) {
  std::vector<char> seen(source_.size(), 0);
  for (auto s : source_) {
    require(s < source_.size() && !seen[s], ErrorKind::data, "permutation is not a bijection");
    seen[s] = 1;
  }
}

Permutation Permutation::identity(std::size_t m) {
  std::vector<std::size_t> s(m);
  std::iota(s.begin(), s.end(), std::size_t{0});
  return Permutation(std::move(s));
}

Permutation Permutation::transposition(std::size_t m, std::size_t a, std::size_t b) {
  require(a < m && b < m, ErrorKind::usage, "transposition index out of range");
  auto p = identity(m);
  p.swap_positions(a, b);
  return p;
}

bool Permutation::is_identity() const noexcept {
  for (std::size_t i = 0; i < source_.size(); ++i)
    if (source_[i] != i) return false;
  return true;
}

void Permutation::swap_positions(std::size_t a, std::size_t b) {
  require(a < source_.size() && b < source_.size(), ErrorKind::usage,
          "transposition index out of range");
  std::swap(source_[a], source_[b]);
}

Matrix Permutation::to_dense() const {
  const auto m = static_cast<Eigen::Index>(source_.size());
  Matrix out = Matrix::Zero(m, m);
  for (Eigen::Index i = 0; i < m; ++i) out(i, static_cast<Eigen::Index>(source_[i])) = 1.0;
  return out;
}

DenseShuffle::DenseShuffle(Matrix mat) : mat_(std::move(mat)) {
  require(mat_.rows() == mat_.cols() && mat_.rows() > 0, ErrorKind::data,
          "dense shuffle must be square");
  require(mat_.allFinite(), ErrorKind::data, "dense shuffle has non-finite entries");
  const Vector sums = mat_.colwise().sum().transpose();
  for (Eigen::Index j = 0; j < sums.size(); ++j)
    require(std::abs(sums(j) - 1.0) <= kColumnSumTolerance, ErrorKind::data,
            "dense shuffle column " + std::to_string(j) + " does not sum to 1");
}

namespace {

std::size_t shuffle_size(const ShuffleSpec& shuffle, std::size_t m) {
  if (const auto* p = std::get_if<Permutation>(&shuffle)) return p->size();
  if (const auto* d = std::get_if<DenseShuffle>(&shuffle))
    return static_cast<std::size_t>(d->matrix().rows());
  return m;
}

Matrix class_uniform_dense(std::span<const int> labels) {
  const auto m = static_cast<Eigen::Index>(labels.size());
  Matrix out = Matrix::Zero(m, m);
  const auto pos = static_cast<double>(std::count(labels.begin(), labels.end(), 1));
  const auto neg = static_cast<double>(labels.size()) - pos;
  for (Eigen::Index i = 0; i < m; ++i)
    for (Eigen::Index k = 0; k < m; ++k)
      if (labels[static_cast<std::size_t>(i)] == labels[static_cast<std::size_t>(k)])
        out(i, k) = 1.0 / (labels[static_cast<std::size_t>(i)] == 1 ? pos : neg);
  return out;
}

}  // namespace

Matrix to_dense(const ShuffleSpec& shuffle, std::span<const int> labels) {
  if (const auto* p = std::get_if<Permutation>(&shuffle)) return p->to_dense();
  if (const auto* d = std::get_if<DenseShuffle>(&shuffle)) return d->matrix();
  return class_uniform_dense(labels);
}

Dataset apply_cp(const Dataset& ds, const FeatureSplit& split, const ShuffleSpec& shuffle) {
  require(split.d() == ds.d(), ErrorKind::data, "split dimension does not match dataset");
  require(shuffle_size(shuffle, ds.m()) == ds.m(), ErrorKind::data,
          "shuffle dimension does not match dataset");
  const Matrix& x = ds.x();
  Matrix out = x;
  if (const auto* p = std::get_if<Permutation>(&shuffle)) {
    for (auto j : split.shuffle()) {
      const auto jj = static_cast<Eigen::Index>(j);
      for (std::size_t i = 0; i < ds.m(); ++i)
        out(static_cast<Eigen::Index>(i), jj) = x(static_cast<Eigen::Index>((*p)[i]), jj);
    }
  } else if (const auto* dense = std::get_if<DenseShuffle>(&shuffle)) {
    for (auto j : split.shuffle()) {
      const auto jj = static_cast<Eigen::Index>(j);
      out.col(jj) = dense->matrix() * x.col(jj);
    }
  } else {
    const std::size_t mp = ds.m_pos();
    for (auto j : split.shuffle()) {
      const auto jj = static_cast<Eigen::Index>(j);
      const auto head = static_cast<Eigen::Index>(mp);
      const auto tail = static_cast<Eigen::Index>(ds.m() - mp);
      if (head > 0) out.col(jj).head(head).setConstant(x.col(jj).head(head).mean());
      if (tail > 0) out.col(jj).tail(tail).setConstant(x.col(jj).tail(tail).mean());
    }
  }
  return ds.with_observations(std::move(out));
}

bool is_block_class(const ShuffleSpec& shuffle, std::span<const int> labels) {
  if (std::holds_alternative<ClassUniform>(shuffle)) return true;
  if (const auto* p = std::get_if<Permutation>(&shuffle)) {
    require(p->size() == labels.size(), ErrorKind::data, "shuffle dimension does not match labels");
    for (std::size_t i = 0; i < p->size(); ++i)
      if (labels[i] != labels[(*p)[i]]) return false;
    return true;
  }
  const Matrix& mat = std::get<DenseShuffle>(shuffle).matrix();
  require(static_cast<std::size_t>(mat.rows()) == labels.size(), ErrorKind::data,
          "shuffle dimension does not match labels");
  for (Eigen::Index i = 0; i < mat.rows(); ++i)
    for (Eigen::Index k = 0; k < mat.cols(); ++k)
      if (labels[static_cast<std::size_t>(i)] != labels[static_cast<std::size_t>(k)] &&
          mat(i, k) != 0.0)
        return false;
  return true;
}

Permutation compose(const Permutation& outer, const Permutation& inner) {
  require(outer.size() == inner.size(), ErrorKind::data, "permutation sizes differ");
  std::vector<std::size_t> out(outer.size());
  // (outer * inner * s)_r = (inner * s)_{outer[r]} = s_{inner[outer[r]]}
  for (std::size_t r = 0; r < out.size(); ++r) out[r] = inner[outer[r]];
  return Permutation(std::move(out));
}

Permutation inverse(const Permutation& p) {
  std::vector<std::size_t> out(p.size());
  for (std::size_t i = 0; i < p.size(); ++i) out[p[i]] = i;
  return Permutation(std::move(out));
}

Permutation invert_cp(const ShuffleSpec& shuffle) {
  if (const auto* p = std::get_if<Permutation>(&shuffle)) return inverse(*p);
  fail(ErrorKind::numeric, "shuffle is not invertible: only permutation shuffles can be undone");
}

CycleStats cycle_stats(const Permutation& perm) {
  CycleStats st;
  std::vector<char> seen(perm.size(), 0);
  for (std::size_t i = 0; i < perm.size(); ++i) {
    if (seen[i]) continue;
    std::size_t len = 0;
    for (std::size_t k = i; !seen[k]; k = perm[k]) {
      seen[k] = 1;
      ++len;
    }
    if (len == 1) ++st.fixed_points;
    else if (len % 2 == 1) ++st.odd_cycles;
  }
  st.non_fixed = perm.size() - st.fixed_points;
  return st;
}

InvarianceCheck mean_operator_invariant(const Dataset& ds, const FeatureSplit& split,
                                        const ShuffleSpec& shuffle) {
  const Vector before = mean_operator(ds);
  const Vector after = mean_operator(apply_cp(ds, split, shuffle));
  const double dev = (before - after).cwiseAbs().maxCoeff();
  return {dev <= kMeanOperatorTolerance, dev};
}

nlohmann::json permutation_to_json(const Permutation& p, const PermutationMetadata& meta) {
  return nlohmann::json{
      {"permutation", p.indices()},
      {"metadata",
       {{"block_class", meta.block_class}, {"seed", meta.seed}, {"iterations", meta.iterations}}}};
}

Permutation permutation_from_json(const nlohmann::json& j, PermutationMetadata* meta) {
  try {
    const auto& arr = j.is_array() ? j : j.at("permutation");
    Permutation p(arr.get<std::vector<std::size_t>>());
    if (meta != nullptr && j.is_object() && j.contains("metadata")) {
      const auto& md = j.at("metadata");
      meta->block_class = md.value("block_class", true);
      meta->seed = md.value("seed", std::uint64_t{0});
      meta->iterations = md.value("iterations", std::size_t{0});
    }
    return p;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorKind::data, std::string("malformed permutation file: ") + e.what());
  }
}

}  // namespace cpforge
