#include "cpforge/search.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "cpforge/complexity.hpp"
#include "cpforge/error.hpp"
#include "cpforge/parallel.hpp"

namespace cpforge {

namespace {

using Idx = Eigen::Index;
constexpr double kInf = std::numeric_limits<double>::infinity();
constexpr double kDegenerate = 1e-12;

double mean_of(const Vector& v) { return v.mean(); }

double pop_cov(const Vector& a, double ma, const Vector& b, double mb) {
  return ((a.array() - ma) * (b.array() - mb)).mean();
}

}  // namespace

// ---------------------------------------------------------------- phi-risk

PhiRiskObjective::PhiRiskObjective(const Dataset& ds, const FeatureSplit& split, LinearModel model)
    : x_(ds.x()),
      labels_(ds.labels().begin(), ds.labels().end()),
      shuffle_(split.shuffle()),
      model_(std::move(model)) {
  require(split.d() == ds.d(), ErrorKind::usage, "split does not match the dataset");
  require(static_cast<std::size_t>(model_.weights.size()) == ds.d(), ErrorKind::usage,
          "model dimension does not match the dataset");
  rescore();
}

void PhiRiskObjective::rescore() {
  const auto m = static_cast<Idx>(labels_.size());
  scores_ = model_.scores(x_);
  shuffle_part_ = Vector::Zero(m);
  for (std::size_t j : shuffle_)
    shuffle_part_ += model_.weights(static_cast<Idx>(j)) * x_.col(static_cast<Idx>(j));
  sum_ = 0.0;
  for (Idx i = 0; i < m; ++i) sum_ += phi(model_.loss, labels_[i] * scores_(i));
}

double PhiRiskObjective::delta(std::size_t l, std::size_t l2) const {
  const auto a = static_cast<Idx>(l), b = static_cast<Idx>(l2);
  const double shift = shuffle_part_(b) - shuffle_part_(a);
  const double ya = labels_[l], yb = labels_[l2];
  const double before = phi(model_.loss, ya * scores_(a)) + phi(model_.loss, yb * scores_(b));
  const double after =
      phi(model_.loss, ya * (scores_(a) + shift)) + phi(model_.loss, yb * (scores_(b) - shift));
  return (after - before) / static_cast<double>(labels_.size());
}

void PhiRiskObjective::apply(std::size_t l, std::size_t l2) {
  sum_ += delta(l, l2) * static_cast<double>(labels_.size());
  const auto a = static_cast<Idx>(l), b = static_cast<Idx>(l2);
  const double shift = shuffle_part_(b) - shuffle_part_(a);
  scores_(a) += shift;
  scores_(b) -= shift;
  std::swap(shuffle_part_(a), shuffle_part_(b));
  for (std::size_t j : shuffle_) std::swap(x_(a, static_cast<Idx>(j)), x_(b, static_cast<Idx>(j)));
}

double PhiRiskObjective::recompute() const { return phi_risk(model_, x_, labels_); }

void PhiRiskObjective::on_retrain(const LinearModel& model) {
  model_ = model;
  rescore();
}

// ---------------------------------------------------------------- odds target

OddsTargetObjective::OddsTargetObjective(const Dataset& ds, std::size_t xc, std::size_t xa,
                                         const Predicate& pi, double target)
    : table_(contingency(ds, xc, xa, pi)), target_(target) {
  const std::size_t m = ds.m();
  xc_.resize(m);
  xa_.resize(m);
  in_pi_.resize(m);
  for (std::size_t r = 0; r < m; ++r) {
    xc_[r] = ds.x()(static_cast<Idx>(r), static_cast<Idx>(xc)) != 0.0 ? 1 : 0;
    xa_[r] = ds.x()(static_cast<Idx>(r), static_cast<Idx>(xa)) != 0.0 ? 1 : 0;
    in_pi_[r] = pi.holds(ds, r) ? 1 : 0;
  }
}

double OddsTargetObjective::gap(const ContingencyTable& t) const {
  if (t.d == 0) return kInf;
  return std::abs(static_cast<double>(t.b) / static_cast<double>(t.d) - target_);
}

ContingencyTable OddsTargetObjective::swapped(std::size_t l, std::size_t l2) const {
  ContingencyTable t = table_;
  const auto cell = [](ContingencyTable& tab, int vc, int va) -> std::int64_t& {
    if (va == 0) return vc == 0 ? tab.a : tab.b;
    return vc == 0 ? tab.c : tab.d;
  };
  if (in_pi_[l]) {
    --cell(t, xc_[l], xa_[l]);
    ++cell(t, xc_[l], xa_[l2]);
  }
  if (in_pi_[l2]) {
    --cell(t, xc_[l2], xa_[l2]);
    ++cell(t, xc_[l2], xa_[l]);
  }
  return t;
}

double OddsTargetObjective::delta(std::size_t l, std::size_t l2) const {
  const double before = gap(table_), after = gap(swapped(l, l2));
  if (before == after) return 0.0;
  return after - before;
}

void OddsTargetObjective::apply(std::size_t l, std::size_t l2) {
  table_ = swapped(l, l2);
  std::swap(xa_[l], xa_[l2]);
}

double OddsTargetObjective::recompute() const {
  ContingencyTable t;
  for (std::size_t r = 0; r < xc_.size(); ++r) {
    if (!in_pi_[r]) continue;
    ++t.predicate_support;
    if (xa_[r] == 0) (xc_[r] == 0 ? t.a : t.b) += 1;
    else (xc_[r] == 0 ? t.c : t.d) += 1;
  }
  return gap(t);
}

// ---------------------------------------------------------------- partial correlation

PartialCorrObjective::PartialCorrObjective(const Dataset& ds, const CmTriple& t) {
  require(t.x1 < ds.d() && t.x2 < ds.d() && t.x3 < ds.d(), ErrorKind::usage,
          "feature index out of range");
  require(t.x1 != t.x2 && t.x1 != t.x3 && t.x2 != t.x3, ErrorKind::usage,
          "x1, x2 and x3 must be distinct");
  c1_ = ds.x().col(static_cast<Idx>(t.x1));
  c2_ = ds.x().col(static_cast<Idx>(t.x2));
  c3_ = ds.x().col(static_cast<Idx>(t.x3));
  mean1_ = mean_of(c1_);
  mean2_ = mean_of(c2_);
  mean3_ = mean_of(c3_);
  const double v1 = pop_cov(c1_, mean1_, c1_, mean1_);
  const double v2 = pop_cov(c2_, mean2_, c2_, mean2_);
  const double v3 = pop_cov(c3_, mean3_, c3_, mean3_);
  require(v1 > 0.0 && v2 > 0.0 && v3 > 0.0, ErrorKind::numeric, "constant feature");
  s13_ = std::sqrt(v1 * v3);
  s23_ = std::sqrt(v2 * v3);
  r12_ = pop_cov(c1_, mean1_, c2_, mean2_) / std::sqrt(v1 * v2);
  require(r12_ * r12_ < 1.0 - kDegenerate, ErrorKind::numeric, "x1 and x2 are collinear");
  c13_ = pop_cov(c1_, mean1_, c3_, mean3_);
  c23_ = pop_cov(c2_, mean2_, c3_, mean3_);
}

double PartialCorrObjective::rho(double c13, double c23) const {
  const double r13 = c13 / s13_, r23 = c23 / s23_;
  if (r23 * r23 >= 1.0 - kDegenerate) return kInf;
  return (r13 - r12_ * r23) / std::sqrt((1.0 - r12_ * r12_) * (1.0 - r23 * r23));
}

double PartialCorrObjective::delta(std::size_t l, std::size_t l2) const {
  const auto a = static_cast<Idx>(l), b = static_cast<Idx>(l2);
  const double md = static_cast<double>(c3_.size());
  const double d3 = c3_(b) - c3_(a);
  const double n13 = c13_ + (c1_(a) - c1_(b)) * d3 / md;
  const double n23 = c23_ + (c2_(a) - c2_(b)) * d3 / md;
  return rho(n13, n23) - value();
}

void PartialCorrObjective::apply(std::size_t l, std::size_t l2) {
  const auto a = static_cast<Idx>(l), b = static_cast<Idx>(l2);
  const double md = static_cast<double>(c3_.size());
  const double d3 = c3_(b) - c3_(a);
  c13_ += (c1_(a) - c1_(b)) * d3 / md;
  c23_ += (c2_(a) - c2_(b)) * d3 / md;
  std::swap(c3_(a), c3_(b));
}

double PartialCorrObjective::recompute() const {
  return rho(pop_cov(c1_, mean1_, c3_, mean3_), pop_cov(c2_, mean2_, c3_, mean3_));
}

// ---------------------------------------------------------------- candidates

std::vector<std::pair<std::size_t, std::size_t>> candidate_pairs(std::span<const int> labels,
                                                                 const SearchConfig& config,
                                                                 Rng& rng) {
  const std::size_t m = labels.size();
  const bool exhaustive = config.candidate_mode == CandidateMode::exhaustive ||
                          (config.candidate_mode == CandidateMode::automatic &&
                           m <= kExhaustiveScanLimit);
  std::size_t m_pos = 0;
  while (m_pos < m && labels[m_pos] == 1) ++m_pos;
  const std::size_t m_neg = m - m_pos;
  const auto pairs_in = [](std::size_t n) { return n < 2 ? 0 : n * (n - 1) / 2; };
  const std::size_t total = config.block_class ? pairs_in(m_pos) + pairs_in(m_neg) : pairs_in(m);

  std::vector<std::pair<std::size_t, std::size_t>> out;
  if (exhaustive || config.sample_count >= total) {
    out.reserve(total);
    for (std::size_t a = 0; a < m; ++a)
      for (std::size_t b = a + 1; b < m; ++b) {
        if (config.block_class && labels[a] != labels[b]) break;
        out.emplace_back(a, b);
      }
    return out;
  }

  std::set<std::pair<std::size_t, std::size_t>> drawn;
  std::uniform_int_distribution<std::uint64_t> pick(0, total - 1);
  while (drawn.size() < config.sample_count) {
    // Unrank a uniform pair index within the chosen block.
    std::uint64_t k = pick(rng);
    std::size_t offset = 0, n = m;
    if (config.block_class) {
      if (k < pairs_in(m_pos)) {
        n = m_pos;
      } else {
        k -= pairs_in(m_pos);
        offset = m_pos;
        n = m_neg;
      }
    }
    std::size_t a = 0;
    while (k >= n - 1 - a) {
      k -= n - 1 - a;
      ++a;
    }
    drawn.emplace(offset + a, offset + a + 1 + static_cast<std::size_t>(k));
  }
  out.assign(drawn.begin(), drawn.end());
  return out;
}

std::optional<Candidate> best_candidate(
    const Objective& objective, const std::vector<std::pair<std::size_t, std::size_t>>& pairs) {
  const std::size_t chunks = chunk_count(pairs.size());
  std::vector<std::optional<Candidate>> local(std::max<std::size_t>(chunks, 1));
  parallel_chunks(pairs.size(), [&](std::size_t c, std::size_t begin, std::size_t end) {
    std::optional<Candidate> best;
    for (std::size_t k = begin; k < end; ++k) {
      const double d = objective.delta(pairs[k].first, pairs[k].second);
      if (std::isnan(d)) continue;
      if (!best || d < best->delta) best = Candidate{pairs[k].first, pairs[k].second, d};
    }
    local[c] = best;
  });
  std::optional<Candidate> best;
  for (const auto& c : local)
    if (c && (!best || c->delta < best->delta)) best = c;
  return best;
}

bool strictly_improves(double delta, double value) {
  if (!std::isfinite(value)) return delta < 0.0;
  return delta < -1e-12 * std::max(1.0, std::abs(value));
}

// ---------------------------------------------------------------- greedy search

namespace {

class TraceBuilder {
 public:
  TraceBuilder(const Dataset& ds, const FeatureSplit& split, const SearchConfig& config,
               const Objective& objective, const HsicTracker* hsic, SearchContext& ctx)
      : ds_(ds), split_(split), config_(config), objective_(objective), hsic_(hsic), ctx_(ctx) {}

  void invalidate() { stale_ = true; }

  TraceRecord record(std::size_t t, const Permutation& perm,
                     std::optional<std::pair<std::size_t, std::size_t>> pair) {
    if (stale_) refresh(perm);
    TraceRecord r;
    r.iteration = t;
    r.objective = objective_.value();
    r.pair = pair;
    r.odd_cycles = cycles_.odd_cycles;
    r.fixed_points = cycles_.fixed_points;
    r.rcp_bound = rcp_;
    r.phi_risk = phi_;
    r.test_error = test_error_;
    if (hsic_ != nullptr) {
      r.hsic = hsic_->value();
      if (config_.pvalue_every > 0 && t % config_.pvalue_every == 0) {
        const auto p = pvalue_permutation_test(hsic_->ku(), hsic_->current_kv(),
                                               config_.pvalue_resamples, mix64(config_.seed + t));
        r.p_value = p.smoothed;
      }
    }
    if (ctx_.on_record) ctx_.on_record(r);
    return r;
  }

 private:
  void refresh(const Permutation& perm) {
    cycles_ = cycle_stats(perm);
    if (config_.record_rcp) rcp_ = rcp_bound_linear(ds_, split_, perm, config_.rcp_radius).value;
    if (ctx_.model) {
      phi_ = phi_risk(*ctx_.model, apply_cp(ds_, split_, perm));
      if (ctx_.holdout) test_error_ = zero_one_error(*ctx_.model, *ctx_.holdout);
    }
    stale_ = false;
  }

  const Dataset& ds_;
  const FeatureSplit& split_;
  const SearchConfig& config_;
  const Objective& objective_;
  const HsicTracker* hsic_;
  SearchContext& ctx_;
  bool stale_ = true;
  CycleStats cycles_;
  std::optional<double> rcp_, phi_, test_error_;
};

}  // namespace

SearchResult crossover_learn(const Dataset& ds, const FeatureSplit& split,
                             const SearchConfig& config, Objective& objective,
                             SearchContext context) {
  require(split.d() == ds.d(), ErrorKind::usage, "split does not match the dataset");
  require(ds.m() >= 2, ErrorKind::data, "need at least two examples");
  if (context.holdout)
    require(context.holdout->d() == ds.d(), ErrorKind::usage,
            "holdout dimension does not match the dataset");

  std::optional<HsicTracker> side;
  const HsicTracker* hsic = nullptr;
  if (context.kernels) {
    require(static_cast<std::size_t>(context.kernels->first.rows()) == ds.m() &&
                static_cast<std::size_t>(context.kernels->second.rows()) == ds.m(),
            ErrorKind::usage, "kernel size does not match the dataset");
    side.emplace(context.kernels->first, context.kernels->second);
    hsic = &*side;
  } else if (const auto* h = dynamic_cast<const HsicObjective*>(&objective)) {
    hsic = &h->tracker();
  }

  SearchResult res;
  res.permutation = Permutation::identity(ds.m());
  Rng rng = make_rng(config.seed, "search-candidates");
  const bool fixed_pairs = config.candidate_mode == CandidateMode::exhaustive ||
                           (config.candidate_mode == CandidateMode::automatic &&
                            ds.m() <= kExhaustiveScanLimit);
  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  if (fixed_pairs) pairs = candidate_pairs(ds.labels(), config, rng);

  TraceBuilder trace(ds, split, config, objective, hsic, context);
  res.trace.reserve(config.iterations + 1);
  res.trace.push_back(trace.record(0, res.permutation, std::nullopt));

  std::size_t misses = 0;
  for (std::size_t t = 1; t <= config.iterations; ++t) {
    if (!fixed_pairs) pairs = candidate_pairs(ds.labels(), config, rng);
    std::optional<std::pair<std::size_t, std::size_t>> taken;
    const auto best = best_candidate(objective, pairs);
    if (best && strictly_improves(best->delta, objective.value())) {
      objective.apply(best->l, best->l2);
      if (side) side->apply(best->l, best->l2);
      res.permutation.swap_positions(best->l, best->l2);
      taken.emplace(best->l, best->l2);
      ++res.accepted;
      misses = 0;
      trace.invalidate();
    } else {
      ++misses;
    }
    if (config.retrain_every > 0 && context.model && t % config.retrain_every == 0) {
      context.model = train(apply_cp(ds, split, res.permutation), context.train_options);
      objective.on_retrain(*context.model);
      trace.invalidate();
    }
    res.trace.push_back(trace.record(t, res.permutation, taken));

    if (config.early_stop_patience > 0 && misses >= config.early_stop_patience &&
        t < config.iterations) {
      res.stopped_early = true;
      res.stop_iteration = t + 1;
      for (std::size_t p = t + 1; p <= config.iterations; ++p)
        res.trace.push_back(trace.record(p, res.permutation, std::nullopt));
      break;
    }
  }
  res.model = std::move(context.model);
  return res;
}

}  // namespace cpforge
