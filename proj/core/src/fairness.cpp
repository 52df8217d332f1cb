#include "cpforge/fairness.hpp"

#include <algorithm>
#include <cctype>
#include <cmath>
#include <limits>
#include <sstream>

#include "cpforge/error.hpp"

namespace cpforge {

namespace {

int binary_value(const Dataset& ds, std::size_t row, std::size_t feature) {
  const double v = ds.x()(static_cast<Eigen::Index>(row), static_cast<Eigen::Index>(feature));
  if (v == 0.0) return 0;
  if (v == 1.0) return 1;
  fail(ErrorKind::data, "feature '" + ds.feature_names()[feature] + "' is not binary 0/1");
}

std::string trim(std::string s) {
  const auto ws = [](unsigned char ch) { return std::isspace(ch) != 0; };
  s.erase(s.begin(), std::find_if_not(s.begin(), s.end(), ws));
  s.erase(std::find_if_not(s.rbegin(), s.rend(), ws).base(), s.end());
  return s;
}

std::string range_text(const ContingencyTable& t) {
  const auto r = legal_shift_range(t);
  std::ostringstream os;
  os << "legal shifts i in [" << r.lo << ", " << r.hi << "]";
  if (t.d > 0) {
    const double lo = static_cast<double>(t.b + r.lo) / static_cast<double>(t.d - r.lo);
    os << ", reachable odds ratio in [" << lo << ", ";
    if (r.hi == t.d) os << "inf)";
    else os << static_cast<double>(t.b + r.hi) / static_cast<double>(t.d - r.hi) << "]";
  }
  return os.str();
}

}  // namespace

Predicate Predicate::parse(const Dataset& ds, const std::string& text) {
  Predicate p;
  const auto body = trim(text);
  if (body.empty() || body == "true" || body == "TRUE") return p;
  std::stringstream ss(body);
  std::string term;
  while (std::getline(ss, term, ',')) {
    term = trim(term);
    const auto eq = term.find('=');
    require(eq != std::string::npos, ErrorKind::usage, "predicate term '" + term + "' needs name=value");
    const auto name = trim(term.substr(0, eq));
    const auto value = trim(term.substr(eq + 1));
    const auto idx = ds.feature_index(name);
    require(idx.has_value(), ErrorKind::usage, "unknown predicate feature '" + name + "'");
    require(value == "0" || value == "1", ErrorKind::usage,
            "predicate value for '" + name + "' must be 0 or 1");
    p.terms.emplace_back(*idx, value == "1" ? 1 : 0);
  }
  return p;
}

bool Predicate::holds(const Dataset& ds, std::size_t row) const {
  return std::all_of(terms.begin(), terms.end(), [&](const auto& t) {
    return binary_value(ds, row, t.first) == t.second;
  });
}

ContingencyTable contingency(const Dataset& ds, std::size_t xc, std::size_t xa,
                             const Predicate& pi) {
  require(xc < ds.d() && xa < ds.d(), ErrorKind::usage, "feature index out of range");
  require(xc != xa, ErrorKind::usage, "x_C and x_A must be distinct features");
  for (const auto& [f, v] : pi.terms) {
    require(f < ds.d(), ErrorKind::usage, "predicate feature index out of range");
    require(f != xc && f != xa, ErrorKind::usage, "predicate must not reference x_C or x_A");
  }
  ContingencyTable t;
  for (std::size_t r = 0; r < ds.m(); ++r) {
    const int vc = binary_value(ds, r, xc);
    const int va = binary_value(ds, r, xa);
    if (!pi.holds(ds, r)) continue;
    ++t.predicate_support;
    if (va == 0) (vc == 0 ? t.a : t.b) += 1;
    else (vc == 0 ? t.c : t.d) += 1;
  }
  require(t.predicate_support > 0, ErrorKind::data, "empty support: predicate excludes all rows");
  return t;
}

Rational odds_ratio_exact(const ContingencyTable& t, OddsConvention convention) {
  if (convention == OddsConvention::counts) {
    require(t.d > 0, ErrorKind::numeric, "undefined odds: d = 0");
    return {t.b, t.d};
  }
  require(t.d > 0 && t.c + t.d > 0 && t.a + t.b > 0, ErrorKind::numeric,
          "undefined odds: zero denominator");
  return Rational(t.b, t.a + t.b) / Rational(t.d, t.c + t.d);
}

double odds_ratio(const ContingencyTable& t, OddsConvention convention) {
  return boost::rational_cast<double>(odds_ratio_exact(t, convention));
}

ShiftRange legal_shift_range(const ContingencyTable& t) {
  return {-std::min(t.b, t.c), std::min(t.a, t.d)};
}

Rational odds_shift_delta(std::int64_t b, std::int64_t d, std::int64_t i) {
  require(d != 0, ErrorKind::numeric, "undefined odds: d = 0");
  require(d != i, ErrorKind::infeasible, "shift i equals d: resulting odds ratio is undefined");
  return Rational(b + d, d - i) * Rational(i, d);
}

OddsShiftPlan plan_odds_shift(const ContingencyTable& t, std::int64_t i) {
  const auto r = legal_shift_range(t);
  require(i >= r.lo && i <= r.hi, ErrorKind::infeasible,
          "shift i = " + std::to_string(i) + " out of range; " + range_text(t));
  OddsShiftPlan plan;
  plan.delta = odds_shift_delta(t.b, t.d, i);
  plan.new_table = {t.a - i, t.b + i, t.c + i, t.d - i, t.predicate_support};
  return plan;
}

OddsCp build_odds_cp(const Dataset& ds, std::size_t xc, std::size_t xa, const Predicate& pi,
                     std::int64_t i) {
  const auto before = contingency(ds, xc, xa, pi);
  const auto plan = plan_odds_shift(before, i);

  std::vector<std::size_t> anchor;
  for (std::size_t j = 0; j < ds.d(); ++j)
    if (j != xa) anchor.push_back(j);
  FeatureSplit split(std::move(anchor), {xa}, ds.d());

  // Positive i moves x_A=1 off (x_A=1, x_C=1) rows onto (x_A=0, x_C=0) rows;
  // negative i pairs (x_A=0, x_C=1) with (x_A=1, x_C=0).
  const int src_a = i > 0 ? 1 : 0, src_c = 1;
  const int dst_a = i > 0 ? 0 : 1, dst_c = 0;
  const auto need = static_cast<std::size_t>(i > 0 ? i : -i);

  std::vector<std::size_t> src[2], dst[2];  // by class: 0 positive, 1 negative
  for (std::size_t r = 0; r < ds.m(); ++r) {
    if (!pi.holds(ds, r)) continue;
    const int va = binary_value(ds, r, xa), vc = binary_value(ds, r, xc);
    const int cls = ds.label(r) == 1 ? 0 : 1;
    if (va == src_a && vc == src_c) src[cls].push_back(r);
    else if (va == dst_a && vc == dst_c) dst[cls].push_back(r);
  }

  std::vector<std::pair<std::size_t, std::size_t>> pairs;
  std::size_t used_src[2] = {0, 0}, used_dst[2] = {0, 0};
  for (int cls = 0; cls < 2 && pairs.size() < need; ++cls) {
    while (pairs.size() < need && used_src[cls] < src[cls].size() &&
           used_dst[cls] < dst[cls].size())
      pairs.emplace_back(src[cls][used_src[cls]++], dst[cls][used_dst[cls]++]);
  }
  bool cross = false;
  if (pairs.size() < need) {
    std::vector<std::size_t> rest_src, rest_dst;
    for (int cls = 0; cls < 2; ++cls) {
      rest_src.insert(rest_src.end(), src[cls].begin() + static_cast<std::ptrdiff_t>(used_src[cls]),
                      src[cls].end());
      rest_dst.insert(rest_dst.end(), dst[cls].begin() + static_cast<std::ptrdiff_t>(used_dst[cls]),
                      dst[cls].end());
    }
    std::sort(rest_src.begin(), rest_src.end());
    std::sort(rest_dst.begin(), rest_dst.end());
    require(rest_src.size() >= need - pairs.size() && rest_dst.size() >= need - pairs.size(),
            ErrorKind::infeasible, "insufficient rows to pair for the requested shift");
    for (std::size_t k = 0; pairs.size() < need; ++k) {
      pairs.emplace_back(rest_src[k], rest_dst[k]);
      cross = true;
    }
  }

  auto perm = Permutation::identity(ds.m());
  for (const auto& [p, q] : pairs) perm.swap_positions(p, q);

  OddsCp out{std::move(split), std::move(perm), before, {}, plan.delta, cross};
  out.after = contingency(apply_cp(ds, out.split, out.permutation), xc, xa, pi);
  require(out.after == plan.new_table, ErrorKind::numeric,
          "odds transfer did not reproduce the planned table");
  return out;
}

std::int64_t shift_for_target(const ContingencyTable& t, double target_rho) {
  require(std::isfinite(target_rho) && target_rho >= 0.0, ErrorKind::usage,
          "target odds ratio must be a finite non-negative number");
  require(t.d > 0, ErrorKind::numeric, "undefined odds: d = 0");
  const auto r = legal_shift_range(t);
  std::int64_t best = 0;
  double best_gap = std::numeric_limits<double>::infinity();
  double lo_rho = std::numeric_limits<double>::infinity(), hi_rho = 0.0;
  for (std::int64_t i = r.lo; i <= r.hi; ++i) {
    if (i == t.d) continue;
    const double rho = static_cast<double>(t.b + i) / static_cast<double>(t.d - i);
    lo_rho = std::min(lo_rho, rho);
    hi_rho = std::max(hi_rho, rho);
    const double gap = std::abs(rho - target_rho);
    if (gap < best_gap) {
      best_gap = gap;
      best = i;
    }
  }
  require(target_rho >= lo_rho - 1e-12 && target_rho <= hi_rho + 1e-12,
          ErrorKind::infeasible,
          "target odds ratio " + std::to_string(target_rho) + " unreachable; " + range_text(t));
  return best;
}

bool fairness_check(const ContingencyTable& t, const FairnessCriterion& criterion,
                    OddsConvention convention) {
  const Rational rho = odds_ratio_exact(t, convention);
  switch (criterion.kind) {
    case FairnessCriterion::Kind::exact:
      return rho == Rational(1);
    case FairnessCriterion::Kind::band: {
      const double v = boost::rational_cast<double>(rho);
      return v >= 1.0 - criterion.epsilon && v <= 1.0 + criterion.epsilon;
    }
    case FairnessCriterion::Kind::disparate_impact:
      return boost::rational_cast<double>(rho) > kDisparateImpactThreshold;
  }
  return false;
}

nlohmann::json to_json(const ContingencyTable& t) {
  nlohmann::json j{{"a", t.a}, {"b", t.b}, {"c", t.c}, {"d", t.d},
                   {"predicate_support", t.predicate_support}};
  if (t.d > 0) j["odds_counts"] = odds_ratio(t, OddsConvention::counts);
  if (t.d > 0 && t.a + t.b > 0) j["odds_probability"] = odds_ratio(t, OddsConvention::probability);
  return j;
}

}  // namespace cpforge
