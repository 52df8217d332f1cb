#include "cpforge/kernels_hsic.hpp"

#include <algorithm>
#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <numeric>

#include <Eigen/Eigenvalues>

#include "cpforge/error.hpp"
#include "cpforge/rng.hpp"

namespace cpforge {

namespace {

using Idx = Eigen::Index;

Idx ix(std::size_t i) { return static_cast<Idx>(i); }

void check_pair(const Matrix& ku, const Matrix& kv) {
  require(ku.rows() == ku.cols() && kv.rows() == kv.cols() && ku.rows() == kv.rows(),
          ErrorKind::data, "kernel matrices must be square and of equal size");
  require(ku.rows() >= 2, ErrorKind::data, "kernels need at least two points");
}

void check_indices(const Matrix& k, std::size_t l, std::size_t l2) {
  require(l < static_cast<std::size_t>(k.rows()) && l2 < static_cast<std::size_t>(k.rows()),
          ErrorKind::usage, "transposition index out of range");
  require(l != l2, ErrorKind::usage, "transposition needs two distinct indices");
}

/// H K H without forming H.
Matrix center(const Matrix& k) {
  const Vector row_mean = k.rowwise().mean();
  const Vector col_mean = k.colwise().mean().transpose();
  const double grand = k.mean();
  Matrix out = k;
  out.colwise() -= row_mean;
  out.rowwise() -= col_mean.transpose();
  out.array() += grand;
  return out;
}

double remainder_raw(const Matrix& ku, const Matrix& kv, Idx l, Idx l2) {
  return 2.0 * (ku(l, l) - ku(l2, l)) * (kv(l, l) - kv(l2, l)) +
         2.0 * (ku(l2, l2) - ku(l, l2)) * (kv(l2, l2) - kv(l, l2)) -
         (ku(l, l) - ku(l2, l2)) * (kv(l, l) - kv(l2, l2));
}

/// -2m cov(du, dv) + remainder, with du, dv the differences of columns l and
/// l2 (kernels are symmetric, so columns are the rows and contiguous).
double delta_with_sums(const Matrix& ku, const Matrix& kv, const Vector& rsu, const Vector& rsv,
                       Idx l, Idx l2) {
  const Idx m = ku.rows();
  const double* ul = ku.col(l).data();
  const double* ul2 = ku.col(l2).data();
  const double* vl = kv.col(l).data();
  const double* vl2 = kv.col(l2).data();
  double dot = 0.0;
  for (Idx j = 0; j < m; ++j) dot += (ul[j] - ul2[j]) * (vl[j] - vl2[j]);
  const double cov_term =
      -2.0 * dot + 2.0 / static_cast<double>(m) * (rsu(l) - rsu(l2)) * (rsv(l) - rsv(l2));
  return cov_term + remainder_raw(ku, kv, l, l2);
}

double cross_term(const Vector& u, const Vector& mv) { return u.dot(mv); }

}  // namespace

KernelMatrix gaussian_kernel(const Matrix& points, Bandwidth bw) {
  const Idx m = points.rows();
  require(m >= 1 && points.cols() >= 1, ErrorKind::data, "kernel needs a non-empty feature subset");
  require(points.allFinite(), ErrorKind::data, "kernel input has non-finite values");
  Matrix sq(m, m);
  for (Idx i = 0; i < m; ++i) {
    sq(i, i) = 0.0;
    for (Idx j = i + 1; j < m; ++j) {
      const double v = (points.row(i) - points.row(j)).squaredNorm();
      sq(i, j) = v;
      sq(j, i) = v;
    }
  }
  KernelMatrix out;
  if (bw.kind == Bandwidth::Kind::fixed) {
    require(std::isfinite(bw.sigma) && bw.sigma > 0.0, ErrorKind::usage,
            "bandwidth must be positive");
    out.bandwidth = bw.sigma;
  } else {
    std::vector<double> dist;
    dist.reserve(static_cast<std::size_t>(m * (m - 1) / 2));
    for (Idx i = 0; i < m; ++i)
      for (Idx j = i + 1; j < m; ++j) dist.push_back(std::sqrt(sq(i, j)));
    double med = 0.0;
    if (!dist.empty()) {
      const auto mid = dist.begin() + static_cast<std::ptrdiff_t>(dist.size() / 2);
      std::nth_element(dist.begin(), mid, dist.end());
      med = *mid;
      if (dist.size() % 2 == 0) med = 0.5 * (med + *std::max_element(dist.begin(), mid));
    }
    if (med < kBandwidthFloor) {
      out.bandwidth = 1.0;
      out.bandwidth_fallback = true;
    } else {
      out.bandwidth = med;
    }
  }
  const double scale = -1.0 / (2.0 * out.bandwidth * out.bandwidth);
  out.mat = (sq.array() * scale).exp().matrix();
  return out;
}

KernelMatrix gaussian_kernel(const Dataset& ds, std::span<const std::size_t> subset, Bandwidth bw) {
  require(!subset.empty(), ErrorKind::usage, "kernel feature subset is empty");
  Matrix pts(ds.x().rows(), ix(subset.size()));
  for (std::size_t c = 0; c < subset.size(); ++c) {
    require(subset[c] < ds.d(), ErrorKind::usage, "kernel feature index out of range");
    pts.col(ix(c)) = ds.x().col(ix(subset[c]));
  }
  auto k = gaussian_kernel(pts, bw);
  k.feature_subset.assign(subset.begin(), subset.end());
  return k;
}

double hsic(const Matrix& ku, const Matrix& kv) {
  check_pair(ku, kv);
  return center(ku).cwiseProduct(kv).sum();
}

double transposition_remainder(const Matrix& ku, const Matrix& kv, std::size_t l, std::size_t l2) {
  check_pair(ku, kv);
  check_indices(ku, l, l2);
  return remainder_raw(ku, kv, ix(l), ix(l2));
}

double printed_transposition_remainder(const Matrix& ku, const Matrix& kv, std::size_t l,
                                       std::size_t l2) {
  check_pair(ku, kv);
  check_indices(ku, l, l2);
  const Idx a = ix(l), b = ix(l2);
  return (ku(a, a) - ku(b, a)) * (kv(a, a) - kv(b, a)) +
         (ku(b, b) - ku(b, a)) * (kv(b, b) - kv(b, a));
}

double hsic_delta_elementary(const Matrix& ku, const Matrix& kv, std::size_t l, std::size_t l2) {
  check_pair(ku, kv);
  check_indices(ku, l, l2);
  const Vector rsu = ku.rowwise().sum();
  const Vector rsv = kv.rowwise().sum();
  return delta_with_sums(ku, kv, rsu, rsv, ix(l), ix(l2));
}

SpectralSummary spectral_summary(const Matrix& ku, const Matrix& kv) {
  check_pair(ku, kv);
  const double m = static_cast<double>(ku.rows());
  return {ku.rowwise().sum() / m, kv.rowwise().sum() / m};
}

SpectralSummary spectral_summary_eigen(const Matrix& ku, const Matrix& kv) {
  check_pair(ku, kv);
  const double m = static_cast<double>(ku.rows());
  const auto tilde = [m](const Matrix& k) {
    Eigen::SelfAdjointEigenSolver<Matrix> es(k);
    require(es.info() == Eigen::Success, ErrorKind::numeric, "eigendecomposition failed");
    const Matrix& u = es.eigenvectors();
    const Vector proj = u.colwise().sum().transpose();  // 1^T u_i
    Vector out = u * (es.eigenvalues().cwiseProduct(proj));
    return Vector(out / m);
  };
  return {tilde(ku), tilde(kv)};
}

double hsic_shift_spectral(const Matrix& ku, const Matrix& kv, const Matrix& shuffle) {
  check_pair(ku, kv);
  require(shuffle.rows() == ku.rows() && shuffle.cols() == ku.cols(), ErrorKind::data,
          "shuffle dimension does not match kernels");
  const auto s = spectral_summary(ku, kv);
  const double m = static_cast<double>(ku.rows());
  return 2.0 * m * (cross_term(s.u_tilde, s.v_tilde) - cross_term(s.u_tilde, shuffle * s.v_tilde));
}

double hsic_shift_spectral(const Matrix& ku, const Matrix& kv, const ShuffleSpec& shuffle,
                           std::span<const int> labels) {
  check_pair(ku, kv);
  require(labels.size() == static_cast<std::size_t>(ku.rows()), ErrorKind::data,
          "labels do not match kernels");
  const auto s = spectral_summary(ku, kv);
  const double m = static_cast<double>(ku.rows());
  Vector mv(s.v_tilde.size());
  if (const auto* p = std::get_if<Permutation>(&shuffle)) {
    require(p->size() == labels.size(), ErrorKind::data, "shuffle dimension does not match kernels");
    for (std::size_t i = 0; i < p->size(); ++i) mv(ix(i)) = s.v_tilde(ix((*p)[i]));
  } else if (const auto* d = std::get_if<DenseShuffle>(&shuffle)) {
    require(d->matrix().rows() == ku.rows(), ErrorKind::data,
            "shuffle dimension does not match kernels");
    mv = d->matrix() * s.v_tilde;
  } else {
    double sum_pos = 0.0, sum_neg = 0.0;
    std::size_t n_pos = 0;
    for (std::size_t i = 0; i < labels.size(); ++i) {
      if (labels[i] == 1) {
        sum_pos += s.v_tilde(ix(i));
        ++n_pos;
      } else {
        sum_neg += s.v_tilde(ix(i));
      }
    }
    const double mean_pos = n_pos ? sum_pos / static_cast<double>(n_pos) : 0.0;
    const std::size_t n_neg = labels.size() - n_pos;
    const double mean_neg = n_neg ? sum_neg / static_cast<double>(n_neg) : 0.0;
    for (std::size_t i = 0; i < labels.size(); ++i)
      mv(ix(i)) = labels[i] == 1 ? mean_pos : mean_neg;
  }
  return 2.0 * m * (cross_term(s.u_tilde, s.v_tilde) - cross_term(s.u_tilde, mv));
}

HsicShiftParts hsic_shift_decomposed(const Matrix& ku, const Matrix& kv, const Matrix& shuffle) {
  HsicShiftParts parts;
  parts.spectral = hsic_shift_spectral(ku, kv, shuffle);
  const Matrix moved = shuffle * kv * shuffle.transpose();
  parts.alignment = ku.cwiseProduct(moved).sum() - ku.cwiseProduct(kv).sum();
  return parts;
}

double hsic_shift_direct(const Matrix& ku, const Matrix& kv, const Matrix& shuffle) {
  check_pair(ku, kv);
  require(shuffle.rows() == ku.rows() && shuffle.cols() == ku.cols(), ErrorKind::data,
          "shuffle dimension does not match kernels");
  const Matrix moved = shuffle * kv * shuffle.transpose();
  return hsic(ku, moved) - hsic(ku, kv);
}

double remainder_general(const Matrix& ku, const Matrix& kv) {
  check_pair(ku, kv);
  const double m = static_cast<double>(ku.rows());
  const Vector du = ku.diagonal();
  const Vector dv = kv.diagonal();
  const Vector cu = ku.colwise().sum().transpose();
  const Vector cv = kv.colwise().sum().transpose();
  return du.dot(dv) - (du.dot(cv) + cu.dot(dv)) / (2.0 * m);
}

double remainder_unit_diagonal(const Matrix& ku, const Matrix& kv) {
  check_pair(ku, kv);
  const double m = static_cast<double>(ku.rows());
  return m * (1.0 - (ku.sum() + kv.sum()) / (2.0 * m * m));
}

double expected_hsic_after_elementary(const Matrix& ku, const Matrix& kv) {
  check_pair(ku, kv);
  const double m = static_cast<double>(ku.rows());
  const Vector du = ku.diagonal();
  const Vector dv = kv.diagonal();
  const Vector cu = ku.colwise().sum().transpose();
  const Vector cv = kv.colwise().sum().transpose();
  const double p = du.dot(dv);
  const double q = du.dot(cv) + cu.dot(dv);
  const double s = ku.cwiseProduct(kv).sum();
  const double r = p / 2.0 + du.sum() * dv.sum() / (2.0 * m) - q / m + s / m;
  const double w = 4.0 / (m - 1.0);
  return (1.0 - w) * hsic(ku, kv) + w * r;
}

double expected_hsic_after_elementary_printed(const Matrix& ku, const Matrix& kv) {
  check_pair(ku, kv);
  const double w = 8.0 / (static_cast<double>(ku.rows()) - 1.0);
  return (1.0 - w) * hsic(ku, kv) + w * remainder_general(ku, kv);
}

PValue pvalue_permutation_test(const Matrix& ku, const Matrix& kv, std::size_t resamples,
                               std::uint64_t seed) {
  check_pair(ku, kv);
  require(resamples >= 1, ErrorKind::usage, "p-value needs at least one resample");
  const Matrix kuc = center(ku);
  const Idx m = ku.rows();
  PValue out;
  out.statistic = kuc.cwiseProduct(kv).sum();
  out.resamples = resamples;
  const double threshold = out.statistic - 1e-12 * std::max(1.0, std::abs(out.statistic));
  auto rng = make_rng(seed, "hsic-pvalue");
  std::vector<Idx> perm(static_cast<std::size_t>(m));
  std::iota(perm.begin(), perm.end(), Idx{0});
  for (std::size_t r = 0; r < resamples; ++r) {
    std::shuffle(perm.begin(), perm.end(), rng);
    double stat = 0.0;
    for (Idx j = 0; j < m; ++j) {
      const double* kucol = kuc.col(j).data();
      const double* kvcol = kv.col(perm[static_cast<std::size_t>(j)]).data();
      for (Idx i = 0; i < m; ++i) stat += kucol[i] * kvcol[perm[static_cast<std::size_t>(i)]];
    }
    if (stat >= threshold) ++out.exceed;
  }
  out.smoothed =
      static_cast<double>(1 + out.exceed) / static_cast<double>(resamples + 1);
  out.raw = static_cast<double>(out.exceed) / static_cast<double>(resamples);
  return out;
}

HsicTracker::HsicTracker(Matrix ku, Matrix kv)
    : ku_(std::move(ku)), kv_cur_(std::move(kv)) {
  check_pair(ku_, kv_cur_);
  ku_rowsum_ = ku_.rowwise().sum();
  kv_rowsum_ = kv_cur_.rowwise().sum();
  perm_ = Permutation::identity(m());
  value_ = hsic(ku_, kv_cur_);
}

double HsicTracker::delta(std::size_t l, std::size_t l2) const {
  check_indices(ku_, l, l2);
  return delta_with_sums(ku_, kv_cur_, ku_rowsum_, kv_rowsum_, ix(l), ix(l2));
}

void HsicTracker::apply(std::size_t l, std::size_t l2) {
  value_ += delta(l, l2);
  perm_.swap_positions(l, l2);
  kv_cur_.row(ix(l)).swap(kv_cur_.row(ix(l2)));
  kv_cur_.col(ix(l)).swap(kv_cur_.col(ix(l2)));
  std::swap(kv_rowsum_(ix(l)), kv_rowsum_(ix(l2)));
}

double HsicTracker::recompute() const { return hsic(ku_, kv_cur_); }

void write_kernel_dump(const std::filesystem::path& path, const Matrix& k) {
  require(k.rows() == k.cols(), ErrorKind::data, "kernel dump needs a square matrix");
  std::ofstream out(path, std::ios::binary);
  require(out.good(), ErrorKind::data, "cannot open " + path.string() + " for writing");
  const auto put = [&out](std::uint64_t bits) {
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    out.write(reinterpret_cast<const char*>(&bits), sizeof bits);
  };
  put(static_cast<std::uint64_t>(k.rows()));
  for (Idx i = 0; i < k.rows(); ++i)
    for (Idx j = 0; j < k.cols(); ++j) put(std::bit_cast<std::uint64_t>(k(i, j)));
  require(out.good(), ErrorKind::data, "failed writing " + path.string());
}

Matrix read_kernel_dump(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  require(in.good(), ErrorKind::data, "cannot open " + path.string());
  const auto get = [&in, &path]() {
    std::uint64_t bits = 0;
    in.read(reinterpret_cast<char*>(&bits), sizeof bits);
    require(in.gcount() == sizeof bits, ErrorKind::data, "truncated kernel dump " + path.string());
    if constexpr (std::endian::native == std::endian::big) bits = __builtin_bswap64(bits);
    return bits;
  };
  const auto m = get();
  require(m > 0 && m < (1ULL << 20), ErrorKind::data, "implausible kernel dump size");
  Matrix k(ix(m), ix(m));
  for (Idx i = 0; i < k.rows(); ++i)
    for (Idx j = 0; j < k.cols(); ++j) k(i, j) = std::bit_cast<double>(get());
  return k;
}

}  // namespace cpforge
