#include "mfcp/linalg.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <string>

#include "mfcp/errors.hpp"
#include "mfcp/log.hpp"

namespace mfcp::linalg {

Matrix::Matrix(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), data_(rows * cols, fill) {
  if (!std::isfinite(fill)) throw ValidationError("Matrix: non-finite fill value");
}

Matrix::Matrix(std::size_t rows, std::size_t cols, std::vector<double> data)
    : rows_(rows), cols_(cols), data_(std::move(data)) {
  if (data_.size() != rows_ * cols_) {
    throw ValidationError("Matrix: data length " + std::to_string(data_.size()) +
                          " does not match " + std::to_string(rows_) + "x" +
                          std::to_string(cols_));
  }
  if (!all_finite()) throw ValidationError("Matrix: non-finite entry");
}

Matrix Matrix::identity(std::size_t n) {
  Matrix m(n, n);
  for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
  return m;
}

Matrix Matrix::from_rows(const std::vector<std::vector<double>>& rows) {
  const std::size_t r = rows.size();
  const std::size_t c = r ? rows.front().size() : 0;
  std::vector<double> data;
  data.reserve(r * c);
  for (const auto& row : rows) {
    if (row.size() != c) throw ValidationError("Matrix::from_rows: ragged rows");
    data.insert(data.end(), row.begin(), row.end());
  }
  return Matrix(r, c, std::move(data));
}

std::vector<double> Matrix::col(std::size_t c) const {
  std::vector<double> out(rows_);
  for (std::size_t r = 0; r < rows_; ++r) out[r] = (*this)(r, c);
  return out;
}

Matrix Matrix::transposed() const {
  Matrix t(cols_, rows_);
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t c = 0; c < cols_; ++c) t(c, r) = (*this)(r, c);
  return t;
}

Matrix Matrix::select_rows(std::span<const std::size_t> indices) const {
  Matrix out(indices.size(), cols_);
  for (std::size_t i = 0; i < indices.size(); ++i) {
    if (indices[i] >= rows_) throw ValidationError("select_rows: index out of range");
    std::copy_n(row(indices[i]).begin(), cols_, out.row(i).begin());
  }
  return out;
}

Matrix Matrix::select_cols(std::span<const std::size_t> indices) const {
  Matrix out(rows_, indices.size());
  for (std::size_t j = 0; j < indices.size(); ++j)
    if (indices[j] >= cols_) throw ValidationError("select_cols: index out of range");
  for (std::size_t r = 0; r < rows_; ++r)
    for (std::size_t j = 0; j < indices.size(); ++j) out(r, j) = (*this)(r, indices[j]);
  return out;
}

double Matrix::frobenius_norm() const {
  double s = 0.0;
  for (double v : data_) s += v * v;
  return std::sqrt(s);
}

bool Matrix::all_finite() const {
  return std::all_of(data_.begin(), data_.end(), [](double v) { return std::isfinite(v); });
}

Matrix matmul(const Matrix& a, const Matrix& b) {
  if (a.cols() != b.rows()) throw ValidationError("matmul: inner dimensions differ");
  Matrix out(a.rows(), b.cols());
  for (std::size_t i = 0; i < a.rows(); ++i) {
    auto dst = out.row(i);
    for (std::size_t k = 0; k < a.cols(); ++k) {
      const double aik = a(i, k);
      auto src = b.row(k);
      for (std::size_t j = 0; j < b.cols(); ++j) dst[j] += aik * src[j];
    }
  }
  return out;
}

Matrix operator-(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols())
    throw ValidationError("matrix difference: shape mismatch");
  Matrix out = a;
  auto d = out.data();
  auto s = b.data();
  for (std::size_t i = 0; i < d.size(); ++i) d[i] -= s[i];
  return out;
}

namespace {

constexpr double kJacobiTolerance = 1e-12;
constexpr int kMaxSweeps = 100;

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

// Flat storage of `count` vectors of length `len`.
struct VectorSet {
  std::size_t count = 0;
  std::size_t len = 0;
  std::vector<double> data;

  std::span<double> at(std::size_t k) { return {data.data() + k * len, len}; }
  std::span<const double> at(std::size_t k) const { return {data.data() + k * len, len}; }
};

void rotate(std::span<double> p, std::span<double> q, double c, double s) {
  for (std::size_t i = 0; i < p.size(); ++i) {
    const double wp = p[i];
    const double wq = q[i];
    p[i] = c * wp - s * wq;
    q[i] = s * wp + c * wq;
  }
}

// Replaces the vectors flagged in `missing` by an orthonormal completion of
// the remaining (already orthonormal) ones.
void complete_orthonormal(VectorSet& vs, const std::vector<bool>& missing) {
  std::vector<std::size_t> accepted;
  for (std::size_t k = 0; k < vs.count; ++k)
    if (!missing[k]) accepted.push_back(k);

  std::size_t candidate = 0;
  std::vector<double> trial(vs.len);
  for (std::size_t k = 0; k < vs.count; ++k) {
    if (!missing[k]) continue;
    while (true) {
      if (candidate >= vs.len) throw NumericError("thin_svd: basis completion failed");
      std::fill(trial.begin(), trial.end(), 0.0);
      trial[candidate++] = 1.0;
      for (int pass = 0; pass < 2; ++pass) {
        for (std::size_t a : accepted) {
          const double proj = dot(trial, vs.at(a));
          auto va = vs.at(a);
          for (std::size_t i = 0; i < vs.len; ++i) trial[i] -= proj * va[i];
        }
      }
      const double norm = std::sqrt(dot(trial, trial));
      if (norm > 0.5) {
        auto dst = vs.at(k);
        for (std::size_t i = 0; i < vs.len; ++i) dst[i] = trial[i] / norm;
        accepted.push_back(k);
        break;
      }
    }
  }
}

}  // namespace

SvdResult thin_svd(const Matrix& a) {
  if (a.empty()) throw ValidationError("thin_svd: empty matrix");
  if (!a.all_finite()) throw ValidationError("thin_svd: non-finite entry");

  const bool tall = a.rows() >= a.cols();
  // Work on the columns of a (tall) or of a^T (wide): n vectors of length m.
  const std::size_t m = tall ? a.rows() : a.cols();
  const std::size_t n = tall ? a.cols() : a.rows();

  VectorSet w{n, m, std::vector<double>(n * m)};
  for (std::size_t k = 0; k < n; ++k) {
    auto wk = w.at(k);
    for (std::size_t i = 0; i < m; ++i) wk[i] = tall ? a(i, k) : a(k, i);
  }
  VectorSet v{n, n, std::vector<double>(n * n, 0.0)};
  for (std::size_t k = 0; k < n; ++k) v.at(k)[k] = 1.0;

  int sweep = 0;
  bool converged = false;
  while (!converged) {
    if (sweep == kMaxSweeps) {
      throw NumericError("thin_svd: no convergence after " + std::to_string(sweep) +
                         " sweeps");
    }
    ++sweep;
    converged = true;
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        const double alpha = dot(w.at(p), w.at(p));
        const double beta = dot(w.at(q), w.at(q));
        const double gamma = dot(w.at(p), w.at(q));
        if (alpha == 0.0 || beta == 0.0) continue;
        if (std::abs(gamma) <= kJacobiTolerance * std::sqrt(alpha * beta)) continue;
        converged = false;
        const double zeta = (beta - alpha) / (2.0 * gamma);
        const double t = std::copysign(1.0, zeta) / (std::abs(zeta) + std::hypot(1.0, zeta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double s = c * t;
        rotate(w.at(p), w.at(q), c, s);
        rotate(v.at(p), v.at(q), c, s);
      }
    }
  }

  std::vector<double> norms(n);
  for (std::size_t k = 0; k < n; ++k) norms[k] = std::sqrt(dot(w.at(k), w.at(k)));
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return norms[x] > norms[y]; });

  VectorSet left{n, m, std::vector<double>(n * m)};   // normalized w, sorted
  VectorSet right{n, n, std::vector<double>(n * n)};  // v, sorted
  std::vector<double> sigma(n);
  std::vector<bool> missing(n, false);
  const double cutoff =
      norms[order[0]] * static_cast<double>(m) * std::numeric_limits<double>::epsilon();
  for (std::size_t k = 0; k < n; ++k) {
    const std::size_t src = order[k];
    sigma[k] = norms[src];
    std::copy_n(v.at(src).begin(), n, right.at(k).begin());
    if (sigma[k] <= cutoff || sigma[k] == 0.0) {
      missing[k] = true;
    } else {
      auto dst = left.at(k);
      auto ws = w.at(src);
      for (std::size_t i = 0; i < m; ++i) dst[i] = ws[i] / sigma[k];
    }
  }
  if (std::find(missing.begin(), missing.end(), true) != missing.end())
    complete_orthonormal(left, missing);

  // tall: a = left * S * right^T ; wide: a = right * S * left^T
  const VectorSet& ucols = tall ? left : right;
  const VectorSet& vrows = tall ? right : left;
  const std::size_t d = a.rows();
  const std::size_t big_n = a.cols();

  SvdResult out;
  out.sigma = std::move(sigma);
  out.sweeps = sweep;
  out.u = Matrix(d, n);
  out.vt = Matrix(n, big_n);
  for (std::size_t k = 0; k < n; ++k) {
    auto uk = ucols.at(k);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < d; ++i)
      if (std::abs(uk[i]) > std::abs(uk[arg])) arg = i;
    const double sign = uk[arg] < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < d; ++i) out.u(i, k) = sign * uk[i];
    auto vk = vrows.at(k);
    for (std::size_t j = 0; j < big_n; ++j) out.vt(k, j) = sign * vk[j];
  }
  return out;
}

Matrix reconstruct(const SvdResult& svd, std::size_t rank) {
  rank = std::min(rank, svd.sigma.size());
  Matrix out(svd.u.rows(), svd.vt.cols());
  for (std::size_t k = 0; k < rank; ++k) {
    for (std::size_t i = 0; i < out.rows(); ++i) {
      const double coef = svd.u(i, k) * svd.sigma[k];
      if (coef == 0.0) continue;
      auto dst = out.row(i);
      auto src = svd.vt.row(k);
      for (std::size_t j = 0; j < out.cols(); ++j) dst[j] += coef * src[j];
    }
  }
  return out;
}

SymmetricEigen symmetric_eigen(const Matrix& s) {
  const std::size_t n = s.rows();
  if (n != s.cols()) throw ValidationError("symmetric_eigen: matrix not square");
  Matrix a = s;
  Matrix vec = Matrix::identity(n);

  for (int sweep = 0;; ++sweep) {
    double off = 0.0;
    double diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      diag += a(i, i) * a(i, i);
      for (std::size_t j = i + 1; j < n; ++j) off += a(i, j) * a(i, j);
    }
    if (off <= 1e-30 * diag || off == 0.0) break;
    if (sweep == kMaxSweeps) throw NumericError("symmetric_eigen: no convergence");
    for (std::size_t p = 0; p + 1 < n; ++p) {
      for (std::size_t q = p + 1; q < n; ++q) {
        if (a(p, q) == 0.0) continue;
        const double theta = (a(q, q) - a(p, p)) / (2.0 * a(p, q));
        const double t = std::copysign(1.0, theta) / (std::abs(theta) + std::hypot(1.0, theta));
        const double c = 1.0 / std::hypot(1.0, t);
        const double sn = t * c;
        for (std::size_t k = 0; k < n; ++k) {
          const double akp = a(k, p);
          const double akq = a(k, q);
          a(k, p) = c * akp - sn * akq;
          a(k, q) = sn * akp + c * akq;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double apk = a(p, k);
          const double aqk = a(q, k);
          a(p, k) = c * apk - sn * aqk;
          a(q, k) = sn * apk + c * aqk;
        }
        for (std::size_t k = 0; k < n; ++k) {
          const double vkp = vec(k, p);
          const double vkq = vec(k, q);
          vec(k, p) = c * vkp - sn * vkq;
          vec(k, q) = sn * vkp + c * vkq;
        }
      }
    }
  }

  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t x, std::size_t y) { return a(x, x) > a(y, y); });
  SymmetricEigen out{std::vector<double>(n), Matrix(n, n)};
  for (std::size_t k = 0; k < n; ++k) {
    out.values[k] = a(order[k], order[k]);
    std::size_t arg = 0;
    for (std::size_t i = 1; i < n; ++i)
      if (std::abs(vec(i, order[k])) > std::abs(vec(arg, order[k]))) arg = i;
    const double sign = vec(arg, order[k]) < 0.0 ? -1.0 : 1.0;
    for (std::size_t i = 0; i < n; ++i) out.vectors(i, k) = sign * vec(i, order[k]);
  }
  return out;
}

double sq_dist(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    const double d = a[i] - b[i];
    s += d * d;
  }
  return s;
}

Matrix pairwise_sq_dist(const Matrix& points) {
  if (points.cols() < 1 || points.cols() > 3)
    throw ValidationError("pairwise_sq_dist: points need 1 to 3 coordinate columns");
  const std::size_t n = points.rows();
  Matrix out(n, n);
  for (std::size_t i = 0; i < n; ++i) {
    for (std::size_t j = i + 1; j < n; ++j) {
      const double d = sq_dist(points.row(i), points.row(j));
      out(i, j) = d;
      out(j, i) = d;
    }
  }
  return out;
}

namespace {

double determinant(const Matrix& m) {
  switch (m.rows()) {
    case 1: return m(0, 0);
    case 2: return m(0, 0) * m(1, 1) - m(0, 1) * m(1, 0);
    case 3:
      return m(0, 0) * (m(1, 1) * m(2, 2) - m(1, 2) * m(2, 1)) -
             m(0, 1) * (m(1, 0) * m(2, 2) - m(1, 2) * m(2, 0)) +
             m(0, 2) * (m(1, 0) * m(2, 1) - m(1, 1) * m(2, 0));
    default: throw ValidationError("determinant: only 1x1 to 3x3 supported");
  }
}

}  // namespace

PcaAxes pca_axes(const Matrix& points) {
  const std::size_t n = points.rows();
  const std::size_t c = points.cols();
  if (c < 1 || c > 3) throw ValidationError("pca_axes: points need 1 to 3 coordinate columns");
  if (n < 2) throw ValidationError("pca_axes: at least two points required");

  PcaAxes out;
  out.centroid.assign(c, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t k = 0; k < c; ++k) out.centroid[k] += points(i, k);
  for (double& v : out.centroid) v /= static_cast<double>(n);

  Matrix cov(c, c);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t p = 0; p < c; ++p)
      for (std::size_t q = 0; q < c; ++q)
        cov(p, q) += (points(i, p) - out.centroid[p]) * (points(i, q) - out.centroid[q]);
  double trace = 0.0;
  for (std::size_t p = 0; p < c; ++p) {
    for (std::size_t q = 0; q < c; ++q) cov(p, q) /= static_cast<double>(n);
    trace += cov(p, p);
  }

  if (trace == 0.0) {
    log::warn("pca_axes: all points coincide, using identity rotation");
    out.rotation = Matrix::identity(c);
    out.variances.assign(c, 0.0);
    out.degenerate = true;
    return out;
  }

  SymmetricEigen eig = symmetric_eigen(cov);
  out.rotation = std::move(eig.vectors);
  out.variances = std::move(eig.values);
  if (determinant(out.rotation) < 0.0) {
    for (std::size_t i = 0; i < c; ++i) out.rotation(i, c - 1) *= -1.0;
  }
  return out;
}

}  // namespace mfcp::linalg
