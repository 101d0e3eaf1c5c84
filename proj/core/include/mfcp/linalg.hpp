#pragma once

#include <cstddef>
#include <span>
#include <vector>

namespace mfcp::linalg {

/// Dense row-major matrix of doubles.
///
/// Entries are checked for finiteness when the matrix is built from external
/// data; element-wise mutation through operator() is unchecked.
class Matrix {
 public:
  Matrix() = default;
  Matrix(std::size_t rows, std::size_t cols, double fill = 0.0);
  /// Takes ownership of `data` (row-major, rows*cols entries, all finite).
  Matrix(std::size_t rows, std::size_t cols, std::vector<double> data);

  static Matrix identity(std::size_t n);
  static Matrix from_rows(const std::vector<std::vector<double>>& rows);

  std::size_t rows() const noexcept { return rows_; }
  std::size_t cols() const noexcept { return cols_; }
  std::size_t size() const noexcept { return data_.size(); }
  bool empty() const noexcept { return data_.empty(); }

  double& operator()(std::size_t r, std::size_t c) { return data_[r * cols_ + c]; }
  double operator()(std::size_t r, std::size_t c) const { return data_[r * cols_ + c]; }

  std::span<double> row(std::size_t r) { return {data_.data() + r * cols_, cols_}; }
  std::span<const double> row(std::size_t r) const {
    return {data_.data() + r * cols_, cols_};
  }
  std::vector<double> col(std::size_t c) const;

  std::span<double> data() noexcept { return data_; }
  std::span<const double> data() const noexcept { return data_; }

  Matrix transposed() const;
  /// Rows selected by `indices`, in the given order.
  Matrix select_rows(std::span<const std::size_t> indices) const;
  /// Columns selected by `indices`, in the given order.
  Matrix select_cols(std::span<const std::size_t> indices) const;

  double frobenius_norm() const;
  bool all_finite() const;

  friend bool operator==(const Matrix&, const Matrix&) = default;

 private:
  std::size_t rows_ = 0;
  std::size_t cols_ = 0;
  std::vector<double> data_;
};

Matrix matmul(const Matrix& a, const Matrix& b);
Matrix operator-(const Matrix& a, const Matrix& b);

struct SvdResult {
  Matrix u;                    // D x r, orthonormal columns
  std::vector<double> sigma;   // r values, nonincreasing
  Matrix vt;                   // r x N, orthonormal rows
  int sweeps = 0;              // Jacobi sweeps used
};

/// Thin SVD by one-sided Jacobi rotations on the smaller dimension.
///
/// r = min(D, N). Columns of `u` belonging to (numerically) zero singular
/// values are completed to an orthonormal set. Each left singular vector is
/// signed so its largest-magnitude entry is positive. Throws NumericError if
/// the rotation sweeps fail to converge within the sweep cap.
SvdResult thin_svd(const Matrix& a);

/// Reconstructs u * diag(sigma) * vt using only the first `rank` triplets.
Matrix reconstruct(const SvdResult& svd, std::size_t rank);

struct SymmetricEigen {
  std::vector<double> values;  // descending
  Matrix vectors;              // columns are unit eigenvectors
};

/// Cyclic Jacobi eigen-decomposition of a small symmetric matrix.
SymmetricEigen symmetric_eigen(const Matrix& s);

/// Squared Euclidean distances between the rows of `points` (1 to 3 columns).
Matrix pairwise_sq_dist(const Matrix& points);

double sq_dist(std::span<const double> a, std::span<const double> b);

struct PcaAxes {
  std::vector<double> centroid;     // length c
  Matrix rotation;                  // c x c, columns are principal axes
  std::vector<double> variances;    // eigenvalues, descending
  bool degenerate = false;          // all points coincident; rotation = I
};

/// Principal axes of a point cloud (population covariance), sorted by
/// decreasing variance, with det(rotation) = +1.
PcaAxes pca_axes(const Matrix& points);

}  // namespace mfcp::linalg
