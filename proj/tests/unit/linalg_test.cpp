#include <gtest/gtest.h>

#include <cmath>

#include "mfcp/errors.hpp"
#include "mfcp/linalg.hpp"
#include "oracles.hpp"
#include "synthetic.hpp"

using namespace mfcp;
using linalg::Matrix;

namespace {

double max_abs_offdiag_gram(const Matrix& q, bool columns) {
  const Matrix m = columns ? q : q.transposed();
  const Matrix g = oracle::gram(m);
  double worst = 0.0;
  for (std::size_t i = 0; i < g.rows(); ++i)
    for (std::size_t j = 0; j < g.cols(); ++j)
      worst = std::max(worst, std::abs(g(i, j) - (i == j ? 1.0 : 0.0)));
  return worst;
}

void expect_svd_invariants(const Matrix& a) {
  const auto svd = linalg::thin_svd(a);
  const std::size_t r = std::min(a.rows(), a.cols());
  ASSERT_EQ(svd.sigma.size(), r);
  ASSERT_EQ(svd.u.rows(), a.rows());
  ASSERT_EQ(svd.u.cols(), r);
  ASSERT_EQ(svd.vt.rows(), r);
  ASSERT_EQ(svd.vt.cols(), a.cols());
  for (std::size_t i = 0; i < r; ++i) {
    EXPECT_GE(svd.sigma[i], 0.0);
    if (i > 0) {
      EXPECT_LE(svd.sigma[i], svd.sigma[i - 1]);
    }
  }
  EXPECT_LE(max_abs_offdiag_gram(svd.u, true), 1e-8);
  EXPECT_LE(max_abs_offdiag_gram(svd.vt, false), 1e-8);
  const Matrix back = linalg::reconstruct(svd, r);
  EXPECT_LE((back - a).frobenius_norm(), 1e-8 * std::max(1.0, a.frobenius_norm()));
}

}  // namespace

TEST(Matrix, RejectsNonFiniteAndBadLength) {
  EXPECT_THROW(Matrix(2, 2, std::vector<double>{1, 2, 3}), ValidationError);
  EXPECT_THROW(Matrix(1, 2, std::vector<double>{1, std::nan("")}), ValidationError);
  EXPECT_THROW(Matrix(1, 1, std::vector<double>{INFINITY}), ValidationError);
}

TEST(Matrix, TransposeAndSelect) {
  const Matrix a = Matrix::from_rows({{1, 2, 3}, {4, 5, 6}});
  EXPECT_EQ(a.transposed(), Matrix::from_rows({{1, 4}, {2, 5}, {3, 6}}));
  const std::vector<std::size_t> rows{1, 0};
  EXPECT_EQ(a.select_rows(rows), Matrix::from_rows({{4, 5, 6}, {1, 2, 3}}));
  const std::vector<std::size_t> cols{2};
  EXPECT_EQ(a.select_cols(cols), Matrix::from_rows({{3}, {6}}));
  EXPECT_EQ(linalg::matmul(a, Matrix::identity(3)), a);
}

TEST(Svd, IdentityHasUnitSingularValues) {
  const auto svd = linalg::thin_svd(Matrix::identity(2));
  EXPECT_DOUBLE_EQ(svd.sigma[0], 1.0);
  EXPECT_DOUBLE_EQ(svd.sigma[1], 1.0);
}

TEST(Svd, RankOneOuterProduct) {
  // |u| = 3, |v| = 1.
  const std::vector<double> u{1, 2, 2};
  const std::vector<double> v{0.6, 0.8};
  Matrix a(3, 2);
  for (std::size_t i = 0; i < 3; ++i)
    for (std::size_t j = 0; j < 2; ++j) a(i, j) = u[i] * v[j];
  const auto svd = linalg::thin_svd(a);
  EXPECT_NEAR(svd.sigma[0], 3.0, 1e-12);
  EXPECT_NEAR(svd.sigma[1], 0.0, 1e-12);
  expect_svd_invariants(a);
}

TEST(Svd, MatchesJacobiEigenOracleOnGram) {
  const Matrix a = synth::random_matrix(5, 4, 11);
  const auto svd = linalg::thin_svd(a);
  const auto ev = oracle::jacobi_eigenvalues(oracle::gram(a));
  for (std::size_t i = 0; i < 4; ++i)
    EXPECT_NEAR(svd.sigma[i], std::sqrt(std::max(0.0, ev[i])), 1e-8 * svd.sigma[0]) << i;
}

TEST(Svd, InvariantsOnAssortedShapes) {
  std::uint64_t seed = 100;
  for (auto [r, c] : std::vector<std::pair<std::size_t, std::size_t>>{
           {1, 1}, {1, 7}, {7, 1}, {6, 6}, {20, 5}, {5, 20}, {64, 64}, {33, 17}})
    expect_svd_invariants(synth::random_matrix(r, c, seed++));
}

TEST(Svd, RankDeficientStillOrthonormal) {
  Matrix a = synth::random_matrix(8, 3, 5);
  for (std::size_t i = 0; i < 8; ++i) a(i, 2) = a(i, 0) + a(i, 1);   // rank 2
  expect_svd_invariants(a);
  Matrix zero(4, 3);
  expect_svd_invariants(zero);
}

TEST(Svd, Deterministic) {
  const Matrix a = synth::random_matrix(12, 9, 3);
  const auto s1 = linalg::thin_svd(a);
  const auto s2 = linalg::thin_svd(a);
  EXPECT_EQ(s1.u, s2.u);
  EXPECT_EQ(s1.sigma, s2.sigma);
  EXPECT_EQ(s1.vt, s2.vt);
}

TEST(Svd, EmptyInputRejected) { EXPECT_THROW(linalg::thin_svd(Matrix()), ValidationError); }

TEST(PairwiseSqDist, HandCases) {
  EXPECT_EQ(linalg::pairwise_sq_dist(Matrix::from_rows({{0}, {3}})),
            Matrix::from_rows({{0, 9}, {9, 0}}));
  EXPECT_EQ(linalg::pairwise_sq_dist(Matrix::from_rows({{1, 2, 3}})), Matrix(1, 1));
  EXPECT_THROW(linalg::pairwise_sq_dist(Matrix(2, 4)), ValidationError);
}

TEST(PairwiseSqDist, MatchesDoubleLoop) {
  const Matrix p = synth::random_matrix(10, 3, 9);
  const Matrix d = linalg::pairwise_sq_dist(p);
  for (std::size_t i = 0; i < 10; ++i)
    for (std::size_t j = 0; j < 10; ++j) EXPECT_EQ(d(i, j), oracle::sq_dist(p, i, j));
}

TEST(PcaAxes, RotationIsProperAndSorted) {
  Matrix p = synth::random_matrix(50, 3, 21);
  for (std::size_t i = 0; i < 50; ++i) {
    p(i, 0) *= 5.0;   // dominant spread along x
    p(i, 2) *= 0.1;
  }
  const auto axes = linalg::pca_axes(p);
  EXPECT_FALSE(axes.degenerate);
  EXPECT_LE(max_abs_offdiag_gram(axes.rotation, true), 1e-10);
  const Matrix& r = axes.rotation;
  const double det = r(0, 0) * (r(1, 1) * r(2, 2) - r(1, 2) * r(2, 1)) -
                     r(0, 1) * (r(1, 0) * r(2, 2) - r(1, 2) * r(2, 0)) +
                     r(0, 2) * (r(1, 0) * r(2, 1) - r(1, 1) * r(2, 0));
  EXPECT_NEAR(det, 1.0, 1e-10);
  EXPECT_GE(axes.variances[0], axes.variances[1]);
  EXPECT_GE(axes.variances[1], axes.variances[2]);
  EXPECT_GT(std::abs(r(0, 0)), 0.99);
}

TEST(PcaAxes, CoincidentPointsAreDegenerate) {
  const Matrix p = Matrix::from_rows({{1, 1, 1}, {1, 1, 1}, {1, 1, 1}});
  const auto axes = linalg::pca_axes(p);
  EXPECT_TRUE(axes.degenerate);
  EXPECT_EQ(axes.rotation, Matrix::identity(3));
  EXPECT_THROW(linalg::pca_axes(Matrix(1, 3)), ValidationError);
}

TEST(PcaAxes, PointsAlongYAxis) {
  const Matrix p = Matrix::from_rows({{0, -2, 0}, {0, 0, 0}, {0, 1, 0}, {0, 3, 0}});
  const auto axes = linalg::pca_axes(p);
  EXPECT_NEAR(std::abs(axes.rotation(1, 0)), 1.0, 1e-12);
}

TEST(PcaAxes, PlanarEquilateralNormalIsThirdAxis) {
  const double h = std::sqrt(3.0) / 2.0;
  const Matrix p = Matrix::from_rows({{1, 0, 4}, {-0.5, h, 4}, {-0.5, -h, 4}});
  const auto axes = linalg::pca_axes(p);
  EXPECT_NEAR(std::abs(axes.rotation(2, 2)), 1.0, 1e-10);
  EXPECT_NEAR(axes.variances[2], 0.0, 1e-12);
}

TEST(PcaAxes, AxesReconstructCovariance) {
  const Matrix p = synth::random_matrix(50, 3, 77);
  const auto axes = linalg::pca_axes(p);
  Matrix cov(3, 3);
  for (std::size_t i = 0; i < 50; ++i)
    for (std::size_t a = 0; a < 3; ++a)
      for (std::size_t b = 0; b < 3; ++b)
        cov(a, b) += (p(i, a) - axes.centroid[a]) * (p(i, b) - axes.centroid[b]) / 50.0;
  Matrix rebuilt(3, 3);
  for (std::size_t a = 0; a < 3; ++a)
    for (std::size_t b = 0; b < 3; ++b)
      for (std::size_t k = 0; k < 3; ++k)
        rebuilt(a, b) += axes.rotation(a, k) * axes.variances[k] * axes.rotation(b, k);
  EXPECT_LE((rebuilt - cov).frobenius_norm(), 1e-8 * cov.frobenius_norm());
}

TEST(Svd, EnergyIdentity) {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Matrix a = synth::random_matrix(3 + seed * 6, 64 - seed * 5, 500 + seed);
    const auto svd = linalg::thin_svd(a);
    double energy = 0.0;
    for (double s : svd.sigma) energy += s * s;
    const double fro = a.frobenius_norm();
    EXPECT_NEAR(energy, fro * fro, 1e-10 * fro * fro);
  }
}

TEST(PairwiseSqDist, TriangleInequality) {
  const Matrix p = synth::random_matrix(30, 3, 31);
  const Matrix d = linalg::pairwise_sq_dist(p);
  for (std::size_t i = 0; i < 30; ++i)
    for (std::size_t j = 0; j < 30; ++j)
      for (std::size_t k = 0; k < 30; ++k)
        EXPECT_LE(std::sqrt(d(i, k)), std::sqrt(d(i, j)) + std::sqrt(d(j, k)) + 1e-12);
  for (std::size_t i = 0; i < 30; ++i) {
    EXPECT_EQ(d(i, i), 0.0);
    for (std::size_t j = 0; j < 30; ++j) EXPECT_EQ(d(i, j), d(j, i));
  }
}
