// Synthetic data families shared by unit and acceptance tests.
#pragma once

#include <cmath>
#include <cstdio>
#include <numbers>
#include <random>
#include <string>
#include <vector>

#include "mfcp/data.hpp"
#include "mfcp/linalg.hpp"

namespace synth {

using mfcp::data::SnapshotSet;
using mfcp::linalg::Matrix;

inline Matrix random_matrix(std::size_t rows, std::size_t cols, std::uint64_t seed,
                            double lo = -1.0, double hi = 1.0) {
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(lo, hi);
  Matrix m(rows, cols);
  for (double& v : m.data()) v = u(rng);
  return m;
}

inline std::string case_name(std::size_t i) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "case_%04zu", i);
  return buf;
}

// Smooth chordwise fields over cosine-clustered stations driven by three
// parameters in [-1, 1]. Three leading modes carry ~94% of the energy; the
// rest comes from products of the parameters, so a modal filter at 0.9
// removes detail that is still a deterministic function of the parameters.
inline double airfoil_field(double x, const double* p) {
  const double pi = std::numbers::pi;
  const double g1 = std::sin(pi * x);
  const double g2 = std::sin(2 * pi * x) * (1.0 - 0.5 * x);
  const double g3 = std::cos(pi * x);
  const double g4 = std::sin(3 * pi * x);
  const double g5 = std::exp(-40.0 * (x - 0.15) * (x - 0.15));
  const double g6 = std::sin(5 * pi * x) * x;
  return p[0] * g1 + p[1] * g2 + 0.9 * p[2] * g3 + 0.7 * (p[0] * p[0] - 1.0 / 3.0) * g4 +
         0.7 * p[0] * p[1] * g5 + 0.6 * p[1] * p[2] * g6;
}

inline SnapshotSet airfoil_family(std::size_t n, std::size_t d, std::uint64_t seed) {
  const auto x = mfcp::data::cosine_abscissae(d);
  std::mt19937_64 rng(seed);
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  Matrix params(n, 3);
  for (double& v : params.data()) v = u(rng);
  Matrix fields(d, n);
  for (std::size_t s = 0; s < n; ++s)
    for (std::size_t j = 0; j < d; ++j) fields(j, s) = airfoil_field(x[j], &params(s, 0));
  std::vector<std::string> names;
  for (std::size_t s = 0; s < n; ++s) names.push_back(case_name(s));
  return SnapshotSet(std::move(fields), Matrix(d, 1, x), std::move(names), std::move(params),
                     {"p1", "p2", "p3"});
}

// Heteroscedastic multi-output regression: y_j = mu_j(x) + sigma_j(x) e_j
// with x in [0,1]^2 and residual components sharing a strong common factor,
// like the errors of a smooth field.
struct HeteroRegression {
  std::size_t d = 16;
  double common = 0.98;

  struct Sample {
    Matrix x;   // n x 2
    Matrix y;   // n x d
  };

  double mean(std::size_t j, double x0, double x1) const {
    const double t = static_cast<double>(j) / static_cast<double>(d - 1);
    return std::sin(2.0 * std::numbers::pi * (t + 0.3 * x0)) + x1 * t;
  }
  double scale(std::size_t j, double x0, double) const {
    const double t = static_cast<double>(j) / static_cast<double>(d - 1);
    return (0.05 + 0.1 * t) * (0.5 + x0);
  }

  Sample draw(std::size_t n, std::mt19937_64& rng) const {
    std::uniform_real_distribution<double> u(0.0, 1.0);
    std::normal_distribution<double> z(0.0, 1.0);
    const double own = std::sqrt(1.0 - common * common);
    Sample s{Matrix(n, 2), Matrix(n, d)};
    for (std::size_t i = 0; i < n; ++i) {
      s.x(i, 0) = u(rng);
      s.x(i, 1) = u(rng);
      const double shared = z(rng);
      for (std::size_t j = 0; j < d; ++j)
        s.y(i, j) = mean(j, s.x(i, 0), s.x(i, 1)) +
                    scale(j, s.x(i, 0), s.x(i, 1)) * (common * shared + own * z(rng));
    }
    return s;
  }
};

}  // namespace synth
