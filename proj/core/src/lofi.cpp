#include "mfcp/lofi.hpp"

#include <algorithm>
#include <array>
#include <cmath>
#include <map>
#include <random>
#include <string>

#include "mfcp/errors.hpp"
#include "mfcp/rng.hpp"

namespace mfcp::lofi {

std::vector<double> cumulative_energy(std::span<const double> sigma) {
  double total = 0.0;
  for (double s : sigma) total += s * s;
  std::vector<double> out(sigma.size(), 1.0);
  if (total == 0.0) return out;
  double acc = 0.0;
  for (std::size_t i = 0; i < sigma.size(); ++i) {
    acc += sigma[i] * sigma[i];
    out[i] = acc / total;
  }
  out.back() = 1.0;
  return out;
}

PodTruncation pod_truncate(const Matrix& snapshots, double energy) {
  if (!(energy > 0.0 && energy <= 1.0))
    throw ValidationError("pod_truncate: energy threshold must lie in (0, 1]");
  PodTruncation out;
  linalg::SvdResult svd = linalg::thin_svd(snapshots);
  const auto cumulative = cumulative_energy(svd.sigma);
  if (svd.sigma.front() == 0.0) {
    out.reconstruction = Matrix(snapshots.rows(), snapshots.cols());
    out.retained_energy = 1.0;
  } else {
    std::size_t r = 0;
    while (r < cumulative.size() && cumulative[r] < energy) ++r;
    r = std::min(r, cumulative.size() - 1);
    out.rank = r + 1;
    out.retained_energy = cumulative[r];
    out.reconstruction = linalg::reconstruct(svd, out.rank);
  }
  out.sigma = std::move(svd.sigma);
  return out;
}

std::vector<std::size_t> fps(const Matrix& points, std::size_t m, std::size_t start) {
  const std::size_t n = points.rows();
  if (points.cols() < 1 || points.cols() > 3)
    throw ValidationError("fps: points need 1 to 3 coordinate columns");
  if (m < 1 || m > n) throw ValidationError("fps: need 1 <= m <= number of points");
  if (start >= n) throw ValidationError("fps: start index out of range");

  std::vector<std::size_t> selected{start};
  selected.reserve(m);
  std::vector<bool> taken(n, false);
  taken[start] = true;
  std::vector<double> nearest(n);
  for (std::size_t i = 0; i < n; ++i) nearest[i] = linalg::sq_dist(points.row(i), points.row(start));

  while (selected.size() < m) {
    std::size_t best = n;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      if (best == n || nearest[i] > nearest[best]) best = i;
    }
    selected.push_back(best);
    taken[best] = true;
    for (std::size_t i = 0; i < n; ++i) {
      if (taken[i]) continue;
      nearest[i] = std::min(nearest[i], linalg::sq_dist(points.row(i), points.row(best)));
    }
  }
  return selected;
}

std::vector<std::size_t> fps_seeded(const Matrix& points, std::size_t m, std::uint64_t seed) {
  if (points.rows() == 0) throw ValidationError("fps: empty point cloud");
  Engine rng = make_engine(seed);
  std::uniform_int_distribution<std::size_t> pick(0, points.rows() - 1);
  return fps(points, m, pick(rng));
}

Matrix knn_average(const Matrix& points, const Matrix& values,
                   std::span<const std::size_t> centers, std::size_t k) {
  const std::size_t n = points.rows();
  if (values.rows() != n) throw ValidationError("knn_average: values rows must match points");
  if (k < 1 || k > n) throw ValidationError("knn_average: need 1 <= k <= number of points");
  Matrix out(centers.size(), values.cols());
  std::vector<std::pair<double, std::size_t>> dist(n);
  for (std::size_t c = 0; c < centers.size(); ++c) {
    if (centers[c] >= n) throw ValidationError("knn_average: center index out of range");
    const auto origin = points.row(centers[c]);
    for (std::size_t i = 0; i < n; ++i) dist[i] = {linalg::sq_dist(points.row(i), origin), i};
    std::partial_sort(dist.begin(), dist.begin() + static_cast<std::ptrdiff_t>(k), dist.end());
    auto dst = out.row(c);
    for (std::size_t j = 0; j < k; ++j) {
      const auto src = values.row(dist[j].second);
      for (std::size_t f = 0; f < dst.size(); ++f) dst[f] += src[f];
    }
    for (double& v : dst) v /= static_cast<double>(k);
  }
  return out;
}

Voxelized voxelize(const Matrix& points, const Matrix& values, double size, bool pca_align) {
  const std::size_t n = points.rows();
  const std::size_t c = points.cols();
  if (c < 1 || c > 3) throw ValidationError("voxelize: points need 1 to 3 coordinate columns");
  if (!(size > 0.0)) throw ValidationError("voxelize: voxel size must be positive");
  if (values.rows() != n) throw ValidationError("voxelize: values rows must match points");

  std::vector<double> centroid(c, 0.0);
  Matrix rotation = Matrix::identity(c);
  if (pca_align && n >= 2) {
    linalg::PcaAxes axes = linalg::pca_axes(points);
    centroid = std::move(axes.centroid);
    rotation = std::move(axes.rotation);
  }

  // Frame coordinates q = R^T (p - centroid).
  auto to_frame = [&](std::span<const double> p) {
    std::array<double, 3> q{};
    for (std::size_t a = 0; a < c; ++a)
      for (std::size_t k = 0; k < c; ++k) q[a] += rotation(k, a) * (p[k] - centroid[k]);
    return q;
  };

  std::map<std::array<long long, 3>, std::vector<std::size_t>> cells;
  for (std::size_t i = 0; i < n; ++i) {
    const auto q = to_frame(points.row(i));
    std::array<long long, 3> key{};
    for (std::size_t a = 0; a < c; ++a) key[a] = static_cast<long long>(std::floor(q[a] / size));
    cells[key].push_back(i);
  }

  Voxelized out;
  out.centers = Matrix(cells.size(), c);
  out.means = Matrix(cells.size(), values.cols());
  std::size_t row = 0;
  for (auto& [key, members] : cells) {
    std::array<double, 3> q{};
    for (std::size_t a = 0; a < c; ++a) q[a] = (static_cast<double>(key[a]) + 0.5) * size;
    for (std::size_t k = 0; k < c; ++k) {
      double p = centroid[k];
      for (std::size_t a = 0; a < c; ++a) p += rotation(k, a) * q[a];
      out.centers(row, k) = p;
    }
    auto dst = out.means.row(row);
    for (std::size_t i : members) {
      const auto src = values.row(i);
      for (std::size_t f = 0; f < dst.size(); ++f) dst[f] += src[f];
    }
    for (double& v : dst) v /= static_cast<double>(members.size());
    out.members.push_back(std::move(members));
    ++row;
  }
  return out;
}

Matrix quantize(const Matrix& x, std::size_t levels) {
  if (levels < 2) throw ValidationError("quantize: need at least 2 levels");
  if (x.empty()) return x;
  const auto [lo_it, hi_it] = std::minmax_element(x.data().begin(), x.data().end());
  const double lo = *lo_it;
  const double hi = *hi_it;
  if (lo == hi) return x;
  const double step = (hi - lo) / static_cast<double>(levels - 1);
  const auto top = static_cast<long long>(levels - 1);
  Matrix out = x;
  for (double& v : out.data()) {
    const double t = (v - lo) / step;
    const long long i = std::clamp(static_cast<long long>(std::ceil(t - 0.5)), 0LL, top);
    v = i == top ? hi : lo + static_cast<double>(i) * step;
  }
  return out;
}

Matrix perturb(const Matrix& x, double sigma, double bias, std::uint64_t seed) {
  if (!(sigma >= 0.0)) throw ValidationError("perturb: sigma must be non-negative");
  Matrix out = x;
  if (sigma > 0.0) {
    Engine rng = make_engine(seed);
    std::normal_distribution<double> noise(0.0, sigma);
    for (double& v : out.data()) v += noise(rng);
  }
  if (bias != 0.0)
    for (double& v : out.data()) v += bias;
  return out;
}

}  // namespace mfcp::lofi
