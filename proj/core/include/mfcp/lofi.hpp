#pragma once

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <variant>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfcp/data.hpp"
#include "mfcp/linalg.hpp"

namespace mfcp::lofi {

using linalg::Matrix;

struct PodTruncation {
  Matrix reconstruction;
  std::size_t rank = 0;              // r*
  double retained_energy = 0.0;      // E_{r*}
  std::vector<double> sigma;
};

/// Modal filtering: keeps the smallest number of leading POD modes whose
/// cumulative squared singular values reach `energy` of the total.
/// `snapshots` is D x N (one column per snapshot).
PodTruncation pod_truncate(const Matrix& snapshots, double energy);

/// Cumulative relative energy of the first r modes, for r = 1..sigma.size().
std::vector<double> cumulative_energy(std::span<const double> sigma);

/// Farthest point sampling: starts at `start` and greedily adds the point
/// whose distance to the selected set is largest (lowest index on ties).
std::vector<std::size_t> fps(const Matrix& points, std::size_t m, std::size_t start);
/// As above with a uniformly random starting point drawn from `seed`.
std::vector<std::size_t> fps_seeded(const Matrix& points, std::size_t m, std::uint64_t seed);

/// Mean of `values` rows over the k nearest points (the center included) of
/// each center. Returns centers.size() x F.
Matrix knn_average(const Matrix& points, const Matrix& values,
                   std::span<const std::size_t> centers, std::size_t k);

struct Voxelized {
  Matrix centers;   // m x c
  Matrix means;     // m x F
  std::vector<std::vector<std::size_t>> members;
};

/// Bins points into cubic voxels of edge `size` on the lattice of multiples
/// of `size` (in the PCA frame when `pca_align`), emitting each occupied
/// voxel's center and the mean of its members' values, ordered by integer
/// voxel coordinates.
Voxelized voxelize(const Matrix& points, const Matrix& values, double size, bool pca_align);

/// Snaps every entry to the nearest of `levels` uniformly spaced levels
/// spanning the global [min, max]; exact midpoints go to the lower level.
Matrix quantize(const Matrix& x, std::size_t levels);

/// Adds i.i.d. N(0, sigma^2) noise and a constant bias.
Matrix perturb(const Matrix& x, double sigma, double bias, std::uint64_t seed);

struct PodStage { double energy = 1.0; };
struct FpsStage { std::size_t m = 0; std::optional<std::uint64_t> seed; };
struct KnnStage { std::size_t m = 0; std::size_t k = 1; std::optional<std::uint64_t> seed; };
struct VoxelStage { double size = 1.0; bool pca_align = false; };
struct QuantizeStage { std::size_t levels = 2; };
struct NoiseStage { double sigma = 0.0; std::optional<std::uint64_t> seed; };
struct BiasStage { double c = 0.0; };

using Stage = std::variant<PodStage, FpsStage, KnnStage, VoxelStage, QuantizeStage, NoiseStage,
                           BiasStage>;

/// Ordered chain of degradation stages. Randomized stages without an
/// explicit seed draw from a stream derived from (seed, stage index).
struct DegradationRecipe {
  std::uint64_t seed = 0;
  std::vector<Stage> stages;

  void validate() const;
};

nlohmann::json to_json(const DegradationRecipe& recipe);
DegradationRecipe recipe_from_json(const nlohmann::json& doc);

struct Degraded {
  data::SnapshotSet set;
  nlohmann::json provenance;   // one entry per stage
};

/// Applies the recipe to a snapshot set (fields D x N, coords D x c).
Degraded apply(const DegradationRecipe& recipe, const data::SnapshotSet& input);

}  // namespace mfcp::lofi
