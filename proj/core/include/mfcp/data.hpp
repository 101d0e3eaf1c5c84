#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfcp/linalg.hpp"

namespace mfcp::data {

using linalg::Matrix;

/// A collection of field snapshots over a shared node set.
///
/// `fields` is D x N (one column per snapshot), `coords` is D x c with
/// c in [0, 3], `params` is N x p with named columns.
class SnapshotSet {
 public:
  SnapshotSet() = default;
  SnapshotSet(Matrix fields, Matrix coords, std::vector<std::string> names, Matrix params,
              std::vector<std::string> param_names);

  std::size_t nodes() const noexcept { return fields_.rows(); }
  std::size_t snapshots() const noexcept { return names_.size(); }

  const Matrix& fields() const noexcept { return fields_; }
  const Matrix& coords() const noexcept { return coords_; }
  const Matrix& params() const noexcept { return params_; }
  const std::vector<std::string>& names() const noexcept { return names_; }
  const std::vector<std::string>& param_names() const noexcept { return param_names_; }

  /// Snapshot-major copy of the fields (N x D), the layout models consume.
  Matrix samples() const { return fields_.transposed(); }
  Matrix samples(std::span<const std::size_t> snapshot_idx) const;

  std::optional<std::size_t> find(const std::string& name) const;
  /// Index of every name in `wanted`; throws ValidationError on a miss.
  std::vector<std::size_t> indices_of(std::span<const std::string> wanted) const;

  /// Subset of snapshots, in the given order.
  SnapshotSet subset(std::span<const std::size_t> snapshot_idx) const;
  /// Same snapshots with replaced node data.
  SnapshotSet with_nodes(Matrix fields, Matrix coords) const;

  friend bool operator==(const SnapshotSet&, const SnapshotSet&) = default;

 private:
  Matrix fields_;
  Matrix coords_;
  std::vector<std::string> names_;
  Matrix params_;
  std::vector<std::string> param_names_;
};

/// Reads a fields CSV (`node,[x,[y,[z,]]]<name1>,...`) and an optional params
/// CSV (`name,<param1>,...`). Throws ValidationError on ragged rows,
/// non-numeric cells or duplicate names.
SnapshotSet load_csv(const std::filesystem::path& fields_path,
                     const std::optional<std::filesystem::path>& params_path = std::nullopt);

/// Writes the set with 17 significant digits per value so load_csv restores
/// it bit for bit. The params file is written only when a path is given.
void save_csv(const SnapshotSet& set, const std::filesystem::path& fields_path,
              const std::optional<std::filesystem::path>& params_path = std::nullopt);

std::string format_double(double v);

struct SplitPlan {
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> test_idx;
  std::vector<std::size_t> complementary_idx;   // outside the HF budget
  std::vector<std::string> strata;              // one label per snapshot
  std::uint64_t seed = 0;
  double hf_fraction = 1.0;
  double test_fraction = 0.25;
};

/// Selects an HF budget of round(hf_fraction * N) snapshots and splits it
/// into train/test with round(test_fraction * budget) test cases. Each
/// parameter column is binned into terciles; the joint bins form strata that
/// receive largest-remainder proportional allocations, and members inside a
/// stratum are drawn at random.
SplitPlan stratified_split(const Matrix& params, double hf_fraction, double test_fraction,
                           std::uint64_t seed);

nlohmann::json to_json(const SplitPlan& plan, const std::vector<std::string>& names);
SplitPlan split_from_json(const nlohmann::json& doc, const SnapshotSet& set);

/// Piecewise-linear interpolation of (x, y) at `xq`; x strictly increasing,
/// queries outside the range clamp to the end values.
std::vector<double> interp_linear(std::span<const double> x, std::span<const double> y,
                                  std::span<const double> xq);

/// Cosine-clustered abscissae x_i = (1 - cos(pi i / (n - 1))) / 2.
std::vector<double> cosine_abscissae(std::size_t n);

struct Resampled {
  std::vector<double> x;
  std::vector<double> values;
};

/// Resamples a chordwise field on a monotone x/c grid onto `target_n`
/// cosine-distributed stations by linear interpolation.
Resampled cosine_resample(std::span<const double> x, std::span<const double> values,
                          std::size_t target_n);

struct Metrics {
  double mae = 0.0;
  double rmse = 0.0;
  std::optional<double> r2;   // empty when the truth is constant
};

/// Pooled MAE, RMSE and R^2 over every entry of equally shaped matrices.
Metrics metrics(const Matrix& pred, const Matrix& truth);

enum class NormMode { None, GlobalMinMax, PerNodeStandard };

std::string to_string(NormMode m);
NormMode norm_mode_from_string(const std::string& s);

inline constexpr double kStdFloor = 1e-8;

/// Invertible affine normalization of snapshot-major data (rows = snapshots,
/// columns = nodes).
struct NormStats {
  NormMode mode = NormMode::None;
  double min = 0.0;            // GlobalMinMax
  double range = 0.0;          // GlobalMinMax; 0 for constant data
  std::vector<double> mean;    // PerNodeStandard
  std::vector<double> scale;   // PerNodeStandard, floored at kStdFloor

  static NormStats fit(const Matrix& samples, NormMode mode);

  Matrix normalize(const Matrix& samples) const;
  Matrix denormalize(const Matrix& samples) const;
  std::vector<double> normalize(std::span<const double> x) const;
  std::vector<double> denormalize(std::span<const double> x) const;

  friend bool operator==(const NormStats&, const NormStats&) = default;
};

nlohmann::json to_json(const NormStats& stats);
NormStats norm_from_json(const nlohmann::json& doc);

/// Normalizes the fields of a set; statistics are fitted on the set itself.
std::pair<SnapshotSet, NormStats> normalize(const SnapshotSet& set, NormMode mode);
SnapshotSet denormalize(const SnapshotSet& set, const NormStats& stats);

}  // namespace mfcp::data
