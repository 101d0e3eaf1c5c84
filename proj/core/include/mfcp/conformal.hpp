#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfcp/linalg.hpp"

namespace mfcp::conformal {

using linalg::Matrix;

enum class ScoreKind { LInf, NormalizedL2 };

std::string to_string(ScoreKind k);
ScoreKind score_kind_from_string(const std::string& s);

inline constexpr double kSFloor = 1e-8;

/// Population standard deviation of every residual column, floored at
/// `s_floor`. Rows of `residuals` are samples.
std::vector<double> modulation(const Matrix& residuals, double s_floor = kSFloor);

/// Non-conformity score of each residual row, r_ij = |e_ij| / s_j:
/// LInf takes max_j r_ij, NormalizedL2 sqrt(mean_j r_ij^2).
std::vector<double> scores(const Matrix& residuals, std::span<const double> s, ScoreKind kind);

/// k = ceil((n + 1)(1 - delta)), 1-based. Throws InsufficientCalibrationError
/// when k > n.
std::size_t critical_rank(std::size_t n, double delta);

/// Smallest calibration size for which `delta` is attainable.
std::size_t min_calibration_size(double delta);

/// The critical_rank-th smallest score.
double critical_quantile(std::span<const double> scores, double delta);

struct Band {
  std::vector<double> lower;
  std::vector<double> upper;
};

Band band(std::span<const double> prediction, std::span<const double> radius);

struct ConformalCalibration {
  std::vector<double> s;
  double delta = 0.1;
  ScoreKind kind = ScoreKind::LInf;
  double k_s = 0.0;
  std::vector<double> radius;   // k_s * s
};

/// Split-conformal calibration: the modulation comes from
/// `modulation_residuals`, the critical quantile from the scores of
/// `calibration_residuals`.
ConformalCalibration calibrate(const Matrix& modulation_residuals,
                               const Matrix& calibration_residuals, double delta,
                               ScoreKind kind, double s_floor = kSFloor);

struct Coverage {
  double nominal = 0.0;      // snapshots with every component in band
  double pointwise = 0.0;    // components in band over all components
  double width_mean = 0.0;
  double width_std = 0.0;
};

/// Coverage of `truths` by bands prediction +/- radius (boundary inclusive).
/// Rows are snapshots. Width statistics are taken over the band widths 2 R_j.
Coverage coverage(const Matrix& predictions, std::span<const double> radius,
                  const Matrix& truths);

/// Median; even counts average the two middle values.
double median(std::vector<double> values);
/// Median rounded up to an integer.
std::size_t median_epoch(std::span<const std::size_t> epochs);

struct MscpOptions {
  std::size_t splits = 30;
  double cal_fraction = 0.3;
  double delta = 0.1;
  ScoreKind kind = ScoreKind::LInf;
  double s_floor = kSFloor;
  std::uint64_t seed = 0;
  std::size_t workers = 0;   // 0 = hardware concurrency
};

struct SplitTask {
  std::size_t index = 0;
  std::uint64_t seed = 0;    // private stream for the trainer
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> cal_idx;
};

struct SplitFit {
  Matrix cal_residuals;      // cal_idx.size() x D, truth - prediction
  std::size_t epochs = 0;
};

/// Fits a model on task.train_idx and returns its residuals on task.cal_idx.
/// Called concurrently from several threads with distinct tasks.
using SplitTrainer = std::function<SplitFit(const SplitTask&)>;

struct SplitRecord {
  std::size_t index = 0;
  std::uint64_t seed = 0;
  std::vector<std::size_t> train_idx;
  std::vector<std::size_t> cal_idx;
  std::size_t epochs = 0;
  double k_s = 0.0;
  std::vector<double> s;
  std::vector<double> radius;
};

struct MscpResult {
  MscpOptions options;
  std::size_t n_samples = 0;
  std::vector<SplitRecord> splits;
  std::vector<double> r_star;
  std::size_t e_star = 0;
};

/// Sizes of the calibration/training subsets used for n samples.
std::size_t calibration_count(std::size_t n, double cal_fraction);

/// Multi-split conformal calibration over n samples. Each split draws a
/// random calibration subset, lets `trainer` fit on the rest, and derives
/// s and k_s from the calibration residuals. Radii and epochs are aggregated
/// by component-wise median. Feasibility is checked before any training.
MscpResult run_mscp(std::size_t n_samples, const MscpOptions& options,
                    const SplitTrainer& trainer);

inline constexpr int kCalibrationSchemaVersion = 1;

nlohmann::json to_json(const MscpResult& result);
MscpResult mscp_from_json(const nlohmann::json& doc);

}  // namespace mfcp::conformal
