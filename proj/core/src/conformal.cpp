#include "mfcp/conformal.hpp"

#include <algorithm>
#include <cmath>

#include "mfcp/errors.hpp"

namespace mfcp::conformal {

std::string to_string(ScoreKind k) {
  return k == ScoreKind::LInf ? "linf" : "normalized_l2";
}

ScoreKind score_kind_from_string(const std::string& s) {
  if (s == "linf") return ScoreKind::LInf;
  if (s == "normalized_l2") return ScoreKind::NormalizedL2;
  throw ValidationError("unknown score kind '" + s + "' (expected linf or normalized_l2)");
}

std::vector<double> modulation(const Matrix& residuals, double s_floor) {
  const std::size_t n = residuals.rows();
  if (n < 2) throw ValidationError("modulation: need at least 2 residual rows");
  if (!(s_floor > 0.0)) throw ValidationError("modulation: s_floor must be positive");
  const std::size_t d = residuals.cols();
  std::vector<double> mean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mean[j] += residuals(i, j);
  for (double& m : mean) m /= static_cast<double>(n);
  std::vector<double> s(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double e = residuals(i, j) - mean[j];
      s[j] += e * e;
    }
  for (double& v : s) v = std::max(std::sqrt(v / static_cast<double>(n)), s_floor);
  return s;
}

std::vector<double> scores(const Matrix& residuals, std::span<const double> s, ScoreKind kind) {
  const std::size_t d = residuals.cols();
  if (s.size() != d) throw ValidationError("scores: modulation length does not match residuals");
  for (double v : s)
    if (!(v > 0.0)) throw ValidationError("scores: modulation must be positive");
  std::vector<double> out(residuals.rows(), 0.0);
  for (std::size_t i = 0; i < residuals.rows(); ++i) {
    double acc = 0.0;
    for (std::size_t j = 0; j < d; ++j) {
      const double r = std::abs(residuals(i, j)) / s[j];
      if (kind == ScoreKind::LInf) acc = std::max(acc, r);
      else acc += r * r;
    }
    out[i] = kind == ScoreKind::LInf ? acc : std::sqrt(acc / static_cast<double>(d));
  }
  return out;
}

std::size_t critical_rank(std::size_t n, double delta) {
  if (n < 1) throw ValidationError("critical_quantile: no scores");
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("critical_quantile: delta must lie in (0, 1)");
  const double x = static_cast<double>(n + 1) * (1.0 - delta);
  // (n + 1)(1 - delta) is often an integer in exact arithmetic; do not let
  // rounding in 1 - delta push it to the next one.
  const double nearest = std::round(x);
  const double k = std::abs(x - nearest) <= 1e-9 * std::max(1.0, x) ? nearest : std::ceil(x);
  const auto rank = std::max<std::size_t>(1, static_cast<std::size_t>(k));
  if (rank > n)
    throw InsufficientCalibrationError(
        "insufficient calibration samples: delta=" + std::to_string(delta) + " needs rank " +
        std::to_string(rank) + " but only " + std::to_string(n) +
        " scores are available (add samples or raise delta)");
  return rank;
}

std::size_t min_calibration_size(double delta) {
  if (!(delta > 0.0 && delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  for (std::size_t n = 1;; ++n) {
    try {
      critical_rank(n, delta);
      return n;
    } catch (const InsufficientCalibrationError&) {
    }
  }
}

double critical_quantile(std::span<const double> scores, double delta) {
  const std::size_t rank = critical_rank(scores.size(), delta);
  std::vector<double> sorted(scores.begin(), scores.end());
  std::nth_element(sorted.begin(), sorted.begin() + static_cast<std::ptrdiff_t>(rank - 1),
                   sorted.end());
  return sorted[rank - 1];
}

Band band(std::span<const double> prediction, std::span<const double> radius) {
  if (prediction.size() != radius.size()) throw ValidationError("band: length mismatch");
  Band b{std::vector<double>(prediction.size()), std::vector<double>(prediction.size())};
  for (std::size_t j = 0; j < prediction.size(); ++j) {
    b.lower[j] = prediction[j] - radius[j];
    b.upper[j] = prediction[j] + radius[j];
  }
  return b;
}

ConformalCalibration calibrate(const Matrix& modulation_residuals,
                               const Matrix& calibration_residuals, double delta,
                               ScoreKind kind, double s_floor) {
  if (modulation_residuals.cols() != calibration_residuals.cols())
    throw ValidationError("calibrate: residual widths differ");
  ConformalCalibration c;
  c.delta = delta;
  c.kind = kind;
  c.s = modulation(modulation_residuals, s_floor);
  c.k_s = critical_quantile(scores(calibration_residuals, c.s, kind), delta);
  c.radius.resize(c.s.size());
  for (std::size_t j = 0; j < c.s.size(); ++j) c.radius[j] = c.k_s * c.s[j];
  return c;
}

Coverage coverage(const Matrix& predictions, std::span<const double> radius,
                  const Matrix& truths) {
  if (predictions.rows() != truths.rows() || predictions.cols() != truths.cols())
    throw ValidationError("coverage: predictions and truths differ in shape");
  if (radius.size() != predictions.cols()) throw ValidationError("coverage: radius length mismatch");
  Coverage c;
  const std::size_t n = predictions.rows();
  const std::size_t d = predictions.cols();
  std::size_t full = 0;
  std::size_t inside = 0;
  for (std::size_t i = 0; i < n; ++i) {
    bool all = true;
    for (std::size_t j = 0; j < d; ++j) {
      const double lo = predictions(i, j) - radius[j];
      const double hi = predictions(i, j) + radius[j];
      const bool in = truths(i, j) >= lo && truths(i, j) <= hi;
      inside += in ? 1 : 0;
      all = all && in;
    }
    full += all ? 1 : 0;
  }
  if (n > 0) {
    c.nominal = static_cast<double>(full) / static_cast<double>(n);
    if (d > 0) c.pointwise = static_cast<double>(inside) / static_cast<double>(n * d);
  }
  if (d > 0) {
    double sum = 0.0;
    for (double r : radius) sum += 2.0 * r;
    c.width_mean = sum / static_cast<double>(d);
    double var = 0.0;
    for (double r : radius) var += (2.0 * r - c.width_mean) * (2.0 * r - c.width_mean);
    c.width_std = std::sqrt(var / static_cast<double>(d));
  }
  return c;
}

double median(std::vector<double> values) {
  if (values.empty()) throw ValidationError("median of an empty collection");
  std::sort(values.begin(), values.end());
  const std::size_t n = values.size();
  if (n % 2 == 1) return values[n / 2];
  return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

std::size_t median_epoch(std::span<const std::size_t> epochs) {
  if (epochs.empty()) throw ValidationError("median of an empty collection");
  std::vector<std::size_t> sorted(epochs.begin(), epochs.end());
  std::sort(sorted.begin(), sorted.end());
  const std::size_t n = sorted.size();
  if (n % 2 == 1) return sorted[n / 2];
  const std::size_t sum = sorted[n / 2 - 1] + sorted[n / 2];
  return (sum + 1) / 2;
}

}  // namespace mfcp::conformal
