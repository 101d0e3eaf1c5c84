#include <algorithm>
#include <atomic>
#include <cmath>
#include <exception>
#include <numeric>
#include <thread>

#include "mfcp/conformal.hpp"
#include "mfcp/errors.hpp"
#include "mfcp/log.hpp"
#include "mfcp/rng.hpp"

namespace mfcp::conformal {

std::size_t calibration_count(std::size_t n, double cal_fraction) {
  return static_cast<std::size_t>(std::llround(cal_fraction * static_cast<double>(n)));
}

namespace {

SplitTask draw_split(std::size_t n, std::size_t n_cal, std::uint64_t seed, std::size_t b) {
  SplitTask task;
  task.index = b;
  task.seed = derive_seed(seed, "mscp.train", b);
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  Engine rng = make_engine(seed, "mscp.split", b);
  std::shuffle(order.begin(), order.end(), rng);
  task.cal_idx.assign(order.begin(), order.begin() + static_cast<std::ptrdiff_t>(n_cal));
  task.train_idx.assign(order.begin() + static_cast<std::ptrdiff_t>(n_cal), order.end());
  std::sort(task.cal_idx.begin(), task.cal_idx.end());
  std::sort(task.train_idx.begin(), task.train_idx.end());
  return task;
}

SplitRecord calibrate_split(SplitTask task, const SplitFit& fit, const MscpOptions& options) {
  if (fit.cal_residuals.rows() != task.cal_idx.size())
    throw ValidationError("trainer returned " + std::to_string(fit.cal_residuals.rows()) +
                          " residual rows for " + std::to_string(task.cal_idx.size()) +
                          " calibration samples");
  SplitRecord r;
  r.index = task.index;
  r.seed = task.seed;
  r.train_idx = std::move(task.train_idx);
  r.cal_idx = std::move(task.cal_idx);
  r.epochs = fit.epochs;
  r.s = modulation(fit.cal_residuals, options.s_floor);
  r.k_s = critical_quantile(scores(fit.cal_residuals, r.s, options.kind), options.delta);
  r.radius.resize(r.s.size());
  for (std::size_t j = 0; j < r.s.size(); ++j) r.radius[j] = r.k_s * r.s[j];
  return r;
}

[[noreturn]] void rethrow_with_split(std::exception_ptr error, std::size_t b) {
  const std::string where = "MSCP split " + std::to_string(b) + ": ";
  try {
    std::rethrow_exception(error);
  } catch (const InsufficientCalibrationError& e) {
    throw InsufficientCalibrationError(where + e.what());
  } catch (const ValidationError& e) {
    throw ValidationError(where + e.what());
  } catch (const NumericError& e) {
    throw NumericError(where + e.what());
  }
}

}  // namespace

MscpResult run_mscp(std::size_t n_samples, const MscpOptions& options,
                    const SplitTrainer& trainer) {
  if (options.splits < 1) throw ValidationError("MSCP: need at least one split");
  if (!(options.cal_fraction > 0.0 && options.cal_fraction < 1.0))
    throw ValidationError("MSCP: cal_fraction must lie in (0, 1)");
  if (!(options.delta > 0.0 && options.delta < 1.0))
    throw ValidationError("MSCP: delta must lie in (0, 1)");

  const std::size_t n_cal = calibration_count(n_samples, options.cal_fraction);
  const std::size_t needed = std::max<std::size_t>(2, min_calibration_size(options.delta));
  if (n_cal < needed)
    throw InsufficientCalibrationError(
        "MSCP: " + std::to_string(n_samples) + " samples at cal_fraction " +
        std::to_string(options.cal_fraction) + " give " + std::to_string(n_cal) +
        " calibration samples, but delta=" + std::to_string(options.delta) + " needs at least " +
        std::to_string(needed));
  if (n_cal >= n_samples) throw ValidationError("MSCP: no samples left for training");

  const std::size_t b_count = options.splits;
  std::vector<SplitRecord> records(b_count);
  std::vector<std::exception_ptr> errors(b_count);
  std::atomic<std::size_t> next{0};

  auto worker = [&] {
    for (std::size_t b = next++; b < b_count; b = next++) {
      try {
        SplitTask task = draw_split(n_samples, n_cal, options.seed, b);
        const SplitFit fit = trainer(task);
        records[b] = calibrate_split(std::move(task), fit, options);
        log::debug("MSCP split " + std::to_string(b) + ": epochs=" +
                   std::to_string(records[b].epochs) + " k_s=" + std::to_string(records[b].k_s));
      } catch (...) {
        errors[b] = std::current_exception();
      }
    }
  };

  std::size_t workers = options.workers ? options.workers : std::thread::hardware_concurrency();
  workers = std::clamp<std::size_t>(workers, 1, b_count);
  if (workers == 1) {
    worker();
  } else {
    std::vector<std::jthread> pool;
    for (std::size_t w = 0; w < workers; ++w) pool.emplace_back(worker);
  }
  for (std::size_t b = 0; b < b_count; ++b)
    if (errors[b]) rethrow_with_split(errors[b], b);

  const std::size_t d = records.front().radius.size();
  for (const auto& r : records)
    if (r.radius.size() != d) throw ValidationError("MSCP: splits disagree on output size");

  MscpResult result;
  result.options = options;
  result.n_samples = n_samples;
  result.r_star.resize(d);
  std::vector<double> column(b_count);
  for (std::size_t j = 0; j < d; ++j) {
    for (std::size_t b = 0; b < b_count; ++b) column[b] = records[b].radius[j];
    result.r_star[j] = median(column);
  }
  std::vector<std::size_t> epochs(b_count);
  for (std::size_t b = 0; b < b_count; ++b) epochs[b] = records[b].epochs;
  result.e_star = median_epoch(epochs);
  result.splits = std::move(records);
  return result;
}

nlohmann::json to_json(const MscpResult& result) {
  nlohmann::json splits = nlohmann::json::array();
  for (const auto& r : result.splits) {
    splits.push_back({{"index", r.index},
                      {"seed", r.seed},
                      {"train_idx", r.train_idx},
                      {"cal_idx", r.cal_idx},
                      {"epochs", r.epochs},
                      {"k_s", r.k_s},
                      {"s", r.s},
                      {"R", r.radius}});
  }
  const auto& o = result.options;
  return {{"format", "mfcp.calibration"},
          {"schema_version", kCalibrationSchemaVersion},
          {"B", o.splits},
          {"delta", o.delta},
          {"kind", to_string(o.kind)},
          {"cal_fraction", o.cal_fraction},
          {"s_floor", o.s_floor},
          {"seed", o.seed},
          {"n_samples", result.n_samples},
          {"R_star", result.r_star},
          {"E_star", result.e_star},
          {"splits", std::move(splits)}};
}

MscpResult mscp_from_json(const nlohmann::json& doc) {
  try {
    if (doc.at("format").get<std::string>() != "mfcp.calibration")
      throw ValidationError("calibration document has wrong format tag");
    if (doc.at("schema_version").get<int>() != kCalibrationSchemaVersion)
      throw ValidationError("unsupported calibration schema version");
    MscpResult r;
    r.options.splits = doc.at("B").get<std::size_t>();
    r.options.delta = doc.at("delta").get<double>();
    r.options.kind = score_kind_from_string(doc.at("kind").get<std::string>());
    r.options.cal_fraction = doc.at("cal_fraction").get<double>();
    r.options.s_floor = doc.at("s_floor").get<double>();
    r.options.seed = doc.at("seed").get<std::uint64_t>();
    r.n_samples = doc.at("n_samples").get<std::size_t>();
    r.r_star = doc.at("R_star").get<std::vector<double>>();
    r.e_star = doc.at("E_star").get<std::size_t>();
    for (const auto& j : doc.at("splits")) {
      SplitRecord s;
      s.index = j.at("index").get<std::size_t>();
      s.seed = j.at("seed").get<std::uint64_t>();
      s.train_idx = j.at("train_idx").get<std::vector<std::size_t>>();
      s.cal_idx = j.at("cal_idx").get<std::vector<std::size_t>>();
      s.epochs = j.at("epochs").get<std::size_t>();
      s.k_s = j.at("k_s").get<double>();
      s.s = j.at("s").get<std::vector<double>>();
      s.radius = j.at("R").get<std::vector<double>>();
      r.splits.push_back(std::move(s));
    }
    for (double v : r.r_star)
      if (!std::isfinite(v) || v < 0.0) throw ValidationError("calibration R_star must be finite and non-negative");
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed calibration document: ") + e.what());
  }
}

}  // namespace mfcp::conformal
