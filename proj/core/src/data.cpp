#include <algorithm>
#include <cmath>
#include <map>
#include <numbers>
#include <numeric>

#include "mfcp/data.hpp"
#include "mfcp/errors.hpp"
#include "mfcp/log.hpp"
#include "mfcp/rng.hpp"

namespace mfcp::data {

namespace {

// Tercile bin of every entry of a column; ties at a threshold go low, so a
// constant column lands entirely in bin 0.
std::vector<int> tercile_bins(const std::vector<double>& values) {
  const std::size_t n = values.size();
  std::vector<int> bins(n, 0);
  if (n == 0) return bins;
  std::vector<double> sorted = values;
  std::sort(sorted.begin(), sorted.end());
  const double t1 = sorted[(n + 2) / 3 - 1];
  const double t2 = sorted[(2 * n + 2) / 3 - 1];
  for (std::size_t i = 0; i < n; ++i) bins[i] = values[i] <= t1 ? 0 : (values[i] <= t2 ? 1 : 2);
  return bins;
}

std::vector<std::string> strata_labels(const Matrix& params, std::span<const std::size_t> rows) {
  std::vector<std::string> labels(rows.size());
  for (std::size_t k = 0; k < params.cols(); ++k) {
    std::vector<double> column(rows.size());
    for (std::size_t i = 0; i < rows.size(); ++i) column[i] = params(rows[i], k);
    const auto bins = tercile_bins(column);
    for (std::size_t i = 0; i < rows.size(); ++i) {
      if (k > 0) labels[i] += '-';
      labels[i] += std::to_string(bins[i]);
    }
  }
  for (auto& l : labels)
    if (l.empty()) l = "all";
  return labels;
}

// Draws `total` members from `rows`, allocated over strata by largest
// remainder. Returns the chosen row ids, sorted.
std::vector<std::size_t> stratified_draw(const Matrix& params, std::span<const std::size_t> rows,
                                         std::size_t total, Engine& rng,
                                         std::vector<std::string>* labels_out) {
  const auto labels = strata_labels(params, rows);
  if (labels_out) *labels_out = labels;
  std::map<std::string, std::vector<std::size_t>> strata;
  for (std::size_t i = 0; i < rows.size(); ++i) strata[labels[i]].push_back(rows[i]);

  struct Quota {
    std::vector<std::size_t>* members;
    std::size_t take;
    double remainder;
    std::size_t order;
  };
  std::vector<Quota> quotas;
  std::size_t assigned = 0;
  std::size_t order = 0;
  for (auto& [label, members] : strata) {
    const double exact = static_cast<double>(total) * static_cast<double>(members.size()) /
                         static_cast<double>(rows.size());
    const auto take = static_cast<std::size_t>(std::floor(exact));
    quotas.push_back({&members, take, exact - static_cast<double>(take), order++});
    assigned += take;
  }
  std::vector<std::size_t> by_remainder(quotas.size());
  std::iota(by_remainder.begin(), by_remainder.end(), 0);
  std::stable_sort(by_remainder.begin(), by_remainder.end(), [&](std::size_t a, std::size_t b) {
    return quotas[a].remainder > quotas[b].remainder;
  });
  for (std::size_t i = 0; assigned < total && i < by_remainder.size(); ++i) {
    Quota& q = quotas[by_remainder[i]];
    if (q.take < q.members->size()) {
      ++q.take;
      ++assigned;
    }
  }

  std::vector<std::size_t> chosen;
  for (auto& q : quotas) {
    std::vector<std::size_t> members = *q.members;
    std::shuffle(members.begin(), members.end(), rng);
    chosen.insert(chosen.end(), members.begin(), members.begin() + static_cast<std::ptrdiff_t>(q.take));
  }
  std::sort(chosen.begin(), chosen.end());
  return chosen;
}

std::size_t rounded_count(double fraction, std::size_t n) {
  return static_cast<std::size_t>(std::llround(fraction * static_cast<double>(n)));
}

}  // namespace

SplitPlan stratified_split(const Matrix& params, double hf_fraction, double test_fraction,
                           std::uint64_t seed) {
  if (!(hf_fraction > 0.0 && hf_fraction <= 1.0))
    throw ValidationError("stratified_split: hf_fraction must lie in (0, 1]");
  if (!(test_fraction > 0.0 && test_fraction < 1.0))
    throw ValidationError("stratified_split: test_fraction must lie in (0, 1)");
  const std::size_t n = params.rows();

  SplitPlan plan;
  plan.seed = seed;
  plan.hf_fraction = hf_fraction;
  plan.test_fraction = test_fraction;

  std::vector<std::size_t> all(n);
  std::iota(all.begin(), all.end(), 0);
  Engine budget_rng = make_engine(seed, "hf_budget");
  const std::size_t budget_size = rounded_count(hf_fraction, n);
  const auto budget = stratified_draw(params, all, budget_size, budget_rng, &plan.strata);
  std::set_difference(all.begin(), all.end(), budget.begin(), budget.end(),
                      std::back_inserter(plan.complementary_idx));

  Engine test_rng = make_engine(seed, "test");
  plan.test_idx = stratified_draw(params, budget, rounded_count(test_fraction, budget.size()),
                                  test_rng, nullptr);
  std::set_difference(budget.begin(), budget.end(), plan.test_idx.begin(), plan.test_idx.end(),
                      std::back_inserter(plan.train_idx));
  log::debug("stratified_split: " + std::to_string(plan.train_idx.size()) + " train, " +
             std::to_string(plan.test_idx.size()) + " test, " +
             std::to_string(plan.complementary_idx.size()) + " complementary");
  return plan;
}

nlohmann::json to_json(const SplitPlan& plan, const std::vector<std::string>& names) {
  auto pick = [&](const std::vector<std::size_t>& idx) {
    std::vector<std::string> out;
    for (std::size_t i : idx) out.push_back(names.at(i));
    return out;
  };
  return {{"schema_version", 1},
          {"seed", plan.seed},
          {"hf_fraction", plan.hf_fraction},
          {"test_fraction", plan.test_fraction},
          {"train", pick(plan.train_idx)},
          {"test", pick(plan.test_idx)},
          {"complementary", pick(plan.complementary_idx)},
          {"strata", plan.strata}};
}

SplitPlan split_from_json(const nlohmann::json& doc, const SnapshotSet& set) {
  try {
    SplitPlan plan;
    plan.seed = doc.at("seed").get<std::uint64_t>();
    plan.hf_fraction = doc.at("hf_fraction").get<double>();
    plan.test_fraction = doc.at("test_fraction").get<double>();
    plan.train_idx = set.indices_of(doc.at("train").get<std::vector<std::string>>());
    plan.test_idx = set.indices_of(doc.at("test").get<std::vector<std::string>>());
    plan.complementary_idx = set.indices_of(doc.at("complementary").get<std::vector<std::string>>());
    plan.strata = doc.at("strata").get<std::vector<std::string>>();
    return plan;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed split document: ") + e.what());
  }
}

std::vector<double> interp_linear(std::span<const double> x, std::span<const double> y,
                                  std::span<const double> xq) {
  if (x.size() != y.size() || x.empty())
    throw ValidationError("interp_linear: abscissae and values must be nonempty and equally long");
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1])) throw ValidationError("interp_linear: abscissae not strictly increasing");
  std::vector<double> out(xq.size());
  for (std::size_t q = 0; q < xq.size(); ++q) {
    const double v = xq[q];
    if (v <= x.front()) {
      out[q] = y.front();
    } else if (v >= x.back()) {
      out[q] = y.back();
    } else {
      const auto hi = static_cast<std::size_t>(std::upper_bound(x.begin(), x.end(), v) - x.begin());
      const std::size_t lo = hi - 1;
      const double t = (v - x[lo]) / (x[hi] - x[lo]);
      out[q] = (1.0 - t) * y[lo] + t * y[hi];
    }
  }
  return out;
}

std::vector<double> cosine_abscissae(std::size_t n) {
  if (n < 2) throw ValidationError("cosine_abscissae: need at least 2 stations");
  std::vector<double> x(n);
  for (std::size_t i = 0; i < n; ++i)
    x[i] = (1.0 - std::cos(std::numbers::pi * static_cast<double>(i) / static_cast<double>(n - 1))) / 2.0;
  return x;
}

Resampled cosine_resample(std::span<const double> x, std::span<const double> values,
                          std::size_t target_n) {
  for (std::size_t i = 1; i < x.size(); ++i)
    if (!(x[i] > x[i - 1])) throw ValidationError("cosine_resample: x/c grid is not monotone");
  Resampled out;
  out.x = cosine_abscissae(target_n);
  out.values = interp_linear(x, values, out.x);
  return out;
}

Metrics metrics(const Matrix& pred, const Matrix& truth) {
  if (pred.rows() != truth.rows() || pred.cols() != truth.cols())
    throw ValidationError("metrics: prediction and truth shapes differ");
  if (truth.empty()) throw ValidationError("metrics: empty input");
  const auto p = pred.data();
  const auto t = truth.data();
  const double n = static_cast<double>(t.size());
  double abs_sum = 0.0;
  double sq_sum = 0.0;
  double mean = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i) {
    const double d = p[i] - t[i];
    abs_sum += std::abs(d);
    sq_sum += d * d;
    mean += t[i];
  }
  mean /= n;
  double ss_tot = 0.0;
  for (double v : t) ss_tot += (v - mean) * (v - mean);
  Metrics m;
  m.mae = abs_sum / n;
  m.rmse = std::sqrt(sq_sum / n);
  if (ss_tot > 0.0) m.r2 = 1.0 - sq_sum / ss_tot;
  return m;
}

std::string to_string(NormMode m) {
  switch (m) {
    case NormMode::None: return "none";
    case NormMode::GlobalMinMax: return "global_minmax";
    case NormMode::PerNodeStandard: return "per_node_standard";
  }
  return "none";
}

NormMode norm_mode_from_string(const std::string& s) {
  if (s == "none") return NormMode::None;
  if (s == "global_minmax") return NormMode::GlobalMinMax;
  if (s == "per_node_standard") return NormMode::PerNodeStandard;
  throw ValidationError("unknown normalization mode '" + s + "'");
}

NormStats NormStats::fit(const Matrix& samples, NormMode mode) {
  NormStats s;
  s.mode = mode;
  if (mode == NormMode::None) return s;
  if (samples.rows() == 0 || samples.cols() == 0)
    throw ValidationError("NormStats::fit: no data");
  if (mode == NormMode::GlobalMinMax) {
    const auto [lo, hi] = std::minmax_element(samples.data().begin(), samples.data().end());
    s.min = *lo;
    s.range = *hi - *lo;
    return s;
  }
  const std::size_t n = samples.rows();
  const std::size_t d = samples.cols();
  s.mean.assign(d, 0.0);
  s.scale.assign(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) s.mean[j] += samples(i, j);
  for (double& m : s.mean) m /= static_cast<double>(n);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      const double dv = samples(i, j) - s.mean[j];
      s.scale[j] += dv * dv;
    }
  for (double& v : s.scale) v = std::max(std::sqrt(v / static_cast<double>(n)), kStdFloor);
  return s;
}

std::vector<double> NormStats::normalize(std::span<const double> x) const {
  std::vector<double> out(x.begin(), x.end());
  switch (mode) {
    case NormMode::None: break;
    case NormMode::GlobalMinMax:
      for (double& v : out) v = range > 0.0 ? (v - min) / range : 0.0;
      break;
    case NormMode::PerNodeStandard:
      if (x.size() != mean.size()) throw ValidationError("NormStats: length mismatch");
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = (out[j] - mean[j]) / scale[j];
      break;
  }
  return out;
}

std::vector<double> NormStats::denormalize(std::span<const double> x) const {
  std::vector<double> out(x.begin(), x.end());
  switch (mode) {
    case NormMode::None: break;
    case NormMode::GlobalMinMax:
      for (double& v : out) v = min + v * range;
      break;
    case NormMode::PerNodeStandard:
      if (x.size() != mean.size()) throw ValidationError("NormStats: length mismatch");
      for (std::size_t j = 0; j < out.size(); ++j) out[j] = out[j] * scale[j] + mean[j];
      break;
  }
  return out;
}

Matrix NormStats::normalize(const Matrix& samples) const {
  Matrix out(samples.rows(), samples.cols());
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    const auto row = normalize(samples.row(i));
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

Matrix NormStats::denormalize(const Matrix& samples) const {
  Matrix out(samples.rows(), samples.cols());
  for (std::size_t i = 0; i < samples.rows(); ++i) {
    const auto row = denormalize(samples.row(i));
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

nlohmann::json to_json(const NormStats& stats) {
  return {{"mode", to_string(stats.mode)},
          {"min", stats.min},
          {"range", stats.range},
          {"mean", stats.mean},
          {"scale", stats.scale}};
}

NormStats norm_from_json(const nlohmann::json& doc) {
  try {
    NormStats s;
    s.mode = norm_mode_from_string(doc.at("mode").get<std::string>());
    s.min = doc.at("min").get<double>();
    s.range = doc.at("range").get<double>();
    s.mean = doc.at("mean").get<std::vector<double>>();
    s.scale = doc.at("scale").get<std::vector<double>>();
    if (s.mean.size() != s.scale.size()) throw ValidationError("normalization stats: length mismatch");
    return s;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed normalization stats: ") + e.what());
  }
}

std::pair<SnapshotSet, NormStats> normalize(const SnapshotSet& set, NormMode mode) {
  const NormStats stats = NormStats::fit(set.samples(), mode);
  Matrix fields = stats.normalize(set.samples()).transposed();
  return {set.with_nodes(std::move(fields), set.coords()), stats};
}

SnapshotSet denormalize(const SnapshotSet& set, const NormStats& stats) {
  Matrix fields = stats.denormalize(set.samples()).transposed();
  return set.with_nodes(std::move(fields), set.coords());
}

}  // namespace mfcp::data
