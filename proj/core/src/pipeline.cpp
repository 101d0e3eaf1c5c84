#include "mfcp/pipeline.hpp"

#include <algorithm>
#include <fstream>
#include <numeric>
#include <set>

#include "mfcp/errors.hpp"
#include "mfcp/lofi.hpp"
#include "mfcp/log.hpp"
#include "mfcp/svg_plot.hpp"

namespace mfcp::pipeline {

namespace fs = std::filesystem;
using data::SnapshotSet;
using linalg::Matrix;

nlohmann::json read_json_file(const fs::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("missing artifact '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

void write_json_file(const nlohmann::json& doc, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << doc.dump(2) << '\n';
  if (!out) throw ValidationError("failed writing '" + path.string() + "'");
}

namespace {

Layout layout(const PipelineConfig& c) { return Layout{c.out_dir}; }

fs::path lf_fields_path(const PipelineConfig& c) {
  return c.lf_fields.empty() ? layout(c).lf_fields() : c.lf_fields;
}

std::optional<fs::path> lf_params_path(const PipelineConfig& c) {
  if (!c.lf_params.empty()) return c.lf_params;
  if (c.lf_fields.empty() && fs::exists(layout(c).lf_params())) return layout(c).lf_params();
  return std::nullopt;
}

std::optional<fs::path> optional_path(const fs::path& p) {
  if (p.empty()) return std::nullopt;
  return p;
}

void require_file(const fs::path& p, const std::string& what) {
  if (p.empty()) throw ValidationError("config does not name the " + what);
  if (!fs::exists(p)) throw ValidationError(what + " '" + p.string() + "' does not exist");
}

void ensure_out_dir(const PipelineConfig& c) {
  std::error_code ec;
  fs::create_directories(c.out_dir, ec);
  if (ec || !fs::is_directory(c.out_dir))
    throw ValidationError("cannot create output directory '" + c.out_dir.string() + "'");
}

SnapshotSet load_hf(const PipelineConfig& c) {
  return data::load_csv(c.hf_fields, optional_path(c.hf_params));
}

SnapshotSet load_lf(const PipelineConfig& c) { return data::load_csv(lf_fields_path(c), lf_params_path(c)); }

void write_history(const std::vector<double>& loss, const fs::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << "epoch,train_loss\n";
  for (std::size_t e = 0; e < loss.size(); ++e) out << e + 1 << ',' << data::format_double(loss[e]) << '\n';
}

std::vector<std::string> pick_names(const SnapshotSet& set, const std::vector<std::size_t>& idx) {
  std::vector<std::string> out;
  out.reserve(idx.size());
  for (std::size_t i : idx) out.push_back(set.names()[i]);
  return out;
}

struct Paired {
  std::vector<std::string> names;
  Matrix x_lf;
  Matrix y_hf;
};

// LF inputs and HF targets for the named snapshots, matched by name.
Paired paired(const SnapshotSet& lf, const SnapshotSet& hf, std::vector<std::string> names) {
  Paired p;
  p.x_lf = lf.samples(lf.indices_of(names));
  p.y_hf = hf.samples(hf.indices_of(names));
  p.names = std::move(names);
  return p;
}

mfae::MfaeConfig model_config(const PipelineConfig& c, std::size_t d_lf, std::size_t d_hf,
                              std::size_t n_params) {
  mfae::MfaeConfig m;
  m.d_lf = d_lf;
  m.d_hf = d_hf;
  m.encoder_widths = c.encoder_widths;
  m.decoder_widths = c.decoder_widths;
  m.latent_dim = c.latent_dim ? *c.latent_dim : std::max<std::size_t>(1, n_params);
  m.upscaler_hidden = c.upscaler_hidden;
  m.force_adapter = c.force_adapter;
  m.hidden_activation = c.hidden_activation;
  m.normalization = c.normalization;
  m.seed = derive_seeds(c.seed).init;
  m.pretrain_epochs = c.pretrain_epochs;
  m.adam.lr = c.learning_rate;
  m.finetune_lr = c.finetune_learning_rate;
  return m;
}

data::SplitPlan load_split(const PipelineConfig& c, const SnapshotSet& hf) {
  return data::split_from_json(read_json_file(layout(c).split()), hf);
}

nlohmann::json metrics_json(const data::Metrics& m) {
  nlohmann::json j = {{"mae", m.mae}, {"rmse", m.rmse}};
  j["r2"] = m.r2 ? nlohmann::json(*m.r2) : nlohmann::json(nullptr);
  return j;
}

// LF values linearly interpolated onto the HF node coordinates; only defined
// for one-dimensional coordinates.
std::optional<Matrix> interpolated_baseline(const SnapshotSet& lf, const SnapshotSet& hf,
                                            const Matrix& x_lf) {
  if (lf.coords().cols() != 1 || hf.coords().cols() != 1) return std::nullopt;
  const std::size_t d = lf.nodes();
  std::vector<std::size_t> order(d);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(),
                   [&](auto a, auto b) { return lf.coords()(a, 0) < lf.coords()(b, 0); });
  std::vector<double> xs(d);
  for (std::size_t k = 0; k < d; ++k) xs[k] = lf.coords()(order[k], 0);
  for (std::size_t k = 1; k < d; ++k)
    if (!(xs[k] > xs[k - 1])) return std::nullopt;
  const std::vector<double> xq(hf.coords().data().begin(), hf.coords().data().end());
  Matrix out(x_lf.rows(), hf.nodes());
  std::vector<double> ys(d);
  for (std::size_t i = 0; i < x_lf.rows(); ++i) {
    for (std::size_t k = 0; k < d; ++k) ys[k] = x_lf(i, order[k]);
    const auto row = data::interp_linear(xs, ys, xq);
    std::copy(row.begin(), row.end(), out.row(i).begin());
  }
  return out;
}

void write_predictions(const fs::path& path, const Paired& p, const Matrix& pred,
                       std::span<const double> radius) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << "name,node,prediction,lower,upper,truth\n";
  for (std::size_t i = 0; i < pred.rows(); ++i)
    for (std::size_t j = 0; j < pred.cols(); ++j)
      out << p.names[i] << ',' << j << ',' << data::format_double(pred(i, j)) << ','
          << data::format_double(pred(i, j) - radius[j]) << ','
          << data::format_double(pred(i, j) + radius[j]) << ','
          << data::format_double(p.y_hf(i, j)) << '\n';
}

void write_plot(const fs::path& path, const SnapshotSet& hf, const Paired& p, const Matrix& pred,
                std::span<const double> radius) {
  const std::size_t d = pred.cols();
  std::vector<double> x(d);
  if (hf.coords().cols() >= 1) {
    for (std::size_t j = 0; j < d; ++j) x[j] = hf.coords()(j, 0);
  } else {
    std::iota(x.begin(), x.end(), 0.0);
  }
  const auto row = pred.row(0);
  const auto b = conformal::band(row, radius);
  const auto truth = p.y_hf.row(0);
  std::ofstream out(path);
  if (!out) return;
  out << plot::band_svg(x, row, b.lower, b.upper, truth, p.names[0]);
}

}  // namespace

void validate(const PipelineConfig& c, Command command) {
  if (!(c.delta > 0.0 && c.delta < 1.0)) throw ValidationError("delta must lie in (0, 1)");
  if (!(c.cal_fraction > 0.0 && c.cal_fraction < 1.0))
    throw ValidationError("cal_fraction must lie in (0, 1)");
  if (c.mscp_splits < 1) throw ValidationError("mscp_splits must be at least 1");
  if (!(c.s_floor > 0.0)) throw ValidationError("s_floor must be positive");
  const Layout l = layout(c);
  switch (command) {
    case Command::Degrade:
      require_file(c.hf_fields, "HF fields file");
      require_file(c.recipe, "recipe file");
      break;
    case Command::Evaluate:
      require_file(l.model() / "meta.json", "fine-tuned model bundle");
      [[fallthrough]];
    case Command::Finetune:
      require_file(l.calibration(), "calibration file");
      [[fallthrough]];
    case Command::Calibrate:
      require_file(l.pretrained() / "meta.json", "pretrained model bundle");
      require_file(l.split(), "split file");
      [[fallthrough]];
    case Command::Pretrain:
      require_file(c.hf_fields, "HF fields file");
      require_file(lf_fields_path(c), "LF fields file");
      break;
  }
  if (!c.hf_params.empty()) require_file(c.hf_params, "HF params file");
  if (!c.lf_params.empty() && command != Command::Degrade) require_file(c.lf_params, "LF params file");
  ensure_out_dir(c);
}

void cmd_degrade(const PipelineConfig& c) {
  validate(c, Command::Degrade);
  nlohmann::json doc = read_json_file(c.recipe);
  if (!doc.contains("seed")) doc["seed"] = derive_seeds(c.seed).lofi;
  const lofi::DegradationRecipe recipe = lofi::recipe_from_json(doc);
  const SnapshotSet hf = load_hf(c);
  const lofi::Degraded out = lofi::apply(recipe, hf);
  const Layout l = layout(c);
  data::save_csv(out.set, l.lf_fields(),
                 out.set.params().cols() > 0 ? std::optional(l.lf_params()) : std::nullopt);
  write_json_file(out.provenance, l.provenance());
  log::info("degrade: " + std::to_string(hf.nodes()) + " -> " + std::to_string(out.set.nodes()) +
            " nodes over " + std::to_string(out.set.snapshots()) + " snapshots");
}

void cmd_pretrain(const PipelineConfig& c) {
  validate(c, Command::Pretrain);
  const Layout l = layout(c);
  const SnapshotSet hf = load_hf(c);
  const SnapshotSet lf = load_lf(c);
  const data::SplitPlan plan =
      data::stratified_split(hf.params(), c.hf_fraction, c.test_fraction, derive_seeds(c.seed).split);
  if (plan.train_idx.empty()) throw ValidationError("split leaves no HF training snapshots");
  write_json_file(data::to_json(plan, hf.names()), l.split());

  // Every LF snapshot except those paired with HF test cases.
  const auto test_names = pick_names(hf, plan.test_idx);
  const std::set<std::string> excluded(test_names.begin(), test_names.end());
  (void)lf.indices_of(test_names);  // every test case needs an LF input
  std::vector<std::size_t> keep;
  for (std::size_t i = 0; i < lf.snapshots(); ++i)
    if (!excluded.count(lf.names()[i])) keep.push_back(i);
  const SnapshotSet train_lf = lf.subset(keep);

  const auto cfg = model_config(c, lf.nodes(), hf.nodes(), hf.params().cols());
  const mfae::PretrainResult res = mfae::pretrain(cfg, train_lf);
  mfae::save_bundle(res.model, l.pretrained());
  write_history(res.history.train_loss, l.pretrain_history());
}

void cmd_calibrate(const PipelineConfig& c) {
  validate(c, Command::Calibrate);
  const Layout l = layout(c);
  const SnapshotSet hf = load_hf(c);
  const SnapshotSet lf = load_lf(c);
  const data::SplitPlan plan = load_split(c, hf);
  const mfae::MfaeModel model = mfae::load_bundle(l.pretrained());
  const Paired train = paired(lf, hf, pick_names(hf, plan.train_idx));

  mfae::MscpSettings s;
  s.mscp.splits = c.mscp_splits;
  s.mscp.cal_fraction = c.cal_fraction;
  s.mscp.delta = c.delta;
  s.mscp.kind = c.score;
  s.mscp.s_floor = c.s_floor;
  s.mscp.seed = derive_seeds(c.seed).mscp;
  s.mscp.workers = c.workers;
  s.max_epochs = c.finetune_max_epochs;
  s.patience = c.patience;
  const conformal::MscpResult result = mfae::calibrate_mscp(model, train.x_lf, train.y_hf, s);

  nlohmann::json doc = conformal::to_json(result);
  doc["train_names"] = train.names;
  doc["patience"] = c.patience;
  doc["max_epochs"] = c.finetune_max_epochs;
  write_json_file(doc, l.calibration());
  log::info("calibrate: B=" + std::to_string(c.mscp_splits) + " E*=" + std::to_string(result.e_star));
}

void cmd_finetune(const PipelineConfig& c) {
  validate(c, Command::Finetune);
  const Layout l = layout(c);
  const SnapshotSet hf = load_hf(c);
  const SnapshotSet lf = load_lf(c);
  const data::SplitPlan plan = load_split(c, hf);
  const mfae::MfaeModel pretrained = mfae::load_bundle(l.pretrained());
  const conformal::MscpResult cal = conformal::mscp_from_json(read_json_file(l.calibration()));
  const Paired train = paired(lf, hf, pick_names(hf, plan.train_idx));

  mfae::FineTuneOptions opts;
  opts.epochs = cal.e_star;
  opts.upscaler_seed = derive_seeds(c.seed).finetune;
  opts.names = train.names;
  const mfae::FineTuneResult res = mfae::fine_tune(pretrained, train.x_lf, train.y_hf, opts);
  if (cal.e_star == 0)
    log::warn("finetune: E*=0, the model is the pretrained decoder with a fresh up-scaler");
  mfae::save_bundle(res.model, l.model());
  write_history(res.history.train_loss, l.finetune_history());
}

nlohmann::json cmd_evaluate(const PipelineConfig& c) {
  validate(c, Command::Evaluate);
  const Layout l = layout(c);
  const SnapshotSet hf = load_hf(c);
  const SnapshotSet lf = load_lf(c);
  const data::SplitPlan plan = load_split(c, hf);
  const mfae::MfaeModel model = mfae::load_bundle(l.model());
  const conformal::MscpResult cal = conformal::mscp_from_json(read_json_file(l.calibration()));
  if (model.phase != mfae::Phase::FineTuned)
    throw ValidationError("evaluate: model bundle is not fine-tuned");
  if (cal.r_star.size() != hf.nodes())
    throw ValidationError("evaluate: calibration radius length does not match the HF node count");

  const auto test_names = pick_names(hf, plan.test_idx);
  std::set<std::string> seen(model.pretrain_names.begin(), model.pretrain_names.end());
  seen.insert(model.finetune_names.begin(), model.finetune_names.end());
  for (const auto& n : test_names)
    if (seen.count(n))
      throw ValidationError("evaluate: test snapshot '" + n + "' was used to train the model");

  nlohmann::json report = {{"format", "mfcp.report"},
                           {"schema_version", kReportSchemaVersion},
                           {"seed", c.seed},
                           {"delta", cal.options.delta},
                           {"kind", conformal::to_string(cal.options.kind)},
                           {"B", cal.options.splits},
                           {"E_star", cal.e_star}};

  auto evaluate_set = [&](const std::string& label, const std::vector<std::size_t>& idx) {
    const Paired p = paired(lf, hf, pick_names(hf, idx));
    const Matrix pred = mfae::predict(model, p.x_lf);
    const data::Metrics m = data::metrics(pred, p.y_hf);
    const conformal::Coverage cov = conformal::coverage(pred, cal.r_star, p.y_hf);
    nlohmann::json j = metrics_json(m);
    j["n"] = idx.size();
    j["nominal"] = cov.nominal;
    j["pointwise"] = cov.pointwise;
    j["band_width_mean"] = cov.width_mean;
    j["band_width_std"] = cov.width_std;
    if (auto base = interpolated_baseline(lf, hf, p.x_lf))
      j["lf_interpolation_baseline"] = metrics_json(data::metrics(*base, p.y_hf));
    write_predictions(l.root / ("predictions_" + label + ".csv"), p, pred, cal.r_star);
    if (c.plot) {
      try {
        write_plot(l.root / ("band_" + label + ".svg"), hf, p, pred, cal.r_star);
      } catch (const Error& e) {
        log::warn(std::string("plot skipped: ") + e.what());
      }
    }
    report[label] = std::move(j);
  };
  if (plan.test_idx.empty()) throw ValidationError("evaluate: the split has no test snapshots");
  evaluate_set("test", plan.test_idx);
  if (!plan.complementary_idx.empty()) evaluate_set("complementary", plan.complementary_idx);
  write_json_file(report, l.report());
  return report;
}

void run(Command command, const PipelineConfig& config) {
  switch (command) {
    case Command::Degrade: cmd_degrade(config); break;
    case Command::Pretrain: cmd_pretrain(config); break;
    case Command::Calibrate: cmd_calibrate(config); break;
    case Command::Finetune: cmd_finetune(config); break;
    case Command::Evaluate: cmd_evaluate(config); break;
  }
}

}  // namespace mfcp::pipeline
