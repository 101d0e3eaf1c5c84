#include "mfcp/mfae.hpp"

#include <cmath>
#include <string>

#include "mfcp/errors.hpp"
#include "mfcp/log.hpp"
#include "mfcp/rng.hpp"

namespace mfcp::mfae {

void MfaeConfig::validate() const {
  if (d_lf < 1 || d_hf < 1) throw ValidationError("MFAE config: d_lf and d_hf must be positive");
  if (latent_dim < 1 || latent_dim > d_lf)
    throw ValidationError("MFAE config: latent_dim must lie in [1, d_lf]");
  for (std::size_t w : encoder_widths)
    if (w < 1) throw ValidationError("MFAE config: encoder widths must be positive");
  for (std::size_t w : decoder_widths)
    if (w < 1) throw ValidationError("MFAE config: decoder widths must be positive");
  if (upscaler_hidden && *upscaler_hidden < 1)
    throw ValidationError("MFAE config: upscaler_hidden must be positive");
  if (pretrain_epochs < 1) throw ValidationError("MFAE config: pretrain_epochs must be at least 1");
  if (!(adam.lr > 0.0)) throw ValidationError("MFAE config: learning rate must be positive");
  if (finetune_lr && !(*finetune_lr > 0.0))
    throw ValidationError("MFAE config: fine-tune learning rate must be positive");
}

std::size_t MfaeConfig::upscaler_width() const {
  if (upscaler_hidden) return *upscaler_hidden;
  return static_cast<std::size_t>(std::ceil(1.5 * static_cast<double>(d_lf)));
}

nn::AdamConfig MfaeConfig::finetune_adam() const {
  nn::AdamConfig a = adam;
  a.lr = finetune_lr ? *finetune_lr : adam.lr / 10.0;
  return a;
}

MfaeConfig MfaeConfig::airfoil(std::size_t d_lf) {
  MfaeConfig c;
  c.d_lf = d_lf;
  c.d_hf = 260;
  c.encoder_widths = {64, 32, 16};
  c.latent_dim = 3;
  c.decoder_widths = {16, 32, 16};
  return c;
}

MfaeConfig MfaeConfig::wing() {
  MfaeConfig c;
  c.d_lf = 4000;
  c.d_hf = 49574;
  c.encoder_widths = {1024, 512, 256, 64};
  c.latent_dim = 2;
  c.decoder_widths = {64, 256, 512, 1024};
  c.upscaler_hidden = 8000;
  return c;
}

nlohmann::json to_json(const MfaeConfig& c) {
  nlohmann::json j = {{"d_lf", c.d_lf},
                      {"d_hf", c.d_hf},
                      {"encoder_widths", c.encoder_widths},
                      {"latent_dim", c.latent_dim},
                      {"decoder_widths", c.decoder_widths},
                      {"force_adapter", c.force_adapter},
                      {"hidden_activation", nn::to_string(c.hidden_activation)},
                      {"normalization", data::to_string(c.normalization)},
                      {"seed", c.seed},
                      {"pretrain_epochs", c.pretrain_epochs},
                      {"adam",
                       {{"lr", c.adam.lr},
                        {"beta1", c.adam.beta1},
                        {"beta2", c.adam.beta2},
                        {"eps", c.adam.eps}}}};
  if (c.upscaler_hidden) j["upscaler_hidden"] = *c.upscaler_hidden;
  if (c.finetune_lr) j["finetune_lr"] = *c.finetune_lr;
  return j;
}

MfaeConfig config_from_json(const nlohmann::json& j) {
  try {
    MfaeConfig c;
    c.d_lf = j.at("d_lf").get<std::size_t>();
    c.d_hf = j.at("d_hf").get<std::size_t>();
    c.encoder_widths = j.at("encoder_widths").get<std::vector<std::size_t>>();
    c.latent_dim = j.at("latent_dim").get<std::size_t>();
    c.decoder_widths = j.at("decoder_widths").get<std::vector<std::size_t>>();
    if (j.contains("upscaler_hidden")) c.upscaler_hidden = j.at("upscaler_hidden").get<std::size_t>();
    c.force_adapter = j.at("force_adapter").get<bool>();
    c.hidden_activation = nn::activation_from_string(j.at("hidden_activation").get<std::string>());
    c.normalization = data::norm_mode_from_string(j.at("normalization").get<std::string>());
    c.seed = j.at("seed").get<std::uint64_t>();
    c.pretrain_epochs = j.at("pretrain_epochs").get<std::size_t>();
    const auto& a = j.at("adam");
    c.adam = {a.at("lr").get<double>(), a.at("beta1").get<double>(), a.at("beta2").get<double>(),
              a.at("eps").get<double>()};
    if (j.contains("finetune_lr")) c.finetune_lr = j.at("finetune_lr").get<double>();
    c.validate();
    return c;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed MFAE config: ") + e.what());
  }
}

std::string to_string(Phase p) { return p == Phase::Pretrained ? "pretrained" : "finetuned"; }

Phase phase_from_string(const std::string& s) {
  if (s == "pretrained") return Phase::Pretrained;
  if (s == "finetuned") return Phase::FineTuned;
  throw ValidationError("unknown model phase '" + s + "'");
}

namespace {

std::vector<std::size_t> chain(std::size_t in, const std::vector<std::size_t>& widths,
                               std::size_t out) {
  std::vector<std::size_t> dims{in};
  dims.insert(dims.end(), widths.begin(), widths.end());
  dims.push_back(out);
  return dims;
}

void check_width(const Matrix& x, std::size_t want, const char* what) {
  if (x.cols() != want)
    throw ValidationError(std::string(what) + ": expected " + std::to_string(want) +
                          " columns, got " + std::to_string(x.cols()));
}

nn::Mlp build_upscaler(const MfaeConfig& c, std::uint64_t seed) {
  const std::vector<std::size_t> dims{c.d_lf, c.upscaler_width(), c.d_hf};
  return nn::Mlp::build(dims, c.hidden_activation, nn::Activation::Identity, seed);
}

}  // namespace

PretrainResult pretrain(const MfaeConfig& config, const data::SnapshotSet& lf) {
  config.validate();
  if (lf.nodes() != config.d_lf)
    throw ValidationError("pretrain: LF snapshots have " + std::to_string(lf.nodes()) +
                          " nodes, config expects " + std::to_string(config.d_lf));
  if (lf.snapshots() == 0) throw ValidationError("pretrain: no LF snapshots");

  PretrainResult out;
  MfaeModel& m = out.model;
  m.config = config;
  const Matrix x = lf.samples();
  m.lf_norm = data::NormStats::fit(x, config.normalization);
  const Matrix xn = m.lf_norm.normalize(x);

  const auto enc_dims = chain(config.d_lf, config.encoder_widths, config.latent_dim);
  const auto dec_dims = chain(config.latent_dim, config.decoder_widths, config.d_lf);
  nn::Mlp net = nn::Mlp::build(enc_dims, config.hidden_activation, nn::Activation::Identity,
                               derive_seed(config.seed, "encoder"))
                    .then(nn::Mlp::build(dec_dims, config.hidden_activation,
                                         nn::Activation::Identity,
                                         derive_seed(config.seed, "decoder")));
  nn::TrainOptions opts;
  opts.epochs = config.pretrain_epochs;
  opts.adam = config.adam;
  out.history = nn::train(net, xn, xn, opts);

  const std::size_t split = enc_dims.size() - 1;
  m.encoder = net.slice(0, split);
  m.decoder = net.slice(split, net.depth());
  m.phase = Phase::Pretrained;
  m.pretrain_names = lf.names();
  log::info("pretrain: " + std::to_string(out.history.train_loss.size()) +
            " epochs, final loss " + std::to_string(out.history.train_loss.back()));
  return out;
}

FineTuneResult fine_tune(const MfaeModel& pretrained, const Matrix& x_lf, const Matrix& y_hf,
                         const FineTuneOptions& options) {
  if (pretrained.phase != Phase::Pretrained)
    throw ValidationError("fine_tune: model is already fine-tuned");
  const MfaeConfig& c = pretrained.config;
  check_width(x_lf, c.d_lf, "fine_tune LF inputs");
  check_width(y_hf, c.d_hf, "fine_tune HF targets");
  if (x_lf.rows() != y_hf.rows()) throw ValidationError("fine_tune: LF/HF pair counts differ");
  if (x_lf.rows() == 0) throw ValidationError("fine_tune: no training pairs");

  FineTuneResult out;
  MfaeModel& m = out.model;
  m.config = c;
  m.encoder = pretrained.encoder;
  m.decoder = pretrained.decoder;
  m.lf_norm = pretrained.lf_norm;
  m.pretrain_names = pretrained.pretrain_names;
  m.finetune_names = options.names;
  // Equal resolutions share the LF statistics so any LF-to-HF offset stays
  // visible to the networks instead of being absorbed by the normalization.
  m.hf_norm = c.d_lf == c.d_hf ? m.lf_norm : data::NormStats::fit(y_hf, c.normalization);
  m.upscaler_seed = options.upscaler_seed ? *options.upscaler_seed : derive_seed(c.seed, "upscaler");
  if (c.has_upscaler()) m.upscaler = build_upscaler(c, m.upscaler_seed);
  m.encoder.set_trainable(false);
  m.decoder.set_trainable(true);
  m.phase = Phase::FineTuned;
  if (options.epochs == 0) return out;

  nn::Mlp net = m.encoder.then(m.decoder);
  if (m.upscaler) net = net.then(*m.upscaler);
  const Matrix xn = m.lf_norm.normalize(x_lf);
  const Matrix yn = m.hf_norm.normalize(y_hf);

  nn::TrainOptions opts;
  opts.epochs = options.epochs;
  opts.adam = c.finetune_adam();
  Matrix mon_x;
  Matrix mon_y;
  if (options.patience) {
    if (!options.monitor_lf || !options.monitor_hf)
      throw ValidationError("fine_tune: early stopping needs monitor pairs");
    check_width(*options.monitor_lf, c.d_lf, "fine_tune monitor LF inputs");
    check_width(*options.monitor_hf, c.d_hf, "fine_tune monitor HF targets");
    mon_x = m.lf_norm.normalize(*options.monitor_lf);
    mon_y = m.hf_norm.normalize(*options.monitor_hf);
    opts.monitor = nn::Monitor{&mon_x, &mon_y, *options.patience};
  }
  out.history = nn::train(net, xn, yn, opts);

  const std::size_t enc = m.encoder.depth();
  const std::size_t dec = m.decoder.depth();
  m.encoder = net.slice(0, enc);
  m.decoder = net.slice(enc, enc + dec);
  if (m.upscaler) m.upscaler = net.slice(enc + dec, net.depth());
  return out;
}

namespace {

Matrix forward_hf(const MfaeModel& model, const Matrix& xn) {
  Matrix y = model.decoder.predict(model.encoder.predict(xn));
  if (model.upscaler) y = model.upscaler->predict(y);
  return y;
}

}  // namespace

Matrix predict(const MfaeModel& model, const Matrix& x_lf) {
  if (model.phase != Phase::FineTuned) throw ValidationError("predict: model is not fine-tuned");
  check_width(x_lf, model.config.d_lf, "predict");
  return model.hf_norm.denormalize(forward_hf(model, model.lf_norm.normalize(x_lf)));
}

std::vector<double> predict(const MfaeModel& model, std::span<const double> x_lf) {
  const Matrix y = predict(model, Matrix(1, x_lf.size(), std::vector<double>(x_lf.begin(), x_lf.end())));
  return {y.data().begin(), y.data().end()};
}

Matrix encode(const MfaeModel& model, const Matrix& x_lf) {
  check_width(x_lf, model.config.d_lf, "encode");
  return model.encoder.predict(model.lf_norm.normalize(x_lf));
}

std::vector<double> encode(const MfaeModel& model, std::span<const double> x_lf) {
  const Matrix z = encode(model, Matrix(1, x_lf.size(), std::vector<double>(x_lf.begin(), x_lf.end())));
  return {z.data().begin(), z.data().end()};
}

Matrix reconstruct(const MfaeModel& model, const Matrix& x_lf) {
  check_width(x_lf, model.config.d_lf, "reconstruct");
  return model.lf_norm.denormalize(
      model.decoder.predict(model.encoder.predict(model.lf_norm.normalize(x_lf))));
}

std::uint64_t model_hash(const MfaeModel& model) {
  std::uint64_t h = 1469598103934665603ull;
  auto mix = [&h](std::uint64_t v) {
    h ^= v;
    h *= 1099511628211ull;
  };
  mix(model.encoder.parameter_hash());
  mix(model.decoder.parameter_hash());
  if (model.upscaler) mix(model.upscaler->parameter_hash());
  return h;
}

conformal::MscpResult calibrate_mscp(const MfaeModel& pretrained, const Matrix& x_lf,
                                     const Matrix& y_hf, const MscpSettings& settings) {
  if (x_lf.rows() != y_hf.rows()) throw ValidationError("calibrate: LF/HF pair counts differ");
  auto trainer = [&](const conformal::SplitTask& task) {
    const Matrix x_tr = x_lf.select_rows(task.train_idx);
    const Matrix y_tr = y_hf.select_rows(task.train_idx);
    const Matrix x_cal = x_lf.select_rows(task.cal_idx);
    const Matrix y_cal = y_hf.select_rows(task.cal_idx);
    FineTuneOptions opts;
    opts.epochs = settings.max_epochs;
    opts.patience = settings.patience;
    opts.monitor_lf = &x_cal;
    opts.monitor_hf = &y_cal;
    opts.upscaler_seed = task.seed;
    const FineTuneResult fit = fine_tune(pretrained, x_tr, y_tr, opts);
    conformal::SplitFit out;
    out.cal_residuals = y_cal - predict(fit.model, x_cal);
    out.epochs = fit.history.best_epoch;
    return out;
  };
  return conformal::run_mscp(x_lf.rows(), settings.mscp, trainer);
}

}  // namespace mfcp::mfae
