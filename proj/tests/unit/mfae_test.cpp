#include <gtest/gtest.h>

#include <cmath>
#include <filesystem>
#include <fstream>

#include "gradcheck.hpp"
#include "mfcp/errors.hpp"
#include "mfcp/mfae.hpp"
#include "synthetic.hpp"

using namespace mfcp;
using namespace mfcp::mfae;
namespace fs = std::filesystem;

namespace {

MfaeConfig small_config(std::size_t d_lf, std::size_t d_hf) {
  MfaeConfig c;
  c.d_lf = d_lf;
  c.d_hf = d_hf;
  c.encoder_widths = {12, 8};
  c.latent_dim = 3;
  c.decoder_widths = {8, 12};
  c.seed = 7;
  c.pretrain_epochs = 200;
  c.adam.lr = 3e-3;
  return c;
}

struct Fixture {
  data::SnapshotSet lf = synth::airfoil_family(30, 20, 1);
  data::SnapshotSet hf = synth::airfoil_family(30, 40, 1);
};

std::vector<std::size_t> layer_dims(const nn::Mlp& net) {
  std::vector<std::size_t> d{net.input_size()};
  for (const auto& l : net.layers()) d.push_back(l.out());
  return d;
}

}  // namespace

TEST(Config, PresetArchitectures) {
  const auto a = MfaeConfig::airfoil(104);
  EXPECT_EQ(a.d_hf, 260u);
  EXPECT_TRUE(a.has_upscaler());
  EXPECT_EQ(a.upscaler_width(), 156u);
  EXPECT_FALSE(MfaeConfig::airfoil(260).has_upscaler());
  const auto w = MfaeConfig::wing();
  EXPECT_EQ(w.latent_dim, 2u);
  EXPECT_EQ(w.upscaler_width(), 8000u);
  EXPECT_EQ(MfaeConfig::airfoil(75).upscaler_width(), 113u);
}

TEST(Config, FinetuneRateDefaultsToTenth) {
  MfaeConfig c = small_config(4, 4);
  c.adam.lr = 0.02;
  EXPECT_DOUBLE_EQ(c.finetune_adam().lr, 0.002);
  c.finetune_lr = 0.5;
  EXPECT_EQ(c.finetune_adam().lr, 0.5);
}

TEST(Config, ValidationAndJson) {
  MfaeConfig c = small_config(10, 20);
  c.upscaler_hidden = 17;
  c.finetune_lr = 1e-4;
  EXPECT_EQ(config_from_json(nlohmann::json::parse(to_json(c).dump())), c);
  c.latent_dim = 0;
  EXPECT_THROW(c.validate(), ValidationError);
  c = small_config(0, 20);
  EXPECT_THROW(c.validate(), ValidationError);
}

TEST(Pretrain, ArchitectureAndLossDrop) {
  Fixture f;
  const auto res = pretrain(small_config(20, 40), f.lf);
  EXPECT_EQ(layer_dims(res.model.encoder), (std::vector<std::size_t>{20, 12, 8, 3}));
  EXPECT_EQ(layer_dims(res.model.decoder), (std::vector<std::size_t>{3, 8, 12, 20}));
  EXPECT_EQ(res.model.encoder.layers().back().activation, nn::Activation::Identity);
  EXPECT_EQ(res.model.decoder.layers().back().activation, nn::Activation::Identity);
  EXPECT_FALSE(res.model.upscaler.has_value());
  EXPECT_EQ(res.model.phase, Phase::Pretrained);
  EXPECT_EQ(res.model.pretrain_names, f.lf.names());
  EXPECT_LT(res.history.train_loss.back(), 0.5 * res.history.train_loss.front());
  EXPECT_EQ(encode(res.model, f.lf.samples()).cols(), 3u);
  EXPECT_EQ(reconstruct(res.model, f.lf.samples()).cols(), 20u);
}

TEST(Pretrain, DeterministicAndSeedSensitive) {
  Fixture f;
  auto c = small_config(20, 40);
  c.pretrain_epochs = 20;
  const auto a = pretrain(c, f.lf).model;
  EXPECT_EQ(model_hash(a), model_hash(pretrain(c, f.lf).model));
  c.seed = 8;
  EXPECT_NE(model_hash(a), model_hash(pretrain(c, f.lf).model));
}

TEST(Pretrain, RejectsWrongResolution) {
  Fixture f;
  EXPECT_THROW(pretrain(small_config(21, 40), f.lf), ValidationError);
}

TEST(FineTune, EncoderFrozenAndUpscalerBuilt) {
  Fixture f;
  const auto pre = pretrain(small_config(20, 40), f.lf).model;
  FineTuneOptions o;
  o.epochs = 50;
  o.names = f.hf.names();
  const auto ft = fine_tune(pre, f.lf.samples(), f.hf.samples(), o);
  for (std::size_t l = 0; l < pre.encoder.depth(); ++l) {
    EXPECT_EQ(ft.model.encoder.layer(l).weights, pre.encoder.layer(l).weights);
    EXPECT_EQ(ft.model.encoder.layer(l).biases, pre.encoder.layer(l).biases);
    EXPECT_FALSE(ft.model.encoder.layer(l).trainable);
  }
  EXPECT_NE(ft.model.decoder, pre.decoder);
  ASSERT_TRUE(ft.model.upscaler.has_value());
  EXPECT_EQ(layer_dims(*ft.model.upscaler), (std::vector<std::size_t>{20, 30, 40}));
  EXPECT_EQ(ft.model.phase, Phase::FineTuned);
  EXPECT_EQ(ft.model.finetune_names, f.hf.names());
  EXPECT_EQ(ft.history.train_loss.size(), 50u);
  EXPECT_LT(ft.history.train_loss.back(), ft.history.train_loss.front());
  const Matrix y = predict(ft.model, f.lf.samples());
  EXPECT_EQ(y.rows(), 30u);
  EXPECT_EQ(y.cols(), 40u);
  const auto row = f.lf.samples().row(3);
  const auto single = predict(ft.model, row);
  for (std::size_t j = 0; j < 40; ++j) EXPECT_NEAR(single[j], y(3, j), 1e-12);
}

TEST(FineTune, ZeroEpochsAndPhaseGuards) {
  Fixture f;
  const auto pre = pretrain(small_config(20, 40), f.lf).model;
  EXPECT_THROW(predict(pre, f.lf.samples()), ValidationError);
  FineTuneOptions o;
  const auto ft0 = fine_tune(pre, f.lf.samples(), f.hf.samples(), o);
  EXPECT_EQ(ft0.model.decoder, pre.decoder);
  EXPECT_EQ(ft0.model.phase, Phase::FineTuned);
  EXPECT_THROW(fine_tune(ft0.model, f.lf.samples(), f.hf.samples(), o), ValidationError);
  EXPECT_THROW(fine_tune(pre, f.lf.samples(), f.lf.samples(), o), ValidationError);
}

TEST(FineTune, SameResolutionSkipsUpscalerUnlessForced) {
  const auto lf = synth::airfoil_family(20, 16, 2);
  auto c = small_config(16, 16);
  c.pretrain_epochs = 10;
  const auto pre = pretrain(c, lf).model;
  FineTuneOptions o;
  o.epochs = 5;
  const auto ft = fine_tune(pre, lf.samples(), lf.samples(), o);
  EXPECT_FALSE(ft.model.upscaler.has_value());
  EXPECT_EQ(ft.model.hf_norm, ft.model.lf_norm);
  c.force_adapter = true;
  const auto forced = fine_tune(pretrain(c, lf).model, lf.samples(), lf.samples(), o);
  ASSERT_TRUE(forced.model.upscaler.has_value());
  EXPECT_EQ(forced.model.upscaler->output_size(), 16u);
}

TEST(FineTune, AdapterAbsorbsConstantBias) {
  const auto lf = synth::airfoil_family(20, 16, 2);
  const double bias = 0.5;
  Matrix y = lf.samples();
  for (std::size_t i = 0; i < y.size(); ++i) y.data()[i] += bias;
  auto c = small_config(16, 16);
  c.pretrain_epochs = 3000;
  FineTuneOptions o;
  o.epochs = 20000;
  double mse[2];
  for (int forced = 0; forced < 2; ++forced) {
    c.force_adapter = forced == 1;
    const auto ft = fine_tune(pretrain(c, lf).model, lf.samples(), y, o).model;
    const Matrix p = predict(ft, lf.samples());
    double s = 0.0;
    for (std::size_t i = 0; i < p.size(); ++i) s += std::pow(p.data()[i] - y.data()[i], 2);
    mse[forced] = s / static_cast<double>(p.size());
  }
  EXPECT_LE(mse[1], 1e-3 * bias * bias);
  EXPECT_LT(mse[1], mse[0]);
}

TEST(FineTune, EarlyStoppingOnMonitor) {
  Fixture f;
  const auto pre = pretrain(small_config(20, 40), f.lf).model;
  const Matrix x = f.lf.samples(), y = f.hf.samples();
  const std::vector<std::size_t> tr{0, 1, 2, 3, 4, 5, 6, 7, 8, 9};
  const std::vector<std::size_t> mo{20, 21, 22, 23};
  const Matrix mx = x.select_rows(mo), my = y.select_rows(mo);
  FineTuneOptions o;
  o.epochs = 3000;
  o.patience = 15;
  o.monitor_lf = &mx;
  o.monitor_hf = &my;
  const auto ft = fine_tune(pre, x.select_rows(tr), y.select_rows(tr), o);
  EXPECT_LE(ft.history.best_epoch, ft.history.train_loss.size());
  if (ft.history.stopped_early) {
    EXPECT_EQ(ft.history.train_loss.size(), ft.history.best_epoch + 15);
  }
}

TEST(FineTune, CombinedGradientMatchesFiniteDifferences) {
  // The joint decoder + up-scaler net trained in phase two.
  Fixture f;
  const auto pre = pretrain(small_config(20, 40), f.lf).model;
  FineTuneOptions o;
  const auto ft = fine_tune(pre, f.lf.samples(), f.hf.samples(), o).model;
  nn::Mlp joint = ft.encoder.then(ft.decoder).then(*ft.upscaler);
  for (std::size_t l = 0; l < ft.encoder.depth(); ++l) joint.set_trainable(l, false);
  const Matrix x = ft.lf_norm.normalize(f.lf.samples()).select_rows(std::vector<std::size_t>{0, 1, 2, 3});
  const Matrix t = ft.hf_norm.normalize(f.hf.samples()).select_rows(std::vector<std::size_t>{0, 1, 2, 3});
  const auto r = gradcheck::check(joint, x, t, 6, 3);
  EXPECT_LE(r.worst, 1e-5);
}

TEST(Bundle, RoundTripAndTamperDetection) {
  Fixture f;
  auto c = small_config(20, 40);
  c.pretrain_epochs = 5;
  const auto pre = pretrain(c, f.lf).model;
  FineTuneOptions o;
  o.epochs = 3;
  o.names = {"case_0000"};
  const auto ft = fine_tune(pre, f.lf.samples(), f.hf.samples(), o).model;
  const fs::path dir = fs::temp_directory_path() / "mfcp_bundle_test";
  fs::remove_all(dir);
  save_bundle(ft, dir);
  EXPECT_TRUE(fs::exists(dir / "upscaler.json"));
  const auto back = load_bundle(dir);
  EXPECT_EQ(back, ft);
  EXPECT_EQ(predict(back, f.lf.samples()), predict(ft, f.lf.samples()));

  save_bundle(pre, dir);
  EXPECT_FALSE(fs::exists(dir / "upscaler.json"));
  EXPECT_EQ(load_bundle(dir), pre);

  auto meta = nlohmann::json::parse(std::ifstream(dir / "meta.json"));
  meta["hash"] = 1;
  std::ofstream(dir / "meta.json") << meta.dump();
  EXPECT_THROW(load_bundle(dir), ValidationError);
  fs::remove_all(dir);
}

TEST(Mscp, CalibrationOnTinyModel) {
  Fixture f;
  auto c = small_config(20, 40);
  c.pretrain_epochs = 50;
  const auto pre = pretrain(c, f.lf).model;
  MscpSettings s;
  s.mscp.splits = 3;
  s.mscp.seed = 4;
  s.max_epochs = 60;
  s.patience = 10;
  const auto res = calibrate_mscp(pre, f.lf.samples(), f.hf.samples(), s);
  EXPECT_EQ(res.r_star.size(), 40u);
  EXPECT_EQ(res.splits.size(), 3u);
  EXPECT_LE(res.e_star, 60u);
  for (double r : res.r_star) EXPECT_GT(r, 0.0);
  const auto again = calibrate_mscp(pre, f.lf.samples(), f.hf.samples(), s);
  EXPECT_EQ(again.r_star, res.r_star);
  EXPECT_EQ(again.e_star, res.e_star);
}
