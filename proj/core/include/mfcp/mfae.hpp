#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfcp/conformal.hpp"
#include "mfcp/data.hpp"
#include "mfcp/nn.hpp"

namespace mfcp::mfae {

using linalg::Matrix;

struct MfaeConfig {
  std::size_t d_lf = 0;
  std::size_t d_hf = 0;
  std::vector<std::size_t> encoder_widths{64, 32, 16};
  std::size_t latent_dim = 3;
  std::vector<std::size_t> decoder_widths{16, 32, 16};
  std::optional<std::size_t> upscaler_hidden;   // default ceil(1.5 * d_lf)
  bool force_adapter = false;
  nn::Activation hidden_activation = nn::Activation::Relu;
  data::NormMode normalization = data::NormMode::PerNodeStandard;
  std::uint64_t seed = 0;
  std::size_t pretrain_epochs = 2000;
  nn::AdamConfig adam{};
  std::optional<double> finetune_lr;            // default adam.lr / 10

  /// Throws ValidationError on an inconsistent configuration.
  void validate() const;

  bool has_upscaler() const noexcept { return d_lf != d_hf || force_adapter; }
  std::size_t upscaler_width() const;
  nn::AdamConfig finetune_adam() const;

  /// Airfoil-database architecture for a given input resolution (D_HF = 260).
  static MfaeConfig airfoil(std::size_t d_lf);
  /// Wing-database architecture (4000 -> 49574).
  static MfaeConfig wing();

  friend bool operator==(const MfaeConfig&, const MfaeConfig&) = default;
};

nlohmann::json to_json(const MfaeConfig& config);
MfaeConfig config_from_json(const nlohmann::json& doc);

enum class Phase { Pretrained, FineTuned };

std::string to_string(Phase p);
Phase phase_from_string(const std::string& s);

/// Encoder f, decoder g and optional up-scaler h. Inputs and outputs of the
/// public functions are in physical units; the networks see normalized data.
struct MfaeModel {
  MfaeConfig config;
  nn::Mlp encoder;
  nn::Mlp decoder;
  std::optional<nn::Mlp> upscaler;
  Phase phase = Phase::Pretrained;
  data::NormStats lf_norm;
  data::NormStats hf_norm;
  std::uint64_t upscaler_seed = 0;
  std::vector<std::string> pretrain_names;   // snapshots seen in phase one
  std::vector<std::string> finetune_names;   // snapshots seen in phase two

  friend bool operator==(const MfaeModel&, const MfaeModel&) = default;
};

struct PretrainResult {
  MfaeModel model;
  nn::TrainHistory history;
};

/// Phase one: trains encoder and decoder to reconstruct the LF snapshots.
PretrainResult pretrain(const MfaeConfig& config, const data::SnapshotSet& lf);

struct FineTuneOptions {
  std::size_t epochs = 0;                      // 0 returns the untrained composition
  std::optional<std::size_t> patience;         // early stopping on the monitor pairs
  const Matrix* monitor_lf = nullptr;          // physical units, samples x d_lf
  const Matrix* monitor_hf = nullptr;          // physical units, samples x d_hf
  std::optional<std::uint64_t> upscaler_seed;  // default derived from config.seed
  std::vector<std::string> names;              // recorded as fine-tune provenance
};

struct FineTuneResult {
  MfaeModel model;
  nn::TrainHistory history;
};

/// Phase two: freezes the encoder, fine-tunes the decoder and trains a freshly
/// initialized up-scaler on paired samples (rows of x_lf / y_hf).
FineTuneResult fine_tune(const MfaeModel& pretrained, const Matrix& x_lf, const Matrix& y_hf,
                         const FineTuneOptions& options);

/// HF prediction h(g(f(x))) for each row of x_lf, de-normalized. Requires a
/// fine-tuned model.
Matrix predict(const MfaeModel& model, const Matrix& x_lf);
std::vector<double> predict(const MfaeModel& model, std::span<const double> x_lf);

/// Latent coordinates f(x) for each row of x_lf.
Matrix encode(const MfaeModel& model, const Matrix& x_lf);
std::vector<double> encode(const MfaeModel& model, std::span<const double> x_lf);

/// LF reconstruction g(f(x)), de-normalized with the LF statistics.
Matrix reconstruct(const MfaeModel& model, const Matrix& x_lf);

/// Digest over every network of the model.
std::uint64_t model_hash(const MfaeModel& model);

/// Writes encoder.json, decoder.json, upscaler.json (when present) and
/// meta.json into `dir`, creating it if needed.
void save_bundle(const MfaeModel& model, const std::filesystem::path& dir);
MfaeModel load_bundle(const std::filesystem::path& dir);

struct MscpSettings {
  conformal::MscpOptions mscp;
  std::size_t max_epochs = 5000;
  std::size_t patience = 100;
};

/// Multi-split calibration of a pretrained model on HF training pairs: each
/// split fine-tunes a clone with early stopping on its calibration subset and
/// reports physical-unit residuals on that subset.
conformal::MscpResult calibrate_mscp(const MfaeModel& pretrained, const Matrix& x_lf,
                                     const Matrix& y_hf, const MscpSettings& settings);

}  // namespace mfcp::mfae
