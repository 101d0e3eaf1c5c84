#pragma once

#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

#include <nlohmann/json.hpp>

#include "mfcp/conformal.hpp"
#include "mfcp/data.hpp"
#include "mfcp/mfae.hpp"
#include "mfcp/nn.hpp"

namespace mfcp::pipeline {

/// Settings shared by the five pipeline commands. Empty paths mean "not
/// given"; the LF set defaults to the output of `degrade` in out_dir.
struct PipelineConfig {
  std::filesystem::path hf_fields;
  std::filesystem::path hf_params;
  std::filesystem::path lf_fields;
  std::filesystem::path lf_params;
  std::filesystem::path recipe;
  std::filesystem::path out_dir = "out";

  std::uint64_t seed = 0;
  double hf_fraction = 1.0;
  double test_fraction = 0.25;
  data::NormMode normalization = data::NormMode::PerNodeStandard;

  std::optional<std::size_t> latent_dim;     // default: number of parameters
  std::vector<std::size_t> encoder_widths{64, 32, 16};
  std::vector<std::size_t> decoder_widths{16, 32, 16};
  std::optional<std::size_t> upscaler_hidden;
  bool force_adapter = false;
  nn::Activation hidden_activation = nn::Activation::Relu;
  std::size_t pretrain_epochs = 2000;
  double learning_rate = 1e-3;
  std::optional<double> finetune_learning_rate;
  std::size_t finetune_max_epochs = 5000;
  std::size_t patience = 100;

  double delta = 0.1;
  conformal::ScoreKind score = conformal::ScoreKind::LInf;
  std::size_t mscp_splits = 30;
  double cal_fraction = 0.3;
  double s_floor = conformal::kSFloor;
  std::size_t workers = 0;
  bool plot = true;

  friend bool operator==(const PipelineConfig&, const PipelineConfig&) = default;
};

/// Flat `key = value` text; parse_config(to_text(c)) == c.
std::string to_text(const PipelineConfig& config);
/// Parses the text form. Relative paths are resolved against `base_dir`
/// when it is not empty. Unknown keys and malformed values are errors.
PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir = {});
PipelineConfig load_config(const std::filesystem::path& file);

struct Seeds {
  std::uint64_t split;
  std::uint64_t init;
  std::uint64_t mscp;
  std::uint64_t finetune;
  std::uint64_t lofi;
};

/// Named sub-seeds of the master seed.
Seeds derive_seeds(std::uint64_t master);

enum class Command { Degrade, Pretrain, Calibrate, Finetune, Evaluate };

std::string to_string(Command c);
Command command_from_string(const std::string& s);

/// Checks that every file the command reads exists and that out_dir can be
/// created. Throws ValidationError otherwise.
void validate(const PipelineConfig& config, Command command);

/// Artifact locations inside out_dir.
struct Layout {
  std::filesystem::path root;
  std::filesystem::path lf_fields() const { return root / "lf.csv"; }
  std::filesystem::path lf_params() const { return root / "lf_params.csv"; }
  std::filesystem::path provenance() const { return root / "provenance.json"; }
  std::filesystem::path split() const { return root / "split.json"; }
  std::filesystem::path pretrained() const { return root / "pretrained"; }
  std::filesystem::path pretrain_history() const { return root / "pretrain_history.csv"; }
  std::filesystem::path calibration() const { return root / "calibration.json"; }
  std::filesystem::path model() const { return root / "model"; }
  std::filesystem::path finetune_history() const { return root / "finetune_history.csv"; }
  std::filesystem::path report() const { return root / "report.json"; }
};

inline constexpr int kReportSchemaVersion = 1;

/// Applies the recipe to the HF set; writes lf.csv, lf_params.csv and
/// provenance.json.
void cmd_degrade(const PipelineConfig& config);
/// Draws the stratified split and pretrains on every LF snapshot outside the
/// test set; writes split.json, pretrained/ and pretrain_history.csv.
void cmd_pretrain(const PipelineConfig& config);
/// Runs MSCP on the HF training pairs; writes calibration.json.
void cmd_calibrate(const PipelineConfig& config);
/// Fine-tunes for exactly E* epochs on all HF training pairs; writes model/
/// and finetune_history.csv.
void cmd_finetune(const PipelineConfig& config);
/// Scores the final model and its bands on the test and complementary sets;
/// writes report.json, predictions_<set>.csv and an optional SVG plot.
nlohmann::json cmd_evaluate(const PipelineConfig& config);

void run(Command command, const PipelineConfig& config);

/// Reads a JSON file, raising ValidationError when missing or malformed.
nlohmann::json read_json_file(const std::filesystem::path& path);
/// Writes `doc` with stable formatting.
void write_json_file(const nlohmann::json& doc, const std::filesystem::path& path);

}  // namespace mfcp::pipeline
