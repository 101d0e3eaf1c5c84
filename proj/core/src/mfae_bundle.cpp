#include <fstream>

#include "mfcp/errors.hpp"
#include "mfcp/mfae.hpp"
#include "mfcp/rng.hpp"

namespace mfcp::mfae {

namespace {

constexpr int kBundleFormatVersion = 1;

void write_json(const nlohmann::json& doc, const std::filesystem::path& path) {
  std::ofstream out(path);
  if (!out) throw ValidationError("cannot write '" + path.string() + "'");
  out << doc.dump(1) << '\n';
  if (!out) throw ValidationError("failed writing '" + path.string() + "'");
}

nlohmann::json read_json(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open '" + path.string() + "'");
  try {
    return nlohmann::json::parse(in);
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("'" + path.string() + "' is not valid JSON: " + e.what());
  }
}

}  // namespace

void save_bundle(const MfaeModel& model, const std::filesystem::path& dir) {
  std::error_code ec;
  std::filesystem::create_directories(dir, ec);
  if (ec) throw ValidationError("cannot create '" + dir.string() + "': " + ec.message());
  const std::uint64_t seed = model.config.seed;
  write_json(nn::to_json(model.encoder, derive_seed(seed, "encoder")), dir / "encoder.json");
  write_json(nn::to_json(model.decoder, derive_seed(seed, "decoder")), dir / "decoder.json");
  const auto up_path = dir / "upscaler.json";
  if (model.upscaler) {
    write_json(nn::to_json(*model.upscaler, model.upscaler_seed), up_path);
  } else {
    std::filesystem::remove(up_path, ec);
  }
  nlohmann::json meta = {
      {"format", "mfcp.mfae"},
      {"format_version", kBundleFormatVersion},
      {"config", to_json(model.config)},
      {"phase", to_string(model.phase)},
      {"lf_norm", data::to_json(model.lf_norm)},
      {"hf_norm", data::to_json(model.hf_norm)},
      {"seeds", {{"config", seed}, {"upscaler", model.upscaler_seed}}},
      {"has_upscaler", model.upscaler.has_value()},
      {"provenance",
       {{"pretrain_names", model.pretrain_names}, {"finetune_names", model.finetune_names}}},
      {"hash", model_hash(model)},
  };
  write_json(meta, dir / "meta.json");
}

MfaeModel load_bundle(const std::filesystem::path& dir) {
  const nlohmann::json meta = read_json(dir / "meta.json");
  try {
    if (meta.at("format").get<std::string>() != "mfcp.mfae")
      throw ValidationError("'" + (dir / "meta.json").string() + "' is not a model bundle");
    if (meta.at("format_version").get<int>() != kBundleFormatVersion)
      throw ValidationError("unsupported model bundle version");
    MfaeModel m;
    m.config = config_from_json(meta.at("config"));
    m.phase = phase_from_string(meta.at("phase").get<std::string>());
    m.lf_norm = data::norm_from_json(meta.at("lf_norm"));
    m.hf_norm = data::norm_from_json(meta.at("hf_norm"));
    m.upscaler_seed = meta.at("seeds").at("upscaler").get<std::uint64_t>();
    m.pretrain_names = meta.at("provenance").at("pretrain_names").get<std::vector<std::string>>();
    m.finetune_names = meta.at("provenance").at("finetune_names").get<std::vector<std::string>>();
    m.encoder = nn::mlp_from_json(read_json(dir / "encoder.json"));
    m.decoder = nn::mlp_from_json(read_json(dir / "decoder.json"));
    if (meta.at("has_upscaler").get<bool>())
      m.upscaler = nn::mlp_from_json(read_json(dir / "upscaler.json"));

    if (m.encoder.input_size() != m.config.d_lf || m.encoder.output_size() != m.config.latent_dim ||
        m.decoder.input_size() != m.config.latent_dim || m.decoder.output_size() != m.config.d_lf)
      throw ValidationError("model bundle networks do not match its configuration");
    if (m.upscaler && (m.upscaler->input_size() != m.config.d_lf ||
                       m.upscaler->output_size() != m.config.d_hf))
      throw ValidationError("model bundle up-scaler does not match its configuration");
    if (meta.at("hash").get<std::uint64_t>() != model_hash(m))
      throw ValidationError("model bundle parameters do not match the recorded hash");
    return m;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError("malformed model bundle: " + std::string(e.what()));
  }
}

}  // namespace mfcp::mfae
