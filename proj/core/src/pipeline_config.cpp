#include <charconv>
#include <fstream>
#include <functional>
#include <map>
#include <set>
#include <sstream>

#include "mfcp/errors.hpp"
#include "mfcp/pipeline.hpp"
#include "mfcp/rng.hpp"

namespace mfcp::pipeline {

namespace {

std::string join(const std::vector<std::size_t>& v) {
  std::string out;
  for (std::size_t i = 0; i < v.size(); ++i) out += (i ? "," : "") + std::to_string(v[i]);
  return out;
}

std::string trim(std::string_view s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string_view::npos) return {};
  const auto e = s.find_last_not_of(" \t\r");
  return std::string(s.substr(b, e - b + 1));
}

template <class T>
T parse_number(const std::string& key, const std::string& value) {
  T out{};
  const char* first = value.data();
  const char* last = value.data() + value.size();
  const auto res = std::from_chars(first, last, out);
  if (value.empty() || res.ec != std::errc() || res.ptr != last)
    throw ValidationError("config key '" + key + "': cannot parse '" + value + "'");
  return out;
}

bool parse_bool(const std::string& key, const std::string& value) {
  if (value == "true") return true;
  if (value == "false") return false;
  throw ValidationError("config key '" + key + "': expected true or false, got '" + value + "'");
}

std::vector<std::size_t> parse_list(const std::string& key, const std::string& value) {
  std::vector<std::size_t> out;
  if (value.empty()) return out;
  std::stringstream ss(value);
  std::string item;
  while (std::getline(ss, item, ',')) out.push_back(parse_number<std::size_t>(key, trim(item)));
  return out;
}

std::filesystem::path parse_path(const std::string& value, const std::filesystem::path& base) {
  std::filesystem::path p(value);
  if (!base.empty() && p.is_relative()) p = (base / p).lexically_normal();
  return p;
}

}  // namespace

std::string to_text(const PipelineConfig& c) {
  std::ostringstream out;
  auto put = [&out](const char* key, const std::string& value) {
    out << key << " = " << value << '\n';
  };
  auto put_path = [&](const char* key, const std::filesystem::path& p) {
    if (!p.empty()) put(key, p.string());
  };
  out << "# paths\n";
  put_path("hf_fields", c.hf_fields);
  put_path("hf_params", c.hf_params);
  put_path("lf_fields", c.lf_fields);
  put_path("lf_params", c.lf_params);
  put_path("recipe", c.recipe);
  put_path("out_dir", c.out_dir);
  out << "# split\n";
  put("seed", std::to_string(c.seed));
  put("hf_fraction", data::format_double(c.hf_fraction));
  put("test_fraction", data::format_double(c.test_fraction));
  put("normalization", data::to_string(c.normalization));
  out << "# model\n";
  if (c.latent_dim) put("latent_dim", std::to_string(*c.latent_dim));
  put("encoder_widths", join(c.encoder_widths));
  put("decoder_widths", join(c.decoder_widths));
  if (c.upscaler_hidden) put("upscaler_hidden", std::to_string(*c.upscaler_hidden));
  put("force_adapter", c.force_adapter ? "true" : "false");
  put("hidden_activation", nn::to_string(c.hidden_activation));
  put("pretrain_epochs", std::to_string(c.pretrain_epochs));
  put("learning_rate", data::format_double(c.learning_rate));
  if (c.finetune_learning_rate)
    put("finetune_learning_rate", data::format_double(*c.finetune_learning_rate));
  put("finetune_max_epochs", std::to_string(c.finetune_max_epochs));
  put("patience", std::to_string(c.patience));
  out << "# calibration\n";
  put("delta", data::format_double(c.delta));
  put("score", conformal::to_string(c.score));
  put("mscp_splits", std::to_string(c.mscp_splits));
  put("cal_fraction", data::format_double(c.cal_fraction));
  put("s_floor", data::format_double(c.s_floor));
  put("workers", std::to_string(c.workers));
  put("plot", c.plot ? "true" : "false");
  return out.str();
}

PipelineConfig parse_config(std::string_view text, const std::filesystem::path& base_dir) {
  PipelineConfig c;
  using Setter = std::function<void(const std::string&, const std::string&)>;
  const std::map<std::string, Setter> setters = {
      {"hf_fields", [&](auto&, auto& v) { c.hf_fields = parse_path(v, base_dir); }},
      {"hf_params", [&](auto&, auto& v) { c.hf_params = parse_path(v, base_dir); }},
      {"lf_fields", [&](auto&, auto& v) { c.lf_fields = parse_path(v, base_dir); }},
      {"lf_params", [&](auto&, auto& v) { c.lf_params = parse_path(v, base_dir); }},
      {"recipe", [&](auto&, auto& v) { c.recipe = parse_path(v, base_dir); }},
      {"out_dir", [&](auto&, auto& v) { c.out_dir = parse_path(v, base_dir); }},
      {"seed", [&](auto& k, auto& v) { c.seed = parse_number<std::uint64_t>(k, v); }},
      {"hf_fraction", [&](auto& k, auto& v) { c.hf_fraction = parse_number<double>(k, v); }},
      {"test_fraction", [&](auto& k, auto& v) { c.test_fraction = parse_number<double>(k, v); }},
      {"normalization", [&](auto&, auto& v) { c.normalization = data::norm_mode_from_string(v); }},
      {"latent_dim", [&](auto& k, auto& v) { c.latent_dim = parse_number<std::size_t>(k, v); }},
      {"encoder_widths", [&](auto& k, auto& v) { c.encoder_widths = parse_list(k, v); }},
      {"decoder_widths", [&](auto& k, auto& v) { c.decoder_widths = parse_list(k, v); }},
      {"upscaler_hidden",
       [&](auto& k, auto& v) { c.upscaler_hidden = parse_number<std::size_t>(k, v); }},
      {"force_adapter", [&](auto& k, auto& v) { c.force_adapter = parse_bool(k, v); }},
      {"hidden_activation",
       [&](auto&, auto& v) { c.hidden_activation = nn::activation_from_string(v); }},
      {"pretrain_epochs",
       [&](auto& k, auto& v) { c.pretrain_epochs = parse_number<std::size_t>(k, v); }},
      {"learning_rate", [&](auto& k, auto& v) { c.learning_rate = parse_number<double>(k, v); }},
      {"finetune_learning_rate",
       [&](auto& k, auto& v) { c.finetune_learning_rate = parse_number<double>(k, v); }},
      {"finetune_max_epochs",
       [&](auto& k, auto& v) { c.finetune_max_epochs = parse_number<std::size_t>(k, v); }},
      {"patience", [&](auto& k, auto& v) { c.patience = parse_number<std::size_t>(k, v); }},
      {"delta", [&](auto& k, auto& v) { c.delta = parse_number<double>(k, v); }},
      {"score", [&](auto&, auto& v) { c.score = conformal::score_kind_from_string(v); }},
      {"mscp_splits", [&](auto& k, auto& v) { c.mscp_splits = parse_number<std::size_t>(k, v); }},
      {"cal_fraction", [&](auto& k, auto& v) { c.cal_fraction = parse_number<double>(k, v); }},
      {"s_floor", [&](auto& k, auto& v) { c.s_floor = parse_number<double>(k, v); }},
      {"workers", [&](auto& k, auto& v) { c.workers = parse_number<std::size_t>(k, v); }},
      {"plot", [&](auto& k, auto& v) { c.plot = parse_bool(k, v); }},
  };

  std::set<std::string> seen;
  std::istringstream in{std::string(text)};
  std::string line;
  std::size_t line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    if (trim(line).empty()) continue;
    const auto eq = line.find('=');
    if (eq == std::string::npos)
      throw ValidationError("config line " + std::to_string(line_no) + ": expected key = value");
    const std::string key = trim(std::string_view(line).substr(0, eq));
    const std::string value = trim(std::string_view(line).substr(eq + 1));
    const auto it = setters.find(key);
    if (it == setters.end())
      throw ValidationError("config line " + std::to_string(line_no) + ": unknown key '" + key + "'");
    if (!seen.insert(key).second)
      throw ValidationError("config line " + std::to_string(line_no) + ": duplicate key '" + key + "'");
    it->second(key, value);
  }
  return c;
}

PipelineConfig load_config(const std::filesystem::path& file) {
  std::ifstream in(file);
  if (!in) throw ValidationError("cannot open config '" + file.string() + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  const auto base = std::filesystem::absolute(file).parent_path();
  return parse_config(buf.str(), base);
}

Seeds derive_seeds(std::uint64_t master) {
  return {derive_seed(master, "split"), derive_seed(master, "init"), derive_seed(master, "mscp"),
          derive_seed(master, "finetune"), derive_seed(master, "lofi")};
}

std::string to_string(Command c) {
  switch (c) {
    case Command::Degrade: return "degrade";
    case Command::Pretrain: return "pretrain";
    case Command::Calibrate: return "calibrate";
    case Command::Finetune: return "finetune";
    case Command::Evaluate: return "evaluate";
  }
  return "unknown";
}

Command command_from_string(const std::string& s) {
  for (Command c : {Command::Degrade, Command::Pretrain, Command::Calibrate, Command::Finetune,
                    Command::Evaluate})
    if (to_string(c) == s) return c;
  throw ValidationError("unknown command '" + s + "'");
}

}  // namespace mfcp::pipeline
