#include <string>

#include "mfcp/errors.hpp"
#include "mfcp/nn.hpp"

namespace mfcp::nn {

nlohmann::json to_json(const Mlp& net, std::uint64_t seed) {
  nlohmann::json layers = nlohmann::json::array();
  for (const auto& l : net.layers()) {
    layers.push_back({
        {"in", l.in()},
        {"out", l.out()},
        {"activation", to_string(l.activation)},
        {"trainable", l.trainable},
        {"weights", std::vector<double>(l.weights.data().begin(), l.weights.data().end())},
        {"biases", l.biases},
    });
  }
  return {{"format", "mfcp.mlp"},
          {"format_version", kModelFormatVersion},
          {"seed", seed},
          {"layers", std::move(layers)}};
}

Mlp mlp_from_json(const nlohmann::json& doc, std::uint64_t* seed) {
  try {
    if (doc.at("format").get<std::string>() != "mfcp.mlp")
      throw ValidationError("model document has wrong format tag");
    const int version = doc.at("format_version").get<int>();
    if (version != kModelFormatVersion)
      throw ValidationError("unsupported model format version " + std::to_string(version));
    if (seed) *seed = doc.at("seed").get<std::uint64_t>();

    std::vector<DenseLayer> layers;
    for (const auto& jl : doc.at("layers")) {
      const auto in = jl.at("in").get<std::size_t>();
      const auto out = jl.at("out").get<std::size_t>();
      DenseLayer layer;
      layer.weights = Matrix(out, in, jl.at("weights").get<std::vector<double>>());
      layer.biases = jl.at("biases").get<std::vector<double>>();
      layer.activation = activation_from_string(jl.at("activation").get<std::string>());
      layer.trainable = jl.at("trainable").get<bool>();
      layers.push_back(std::move(layer));
    }
    return Mlp(std::move(layers));
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed model document: ") + e.what());
  }
}

}  // namespace mfcp::nn
