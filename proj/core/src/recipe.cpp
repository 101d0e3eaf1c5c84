#include <string>

#include "mfcp/errors.hpp"
#include "mfcp/lofi.hpp"
#include "mfcp/rng.hpp"

namespace mfcp::lofi {

namespace {

template <class... Ts>
struct Overloaded : Ts... {
  using Ts::operator()...;
};
template <class... Ts>
Overloaded(Ts...) -> Overloaded<Ts...>;

std::uint64_t stage_seed(const DegradationRecipe& r, std::size_t index,
                         const std::optional<std::uint64_t>& explicit_seed) {
  return explicit_seed ? *explicit_seed : derive_seed(r.seed, "lofi.stage", index);
}

void put_seed(nlohmann::json& j, const std::optional<std::uint64_t>& seed) {
  if (seed) j["seed"] = *seed;
}

std::optional<std::uint64_t> get_seed(const nlohmann::json& j) {
  if (!j.contains("seed")) return std::nullopt;
  return j.at("seed").get<std::uint64_t>();
}

const data::SnapshotSet& require_coords(const data::SnapshotSet& s, const char* stage) {
  if (s.coords().cols() == 0)
    throw ValidationError(std::string(stage) + " stage needs node coordinates");
  return s;
}

}  // namespace

void DegradationRecipe::validate() const {
  for (std::size_t i = 0; i < stages.size(); ++i) {
    const std::string where = "recipe stage " + std::to_string(i) + ": ";
    std::visit(Overloaded{
                   [&](const PodStage& s) {
                     if (!(s.energy > 0.0 && s.energy <= 1.0))
                       throw ValidationError(where + "energy must lie in (0, 1]");
                   },
                   [&](const FpsStage& s) {
                     if (s.m < 1) throw ValidationError(where + "m must be at least 1");
                   },
                   [&](const KnnStage& s) {
                     if (s.m < 1 || s.k < 1) throw ValidationError(where + "m and k must be at least 1");
                   },
                   [&](const VoxelStage& s) {
                     if (!(s.size > 0.0)) throw ValidationError(where + "voxel size must be positive");
                   },
                   [&](const QuantizeStage& s) {
                     if (s.levels < 2) throw ValidationError(where + "levels must be at least 2");
                   },
                   [&](const NoiseStage& s) {
                     if (!(s.sigma >= 0.0)) throw ValidationError(where + "sigma must be non-negative");
                   },
                   [&](const BiasStage&) {},
               },
               stages[i]);
  }
}

nlohmann::json to_json(const DegradationRecipe& recipe) {
  nlohmann::json stages = nlohmann::json::array();
  for (const auto& stage : recipe.stages) {
    stages.push_back(std::visit(
        Overloaded{
            [](const PodStage& s) -> nlohmann::json {
              return {{"type", "pod_truncate"}, {"energy", s.energy}};
            },
            [](const FpsStage& s) -> nlohmann::json {
              nlohmann::json j = {{"type", "fps"}, {"m", s.m}};
              put_seed(j, s.seed);
              return j;
            },
            [](const KnnStage& s) -> nlohmann::json {
              nlohmann::json j = {{"type", "knn_average"}, {"m", s.m}, {"k", s.k}};
              put_seed(j, s.seed);
              return j;
            },
            [](const VoxelStage& s) -> nlohmann::json {
              return {{"type", "voxelize"}, {"size", s.size}, {"pca_align", s.pca_align}};
            },
            [](const QuantizeStage& s) -> nlohmann::json {
              return {{"type", "quantize"}, {"levels", s.levels}};
            },
            [](const NoiseStage& s) -> nlohmann::json {
              nlohmann::json j = {{"type", "noise"}, {"sigma", s.sigma}};
              put_seed(j, s.seed);
              return j;
            },
            [](const BiasStage& s) -> nlohmann::json { return {{"type", "bias"}, {"c", s.c}}; },
        },
        stage));
  }
  return {{"format", "mfcp.recipe"}, {"version", 1}, {"seed", recipe.seed}, {"stages", stages}};
}

DegradationRecipe recipe_from_json(const nlohmann::json& doc) {
  try {
    DegradationRecipe r;
    r.seed = doc.value("seed", std::uint64_t{0});
    for (const auto& j : doc.at("stages")) {
      const auto type = j.at("type").get<std::string>();
      if (type == "pod_truncate") {
        r.stages.emplace_back(PodStage{j.at("energy").get<double>()});
      } else if (type == "fps") {
        r.stages.emplace_back(FpsStage{j.at("m").get<std::size_t>(), get_seed(j)});
      } else if (type == "knn_average") {
        r.stages.emplace_back(
            KnnStage{j.at("m").get<std::size_t>(), j.at("k").get<std::size_t>(), get_seed(j)});
      } else if (type == "voxelize") {
        r.stages.emplace_back(VoxelStage{j.at("size").get<double>(), j.value("pca_align", false)});
      } else if (type == "quantize") {
        r.stages.emplace_back(QuantizeStage{j.at("levels").get<std::size_t>()});
      } else if (type == "noise") {
        r.stages.emplace_back(NoiseStage{j.at("sigma").get<double>(), get_seed(j)});
      } else if (type == "bias") {
        r.stages.emplace_back(BiasStage{j.at("c").get<double>()});
      } else {
        throw ValidationError("unknown recipe stage type '" + type + "'");
      }
    }
    r.validate();
    return r;
  } catch (const nlohmann::json::exception& e) {
    throw ValidationError(std::string("malformed recipe: ") + e.what());
  }
}

Degraded apply(const DegradationRecipe& recipe, const data::SnapshotSet& input) {
  recipe.validate();
  data::SnapshotSet current = input;
  nlohmann::json stages = nlohmann::json::array();

  for (std::size_t i = 0; i < recipe.stages.size(); ++i) {
    nlohmann::json record = {{"stage", i}, {"input_nodes", current.nodes()}};
    std::visit(
        Overloaded{
            [&](const PodStage& s) {
              record["type"] = "pod_truncate";
              if (current.snapshots() == 0 || current.nodes() == 0)
                throw ValidationError("pod_truncate stage needs a nonempty snapshot matrix");
              PodTruncation pod = pod_truncate(current.fields(), s.energy);
              record["energy_threshold"] = s.energy;
              record["r_star"] = pod.rank;
              record["retained_energy"] = pod.retained_energy;
              current = current.with_nodes(std::move(pod.reconstruction), current.coords());
            },
            [&](const FpsStage& s) {
              record["type"] = "fps";
              require_coords(current, "fps");
              if (s.m > current.nodes())
                throw ValidationError("fps stage asks for " + std::to_string(s.m) +
                                      " nodes but only " + std::to_string(current.nodes()) +
                                      " exist");
              const auto mask = fps_seeded(current.coords(), s.m, stage_seed(recipe, i, s.seed));
              record["mask_size"] = mask.size();
              record["mask_indices"] = mask;
              current = current.with_nodes(current.fields().select_rows(mask),
                                           current.coords().select_rows(mask));
            },
            [&](const KnnStage& s) {
              record["type"] = "knn_average";
              require_coords(current, "knn_average");
              if (s.m > current.nodes() || s.k > current.nodes())
                throw ValidationError("knn_average stage: m and k must not exceed the node count");
              const auto centers = fps_seeded(current.coords(), s.m, stage_seed(recipe, i, s.seed));
              Matrix averaged = knn_average(current.coords(), current.fields(), centers, s.k);
              record["mask_size"] = centers.size();
              record["mask_indices"] = centers;
              record["k"] = s.k;
              current = current.with_nodes(std::move(averaged), current.coords().select_rows(centers));
            },
            [&](const VoxelStage& s) {
              record["type"] = "voxelize";
              require_coords(current, "voxelize");
              Voxelized vox = voxelize(current.coords(), current.fields(), s.size, s.pca_align);
              record["voxel_size"] = s.size;
              record["pca_align"] = s.pca_align;
              record["occupied_voxels"] = vox.centers.rows();
              current = current.with_nodes(std::move(vox.means), std::move(vox.centers));
            },
            [&](const QuantizeStage& s) {
              record["type"] = "quantize";
              record["levels"] = s.levels;
              current = current.with_nodes(quantize(current.fields(), s.levels), current.coords());
            },
            [&](const NoiseStage& s) {
              record["type"] = "noise";
              record["sigma"] = s.sigma;
              current = current.with_nodes(
                  perturb(current.fields(), s.sigma, 0.0, stage_seed(recipe, i, s.seed)),
                  current.coords());
            },
            [&](const BiasStage& s) {
              record["type"] = "bias";
              record["c"] = s.c;
              current = current.with_nodes(perturb(current.fields(), 0.0, s.c, 0), current.coords());
            },
        },
        recipe.stages[i]);
    record["output_nodes"] = current.nodes();
    stages.push_back(std::move(record));
  }

  nlohmann::json provenance = {{"recipe", to_json(recipe)},
                               {"input_nodes", input.nodes()},
                               {"output_nodes", current.nodes()},
                               {"snapshots", current.snapshots()},
                               {"stages", std::move(stages)}};
  return {std::move(current), std::move(provenance)};
}

}  // namespace mfcp::lofi
