#include "mfcp/cli.hpp"

#include <optional>
#include <ostream>
#include <string>

#include <CLI11.hpp>

#include "mfcp/errors.hpp"
#include "mfcp/log.hpp"
#include "mfcp/pipeline.hpp"

namespace mfcp::cli {

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Multi-fidelity autoencoder pipeline with multi-split conformal calibration", "mfcp"};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::string> out_dir;
  std::optional<std::size_t> workers;
  std::optional<std::uint64_t> seed;

  const char* commands[][2] = {
      {"degrade", "Synthesize the LF set from the HF set with a recipe"},
      {"pretrain", "Split the HF set and pretrain the autoencoder on LF data"},
      {"calibrate", "Run multi-split conformal calibration"},
      {"finetune", "Fine-tune on all HF training pairs for E* epochs"},
      {"evaluate", "Score predictions and bands on the test sets"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "Pipeline config file")->required();
    sub->add_option("--out", out_dir, "Output directory (overrides out_dir)");
    sub->add_option("--workers", workers, "Worker threads for calibrate (0 = all cores)");
    sub->add_option("--seed", seed, "Master seed (overrides seed)");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? 0 : 2;
  }

  log::init_from_env();
  try {
    const auto command = pipeline::command_from_string(app.get_subcommands().front()->get_name());
    pipeline::PipelineConfig config = pipeline::load_config(config_path);
    if (out_dir) config.out_dir = *out_dir;
    if (workers) config.workers = *workers;
    if (seed) config.seed = *seed;
    pipeline::run(command, config);
    out << pipeline::to_string(command) << ": done (" << config.out_dir.string() << ")\n";
    return 0;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << '\n';
    return 2;
  } catch (const NumericError& e) {
    err << "numeric failure: " << e.what() << '\n';
    return 3;
  } catch (const std::exception& e) {
    err << "unexpected error: " << e.what() << '\n';
    return 1;
  }
}

}  // namespace mfcp::cli
