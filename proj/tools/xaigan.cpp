// Command-line driver: `xaigan run ...` and `xaigan compare DIR...`.

#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "xaigan/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"xAI-guided GAN training experiments"};
  app.require_subcommand(1);

  auto* run = app.add_subcommand("run", "train one configuration and write a run directory");
  std::optional<std::string> config, explainer, out;
  std::optional<double> alpha, data_fraction;
  std::optional<std::size_t> epochs;
  std::optional<std::uint64_t> seed;
  bool diffaug = false;
  run->add_option("--config", config, "JSON config file");
  run->add_option("--explainer", explainer, "none|saliency|lime|deepshap");
  run->add_option("--alpha", alpha, "explanation gain");
  run->add_option("--epochs", epochs, "training epochs");
  run->add_option("--data-fraction", data_fraction, "fraction of the training set in (0,1]");
  run->add_flag("--diffaug", diffaug, "enable differentiable augmentation");
  run->add_option("--seed", seed, "master seed");
  run->add_option("--out", out, "output directory");

  auto* cmp = app.add_subcommand("compare", "summarise completed run directories as CSV");
  std::vector<std::string> dirs;
  cmp->add_option("dirs", dirs, "run directories")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    return app.exit(e);
  }

  try {
    if (*run) {
      xaigan::Overrides ov;
      ov.explainer = explainer;
      ov.alpha = alpha;
      ov.epochs = epochs;
      ov.data_fraction = data_fraction;
      if (diffaug) ov.diffaug = true;
      ov.seed = seed;
      ov.out = out;
      const auto spec = xaigan::parse_config_file(config ? std::optional<std::filesystem::path>(*config) : std::nullopt, ov);
      return xaigan::run(spec);
    }
    std::vector<std::filesystem::path> paths(dirs.begin(), dirs.end());
    std::cout << xaigan::compare(paths);
    return 0;
  } catch (const std::exception& e) {
    std::cerr << xaigan::error_json(e) << "\n";
    return 1;
  }
}
