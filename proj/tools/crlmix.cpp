#include "crlmix/cli.hpp"

#include <CLI11.hpp>

#include <iostream>
#include <optional>
#include <string>

int main(int argc, char** argv) {
  using namespace crlmix;

  CLI::App app{"Bayesian nonparametric ordinal regression with mixtures of continuation-ratio "
               "logits kernels.\nRun `crlmix print-config` for every configuration key and its "
               "default."};
  app.require_subcommand(1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> threads;
  std::optional<std::string> output;
  std::optional<std::string> input;
  std::optional<std::string> draws;

  app.add_option("--config", config_path, "INI job configuration")->check(CLI::ExistingFile);
  app.add_option("--seed", seed, "random seed (overrides [job] seed)");
  app.add_option("--threads", threads, "worker threads (overrides [job] threads)")
      ->check(CLI::PositiveNumber);
  app.add_option("--output", output, "output directory (overrides [job] output)");
  app.add_option("--input", input, "data CSV (overrides [job] input)");
  app.add_option("--draws", draws, "draws file (overrides [curves] draws)");

  const std::pair<const char*, const char*> commands[] = {
      {"fit", "run one chain on [job] input; writes draws, spec and diagnostics"},
      {"curves", "marginal and conditional curves and weight profiles from a draws file"},
      {"predict", "posterior predictive pmf at [predict] points"},
      {"compare", "fit all three variants and tabulate posterior predictive loss"},
      {"simulate", "generate a synthetic design with its truth curves"},
      {"elicit", "print a baseline or monotone prior specification"},
      {"print-config", "print the documented default configuration"},
  };
  for (const auto& [name, help] : commands) {
    app.add_subcommand(name, help)->fallthrough();
  }

  CLI11_PARSE(app, argc, argv);

  JobConfig cfg;
  try {
    ptree tree;
    if (!config_path.empty()) {
      tree = read_config_file(config_path);
    }
    cfg = parse_job_config(tree);
  } catch (const ConfigError& e) {
    std::cerr << "config error: " << e.what() << '\n';
    return kExitConfig;
  }
  cfg.command = app.get_subcommands().front()->get_name();
  if (seed) {
    cfg.seed = *seed;
  }
  if (threads) {
    cfg.threads = *threads;
  }
  if (output) {
    cfg.output = *output;
  }
  if (input) {
    cfg.input = *input;
  }
  if (draws) {
    cfg.draws = *draws;
  }
  return run_job(cfg);
}
