// Batch front end: sfm <simulate|fit|postprocess|forecast|score> [flags]

#include <iostream>
#include <optional>
#include <utility>

#include "CLI11.hpp"
#include "sfm/cli.hpp"
#include "sfm/errors.hpp"

int main(int argc, char** argv) {
  CLI::App app{"Structured factor models: simulation, MCMC fitting and post-processing"};
  app.require_subcommand(1, 1);

  std::string config_path;
  std::optional<std::uint64_t> seed;
  std::optional<int> chains, threads, fixed_h, fold, folds;
  std::optional<std::string> output, criterion;
  std::optional<double> epsilon, t;
  std::optional<long> horizon, checkpoint_every;
  bool resume = false;

  const std::pair<const char*, const char*> commands[] = {
      {"simulate", "draw a synthetic data set and its true parameters"},
      {"fit", "run the MCMC chains and store their draws"},
      {"postprocess", "identify stored draws and summarise the number of factors"},
      {"forecast", "hour-ahead predictive intervals from a dynamic fit"},
      {"score", "CPO / pseudo marginal likelihood, or Brier and log scores"},
  };
  for (const auto& [name, help] : commands) {
    CLI::App* sub = app.add_subcommand(name, help);
    sub->add_option("--config", config_path, "JSON run configuration")->required()->check(CLI::ExistingFile);
    sub->add_option("--seed", seed, "base random seed");
    sub->add_option("--output", output, "output directory");
    sub->add_option("--criterion", criterion, "truncation criterion")->check(CLI::IsMember({"epsilon", "proportion"}));
    sub->add_option("--epsilon", epsilon, "epsilon criterion threshold");
    sub->add_option("--t", t, "proportion criterion threshold");
    sub->add_option("--fold", fold, "held-out fold index");
    sub->add_option("--folds", folds, "number of cross-validation folds");
    if (std::string(name) == "fit") {
      sub->add_option("--chains", chains, "number of chains");
      sub->add_option("--threads", threads, "worker threads");
      sub->add_option("--fixed-h", fixed_h, "fixed truncation level (disables adaptation)");
      sub->add_option("--checkpoint-every", checkpoint_every, "iterations between checkpoints");
      sub->add_flag("--resume", resume, "continue chains from their checkpoints");
    }
    if (std::string(name) == "forecast") sub->add_option("--horizon", horizon, "forecast horizon in hours");
  }

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : sfm::kExitValidation;
  }
  const std::string command = app.get_subcommands().front()->get_name();

  sfm::RunConfig config;
  try {
    config = sfm::load_config(config_path);
    if (seed) config.sampler.seed = *seed;
    if (output) config.output = *output;
    if (criterion) config.sampler.criterion = sfm::criterion_from_string(*criterion);
    if (epsilon) config.sampler.epsilon = *epsilon;
    if (t) config.sampler.t = *t;
    if (chains) config.chains = *chains;
    if (threads) config.threads = *threads;
    if (fixed_h) {
      config.sampler.adapt = false;
      config.sampler.initial_h = *fixed_h;
    }
    if (checkpoint_every) config.sampler.checkpoint_every = *checkpoint_every;
    if (horizon) config.horizon = *horizon;
    if (folds) config.folds = *folds;
    if (fold) config.fold = *fold;
    config.resume = resume;
  } catch (const sfm::Error& e) {
    std::cerr << "error: " << e.what() << "\n";
    return sfm::kExitValidation;
  }
  return sfm::run_command(command, std::move(config));
}
