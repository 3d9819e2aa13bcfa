#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "advlab/experiment.hpp"

int main(int argc, char** argv) {
  CLI::App app{"advlab: adversarial training with guided interpolation on toy problems"};
  app.require_subcommand(1);

  advlab::CommandOptions options;
  std::uint64_t seed = 0;
  std::string out;
  std::string checkpoint;
  std::vector<std::string> checkpoints;
  bool parallel_cells = false;

  auto add_common = [&](CLI::App* cmd, const std::string& config_help) {
    cmd->add_option("--config", options.config, config_help)->required()->check(CLI::ExistingFile);
    cmd->add_option("--seed", seed, "Override the master seed");
    cmd->add_option("--out", out, "Override the output directory");
    cmd->add_flag("--quiet", options.quiet, "Suppress progress output");
  };

  auto* train = app.add_subcommand("train", "Train a model and write metrics and checkpoints");
  add_common(train, "Experiment config (JSON)");

  auto* eval = app.add_subcommand("eval", "Evaluate a checkpoint against the configured attacks");
  add_common(eval, "Experiment config (JSON)");
  eval->add_option("--checkpoint", checkpoint, "Checkpoint file")->required()->check(CLI::ExistingFile);

  auto* probe = app.add_subcommand("probe", "Linearity reports and confidence grids for checkpoints");
  add_common(probe, "Experiment config supplying the dataset");
  probe->add_option("--checkpoint", checkpoints, "Checkpoint file (repeatable)")->required()->check(CLI::ExistingFile);

  auto* sweep = app.add_subcommand("sweep", "Run a grid of training configurations");
  add_common(sweep, "Sweep file (JSON)");
  sweep->add_flag("--parallel-cells", parallel_cells, "Run sweep cells concurrently");

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : 1;
  }

  if (train->count_all() || eval->count_all() || probe->count_all() || sweep->count_all()) {
    if (app.get_subcommands().front()->count("--seed")) options.seed = seed;
    if (app.get_subcommands().front()->count("--out")) options.out = out;
  }

  if (*train) return advlab::cmd_train(options, std::cout, std::cerr);
  if (*eval) return advlab::cmd_eval(options, checkpoint, std::cout, std::cerr);
  if (*probe) {
    std::vector<std::filesystem::path> paths(checkpoints.begin(), checkpoints.end());
    return advlab::cmd_probe(options, paths, std::cout, std::cerr);
  }
  return advlab::cmd_sweep(options, parallel_cells, std::cout, std::cerr);
}
