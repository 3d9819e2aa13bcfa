#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advlab/config.hpp"
#include "advlab/evaluation.hpp"
#include "advlab/trainers.hpp"

namespace advlab {

/// Flags shared by every subcommand.
struct CommandOptions {
  std::filesystem::path config;
  std::optional<std::uint64_t> seed;
  std::optional<std::string> out;
  bool quiet = false;
};

/// Loads the config and applies --seed / --out overrides.
ExperimentConfig load_with_overrides(const CommandOptions& options);

struct TrainOutcome {
  TrainingResult result;
  std::filesystem::path dir;
  std::string final_row;  // last metrics CSV row, empty if T = 0
};

/// Materialises data, trains, and writes metrics CSV (streamed per epoch),
/// best/last checkpoints, the resolved config and the dataset snapshot.
TrainOutcome train_experiment(const ExperimentConfig& config, std::ostream& log, bool quiet);

std::vector<NamedAttack> named_eval_attacks(const ExperimentConfig& config);

struct EvalReport {
  double natural = 0.0;
  std::vector<std::pair<std::string, double>> robust;
};

/// Throws ValidationError when the model does not match the configured shape.
EvalReport evaluate_model(const ExperimentConfig& config, const MlpModel& model, const Dataset& test);

struct ProbeOutput {
  std::filesystem::path checkpoint;
  LinearityReport report;
  std::filesystem::path report_path;
  std::optional<std::filesystem::path> grid_path;
};

/// Probes every checkpoint on the same segments and (in 2-D) the same grid.
std::vector<ProbeOutput> probe_models(const ExperimentConfig& config,
                                      const std::vector<std::filesystem::path>& checkpoints,
                                      const std::filesystem::path& out_dir, std::ostream& log);

struct SweepCell {
  std::string name;
  nlohmann::json overrides;  // applied on top of the base config
};

struct SweepPlan {
  nlohmann::json base;
  std::vector<SweepCell> cells;
  std::filesystem::path out_dir;
  bool parallel_cells = false;
};

/// Sweep file: {"base": {...} | "base_config": path, "axes": {"lambda": [...],
/// "ratio": [[m, m'], ...], "burn_in": [...], "algorithm": [...]},
/// "seeds": [...], "out": dir, "parallel_cells": bool}.
SweepPlan parse_sweep(const nlohmann::json& doc, const std::filesystem::path& base_dir);

inline constexpr const char* kSweepSummaryPrefix = "cell,status,best_epoch,best_selection_acc,";

int cmd_train(const CommandOptions& options, std::ostream& out, std::ostream& err);
int cmd_eval(const CommandOptions& options, const std::filesystem::path& checkpoint,
             std::ostream& out, std::ostream& err);
int cmd_probe(const CommandOptions& options, const std::vector<std::filesystem::path>& checkpoints,
              std::ostream& out, std::ostream& err);
int cmd_sweep(const CommandOptions& options, bool parallel_cells, std::ostream& out, std::ostream& err);

}  // namespace advlab
