#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <filesystem>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "advlab/attacks.hpp"
#include "advlab/datasets.hpp"
#include "advlab/mlp.hpp"
#include "advlab/trainers.hpp"

namespace advlab {

/// A real given either as a decimal or as an exact "p/q" rational; the text
/// form survives into the resolved config so 8/255 stays 8/255.
class Quantity {
 public:
  Quantity() = default;
  explicit Quantity(double v);
  static Quantity parse(const std::string& text);

  double value() const;
  const std::string& text() const { return text_; }
  nlohmann::json to_json() const;

 private:
  std::string text_ = "0";
  bool rational_ = false;
  long long num_ = 0;
  long long den_ = 1;
  double decimal_ = 0.0;
};

struct AttackEntry {
  std::string name;
  Quantity epsilon = Quantity::parse("8/255");
  Quantity alpha = Quantity::parse("2/255");
  int steps = 10;
  AttackInit init = AttackInit::natural;
  double gamma = 0.001;
  LossKind loss = LossKind::ce;
  bool clamp = true;

  AttackSpec to_spec() const;
};

struct DatasetConfig {
  std::string kind = "two_gaussians";  // two_gaussians | rings | csv
  std::size_t n_per_class = 200;
  std::array<Point2, 2> centers{{{0.3, 0.3}, {0.7, 0.7}}};
  double sigma = 0.1;
  std::array<double, 2> radii{0.15, 0.35};
  double noise = 0.03;
  std::string path;       // csv
  std::string test_path;  // csv, optional; otherwise split
  long long label_column = -1;  // negative counts from the end
  std::string delimiter = ",";
  bool header = false;
  double test_fraction = 0.25;
  std::size_t pca_dims = 0;  // 0: no projection
  std::optional<std::uint64_t> seed;  // defaults to the master seed
};

struct ModelConfig {
  std::vector<std::size_t> layer_sizes{2, 32, 32, 2};
  Activation activation = Activation::relu;
};

struct OutputConfig {
  std::string dir = "runs/default";
  std::string metrics = "metrics.csv";
  std::string best_checkpoint = "best.ckpt";
  std::string last_checkpoint = "last.ckpt";
  std::string resolved_config = "resolved_config.json";
  std::string dataset_snapshot = "dataset.json";
};

struct ProbeConfig {
  std::size_t segments = 20;
  std::size_t samples_per_segment = 101;
  std::size_t grid_resolution = 50;
};

struct ExperimentConfig {
  std::uint64_t seed = 0;
  DatasetConfig dataset;
  ModelConfig model;
  AttackEntry train_attack;
  std::vector<AttackEntry> eval_attacks;
  TrainSpec train;  // train.attack / train.seed are filled from the blocks above
  OutputConfig output;
  ProbeConfig probe;

  /// Copies attack and seed into `train` and validates everything.
  void finalize();
};

/// Strict parse: unknown keys and type mismatches raise ConfigError naming
/// the key path (e.g. "attack.train.epsilonn").
ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::filesystem::path& path);

/// Every field with defaults materialised; parse_experiment_config of the
/// result reproduces the same configuration.
nlohmann::json resolved_config_json(const ExperimentConfig& config);

/// Resolves an eval preset name ("pgd20", "cw30", "pgd<K>", "cw<K>") against
/// the training attack's eps and alpha.
AttackEntry attack_preset(const std::string& name, const AttackEntry& train_attack);

struct Materialized {
  Dataset train;
  Dataset test;
  nlohmann::json snapshot;  // generator parameters + seed
};

Materialized materialize_datasets(const ExperimentConfig& config);

}  // namespace advlab
