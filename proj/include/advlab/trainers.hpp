#pragma once

#include <cstddef>
#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "advlab/attacks.hpp"
#include "advlab/dataset.hpp"
#include "advlab/interpolation.hpp"
#include "advlab/metrics.hpp"
#include "advlab/mlp.hpp"
#include "advlab/optim.hpp"

namespace advlab {

enum class Algorithm { at, at_mixup, at_gif, trades, trades_gif, gairat, gairat_gif, fastat, fastat_gif };

std::string_view to_string(Algorithm algorithm);
Algorithm parse_algorithm(std::string_view text);

/// Update rule shared by an algorithm and its interpolating variants.
enum class Family { at, trades, gairat, fastat };
/// Where the m' extra slots of each batch come from.
enum class InterpSource { none, mixup, gif };

Family family_of(Algorithm algorithm);
InterpSource interp_source_of(Algorithm algorithm);
/// at_gif -> at, trades_gif -> trades, ...; base algorithms map to themselves.
Algorithm base_algorithm(Algorithm algorithm);

/// Piecewise-constant step schedule. Milestones are fractions of the run
/// length; the rate is multiplied by `decay` from epoch floor(f * T) on.
struct LrSchedule {
  double initial = 0.1;
  std::vector<double> milestones{0.5, 0.75};
  double decay = 0.1;
};

double lr_at_epoch(const LrSchedule& schedule, int total_epochs, int epoch);

/// (1 + tanh(-1 + 5 (1 - 2 kappa / K))) / 2
double gairat_weight(int kappa, int steps);

/// Normalised GAIRAT weights for a batch; sums to one.
std::vector<double> gairat_batch_weights(std::span<const int> kappa, int steps);

struct TrainSpec {
  Algorithm algorithm = Algorithm::at_gif;
  int epochs = 60;
  std::size_t m = 64;         // originals per batch
  std::size_t m_prime = 64;   // interpolated samples per batch
  std::size_t batches_per_epoch = 0;  // 0: floor(|S| / (m + m'))
  AttackSpec attack;          // training attack (eps, alpha, K, loss)
  /// Unset: fixed(0.5) for GIF, uniform(0,1) for mixup.
  std::optional<LambdaPolicy> lambda;
  int burn_in_epochs = 0;
  LrSchedule schedule;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  double trades_beta = 6.0;
  double trades_gamma = 0.001;
  bool cross_class_only = false;
  std::uint64_t seed = 0;
  std::size_t threads = 1;

  void validate() const;
  LambdaPolicy effective_lambda() const;
  std::size_t batches_for(std::size_t train_size) const;
  /// Attack used inside the family's epoch (init/steps/loss adjusted).
  AttackSpec family_attack() const;
};

/// Everything an observer may want to re-check about one mini-batch. The
/// model is the snapshot the adversarial variants were generated against.
struct BatchRecord {
  int epoch = 0;
  std::size_t batch = 0;
  const MlpModel* model = nullptr;
  std::span<const LabeledSample> samples;  // originals first, then interpolated
  std::size_t num_original = 0;
  const DenseMatrix* variants = nullptr;
  std::span<const char> attackable;  // per row
};

using BatchObserver = std::function<void(const BatchRecord&)>;

struct EpochStats {
  double mean_train_loss = 0.0;
  std::size_t batches = 0;
  std::size_t samples_consumed = 0;
  std::size_t originals_examined = 0;
  std::size_t interpolated_examined = 0;
  std::size_t interpolated_attackable = 0;
};

/// Inputs shared by every epoch runner.
struct EpochInputs {
  const Dataset& train;
  const InterpolationSet* interpolation;  // null when the m' slots take originals
  const TrainSpec& spec;
  int epoch;
  BatchObserver observer;
};

EpochStats run_epoch_at_family(MlpModel& model, SgdState& sgd, const EpochInputs& in,
                               AttackableSet& attackable);
EpochStats run_epoch_trades(MlpModel& model, SgdState& sgd, const EpochInputs& in,
                            AttackableSet& attackable);
EpochStats run_epoch_gairat(MlpModel& model, SgdState& sgd, const EpochInputs& in,
                            AttackableSet& attackable);
EpochStats run_epoch_fastat(MlpModel& model, SgdState& sgd, const EpochInputs& in,
                            AttackableSet& attackable);

struct NamedAttack {
  std::string name;
  AttackSpec spec;
};

struct TrainingHooks {
  std::vector<NamedAttack> eval_attacks;
  std::function<void(const EpochMetrics&)> on_epoch;
  BatchObserver on_batch;
};

struct TrainingResult {
  MlpModel final_model;
  MlpModel best_model;
  int best_epoch = 0;
  double best_selection_acc = 0.0;
  std::vector<EpochMetrics> metrics;
};

/// Full run over epochs 1..T; test data drives evaluation and best-checkpoint
/// selection (PGD with the training eps/alpha/K from natural starts).
TrainingResult run_training(const TrainSpec& spec, MlpModel initial, const Dataset& train,
                            const Dataset& test, const TrainingHooks& hooks = {});

}  // namespace advlab
