#pragma once

#include <cstddef>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "advlab/dataset.hpp"
#include "advlab/mlp.hpp"
#include "advlab/rng.hpp"

namespace advlab {

/// An original sample is attackable when its adversarial variant is
/// predicted as anything but its label; guarded otherwise.
bool attackable_original(std::size_t predicted, const LabeledSample& sample);
/// An interpolated sample is attackable when the prediction differs from
/// both parent classes; guarded when it matches either.
bool attackable_interpolated(std::size_t predicted, const LabeledSample& sample);

bool is_attackable(const MlpModel& model, const LabeledSample& sample, std::span<const double> x_adv);
bool is_attackable_interp(const MlpModel& model, const LabeledSample& sample,
                          std::span<const double> x_adv);

/// Originals found attackable during one epoch, keyed by sample id.
class AttackableSet {
 public:
  explicit AttackableSet(int epoch = 0) : epoch_(epoch) {}

  /// A_0: every sample of the training set.
  static AttackableSet everything(const Dataset& data);

  /// Inserts an original; returns false if it was already present.
  bool insert(const LabeledSample& sample);
  bool contains(std::size_t id) const { return ids_.count(id) != 0; }
  std::size_t size() const { return ids_.size(); }
  bool empty() const { return ids_.empty(); }
  int epoch() const { return epoch_; }
  const std::set<std::size_t>& ids() const { return ids_; }

 private:
  int epoch_;
  std::set<std::size_t> ids_;
};

/// Inserts `sample` iff is_attackable. Returns whether it is attackable.
bool update_attackable_set(AttackableSet& set, const LabeledSample& sample,
                           std::span<const double> x_adv, const MlpModel& model);

struct LambdaPolicy {
  enum class Mode { fixed, uniform, beta };
  Mode mode = Mode::fixed;
  double value = 0.5;
  double a = 1.0;
  double b = 1.0;

  static LambdaPolicy fixed(double v) { return {Mode::fixed, v, 1.0, 1.0}; }
  static LambdaPolicy uniform() { return {Mode::uniform, 0.5, 1.0, 1.0}; }
  static LambdaPolicy beta(double a, double b) { return {Mode::beta, 0.5, a, b}; }

  void validate() const;
  std::string describe() const;
};

double sample_lambda(const LambdaPolicy& policy, CounterRng& rng);

/// x = lambda * x_i + (1 - lambda) * x_j and likewise for the labels.
LabeledSample interpolate_pair(const LabeledSample& s_i, const LabeledSample& s_j, double lambda);

struct InterpolationSet {
  std::vector<LabeledSample> samples;
  /// Too few candidates to form a pair; the trainer substitutes originals.
  bool fallback = false;
};

struct PairingOptions {
  /// Resample pairs until the parents differ in class (bounded retries).
  bool cross_class_only = false;
};

/// GIF: pairs drawn uniformly with replacement from the previous epoch's
/// attackable set, two distinct members per pair.
InterpolationSet build_interpolation_set(const Dataset& data, const AttackableSet& previous,
                                         std::size_t target_size, const LambdaPolicy& policy,
                                         StreamKey rng, PairingOptions options = {});

/// Vanilla mixup: pairs drawn from the whole dataset.
InterpolationSet build_mixup_set(const Dataset& data, std::size_t target_size,
                                 const LambdaPolicy& policy, StreamKey rng,
                                 PairingOptions options = {});

}  // namespace advlab
