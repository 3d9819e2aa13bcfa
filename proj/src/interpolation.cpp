#include "advlab/interpolation.hpp"

#include <cmath>
#include <sstream>

#include "advlab/error.hpp"

namespace advlab {

bool attackable_original(std::size_t predicted, const LabeledSample& sample) {
  return predicted != sample.label();
}

bool attackable_interpolated(std::size_t predicted, const LabeledSample& sample) {
  return predicted != sample.provenance.parent_class_i && predicted != sample.provenance.parent_class_j;
}

namespace {

std::size_t predict_one(const MlpModel& model, std::span<const double> x) {
  const DenseMatrix logits = forward(model, DenseMatrix(1, x.size(), std::vector<double>(x.begin(), x.end())));
  return argmax(logits.row(0));
}

}  // namespace

bool is_attackable(const MlpModel& model, const LabeledSample& sample, std::span<const double> x_adv) {
  return attackable_original(predict_one(model, x_adv), sample);
}

bool is_attackable_interp(const MlpModel& model, const LabeledSample& sample,
                          std::span<const double> x_adv) {
  if (!sample.provenance.interpolated) {
    throw ContractError("is_attackable_interp called on an original sample");
  }
  return attackable_interpolated(predict_one(model, x_adv), sample);
}

AttackableSet AttackableSet::everything(const Dataset& data) {
  AttackableSet set(0);
  for (const auto& s : data.samples) set.insert(s);
  return set;
}

bool AttackableSet::insert(const LabeledSample& sample) {
  if (sample.provenance.interpolated) {
    throw ContractError("attackable set only holds original samples");
  }
  return ids_.insert(sample.id).second;
}

bool update_attackable_set(AttackableSet& set, const LabeledSample& sample,
                           std::span<const double> x_adv, const MlpModel& model) {
  if (sample.provenance.interpolated) throw ContractError("update_attackable_set needs an original sample");
  const bool attackable = is_attackable(model, sample, x_adv);
  if (attackable) set.insert(sample);
  return attackable;
}

void LambdaPolicy::validate() const {
  switch (mode) {
    case Mode::fixed:
      if (!(value >= 0.0 && value <= 1.0)) throw ConfigError("fixed lambda must lie in [0,1]");
      break;
    case Mode::uniform: break;
    case Mode::beta:
      if (!(a > 0.0 && b > 0.0 && std::isfinite(a) && std::isfinite(b))) {
        throw ConfigError("beta lambda parameters must be positive");
      }
      break;
  }
}

std::string LambdaPolicy::describe() const {
  std::ostringstream out;
  out.precision(17);
  switch (mode) {
    case Mode::fixed: out << "fixed(" << value << ")"; break;
    case Mode::uniform: out << "uniform(0,1)"; break;
    case Mode::beta: out << "beta(" << a << "," << b << ")"; break;
  }
  return out.str();
}

double sample_lambda(const LambdaPolicy& policy, CounterRng& rng) {
  switch (policy.mode) {
    case LambdaPolicy::Mode::fixed: return policy.value;
    case LambdaPolicy::Mode::uniform: return rng.uniform01();
    case LambdaPolicy::Mode::beta:
      for (;;) {
        const double x = rng.gamma(policy.a);
        const double y = rng.gamma(policy.b);
        if (x + y > 0.0) return x / (x + y);
      }
  }
  return policy.value;
}

LabeledSample interpolate_pair(const LabeledSample& s_i, const LabeledSample& s_j, double lambda) {
  if (s_i.features.size() != s_j.features.size() || s_i.soft_label.size() != s_j.soft_label.size()) {
    throw ValidationError("interpolate_pair: samples differ in feature dim or class count");
  }
  if (!(lambda >= 0.0 && lambda <= 1.0)) throw ValidationError("interpolate_pair: lambda outside [0,1]");
  // Equal coordinates are copied so that mixing a sample with itself is exact.
  auto mix = [lambda](double a, double b) { return a == b ? a : lambda * a + (1.0 - lambda) * b; };
  LabeledSample out;
  out.features.resize(s_i.features.size());
  out.soft_label.resize(s_i.soft_label.size());
  for (std::size_t k = 0; k < out.features.size(); ++k) out.features[k] = mix(s_i.features[k], s_j.features[k]);
  for (std::size_t c = 0; c < out.soft_label.size(); ++c) out.soft_label[c] = mix(s_i.soft_label[c], s_j.soft_label[c]);
  out.provenance = {true, s_i.id, s_j.id, s_i.label(), s_j.label(), lambda};
  return out;
}

namespace {

constexpr int kCrossClassRetries = 64;

InterpolationSet build_from_pool(const Dataset& data, const std::vector<std::size_t>& pool,
                                 std::size_t target_size, const LambdaPolicy& policy, StreamKey key,
                                 PairingOptions options) {
  policy.validate();
  InterpolationSet out;
  if (pool.empty() || (pool.size() < 2 && data.size() > 1)) {
    out.fallback = true;
    return out;
  }
  out.samples.reserve(target_size);
  for (std::size_t k = 0; k < target_size; ++k) {
    CounterRng rng(key.child(k));
    std::size_t i = 0;
    std::size_t j = 0;
    for (int attempt = 0; attempt < kCrossClassRetries; ++attempt) {
      i = rng.below(pool.size());
      j = i;
      if (pool.size() > 1) {
        j = rng.below(pool.size() - 1);
        if (j >= i) ++j;
      }
      if (!options.cross_class_only ||
          data.samples[pool[i]].label() != data.samples[pool[j]].label()) {
        break;
      }
    }
    const double lambda = sample_lambda(policy, rng);
    LabeledSample s = interpolate_pair(data.samples[pool[i]], data.samples[pool[j]], lambda);
    s.id = k;
    out.samples.push_back(std::move(s));
  }
  return out;
}

}  // namespace

InterpolationSet build_interpolation_set(const Dataset& data, const AttackableSet& previous,
                                         std::size_t target_size, const LambdaPolicy& policy,
                                         StreamKey rng, PairingOptions options) {
  std::vector<std::size_t> pool;
  pool.reserve(previous.size());
  for (const auto id : previous.ids()) {
    if (id >= data.size()) throw ContractError("attackable set references an unknown sample");
    pool.push_back(id);
  }
  // A single attackable sample cannot form a distinct pair.
  if (pool.size() < 2) return {{}, true};
  return build_from_pool(data, pool, target_size, policy, rng, options);
}

InterpolationSet build_mixup_set(const Dataset& data, std::size_t target_size,
                                 const LambdaPolicy& policy, StreamKey rng, PairingOptions options) {
  std::vector<std::size_t> pool(data.size());
  for (std::size_t i = 0; i < pool.size(); ++i) pool[i] = i;
  return build_from_pool(data, pool, target_size, policy, rng, options);
}

}  // namespace advlab
