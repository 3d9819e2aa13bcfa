#include "advlab/trainers.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "advlab/error.hpp"
#include "advlab/evaluation.hpp"
#include "advlab/losses.hpp"
#include "advlab/rng.hpp"

namespace advlab {

std::string_view to_string(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::at: return "at";
    case Algorithm::at_mixup: return "at_mixup";
    case Algorithm::at_gif: return "at_gif";
    case Algorithm::trades: return "trades";
    case Algorithm::trades_gif: return "trades_gif";
    case Algorithm::gairat: return "gairat";
    case Algorithm::gairat_gif: return "gairat_gif";
    case Algorithm::fastat: return "fastat";
    case Algorithm::fastat_gif: return "fastat_gif";
  }
  return "?";
}

Algorithm parse_algorithm(std::string_view text) {
  for (const auto a : {Algorithm::at, Algorithm::at_mixup, Algorithm::at_gif, Algorithm::trades,
                       Algorithm::trades_gif, Algorithm::gairat, Algorithm::gairat_gif,
                       Algorithm::fastat, Algorithm::fastat_gif}) {
    if (to_string(a) == text) return a;
  }
  throw ConfigError("unknown algorithm '" + std::string(text) + "'");
}

Family family_of(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::at:
    case Algorithm::at_mixup:
    case Algorithm::at_gif: return Family::at;
    case Algorithm::trades:
    case Algorithm::trades_gif: return Family::trades;
    case Algorithm::gairat:
    case Algorithm::gairat_gif: return Family::gairat;
    case Algorithm::fastat:
    case Algorithm::fastat_gif: return Family::fastat;
  }
  return Family::at;
}

InterpSource interp_source_of(Algorithm algorithm) {
  switch (algorithm) {
    case Algorithm::at_mixup: return InterpSource::mixup;
    case Algorithm::at_gif:
    case Algorithm::trades_gif:
    case Algorithm::gairat_gif:
    case Algorithm::fastat_gif: return InterpSource::gif;
    default: return InterpSource::none;
  }
}

Algorithm base_algorithm(Algorithm algorithm) {
  switch (family_of(algorithm)) {
    case Family::at: return Algorithm::at;
    case Family::trades: return Algorithm::trades;
    case Family::gairat: return Algorithm::gairat;
    case Family::fastat: return Algorithm::fastat;
  }
  return algorithm;
}

double lr_at_epoch(const LrSchedule& schedule, int total_epochs, int epoch) {
  double lr = schedule.initial;
  for (const double f : schedule.milestones) {
    // A milestone landing on epoch 0 or 1 would only rescale the initial rate; skip it.
    const auto at = static_cast<int>(std::floor(f * total_epochs + 1e-9));
    if (at > 1 && epoch >= at) lr *= schedule.decay;
  }
  return lr;
}

double gairat_weight(int kappa, int steps) {
  if (steps < 1 || kappa < 0 || kappa > steps) throw ValidationError("gairat_weight: need 0 <= kappa <= K, K >= 1");
  const double k = static_cast<double>(kappa) / static_cast<double>(steps);
  return (1.0 + std::tanh(-1.0 + 5.0 * (1.0 - 2.0 * k))) / 2.0;
}

std::vector<double> gairat_batch_weights(std::span<const int> kappa, int steps) {
  std::vector<double> w(kappa.size());
  double total = 0.0;
  for (std::size_t i = 0; i < w.size(); ++i) {
    w[i] = gairat_weight(kappa[i], steps);
    total += w[i];
  }
  for (auto& v : w) v /= total;
  return w;
}

void TrainSpec::validate() const {
  if (epochs < 0) throw ConfigError("train.epochs must be >= 0");
  if (m < 1) throw ConfigError("train.m must be >= 1");
  if (burn_in_epochs < 0) throw ConfigError("train.burn_in_epochs must be >= 0");
  attack.validate();
  if (lambda) lambda->validate();
  if (!(schedule.initial > 0.0) || !std::isfinite(schedule.initial)) throw ConfigError("train.lr must be > 0");
  if (!(schedule.decay > 0.0) || !std::isfinite(schedule.decay)) throw ConfigError("train.lr_decay must be > 0");
  for (const double f : schedule.milestones) {
    if (!(f > 0.0 && f <= 1.0)) throw ConfigError("train.milestones must be fractions in (0,1]");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("train.momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0)) throw ConfigError("train.weight_decay must be >= 0");
  const Family f = family_of(algorithm);
  if (f == Family::trades) {
    if (!(trades_beta >= 0.0) || !std::isfinite(trades_beta)) throw ConfigError("train.trades_beta must be >= 0");
    if (!(trades_gamma > 0.0) || !std::isfinite(trades_gamma)) throw ConfigError("train.trades_gamma must be > 0");
  }
  if (f == Family::gairat && attack.loss != LossKind::ce) {
    throw ConfigError("gairat requires the ce attack loss");
  }
  if ((f == Family::at || f == Family::fastat) && attack.loss == LossKind::kl_vs_reference) {
    throw ConfigError("kl attack loss is only valid for trades");
  }
  if (threads < 1) throw ConfigError("train.threads must be >= 1");
}

LambdaPolicy TrainSpec::effective_lambda() const {
  if (lambda) return *lambda;
  return interp_source_of(algorithm) == InterpSource::mixup ? LambdaPolicy::uniform()
                                                            : LambdaPolicy::fixed(0.5);
}

std::size_t TrainSpec::batches_for(std::size_t train_size) const {
  if (batches_per_epoch > 0) return batches_per_epoch;
  return std::max<std::size_t>(1, train_size / (m + m_prime));
}

AttackSpec TrainSpec::family_attack() const {
  AttackSpec a = attack;
  switch (family_of(algorithm)) {
    case Family::at: break;
    case Family::trades:
      a.loss = LossKind::kl_vs_reference;
      a.init = AttackInit::gaussian;
      a.gaussian_std = trades_gamma;
      break;
    case Family::gairat:
      a.init = AttackInit::natural;
      a.loss = LossKind::ce;
      break;
    case Family::fastat:
      a.init = AttackInit::uniform;
      a.steps = 1;
      break;
  }
  return a;
}

namespace {

struct Batch {
  std::vector<LabeledSample> samples;
  std::size_t num_original = 0;
  DenseMatrix x;
  DenseMatrix y;
};

// Originals are consumed in order from per-epoch permutations of S; a new
// permutation starts when one is exhausted.
class OriginalStream {
 public:
  OriginalStream(std::size_t n, std::uint64_t seed, int epoch) : n_(n), seed_(seed), epoch_(epoch) {}

  std::size_t next() {
    if (pos_ == order_.size()) refill();
    return order_[pos_++];
  }

 private:
  void refill() {
    order_.resize(n_);
    for (std::size_t i = 0; i < n_; ++i) order_[i] = i;
    CounterRng rng(StreamKey::derive(seed_, "order", static_cast<std::uint64_t>(epoch_), cycle_++));
    for (std::size_t i = n_; i > 1; --i) std::swap(order_[i - 1], order_[rng.below(i)]);
    pos_ = 0;
  }

  std::size_t n_;
  std::uint64_t seed_;
  int epoch_;
  std::uint64_t cycle_ = 0;
  std::vector<std::size_t> order_;
  std::size_t pos_ = 0;
};

std::vector<Batch> assemble_epoch(const EpochInputs& in) {
  const auto& spec = in.spec;
  if (in.train.empty()) throw ValidationError("training set is empty");
  const std::size_t batches = spec.batches_for(in.train.size());
  const bool interp = in.interpolation != nullptr && spec.m_prime > 0;
  if (interp && in.interpolation->samples.size() < batches * spec.m_prime) {
    throw ContractError("interpolation set smaller than M * m'");
  }
  const std::size_t n_orig = interp ? spec.m : spec.m + spec.m_prime;
  OriginalStream stream(in.train.size(), spec.seed, in.epoch);
  std::vector<Batch> out(batches);
  for (std::size_t b = 0; b < batches; ++b) {
    auto& batch = out[b];
    batch.samples.reserve(spec.m + spec.m_prime);
    for (std::size_t i = 0; i < n_orig; ++i) batch.samples.push_back(in.train.samples[stream.next()]);
    batch.num_original = n_orig;
    if (interp) {
      for (std::size_t i = 0; i < spec.m_prime; ++i) {
        batch.samples.push_back(in.interpolation->samples[b * spec.m_prime + i]);
      }
    }
    batch.x = feature_matrix(std::span<const LabeledSample>(batch.samples));
    batch.y = label_matrix(std::span<const LabeledSample>(batch.samples));
  }
  return out;
}

struct StepOutput {
  DenseMatrix variants;
  DenseMatrix variant_logits;
  double loss = 0.0;
  ParamGrads grads;
};

using StepFn = std::function<StepOutput(const MlpModel&, const Batch&, const AttackContext&)>;

void accumulate(ParamGrads& into, const ParamGrads& g) {
  for (std::size_t l = 0; l < into.weights.size(); ++l) {
    auto a = into.weights[l].values();
    const auto b = g.weights[l].values();
    for (std::size_t i = 0; i < a.size(); ++i) a[i] += b[i];
    for (std::size_t i = 0; i < into.biases[l].size(); ++i) into.biases[l][i] += g.biases[l][i];
  }
}

EpochStats run_epoch_common(MlpModel& model, SgdState& sgd, const EpochInputs& in,
                            AttackableSet& attackable, const StepFn& step) {
  const auto batches = assemble_epoch(in);
  EpochStats stats;
  std::vector<char> examined(in.train.size(), 0);
  double loss_sum = 0.0;
  for (std::size_t b = 0; b < batches.size(); ++b) {
    const Batch& batch = batches[b];
    AttackContext ctx;
    ctx.rng = StreamKey::derive(in.spec.seed, "attack", static_cast<std::uint64_t>(in.epoch), b);
    ctx.threads = in.spec.threads;
    StepOutput out;
    try {
      out = step(model, batch, ctx);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(in.epoch) + " batch " + std::to_string(b) + ": " + e.what());
    }
    if (!std::isfinite(out.loss)) {
      throw NumericError("epoch " + std::to_string(in.epoch) + " batch " + std::to_string(b) +
                         ": non-finite training loss");
    }

    std::vector<char> flags(batch.samples.size(), 0);
    for (std::size_t i = 0; i < batch.samples.size(); ++i) {
      const auto& s = batch.samples[i];
      const std::size_t pred = argmax(out.variant_logits.row(i));
      if (i < batch.num_original) {
        flags[i] = attackable_original(pred, s) ? 1 : 0;
        if (flags[i]) attackable.insert(s);
        if (!examined[s.id]) {
          examined[s.id] = 1;
          ++stats.originals_examined;
        }
      } else {
        flags[i] = attackable_interpolated(pred, s) ? 1 : 0;
        ++stats.interpolated_examined;
        if (flags[i]) ++stats.interpolated_attackable;
      }
    }
    if (in.observer) {
      BatchRecord rec;
      rec.epoch = in.epoch;
      rec.batch = b;
      rec.model = &model;
      rec.samples = batch.samples;
      rec.num_original = batch.num_original;
      rec.variants = &out.variants;
      rec.attackable = flags;
      in.observer(rec);
    }
    try {
      sgd_step(model, out.grads, sgd);
    } catch (const NumericError& e) {
      throw NumericError("epoch " + std::to_string(in.epoch) + " batch " + std::to_string(b) + ": " + e.what());
    }
    loss_sum += out.loss;
    stats.samples_consumed += batch.samples.size();
  }
  stats.batches = batches.size();
  stats.mean_train_loss = batches.empty() ? 0.0 : loss_sum / static_cast<double>(batches.size());
  return stats;
}

// Mean soft-label CE on the adversarial variants.
StepOutput ce_update(const MlpModel& model, const Batch& batch, DenseMatrix variants) {
  StepOutput out;
  const auto trace = forward_trace(model, variants);
  const auto loss = evaluate_loss(LossKind::ce, trace.logits(), batch.y, nullptr, Reduction::mean);
  out.grads = backward(model, trace, loss.logit_grad, true, false).params;
  out.loss = loss.value;
  out.variant_logits = trace.logits();
  out.variants = std::move(variants);
  return out;
}

}  // namespace

EpochStats run_epoch_at_family(MlpModel& model, SgdState& sgd, const EpochInputs& in,
                               AttackableSet& attackable) {
  const AttackSpec attack = in.spec.family_attack();
  return run_epoch_common(model, sgd, in, attackable,
                          [&](const MlpModel& m, const Batch& batch, const AttackContext& ctx) {
                            return ce_update(m, batch, pgd_attack(m, batch.x, batch.y, attack, ctx));
                          });
}

EpochStats run_epoch_fastat(MlpModel& model, SgdState& sgd, const EpochInputs& in,
                            AttackableSet& attackable) {
  const AttackSpec attack = in.spec.family_attack();
  return run_epoch_common(model, sgd, in, attackable,
                          [&](const MlpModel& m, const Batch& batch, const AttackContext& ctx) {
                            return ce_update(m, batch, fgsm_random(m, batch.x, batch.y, attack, ctx));
                          });
}

EpochStats run_epoch_trades(MlpModel& model, SgdState& sgd, const EpochInputs& in,
                            AttackableSet& attackable) {
  const AttackSpec attack = in.spec.family_attack();
  const double beta = in.spec.trades_beta;
  return run_epoch_common(
      model, sgd, in, attackable, [&](const MlpModel& m, const Batch& batch, const AttackContext& ctx) {
        StepOutput out;
        out.variants = trades_attack(m, batch.x, attack, ctx);
        const auto nat = forward_trace(m, batch.x);
        const auto adv = forward_trace(m, out.variants);
        const auto ce = evaluate_loss(LossKind::ce, nat.logits(), batch.y, nullptr, Reduction::mean);
        // KL(p || q), p = softmax(natural), q = softmax(adversarial); both sides carry gradient.
        const auto kl = evaluate_loss(LossKind::kl_vs_reference, adv.logits(), batch.y, &nat.logits(),
                                      Reduction::mean);
        const DenseMatrix logp = log_softmax(nat.logits());
        const DenseMatrix logq = log_softmax(adv.logits());
        const double scale = 1.0 / static_cast<double>(batch.x.rows());
        DenseMatrix nat_grad = ce.logit_grad;
        for (std::size_t i = 0; i < nat_grad.rows(); ++i) {
          double row_kl = 0.0;
          for (std::size_t c = 0; c < nat_grad.cols(); ++c) row_kl += std::exp(logp(i, c)) * (logp(i, c) - logq(i, c));
          for (std::size_t c = 0; c < nat_grad.cols(); ++c) {
            nat_grad(i, c) += beta * scale * std::exp(logp(i, c)) * (logp(i, c) - logq(i, c) - row_kl);
          }
        }
        DenseMatrix adv_grad = kl.logit_grad;
        for (auto& v : adv_grad.values()) v *= beta;
        out.grads = backward(m, nat, nat_grad, true, false).params;
        accumulate(out.grads, backward(m, adv, adv_grad, true, false).params);
        out.loss = ce.value + beta * kl.value;
        out.variant_logits = adv.logits();
        return out;
      });
}

EpochStats run_epoch_gairat(MlpModel& model, SgdState& sgd, const EpochInputs& in,
                            AttackableSet& attackable) {
  const AttackSpec attack = in.spec.family_attack();
  return run_epoch_common(
      model, sgd, in, attackable, [&](const MlpModel& m, const Batch& batch, const AttackContext& base) {
        std::vector<int> kappa;
        AttackContext ctx = base;
        ctx.steps_correct = &kappa;
        StepOutput out;
        out.variants = pgd_attack(m, batch.x, batch.y, attack, ctx);
        const auto weights = gairat_batch_weights(kappa, attack.steps);
        const auto trace = forward_trace(m, out.variants);
        auto loss = evaluate_loss(LossKind::ce, trace.logits(), batch.y, nullptr, Reduction::sum);
        const DenseMatrix logp = log_softmax(trace.logits());
        out.loss = 0.0;
        for (std::size_t i = 0; i < loss.logit_grad.rows(); ++i) {
          double row_ce = 0.0;
          for (std::size_t c = 0; c < logp.cols(); ++c) row_ce -= batch.y(i, c) * logp(i, c);
          out.loss += weights[i] * row_ce;
          for (auto& v : loss.logit_grad.row(i)) v *= weights[i];
        }
        out.grads = backward(m, trace, loss.logit_grad, true, false).params;
        out.variant_logits = trace.logits();
        return out;
      });
}

TrainingResult run_training(const TrainSpec& spec, MlpModel initial, const Dataset& train,
                            const Dataset& test, const TrainingHooks& hooks) {
  spec.validate();
  initial.validate();
  if (train.dim != initial.input_dim() || train.num_classes != initial.num_classes()) {
    throw DimensionError("run_training: dataset shape does not match the model");
  }
  if (test.empty()) throw ValidationError("run_training: held-out set is empty");
  for (const auto& a : hooks.eval_attacks) a.spec.validate();

  TrainingResult result;
  result.final_model = initial;
  result.best_model = initial;
  result.best_selection_acc = -1.0;

  const InterpSource source = interp_source_of(spec.algorithm);
  const LambdaPolicy lambda = spec.effective_lambda();
  const std::size_t batches = spec.batches_for(train.size());
  AttackSpec selection = AttackSpec::pgd(spec.attack.epsilon, spec.attack.alpha, spec.attack.steps);

  MlpModel& model = result.final_model;
  SgdState sgd = SgdState::for_model(model, spec.schedule.initial, spec.momentum, spec.weight_decay);
  AttackableSet previous = AttackableSet::everything(train);

  for (int t = 1; t <= spec.epochs; ++t) {
    sgd.learning_rate = lr_at_epoch(spec.schedule, spec.epochs, t);

    InterpolationSet interp;
    bool active = source != InterpSource::none && spec.m_prime > 0 && t > spec.burn_in_epochs;
    bool fallback = false;
    if (active) {
      const StreamKey key = StreamKey::derive(spec.seed, "interpolation", static_cast<std::uint64_t>(t));
      const PairingOptions pairing{spec.cross_class_only};
      interp = source == InterpSource::gif
                   ? build_interpolation_set(train, previous, batches * spec.m_prime, lambda, key, pairing)
                   : build_mixup_set(train, batches * spec.m_prime, lambda, key, pairing);
      if (interp.fallback) {
        active = false;
        fallback = true;
      }
    }

    AttackableSet current(t);
    const EpochInputs in{train, active ? &interp : nullptr, spec, t, hooks.on_batch};
    EpochStats stats;
    switch (family_of(spec.algorithm)) {
      case Family::at: stats = run_epoch_at_family(model, sgd, in, current); break;
      case Family::trades: stats = run_epoch_trades(model, sgd, in, current); break;
      case Family::gairat: stats = run_epoch_gairat(model, sgd, in, current); break;
      case Family::fastat: stats = run_epoch_fastat(model, sgd, in, current); break;
    }

    EpochMetrics em;
    em.epoch = t;
    em.learning_rate = sgd.learning_rate;
    em.mean_train_loss = stats.mean_train_loss;
    em.natural_test_acc = eval_natural(model, test);
    for (const auto& a : hooks.eval_attacks) {
      const double acc = eval_robust(model, test, a.spec, spec.threads);
      em.robust_test_acc.emplace_back(a.name, acc);
      if (a.spec.loss == LossKind::cw_margin) {
        if (!em.robust_acc_cw) em.robust_acc_cw = acc;
      } else if (a.spec.loss == LossKind::ce) {
        if (!em.robust_acc_pgd) em.robust_acc_pgd = acc;
      }
    }
    em.attackable_set_size = current.size();
    em.originals_examined = stats.originals_examined;
    em.attackable_ratio_original = stats.originals_examined
                                       ? static_cast<double>(current.size()) / static_cast<double>(stats.originals_examined)
                                       : 0.0;
    em.interpolated_examined = stats.interpolated_examined;
    em.interpolated_attackable = stats.interpolated_attackable;
    if (stats.interpolated_examined > 0) {
      em.attackable_ratio_interpolated = static_cast<double>(stats.interpolated_attackable) /
                                         static_cast<double>(stats.interpolated_examined);
    }
    em.samples_consumed = stats.samples_consumed;
    em.interpolation_active = active;
    em.interpolation_fallback = fallback;
    em.selection_robust_acc = eval_robust(model, test, selection, spec.threads);
    if (em.selection_robust_acc > result.best_selection_acc) {
      result.best_selection_acc = em.selection_robust_acc;
      result.best_epoch = t;
      result.best_model = model;
    }
    result.metrics.push_back(em);
    if (hooks.on_epoch) hooks.on_epoch(result.metrics.back());
    previous = std::move(current);
  }
  if (result.best_selection_acc < 0.0) result.best_selection_acc = 0.0;
  return result;
}

}  // namespace advlab
