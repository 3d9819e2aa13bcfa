#include "advlab/attacks.hpp"

#include <algorithm>
#include <cmath>
#include <string>

#include "advlab/error.hpp"
#include "advlab/parallel.hpp"

namespace advlab {

std::string_view to_string(AttackInit init) {
  switch (init) {
    case AttackInit::natural: return "natural";
    case AttackInit::uniform: return "uniform";
    case AttackInit::gaussian: return "gaussian";
  }
  return "?";
}

AttackInit parse_attack_init(std::string_view text) {
  if (text == "natural") return AttackInit::natural;
  if (text == "uniform") return AttackInit::uniform;
  if (text == "gaussian") return AttackInit::gaussian;
  throw ConfigError("unknown attack init '" + std::string(text) + "'");
}

void AttackSpec::validate() const {
  if (!std::isfinite(epsilon) || epsilon < 0.0) throw ConfigError("attack epsilon must be finite and >= 0");
  if (!std::isfinite(alpha) || alpha < 0.0) throw ConfigError("attack alpha must be finite and >= 0");
  if (steps < 1) throw ConfigError("attack steps must be >= 1");
  if (init == AttackInit::gaussian && !(gaussian_std > 0.0 && std::isfinite(gaussian_std))) {
    throw ConfigError("gaussian attack init needs gamma > 0");
  }
}

AttackSpec AttackSpec::pgd(double epsilon, double alpha, int steps) {
  AttackSpec s;
  s.epsilon = epsilon;
  s.alpha = alpha;
  s.steps = steps;
  return s;
}

AttackSpec AttackSpec::cw(double epsilon, double alpha, int steps) {
  AttackSpec s = pgd(epsilon, alpha, steps);
  s.loss = LossKind::cw_margin;
  return s;
}

AttackSpec AttackSpec::fgsm(double epsilon, double alpha) {
  AttackSpec s = pgd(epsilon, alpha, 1);
  s.init = AttackInit::uniform;
  return s;
}

AttackSpec AttackSpec::trades(double epsilon, double alpha, int steps, double gamma) {
  AttackSpec s = pgd(epsilon, alpha, steps);
  s.init = AttackInit::gaussian;
  s.gaussian_std = gamma;
  s.loss = LossKind::kl_vs_reference;
  return s;
}

DenseMatrix project(const DenseMatrix& x_adv, const DenseMatrix& x_origin, double epsilon, bool clamp) {
  require_same_shape(x_adv, x_origin, "project");
  DenseMatrix out = x_adv;
  auto o = out.values();
  const auto origin = x_origin.values();
  for (std::size_t i = 0; i < o.size(); ++i) {
    double v = std::clamp(o[i], origin[i] - epsilon, origin[i] + epsilon);
    if (clamp) v = std::clamp(v, 0.0, 1.0);
    o[i] = v;
  }
  return out;
}

void check_attack_output(const DenseMatrix& x_adv, const DenseMatrix& x, const AttackSpec& spec) {
  require_same_shape(x_adv, x, "attack output");
  const auto a = x_adv.values();
  const auto o = x.values();
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::abs(a[i] - o[i]) > spec.epsilon + 1e-12) {
      throw ContractError("attack output left the epsilon ball at element " + std::to_string(i));
    }
    if (spec.clamp && (a[i] < 0.0 || a[i] > 1.0)) {
      throw ContractError("attack output left the unit box at element " + std::to_string(i));
    }
  }
}

namespace {

double sign(double g) { return g > 0.0 ? 1.0 : (g < 0.0 ? -1.0 : 0.0); }

DenseMatrix start_point(const DenseMatrix& x, const AttackSpec& spec, const AttackContext& ctx,
                        std::size_t first_row) {
  DenseMatrix start = x;
  if (spec.init == AttackInit::natural) return start;
  for (std::size_t i = 0; i < start.rows(); ++i) {
    CounterRng rng(ctx.rng.child(ctx.row_offset + first_row + i));
    for (auto& v : start.row(i)) {
      v += spec.init == AttackInit::uniform ? rng.uniform(-spec.epsilon, spec.epsilon)
                                            : spec.gaussian_std * rng.normal();
    }
  }
  return project(start, x, spec.epsilon, spec.clamp);
}

// Rows are processed independently; the loss is summed (not averaged) so a
// row's gradient does not depend on how the batch is chunked.
void attack_rows(const MlpModel& model, const DenseMatrix& x, const DenseMatrix& labels,
                 const DenseMatrix* reference, const AttackSpec& spec, const AttackContext& ctx,
                 std::size_t begin, std::size_t end, DenseMatrix& out) {
  const DenseMatrix x0 = x.slice_rows(begin, end);
  const DenseMatrix y = labels.rows() ? labels.slice_rows(begin, end) : DenseMatrix();
  DenseMatrix ref;
  if (reference) ref = reference->slice_rows(begin, end);
  std::vector<std::size_t> targets;
  if (ctx.steps_correct) targets = hard_labels(y);

  DenseMatrix cur = start_point(x0, spec, ctx, begin);
  for (int k = 0; k < spec.steps; ++k) {
    const auto trace = forward_trace(model, cur);
    if (ctx.steps_correct) {
      for (std::size_t i = 0; i < cur.rows(); ++i) {
        if (argmax(trace.logits().row(i)) == targets[i]) ++(*ctx.steps_correct)[begin + i];
      }
    }
    const auto loss = evaluate_loss(spec.loss, trace.logits(), y, reference ? &ref : nullptr, Reduction::sum);
    const auto grad = backward(model, trace, loss.logit_grad, false, true).inputs;
    auto c = cur.values();
    const auto g = grad.values();
    for (std::size_t i = 0; i < c.size(); ++i) c[i] += spec.alpha * sign(g[i]);
    cur = project(cur, x0, spec.epsilon, spec.clamp);
  }
  out.set_rows(begin, cur);
}

DenseMatrix attack_impl(const MlpModel& model, const DenseMatrix& x, const DenseMatrix& labels,
                        const DenseMatrix* reference, const AttackSpec& spec, const AttackContext& ctx) {
  spec.validate();
  if (x.cols() != model.input_dim()) throw DimensionError("attack: input dim does not match model");
  if (labels.rows() && labels.rows() != x.rows()) throw DimensionError("attack: label row count mismatch");
  if (ctx.steps_correct) ctx.steps_correct->assign(x.rows(), 0);
  DenseMatrix out(x.rows(), x.cols());
  parallel_for(x.rows(), ctx.threads, [&](std::size_t b, std::size_t e) {
    attack_rows(model, x, labels, reference, spec, ctx, b, e, out);
  });
  check_attack_output(out, x, spec);
  return out;
}

}  // namespace

DenseMatrix pgd_attack(const MlpModel& model, const DenseMatrix& x, const DenseMatrix& soft_labels,
                       const AttackSpec& spec, const AttackContext& ctx) {
  if (spec.loss == LossKind::kl_vs_reference) {
    throw ConfigError("pgd_attack: loss must be ce or cw (use trades_attack for KL)");
  }
  if (soft_labels.rows() != x.rows() || soft_labels.cols() != model.num_classes()) {
    throw DimensionError("pgd_attack: labels must be rows x classes");
  }
  return attack_impl(model, x, soft_labels, nullptr, spec, ctx);
}

DenseMatrix fgsm_random(const MlpModel& model, const DenseMatrix& x, const DenseMatrix& soft_labels,
                        const AttackSpec& spec, const AttackContext& ctx) {
  if (spec.init != AttackInit::uniform || spec.steps != 1) {
    throw ConfigError("fgsm_random: spec must use uniform init and a single step");
  }
  return pgd_attack(model, x, soft_labels, spec, ctx);
}

DenseMatrix trades_attack(const MlpModel& model, const DenseMatrix& x, const AttackSpec& spec,
                          const AttackContext& ctx) {
  if (spec.loss != LossKind::kl_vs_reference) throw ConfigError("trades_attack: loss must be kl");
  if (spec.init != AttackInit::gaussian) throw ConfigError("trades_attack: init must be gaussian");
  const DenseMatrix reference = forward(model, x);
  return attack_impl(model, x, DenseMatrix(), &reference, spec, ctx);
}

DenseMatrix run_attack(const MlpModel& model, const DenseMatrix& x, const DenseMatrix& soft_labels,
                       const AttackSpec& spec, const AttackContext& ctx) {
  if (spec.loss == LossKind::kl_vs_reference) {
    // KL attacks may start anywhere; the reference is always the natural input.
    const DenseMatrix reference = forward(model, x);
    return attack_impl(model, x, soft_labels, &reference, spec, ctx);
  }
  return pgd_attack(model, x, soft_labels, spec, ctx);
}

}  // namespace advlab
