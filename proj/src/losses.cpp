#include "advlab/losses.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <string>

#include "advlab/error.hpp"

namespace advlab {

DenseMatrix log_softmax(const DenseMatrix& logits) {
  DenseMatrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    const double zmax = *std::max_element(z.begin(), z.end());
    double sum = 0.0;
    for (const double v : z) sum += std::exp(v - zmax);
    const double lse = zmax + std::log(sum);
    auto o = out.row(i);
    for (std::size_t c = 0; c < z.size(); ++c) o[c] = z[c] - lse;
  }
  return out;
}

DenseMatrix softmax(const DenseMatrix& logits) {
  DenseMatrix out(logits.rows(), logits.cols());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    const double zmax = *std::max_element(z.begin(), z.end());
    auto o = out.row(i);
    double sum = 0.0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      o[c] = std::exp(z[c] - zmax);
      sum += o[c];
    }
    for (auto& v : o) v /= sum;
  }
  return out;
}

void validate_soft_labels(const DenseMatrix& soft_labels) {
  for (std::size_t i = 0; i < soft_labels.rows(); ++i) {
    double sum = 0.0;
    for (const double v : soft_labels.row(i)) {
      if (!(v >= 0.0 && v <= 1.0)) {
        throw ValidationError("soft label row " + std::to_string(i) + " has entry outside [0,1]");
      }
      sum += v;
    }
    if (std::abs(sum - 1.0) > 1e-9) {
      throw ValidationError("soft label row " + std::to_string(i) + " sums to " +
                            std::to_string(sum));
    }
  }
}

std::vector<std::size_t> hard_labels(const DenseMatrix& soft_labels) {
  std::vector<std::size_t> out(soft_labels.rows());
  for (std::size_t i = 0; i < out.size(); ++i) out[i] = argmax(soft_labels.row(i));
  return out;
}

std::string_view to_string(LossKind kind) {
  switch (kind) {
    case LossKind::ce: return "ce";
    case LossKind::kl_vs_reference: return "kl";
    case LossKind::cw_margin: return "cw";
  }
  return "?";
}

namespace {

LossValue ce_loss(const DenseMatrix& logits, const DenseMatrix& labels, double scale) {
  require_same_shape(logits, labels, "cross-entropy");
  validate_soft_labels(labels);
  const DenseMatrix logp = log_softmax(logits);
  LossValue out{0.0, DenseMatrix(logits.rows(), logits.cols())};
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto lp = logp.row(i);
    const auto y = labels.row(i);
    auto g = out.logit_grad.row(i);
    double ysum = 0.0;
    for (std::size_t c = 0; c < lp.size(); ++c) {
      if (y[c] != 0.0) out.value -= y[c] * lp[c];
      ysum += y[c];
    }
    for (std::size_t c = 0; c < lp.size(); ++c) g[c] = scale * (ysum * std::exp(lp[c]) - y[c]);
  }
  out.value *= scale;
  return out;
}

// KL(p || q) with p = softmax(reference) frozen, q = softmax(logits).
LossValue kl_loss(const DenseMatrix& logits, const DenseMatrix& reference, double scale) {
  require_same_shape(logits, reference, "KL divergence");
  const DenseMatrix logp = log_softmax(reference);
  const DenseMatrix logq = log_softmax(logits);
  LossValue out{0.0, DenseMatrix(logits.rows(), logits.cols())};
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto lp = logp.row(i);
    const auto lq = logq.row(i);
    auto g = out.logit_grad.row(i);
    double row = 0.0;
    for (std::size_t c = 0; c < lp.size(); ++c) {
      const double p = std::exp(lp[c]);
      row += p * (lp[c] - lq[c]);
      g[c] = scale * (std::exp(lq[c]) - p);
    }
    out.value += std::max(row, 0.0);
  }
  out.value *= scale;
  return out;
}

LossValue cw_loss(const DenseMatrix& logits, const DenseMatrix& labels, double scale) {
  if (logits.rows() != labels.rows()) throw DimensionError("cw margin: row count mismatch");
  const auto y = hard_labels(labels);
  const auto margins = cw_margin_loss(logits, y);
  LossValue out{0.0, DenseMatrix(logits.rows(), logits.cols())};
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    const auto z = logits.row(i);
    std::size_t best = y[i] == 0 ? 1 : 0;
    for (std::size_t c = 0; c < z.size(); ++c) {
      if (c != y[i] && z[c] > z[best]) best = c;
    }
    out.value += margins[i];
    out.logit_grad(i, best) = scale;
    out.logit_grad(i, y[i]) = -scale;
  }
  out.value *= scale;
  return out;
}

}  // namespace

double loss_ce_soft(const DenseMatrix& logits, const DenseMatrix& soft_labels) {
  if (logits.rows() == 0) return 0.0;
  return ce_loss(logits, soft_labels, 1.0 / static_cast<double>(logits.rows())).value;
}

double loss_kl(const DenseMatrix& natural_logits, const DenseMatrix& adv_logits) {
  if (adv_logits.rows() == 0) return 0.0;
  return kl_loss(adv_logits, natural_logits, 1.0 / static_cast<double>(adv_logits.rows())).value;
}

std::vector<double> cw_margin_loss(const DenseMatrix& logits, const std::vector<std::size_t>& labels) {
  if (logits.cols() < 2) throw ValidationError("cw margin needs at least two classes");
  if (labels.size() != logits.rows()) throw DimensionError("cw margin: label count mismatch");
  std::vector<double> out(logits.rows());
  for (std::size_t i = 0; i < logits.rows(); ++i) {
    if (labels[i] >= logits.cols()) {
      throw ValidationError("cw margin: label " + std::to_string(labels[i]) + " out of range");
    }
    const auto z = logits.row(i);
    double other = -std::numeric_limits<double>::infinity();
    for (std::size_t c = 0; c < z.size(); ++c) {
      if (c != labels[i]) other = std::max(other, z[c]);
    }
    out[i] = other - z[labels[i]];
  }
  return out;
}

LossValue evaluate_loss(LossKind kind, const DenseMatrix& logits, const DenseMatrix& soft_labels,
                        const DenseMatrix* reference_logits, Reduction reduction) {
  const double scale = reduction == Reduction::mean && logits.rows() > 0
                           ? 1.0 / static_cast<double>(logits.rows())
                           : 1.0;
  switch (kind) {
    case LossKind::ce: return ce_loss(logits, soft_labels, scale);
    case LossKind::kl_vs_reference:
      if (reference_logits == nullptr) {
        throw ConfigError("KL loss requires reference logits");
      }
      return kl_loss(logits, *reference_logits, scale);
    case LossKind::cw_margin: return cw_loss(logits, soft_labels, scale);
  }
  throw ConfigError("unknown loss kind");
}

DenseMatrix grad_input(const MlpModel& model, const DenseMatrix& inputs,
                       const DenseMatrix& soft_labels, LossKind kind,
                       const DenseMatrix* reference_logits) {
  if (kind == LossKind::kl_vs_reference && reference_logits == nullptr) {
    throw ConfigError("grad_input: KL loss requires reference logits");
  }
  const auto trace = forward_trace(model, inputs);
  const auto loss = evaluate_loss(kind, trace.logits(), soft_labels, reference_logits, Reduction::mean);
  return backward(model, trace, loss.logit_grad, false, true).inputs;
}

ParamGrads grad_params(const MlpModel& model, const DenseMatrix& inputs,
                       const DenseMatrix& soft_labels, LossKind kind,
                       const DenseMatrix* reference_logits) {
  if (kind == LossKind::kl_vs_reference && reference_logits == nullptr) {
    throw ConfigError("grad_params: KL loss requires reference logits");
  }
  const auto trace = forward_trace(model, inputs);
  const auto loss = evaluate_loss(kind, trace.logits(), soft_labels, reference_logits, Reduction::mean);
  return backward(model, trace, loss.logit_grad, true, false).params;
}

double loss_value(const MlpModel& model, const DenseMatrix& inputs, const DenseMatrix& soft_labels,
                  LossKind kind, const DenseMatrix* reference_logits) {
  const DenseMatrix logits = forward(model, inputs);
  return evaluate_loss(kind, logits, soft_labels, reference_logits, Reduction::mean).value;
}

}  // namespace advlab
