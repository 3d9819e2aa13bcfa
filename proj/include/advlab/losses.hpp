#pragma once

#include <cstddef>
#include <optional>
#include <string_view>
#include <vector>

#include "advlab/matrix.hpp"
#include "advlab/mlp.hpp"

namespace advlab {

/// Row-wise softmax with max subtraction.
DenseMatrix softmax(const DenseMatrix& logits);
DenseMatrix log_softmax(const DenseMatrix& logits);

/// Throws ValidationError unless every row is a probability vector
/// (entries in [0,1], sum within 1e-9 of one).
void validate_soft_labels(const DenseMatrix& soft_labels);

/// argmax of each soft-label row, ties to the lower class.
std::vector<std::size_t> hard_labels(const DenseMatrix& soft_labels);

/// Mean over rows of -sum_c y_c log softmax(z)_c.
double loss_ce_soft(const DenseMatrix& logits, const DenseMatrix& soft_labels);

/// Mean over rows of KL(softmax(natural) || softmax(adv)).
double loss_kl(const DenseMatrix& natural_logits, const DenseMatrix& adv_logits);

/// Per-row max_{i != y} z_i - z_y. Positive means misclassified.
std::vector<double> cw_margin_loss(const DenseMatrix& logits, const std::vector<std::size_t>& labels);

enum class LossKind { ce, kl_vs_reference, cw_margin };

std::string_view to_string(LossKind kind);

enum class Reduction { mean, sum };

struct LossValue {
  double value = 0.0;
  DenseMatrix logit_grad;
};

/// Scalar loss and its gradient w.r.t. the logits.
///   ce:              uses soft_labels
///   kl_vs_reference: KL(softmax(reference) || softmax(logits)), reference frozen
///   cw_margin:       margin against argmax(soft_labels)
LossValue evaluate_loss(LossKind kind, const DenseMatrix& logits, const DenseMatrix& soft_labels,
                        const DenseMatrix* reference_logits, Reduction reduction);

DenseMatrix grad_input(const MlpModel& model, const DenseMatrix& inputs,
                       const DenseMatrix& soft_labels, LossKind kind,
                       const DenseMatrix* reference_logits = nullptr);

ParamGrads grad_params(const MlpModel& model, const DenseMatrix& inputs,
                       const DenseMatrix& soft_labels, LossKind kind,
                       const DenseMatrix* reference_logits = nullptr);

/// Scalar loss matching grad_input / grad_params (mean over rows).
double loss_value(const MlpModel& model, const DenseMatrix& inputs, const DenseMatrix& soft_labels,
                  LossKind kind, const DenseMatrix* reference_logits = nullptr);

}  // namespace advlab
