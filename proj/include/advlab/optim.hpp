#pragma once

#include "advlab/mlp.hpp"

namespace advlab {

/// Heavy-ball SGD with L2 weight decay folded into the gradient:
///   g = grad + wd * p;  v = mu * v + g;  p = p - lr * v
/// Decay applies to weights and biases alike.
struct SgdState {
  double learning_rate = 0.1;
  double momentum = 0.9;
  double weight_decay = 5e-4;
  ParamGrads velocity;

  static SgdState for_model(const MlpModel& model, double learning_rate, double momentum,
                            double weight_decay);
};

/// Throws NumericError (leaving model and state untouched) if the update
/// would produce a non-finite parameter.
void sgd_step(MlpModel& model, const ParamGrads& grads, SgdState& state);

}  // namespace advlab
