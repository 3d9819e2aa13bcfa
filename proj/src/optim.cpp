#include "advlab/optim.hpp"

#include <cmath>
#include <string>

#include "advlab/error.hpp"

namespace advlab {

SgdState SgdState::for_model(const MlpModel& model, double learning_rate, double momentum,
                             double weight_decay) {
  if (!(learning_rate > 0.0) || !std::isfinite(learning_rate)) {
    throw ConfigError("learning rate must be positive and finite");
  }
  if (!(momentum >= 0.0 && momentum < 1.0)) throw ConfigError("momentum must lie in [0,1)");
  if (!(weight_decay >= 0.0) || !std::isfinite(weight_decay)) {
    throw ConfigError("weight decay must be non-negative");
  }
  return {learning_rate, momentum, weight_decay, ParamGrads::zeros_like(model)};
}

namespace {

void update(std::span<double> param, std::span<const double> grad, std::span<double> velocity,
            const SgdState& s) {
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double g = grad[i] + s.weight_decay * param[i];
    velocity[i] = s.momentum * velocity[i] + g;
    param[i] -= s.learning_rate * velocity[i];
  }
}

}  // namespace

void sgd_step(MlpModel& model, const ParamGrads& grads, SgdState& state) {
  const std::size_t layers = model.num_layers();
  if (grads.weights.size() != layers || grads.biases.size() != layers ||
      state.velocity.weights.size() != layers || state.velocity.biases.size() != layers) {
    throw DimensionError("sgd_step: layer count mismatch");
  }
  for (std::size_t l = 0; l < layers; ++l) {
    require_same_shape(model.weights[l], grads.weights[l], "sgd_step weights");
    require_same_shape(model.weights[l], state.velocity.weights[l], "sgd_step velocity");
    if (grads.biases[l].size() != model.biases[l].size() ||
        state.velocity.biases[l].size() != model.biases[l].size()) {
      throw DimensionError("sgd_step: bias shape mismatch at layer " + std::to_string(l));
    }
  }

  MlpModel next = model;
  ParamGrads velocity = state.velocity;
  for (std::size_t l = 0; l < layers; ++l) {
    update(next.weights[l].values(), grads.weights[l].values(), velocity.weights[l].values(), state);
    update(next.biases[l], grads.biases[l], velocity.biases[l], state);
    next.weights[l].require_finite("sgd_step weights layer " + std::to_string(l));
    for (const double b : next.biases[l]) {
      if (!std::isfinite(b)) throw NumericError("sgd_step: non-finite bias at layer " + std::to_string(l));
    }
  }
  model = std::move(next);
  state.velocity = std::move(velocity);
}

}  // namespace advlab
