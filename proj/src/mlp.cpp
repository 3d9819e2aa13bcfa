#include "advlab/mlp.hpp"

#include <cmath>
#include <string>

#include "advlab/error.hpp"
#include "advlab/rng.hpp"

namespace advlab {

std::string_view to_string(Activation activation) {
  return activation == Activation::relu ? "relu" : "tanh";
}

Activation parse_activation(std::string_view text) {
  if (text == "relu") return Activation::relu;
  if (text == "tanh") return Activation::tanh;
  throw ConfigError("unknown activation '" + std::string(text) + "' (expected relu or tanh)");
}

void MlpModel::validate() const {
  if (layer_sizes.size() < 2) throw ConfigError("model needs at least two layer sizes");
  if (weights.size() != layer_sizes.size() - 1 || biases.size() != weights.size()) {
    throw DimensionError("model: parameter count does not match layer_sizes");
  }
  for (std::size_t l = 0; l < weights.size(); ++l) {
    if (weights[l].rows() != layer_sizes[l + 1] || weights[l].cols() != layer_sizes[l] ||
        biases[l].size() != layer_sizes[l + 1]) {
      throw DimensionError("model: layer " + std::to_string(l) + " shape mismatch");
    }
  }
}

ParamGrads ParamGrads::zeros_like(const MlpModel& model) {
  ParamGrads g;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    g.weights.emplace_back(model.weights[l].rows(), model.weights[l].cols());
    g.biases.emplace_back(model.biases[l].size(), 0.0);
  }
  return g;
}

MlpModel init_model(const std::vector<std::size_t>& layer_sizes, Activation activation,
                    std::uint64_t seed) {
  if (layer_sizes.size() < 2) throw ConfigError("init_model: need at least two layer sizes");
  for (const auto s : layer_sizes) {
    if (s == 0) throw ConfigError("init_model: layer sizes must be positive");
  }
  MlpModel model;
  model.layer_sizes = layer_sizes;
  model.activation = activation;
  for (std::size_t l = 0; l + 1 < layer_sizes.size(); ++l) {
    const std::size_t fan_in = layer_sizes[l];
    const std::size_t fan_out = layer_sizes[l + 1];
    const double scale = 1.0 / std::sqrt(static_cast<double>(fan_in));
    CounterRng rng(StreamKey::derive(seed, "init", l));
    DenseMatrix w(fan_out, fan_in);
    for (auto& v : w.values()) v = rng.uniform(-scale, scale);
    model.weights.push_back(std::move(w));
    model.biases.emplace_back(fan_out, 0.0);
  }
  return model;
}

namespace {

void check_input(const MlpModel& model, const DenseMatrix& inputs) {
  if (inputs.cols() != model.input_dim()) {
    throw DimensionError("forward: input dim " + std::to_string(inputs.cols()) +
                         " but model expects " + std::to_string(model.input_dim()));
  }
}

DenseMatrix affine(const DenseMatrix& x, const DenseMatrix& w, const std::vector<double>& b) {
  DenseMatrix z = matmul_transposed(x, w);
  for (std::size_t i = 0; i < z.rows(); ++i) {
    auto row = z.row(i);
    for (std::size_t j = 0; j < row.size(); ++j) row[j] += b[j];
  }
  return z;
}

void activate(DenseMatrix& z, Activation act) {
  for (auto& v : z.values()) v = act == Activation::relu ? (v > 0.0 ? v : 0.0) : std::tanh(v);
}

}  // namespace

ForwardTrace forward_trace(const MlpModel& model, const DenseMatrix& inputs) {
  check_input(model, inputs);
  ForwardTrace trace;
  trace.outputs.reserve(model.num_layers() + 1);
  trace.outputs.push_back(inputs);
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    DenseMatrix z = affine(trace.outputs.back(), model.weights[l], model.biases[l]);
    if (l + 1 < model.num_layers()) activate(z, model.activation);
    trace.outputs.push_back(std::move(z));
  }
  trace.outputs.back().require_finite("forward logits");
  return trace;
}

DenseMatrix forward(const MlpModel& model, const DenseMatrix& inputs) {
  check_input(model, inputs);
  DenseMatrix h = inputs;
  for (std::size_t l = 0; l < model.num_layers(); ++l) {
    DenseMatrix z = affine(h, model.weights[l], model.biases[l]);
    if (l + 1 < model.num_layers()) activate(z, model.activation);
    h = std::move(z);
  }
  h.require_finite("forward logits");
  return h;
}

BackwardResult backward(const MlpModel& model, const ForwardTrace& trace,
                        const DenseMatrix& logit_grad, bool want_params, bool want_inputs) {
  require_same_shape(trace.logits(), logit_grad, "backward: logit gradient");
  BackwardResult result;
  if (want_params) result.params = ParamGrads::zeros_like(model);

  DenseMatrix delta = logit_grad;  // d loss / d pre-activation of layer l
  for (std::size_t l = model.num_layers(); l-- > 0;) {
    const DenseMatrix& in = trace.outputs[l];
    const DenseMatrix& w = model.weights[l];
    if (want_params) {
      auto& gw = result.params.weights[l];
      auto& gb = result.params.biases[l];
      for (std::size_t i = 0; i < delta.rows(); ++i) {
        const auto d = delta.row(i);
        const auto x = in.row(i);
        for (std::size_t o = 0; o < d.size(); ++o) {
          gb[o] += d[o];
          auto gw_row = gw.row(o);
          for (std::size_t k = 0; k < x.size(); ++k) gw_row[k] += d[o] * x[k];
        }
      }
    }
    if (l == 0 && !want_inputs) break;

    DenseMatrix prev(delta.rows(), w.cols());
    for (std::size_t i = 0; i < delta.rows(); ++i) {
      const auto d = delta.row(i);
      auto p = prev.row(i);
      for (std::size_t o = 0; o < d.size(); ++o) {
        const auto w_row = w.row(o);
        for (std::size_t k = 0; k < p.size(); ++k) p[k] += d[o] * w_row[k];
      }
    }
    if (l > 0) {
      // `in` is the post-activation output of layer l-1.
      for (std::size_t idx = 0; idx < prev.size(); ++idx) {
        const double a = in.values()[idx];
        prev.values()[idx] *= model.activation == Activation::relu ? (a > 0.0 ? 1.0 : 0.0)
                                                                   : 1.0 - a * a;
      }
    }
    delta = std::move(prev);
  }
  if (want_inputs) {
    delta.require_finite("input gradient");
    result.inputs = std::move(delta);
  }
  return result;
}

}  // namespace advlab
