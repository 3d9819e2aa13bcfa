#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include "advlab/matrix.hpp"

namespace advlab {

enum class Activation { relu, tanh };

std::string_view to_string(Activation activation);
Activation parse_activation(std::string_view text);

/// Fully connected network: hidden layers share one activation, the last
/// layer emits raw logits. weights[l] is [layer_sizes[l+1] x layer_sizes[l]].
struct MlpModel {
  std::vector<std::size_t> layer_sizes;
  Activation activation = Activation::relu;
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;

  std::size_t input_dim() const { return layer_sizes.front(); }
  std::size_t num_classes() const { return layer_sizes.back(); }
  std::size_t num_layers() const { return weights.size(); }

  /// Throws DimensionError unless every tensor matches layer_sizes.
  void validate() const;

  bool operator==(const MlpModel&) const = default;
};

/// Same layout as the model's parameters. Also used for SGD velocities.
struct ParamGrads {
  std::vector<DenseMatrix> weights;
  std::vector<std::vector<double>> biases;

  static ParamGrads zeros_like(const MlpModel& model);
  bool operator==(const ParamGrads&) const = default;
};

/// Weights ~ U(-1/sqrt(fan_in), 1/sqrt(fan_in)), biases zero.
MlpModel init_model(const std::vector<std::size_t>& layer_sizes, Activation activation,
                    std::uint64_t seed);

DenseMatrix forward(const MlpModel& model, const DenseMatrix& inputs);

/// Layer outputs kept for reverse mode. outputs[0] is the input batch,
/// outputs.back() the logits.
struct ForwardTrace {
  std::vector<DenseMatrix> outputs;
  const DenseMatrix& logits() const { return outputs.back(); }
};

ForwardTrace forward_trace(const MlpModel& model, const DenseMatrix& inputs);

struct BackwardResult {
  ParamGrads params;
  DenseMatrix inputs;
};

/// Reverse pass of d(loss)/d(logits) through the recorded trace.
BackwardResult backward(const MlpModel& model, const ForwardTrace& trace,
                        const DenseMatrix& logit_grad, bool want_params, bool want_inputs);

}  // namespace advlab
