#pragma once

#include "advlab/dataset.hpp"
#include "advlab/datasets.hpp"
#include "advlab/losses.hpp"
#include "advlab/mlp.hpp"
#include "advlab/optim.hpp"

namespace fixture {

// Small full-batch natural training run; good enough to get a model with a
// non-trivial boundary on the two-Gaussian toy set.
inline advlab::MlpModel trained_toy_model(const advlab::Dataset& data, std::uint64_t seed = 3,
                                          int iterations = 300) {
  using namespace advlab;
  MlpModel m = init_model({data.dim, 16, data.num_classes}, Activation::tanh, seed);
  const auto x = feature_matrix(data);
  const auto y = label_matrix(data);
  auto st = SgdState::for_model(m, 0.5, 0.9, 0.0);
  for (int i = 0; i < iterations; ++i) sgd_step(m, grad_params(m, x, y, LossKind::ce), st);
  return m;
}

inline advlab::Dataset toy_gaussians(std::size_t n = 100, std::uint64_t seed = 1) {
  return advlab::gen_two_gaussians(n, {{{0.35, 0.35}, {0.65, 0.65}}}, 0.1, seed);
}

inline advlab::MlpModel zero_model(std::vector<std::size_t> sizes) {
  auto m = advlab::init_model(sizes, advlab::Activation::relu, 1);
  for (auto& w : m.weights) std::fill(w.values().begin(), w.values().end(), 0.0);
  return m;
}

}  // namespace fixture
