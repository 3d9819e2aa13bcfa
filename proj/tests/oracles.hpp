#pragma once

// Independent reference computations used by the tests. Nothing here calls
// into the library's gradient code.

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <functional>
#include <vector>

#include "advlab/losses.hpp"
#include "advlab/matrix.hpp"
#include "advlab/mlp.hpp"
#include "advlab/rng.hpp"

namespace oracle {

inline double norm2(const std::vector<double>& v) {
  double s = 0.0;
  for (double x : v) s += x * x;
  return std::sqrt(s);
}

// ||a - b|| / max(||a||, ||b||); zero when both vanish.
inline double relative_error(const std::vector<double>& a, const std::vector<double>& b) {
  std::vector<double> d(a.size());
  for (std::size_t i = 0; i < a.size(); ++i) d[i] = a[i] - b[i];
  const double scale = std::max(norm2(a), norm2(b));
  if (scale == 0.0) return 0.0;
  return norm2(d) / scale;
}

inline std::vector<double> central_difference(std::vector<double>& x, const std::function<double()>& f,
                                              double h = 1e-4) {
  std::vector<double> g(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double saved = x[i];
    x[i] = saved + h;
    const double up = f();
    x[i] = saved - h;
    const double down = f();
    x[i] = saved;
    g[i] = (up - down) / (2.0 * h);
  }
  return g;
}

// Straightforward per-sample forward pass with explicit loops.
inline std::vector<double> forward_one(const advlab::MlpModel& m, std::vector<double> a) {
  for (std::size_t l = 0; l < m.weights.size(); ++l) {
    const auto& w = m.weights[l];
    std::vector<double> z(w.rows(), 0.0);
    for (std::size_t r = 0; r < w.rows(); ++r) {
      double s = m.biases[l][r];
      for (std::size_t c = 0; c < w.cols(); ++c) s += w(r, c) * a[c];
      z[r] = s;
    }
    if (l + 1 < m.weights.size()) {
      for (double& v : z) v = m.activation == advlab::Activation::relu ? std::max(0.0, v) : std::tanh(v);
    }
    a = std::move(z);
  }
  return a;
}

inline double linf(const advlab::DenseMatrix& a, const advlab::DenseMatrix& b) {
  double m = 0.0;
  for (std::size_t i = 0; i < a.values().size(); ++i) m = std::max(m, std::abs(a.values()[i] - b.values()[i]));
  return m;
}

inline std::size_t argmax_first(const std::vector<double>& v) {
  std::size_t best = 0;
  for (std::size_t i = 1; i < v.size(); ++i) {
    if (v[i] > v[best]) best = i;
  }
  return best;
}

inline std::vector<double> softmax_one(const std::vector<double>& z) {
  double mx = z[0];
  for (double v : z) mx = std::max(mx, v);
  std::vector<double> p(z.size());
  double s = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) s += (p[i] = std::exp(z[i] - mx));
  for (double& v : p) v /= s;
  return p;
}

inline advlab::DenseMatrix random_matrix(std::size_t r, std::size_t c, advlab::CounterRng& rng, double lo = 0.0,
                                         double hi = 1.0) {
  advlab::DenseMatrix m(r, c);
  for (double& v : m.values()) v = rng.uniform(lo, hi);
  return m;
}

inline advlab::DenseMatrix random_soft_labels(std::size_t r, std::size_t c, advlab::CounterRng& rng) {
  advlab::DenseMatrix m(r, c);
  for (std::size_t i = 0; i < r; ++i) {
    double s = 0.0;
    for (std::size_t j = 0; j < c; ++j) s += (m(i, j) = rng.uniform(0.05, 1.0));
    for (std::size_t j = 0; j < c; ++j) m(i, j) /= s;
  }
  return m;
}

}  // namespace oracle
