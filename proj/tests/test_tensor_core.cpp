#include <doctest.h>

#include <cmath>
#include <limits>
#include <sstream>

#include "advlab/checkpoint.hpp"
#include "advlab/error.hpp"
#include "advlab/losses.hpp"
#include "advlab/matrix.hpp"
#include "advlab/mlp.hpp"
#include "advlab/optim.hpp"
#include "advlab/rng.hpp"
#include "oracles.hpp"

using namespace advlab;

namespace {

MlpModel linear_model(std::vector<std::vector<double>> w, std::vector<double> b) {
  MlpModel m;
  m.layer_sizes = {w[0].size(), w.size()};
  m.weights = {DenseMatrix::from_rows(w)};
  m.biases = {std::move(b)};
  return m;
}

std::vector<double> flat(const DenseMatrix& m) { return {m.values().begin(), m.values().end()}; }

}  // namespace

TEST_CASE("philox4x32-10 known answers") {
  using A = std::array<std::uint32_t, 4>;
  CHECK(philox4x32({0, 0, 0, 0}, {0, 0}) == A{0x6627e8d5, 0xe169c58d, 0xbc57ac4c, 0x9b00dbd8});
  CHECK(philox4x32({0xffffffff, 0xffffffff, 0xffffffff, 0xffffffff}, {0xffffffff, 0xffffffff}) ==
        A{0x408f276d, 0x41c83b0e, 0xa20bc7c6, 0x6d5451fd});
  CHECK(philox4x32({0x243f6a88, 0x85a308d3, 0x13198a2e, 0x03707344}, {0xa4093822, 0x299f31d0}) ==
        A{0xd16cfe09, 0x94fdcceb, 0x5001e420, 0x24126ea1});
}

TEST_CASE("counter rng streams are independent and reproducible") {
  const auto k = StreamKey::derive(7, "unit", 1, 2, 3);
  CounterRng a(k), b(k), c(StreamKey::derive(7, "unit", 1, 2, 4));
  std::vector<std::uint64_t> da, db, dc;
  for (int i = 0; i < 16; ++i) {
    da.push_back(a());
    db.push_back(b());
    dc.push_back(c());
  }
  CHECK(da == db);
  CHECK(da != dc);
  CHECK(k.child(0) != k.child(1));
  CounterRng u(k);
  for (int i = 0; i < 1000; ++i) {
    const double v = u.uniform01();
    REQUIRE(v >= 0.0);
    REQUIRE(v < 1.0);
    REQUIRE(u.below(7) < 7);
  }
}

TEST_CASE("dense matrix rejects bad shapes and non-finite data") {
  CHECK_THROWS_AS(DenseMatrix(2, 2, std::vector<double>{1, 2, 3}), DimensionError);
  CHECK_THROWS_AS(DenseMatrix(1, 1, std::vector<double>{std::nan("")}), NumericError);
  CHECK_THROWS_AS(DenseMatrix(1, 1, std::vector<double>{std::numeric_limits<double>::infinity()}), NumericError);
  CHECK(argmax(std::vector<double>{1.0, 3.0, 3.0}) == 1);
}

TEST_CASE("forward") {
  SUBCASE("zero model gives zero logits") {
    MlpModel m = init_model({3, 4, 2}, Activation::relu, 1);
    for (auto& w : m.weights) std::fill(w.values().begin(), w.values().end(), 0.0);
    const auto z = forward(m, DenseMatrix::from_rows({{0.1, 0.7, 0.3}, {1, 1, 1}}));
    for (double v : z.values()) CHECK(v == 0.0);
  }
  SUBCASE("single affine layer") {
    const auto m = linear_model({{2.0, -1.0}}, {0.5});
    CHECK(forward(m, DenseMatrix::from_rows({{1.0, 1.0}}))(0, 0) == 1.5);
  }
  SUBCASE("batched rows equal per-row forwards") {
    CounterRng rng(StreamKey::derive(3, "fwd"));
    const auto m = init_model({3, 5, 4, 2}, Activation::tanh, 11);
    const auto x = oracle::random_matrix(4, 3, rng);
    const auto z = forward(m, x);
    for (std::size_t r = 0; r < 4; ++r) {
      const auto single = forward(m, x.slice_rows(r, r + 1));
      for (std::size_t c = 0; c < 2; ++c) CHECK(single(0, c) == z(r, c));
      const auto ref = oracle::forward_one(m, {x.row(r).begin(), x.row(r).end()});
      for (std::size_t c = 0; c < 2; ++c) CHECK(z(r, c) == doctest::Approx(ref[c]).epsilon(1e-12));
    }
  }
  SUBCASE("wrong input dim") {
    const auto m = init_model({3, 2}, Activation::relu, 1);
    CHECK_THROWS_AS(forward(m, DenseMatrix(1, 2)), DimensionError);
  }
}

TEST_CASE("init_model") {
  const auto a = init_model({10, 10, 5, 2}, Activation::relu, 42);
  const auto b = init_model({10, 10, 5, 2}, Activation::relu, 42);
  const auto c = init_model({10, 10, 5, 2}, Activation::relu, 43);
  CHECK(a == b);
  CHECK(a.weights[0] != c.weights[0]);
  REQUIRE(a.num_layers() == 3);
  CHECK(a.weights[0].rows() == 10);
  CHECK(a.weights[0].cols() == 10);
  CHECK(a.weights[1].rows() == 5);
  CHECK(a.weights[1].cols() == 10);
  CHECK(a.weights[2].rows() == 2);
  CHECK(a.weights[2].cols() == 5);
  for (std::size_t l = 0; l < 3; ++l) {
    const double bound = 1.0 / std::sqrt(static_cast<double>(a.layer_sizes[l]));
    for (double w : a.weights[l].values()) CHECK(std::abs(w) <= bound);
    for (double v : a.biases[l]) CHECK(v == 0.0);
  }
  CHECK_THROWS_AS(init_model({}, Activation::relu, 1), ConfigError);
  CHECK_THROWS_AS(init_model({4}, Activation::relu, 1), ConfigError);
}

TEST_CASE("soft-label cross entropy") {
  CHECK(loss_ce_soft(DenseMatrix::from_rows({{0.3, 0.3}}), DenseMatrix::from_rows({{0.2, 0.8}})) ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  CHECK(loss_ce_soft(DenseMatrix::from_rows({{200.0, 0.0}}), DenseMatrix::from_rows({{1.0, 0.0}})) < 1e-80);
  const double softplus_m1 = std::log1p(std::exp(-1.0));
  const double softplus_1 = std::log1p(std::exp(1.0));
  const double expected = 0.5 * (softplus_m1 + softplus_1);
  CHECK(expected == doctest::Approx(0.8133).epsilon(1e-4));
  CHECK(loss_ce_soft(DenseMatrix::from_rows({{1.0, 0.0}}), DenseMatrix::from_rows({{0.5, 0.5}})) ==
        doctest::Approx(expected).epsilon(1e-14));
  CHECK_THROWS_AS(loss_ce_soft(DenseMatrix::from_rows({{1.0, 0.0}}), DenseMatrix::from_rows({{0.6, 0.6}})),
                  ValidationError);
  CHECK_THROWS_AS(loss_ce_soft(DenseMatrix::from_rows({{1.0, 0.0}}), DenseMatrix::from_rows({{1.5, -0.5}})),
                  ValidationError);
}

TEST_CASE("KL divergence") {
  CounterRng rng(StreamKey::derive(5, "kl"));
  const auto z = oracle::random_matrix(6, 3, rng, -3, 3);
  CHECK(loss_kl(z, z) == 0.0);
  // Independent hand evaluation of KL(softmax[10,0] || softmax[0,10]).
  const double p1 = 1.0 / (1.0 + std::exp(-10.0));
  const double p2 = 1.0 - p1;
  const double expected = p1 * std::log(p1 / p2) + p2 * std::log(p2 / p1);
  CHECK(expected == doctest::Approx(9.9991).epsilon(1e-5));
  CHECK(loss_kl(DenseMatrix::from_rows({{10, 0}}), DenseMatrix::from_rows({{0, 10}})) ==
        doctest::Approx(expected).epsilon(1e-12));
  for (int i = 0; i < 50; ++i) {
    CHECK(loss_kl(oracle::random_matrix(4, 3, rng, -5, 5), oracle::random_matrix(4, 3, rng, -5, 5)) >= 0.0);
  }
  CHECK_THROWS_AS(loss_kl(DenseMatrix(2, 2), DenseMatrix(2, 3)), DimensionError);
}

TEST_CASE("softmax rows are probability vectors") {
  CounterRng rng(StreamKey::derive(5, "softmax"));
  const auto p = softmax(oracle::random_matrix(20, 4, rng, -50, 50));
  for (std::size_t r = 0; r < p.rows(); ++r) {
    double s = 0.0;
    for (double v : p.row(r)) s += v;
    CHECK(std::abs(s - 1.0) <= 1e-9);
  }
}

TEST_CASE("cw margin loss") {
  CHECK(cw_margin_loss(DenseMatrix::from_rows({{3, 1}}), {0})[0] == -2.0);
  CHECK(cw_margin_loss(DenseMatrix::from_rows({{1, 1}}), {0})[0] == 0.0);
  CHECK(cw_margin_loss(DenseMatrix::from_rows({{1, 1}}), {1})[0] == 0.0);
  CHECK(cw_margin_loss(DenseMatrix::from_rows({{0, 2, 5}}), {1})[0] == 3.0);
  CHECK_THROWS_AS(cw_margin_loss(DenseMatrix::from_rows({{0, 2}}), {2}), ValidationError);
}

TEST_CASE("input gradients") {
  SUBCASE("zero model has zero gradient") {
    MlpModel m = init_model({2, 3, 2}, Activation::relu, 1);
    for (auto& w : m.weights) std::fill(w.values().begin(), w.values().end(), 0.0);
    const auto g = grad_input(m, DenseMatrix::from_rows({{0.2, 0.4}}), DenseMatrix::from_rows({{1, 0}}), LossKind::ce);
    for (double v : g.values()) CHECK(v == 0.0);
  }
  SUBCASE("one-dimensional linear model, symbolic oracle") {
    // z0 = w0 x, z1 = w1 x; dCE/dx for label 0 is (p0 - 1) w0 + p1 w1 = p1 (w1 - w0).
    const auto m = linear_model({{2.0}, {-1.0}}, {0.0, 0.0});
    const double x = 0.3;
    const double p1 = 1.0 / (1.0 + std::exp(2.0 * x - (-1.0 * x)));
    const auto g = grad_input(m, DenseMatrix::from_rows({{x}}), DenseMatrix::from_rows({{1, 0}}), LossKind::ce);
    CHECK(g(0, 0) < 0.0);
    CHECK(g(0, 0) == doctest::Approx(p1 * (-1.0 - 2.0)).epsilon(1e-14));
  }
  SUBCASE("missing reference logits") {
    const auto m = init_model({2, 2}, Activation::relu, 1);
    CHECK_THROWS_AS(grad_input(m, DenseMatrix(1, 2, 0.5), DenseMatrix::from_rows({{1, 0}}), LossKind::kl_vs_reference),
                    ConfigError);
  }
}

TEST_CASE("parameter gradients") {
  SUBCASE("linear softmax closed form") {
    const auto m = linear_model({{0.3, -0.2}, {0.1, 0.4}, {-0.5, 0.2}}, {0.1, 0.0, -0.1});
    const std::vector<double> x{0.6, 0.9};
    const std::vector<double> y{0.0, 1.0, 0.0};
    const auto z = oracle::forward_one(m, x);
    const auto p = oracle::softmax_one(z);
    const auto g = grad_params(m, DenseMatrix::from_rows({x}), DenseMatrix::from_rows({y}), LossKind::ce);
    for (std::size_t r = 0; r < 3; ++r) {
      CHECK(g.biases[0][r] == doctest::Approx(p[r] - y[r]).epsilon(1e-14));
      for (std::size_t c = 0; c < 2; ++c) {
        CHECK(g.weights[0](r, c) == doctest::Approx((p[r] - y[r]) * x[c]).epsilon(1e-14));
      }
    }
  }
  SUBCASE("duplicated rows give the single-row gradient") {
    const auto m = init_model({3, 4, 2}, Activation::tanh, 9);
    const std::vector<double> x{0.1, 0.5, 0.8};
    const auto one = grad_params(m, DenseMatrix::from_rows({x}), DenseMatrix::from_rows({{0, 1}}), LossKind::ce);
    const auto three = grad_params(m, DenseMatrix::from_rows({x, x, x}),
                                   DenseMatrix::from_rows({{0, 1}, {0, 1}, {0, 1}}), LossKind::ce);
    for (std::size_t l = 0; l < one.weights.size(); ++l) {
      CHECK(oracle::relative_error(flat(one.weights[l]), flat(three.weights[l])) < 1e-14);
      CHECK(oracle::relative_error(one.biases[l], three.biases[l]) < 1e-14);
    }
  }
}

TEST_CASE("finite-difference agreement for every loss kind") {
  CounterRng rng(StreamKey::derive(17, "fd"));
  const std::vector<std::vector<std::size_t>> shapes{{4, 3}, {3, 6, 3}, {10, 10, 5, 2}, {5, 4, 4, 3}};
  for (std::size_t trial = 0; trial < shapes.size() * 2; ++trial) {
    const auto& sizes = shapes[trial % shapes.size()];
    const auto act = trial % 2 ? Activation::relu : Activation::tanh;
    MlpModel m = init_model(sizes, act, 100 + trial);
    for (auto& b : m.biases) {
      for (double& v : b) v = rng.uniform(-0.3, 0.3);
    }
    DenseMatrix x = oracle::random_matrix(3, sizes.front(), rng);
    const auto y = oracle::random_soft_labels(3, sizes.back(), rng);
    const auto ref = oracle::random_matrix(3, sizes.back(), rng, -1, 1);
    for (const auto kind : {LossKind::ce, LossKind::kl_vs_reference, LossKind::cw_margin}) {
      CAPTURE(trial);
      CAPTURE(to_string(kind));
      const DenseMatrix* r = kind == LossKind::kl_vs_reference ? &ref : nullptr;
      const auto gx = grad_input(m, x, y, kind, r);
      std::vector<double> xs = flat(x);
      const auto nx = oracle::central_difference(xs, [&] {
        return loss_value(m, DenseMatrix(x.rows(), x.cols(), xs), y, kind, r);
      });
      CHECK(oracle::relative_error(flat(gx), nx) < 1e-4);
      const auto gp = grad_params(m, x, y, kind, r);
      for (std::size_t l = 0; l < m.num_layers(); ++l) {
        MlpModel probe = m;
        std::vector<double> ws = flat(probe.weights[l]);
        const auto nw = oracle::central_difference(ws, [&] {
          probe.weights[l] = DenseMatrix(m.weights[l].rows(), m.weights[l].cols(), ws);
          return loss_value(probe, x, y, kind, r);
        });
        probe.weights[l] = m.weights[l];
        CHECK(oracle::relative_error(flat(gp.weights[l]), nw) < 1e-4);
        std::vector<double>& bs = probe.biases[l];
        const auto nb = oracle::central_difference(bs, [&] { return loss_value(probe, x, y, kind, r); });
        CHECK(oracle::relative_error(gp.biases[l], nb) < 1e-4);
      }
    }
  }
}

TEST_CASE("sgd step") {
  const auto base = linear_model({{1.0, -2.0}}, {0.5});
  ParamGrads g = ParamGrads::zeros_like(base);
  g.weights[0] = DenseMatrix::from_rows({{0.2, -0.4}});
  g.biases[0] = {1.0};

  SUBCASE("plain gradient descent without momentum or decay") {
    MlpModel m = base;
    auto st = SgdState::for_model(m, 0.1, 0.0, 0.0);
    sgd_step(m, g, st);
    CHECK(m.weights[0](0, 0) == 1.0 - 0.1 * 0.2);
    CHECK(m.weights[0](0, 1) == -2.0 - 0.1 * -0.4);
    CHECK(m.biases[0][0] == 0.5 - 0.1 * 1.0);
  }
  SUBCASE("zero gradient leaves parameters unchanged") {
    MlpModel m = base;
    auto st = SgdState::for_model(m, 0.1, 0.9, 0.0);
    sgd_step(m, ParamGrads::zeros_like(m), st);
    CHECK(m == base);
  }
  SUBCASE("two momentum steps displace by lr * g * 2.9") {
    MlpModel m = base;
    auto st = SgdState::for_model(m, 0.1, 0.9, 0.0);
    sgd_step(m, g, st);
    sgd_step(m, g, st);
    CHECK(m.weights[0](0, 0) == doctest::Approx(1.0 - 0.1 * 0.2 * (1.0 + 1.9)).epsilon(1e-14));
    CHECK(m.biases[0][0] == doctest::Approx(0.5 - 0.1 * 1.0 * 2.9).epsilon(1e-14));
  }
  SUBCASE("weight decay joins the gradient") {
    MlpModel m = base;
    auto st = SgdState::for_model(m, 0.1, 0.0, 0.01);
    sgd_step(m, g, st);
    CHECK(m.biases[0][0] == doctest::Approx(0.5 - 0.1 * (1.0 + 0.01 * 0.5)).epsilon(1e-15));
  }
  SUBCASE("non-finite update aborts and leaves state untouched") {
    MlpModel m = base;
    auto st = SgdState::for_model(m, 1e308, 0.0, 0.0);
    ParamGrads huge = g;
    huge.biases[0] = {1e308};
    CHECK_THROWS_AS(sgd_step(m, huge, st), NumericError);
    CHECK(m == base);
    CHECK(st.velocity == ParamGrads::zeros_like(base));
  }
  SUBCASE("full-batch descent on a convex problem") {
    CounterRng rng(StreamKey::derive(1, "convex"));
    MlpModel m = init_model({2, 2}, Activation::relu, 4);
    const auto x = oracle::random_matrix(40, 2, rng);
    DenseMatrix y(40, 2);
    for (std::size_t i = 0; i < 40; ++i) y(i, x(i, 0) + x(i, 1) > 1.0 ? 1 : 0) = 1.0;
    auto st = SgdState::for_model(m, 0.05, 0.0, 0.0);
    double prev = loss_value(m, x, y, LossKind::ce);
    for (int it = 0; it < 20; ++it) {
      sgd_step(m, grad_params(m, x, y, LossKind::ce), st);
      const double now = loss_value(m, x, y, LossKind::ce);
      CHECK(now < prev);
      prev = now;
    }
  }
}

TEST_CASE("checkpoints round-trip bitwise") {
  MlpModel m = init_model({5, 7, 3}, Activation::tanh, 77);
  m.biases[0][2] = 1.0 / 3.0;
  m.weights[1](0, 0) = -0.0;
  std::stringstream s;
  write_checkpoint(s, m);
  const auto back = read_checkpoint(s);
  CHECK(back == m);
  CHECK(std::signbit(back.weights[1](0, 0)));

  std::istringstream bad("advlab-mlp 1\nactivation relu\nlayers 2 2 x\n");
  CHECK_THROWS_AS(read_checkpoint(bad), ParseError);
  std::istringstream wrong_version("advlab-mlp 9\n");
  CHECK_THROWS_AS(read_checkpoint(wrong_version), ParseError);
}
