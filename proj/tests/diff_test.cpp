#include <gtest/gtest.h>

#include <cmath>
#include <numeric>
#include <random>

#include "advrl/diff/mlp.hpp"
#include "advrl/diff/softmax.hpp"
#include "advrl/diff/tape.hpp"
#include "advrl/errors.hpp"
#include "test_support.hpp"

using namespace advrl;
using namespace advrl::diff;

namespace {

MlpParams fixed_two_layer() {
  MlpParams p;
  p.layers.push_back(Layer{Tensor::matrix(3, 2, {0.3, -0.2, 0.5, 0.1, -0.4, 0.7}),
                           Tensor::vector({0.05, -0.1, 0.2}), Activation::kTanh});
  p.layers.push_back(Layer{Tensor::matrix(2, 3, {0.6, -0.3, 0.2, -0.5, 0.4, 0.9}),
                           Tensor::vector({0.1, -0.2}), Activation::kLinear});
  return p;
}

double scalar_loss(const MlpParams& p, const std::vector<double>& x) {
  // Nonlinear readout so every output coordinate matters.
  const Tensor y = forward_mlp(p, Tensor::vector(x));
  double s = 0.0;
  for (std::size_t i = 0; i < y.size(); ++i) s += std::sin(1.0 + static_cast<double>(i)) * y[i] + 0.5 * y[i] * y[i];
  return s;
}

Var scalar_loss(Tape& t, Var y) {
  std::vector<double> c(y.value().size());
  for (std::size_t i = 0; i < c.size(); ++i) c[i] = std::sin(1.0 + static_cast<double>(i));
  return add(dot(t.constant(Tensor::vector(c)), y), scale(sum(square(y)), 0.5));
}

}  // namespace

TEST(Tensor, ShapeMustMatchData) {
  EXPECT_THROW(Tensor({2, 3}, std::vector<double>(5)), ShapeError);
  EXPECT_NO_THROW(Tensor({2, 3}, std::vector<double>(6)));
}

TEST(ForwardMlp, ZeroNetGivesZeroLogits) {
  std::mt19937_64 rng(3);
  auto p = make_mlp({4, 8, 3}, Activation::kTanh, rng).zeros_like();
  const Tensor y = forward_mlp(p, Tensor::vector({0.3, -2.0, 5.0, 1.0}));
  for (double v : y.values()) EXPECT_EQ(v, 0.0);
}

TEST(ForwardMlp, IdentityLayer) {
  MlpParams p;
  p.layers.push_back(Layer{Tensor::matrix(2, 2, {1, 0, 0, 1}), Tensor::vector({0, 0}),
                           Activation::kLinear});
  const Tensor y = forward_mlp(p, Tensor::vector({1.0, 2.0}));
  EXPECT_EQ(y.data(), (std::vector<double>{1.0, 2.0}));
}

TEST(ForwardMlp, MatchesHandComputedTwoLayerNet) {
  // Reference values from numpy: W2 @ tanh(W1 @ x + b1) + b2.
  const Tensor y = forward_mlp(fixed_two_layer(), Tensor::vector({0.5, -0.5}));
  EXPECT_NEAR(y[0], 0.17761206021620135, 1e-15);
  EXPECT_NEAR(y[1], -0.60852709827851226, 1e-15);
}

TEST(ForwardMlp, DimensionMismatchThrows) {
  EXPECT_THROW(forward_mlp(fixed_two_layer(), Tensor::vector({1.0, 2.0, 3.0})), ShapeError);
}

TEST(ForwardMlp, IsPure) {
  std::mt19937_64 rng(11);
  auto p = oracle::random_mlp(rng, 4, 3);
  const Tensor x = Tensor::vector(oracle::random_vector(rng, 4));
  EXPECT_EQ(forward_mlp(p, x), forward_mlp(p, x));
}

TEST(ForwardMlp, TapeAndTapeFreeAgreeBitwise) {
  std::mt19937_64 rng(5);
  for (int trial = 0; trial < 20; ++trial) {
    auto p = oracle::random_mlp(rng, 3, 4, trial % 2 ? Activation::kRelu : Activation::kTanh);
    const Tensor x = Tensor::matrix(2, 3, oracle::random_vector(rng, 6));
    Tape t;
    auto vars = bind_mlp(t, p);
    const Var y = forward_mlp(p, vars, t.constant(x));
    EXPECT_EQ(y.value(), forward_mlp(p, x));
  }
}

TEST(GradWrtInput, SumGivesOnes) {
  Tape t;
  const Var x = t.variable(Tensor::vector({0.1, -4.0, 2.5}));
  const Tensor g = grad_wrt_input(sum(x), x);
  EXPECT_EQ(g.data(), (std::vector<double>{1.0, 1.0, 1.0}));
}

TEST(GradWrtInput, LinearFormGivesWeights) {
  Tape t;
  const std::vector<double> w{0.5, -1.5, 3.0};
  const Var x = t.variable(Tensor::vector({1.0, 2.0, -1.0}));
  const Tensor g = grad_wrt_input(dot(t.constant(Tensor::vector(w)), x), x);
  EXPECT_EQ(g.data(), w);
}

TEST(GradWrtInput, RejectsForeignOrConstantInput) {
  Tape a, b;
  const Var xa = a.variable(Tensor::vector({1.0}));
  const Var xb = b.variable(Tensor::vector({1.0}));
  EXPECT_THROW(grad_wrt_input(sum(xa), xb), UsageError);
  const Var c = a.constant(Tensor::vector({1.0}));
  EXPECT_THROW(grad_wrt_input(sum(add(xa, c)), c), UsageError);
}

TEST(GradWrtInput, MatchesFiniteDifferences) {
  std::mt19937_64 rng(17);
  for (int trial = 0; trial < 50; ++trial) {
    auto p = oracle::random_mlp(rng, 4, 3);
    const auto x0 = oracle::random_vector(rng, 4);
    Tape t;
    const Var x = t.variable(Tensor::vector(x0));
    const Var y = forward_mlp(p, bind_mlp(t, p, false), x);
    const Tensor g = grad_wrt_input(scalar_loss(t, y), x);
    const auto fd = oracle::central_difference([&](const auto& v) { return scalar_loss(p, v); }, x0);
    for (std::size_t i = 0; i < fd.size(); ++i) {
      EXPECT_LE(oracle::relative_error(g[i], fd[i]), 1e-4) << "trial " << trial << " coord " << i;
    }
  }
}

TEST(GradWrtParams, DisconnectedLayerHasZeroGradient) {
  std::mt19937_64 rng(2);
  auto p = oracle::random_mlp(rng, 3, 2);
  auto q = oracle::random_mlp(rng, 3, 2);
  Tape t;
  auto pv = bind_mlp(t, p);
  auto qv = bind_mlp(t, q);
  const Var x = t.constant(Tensor::vector({0.1, 0.2, 0.3}));
  const Var loss = sum(forward_mlp(p, pv, x));
  forward_mlp(q, qv, x);  // recorded but not on the loss path
  t.backward(loss);
  const MlpParams gq = grad_wrt_params(t, q, qv);
  for (double v : flatten(gq)) EXPECT_EQ(v, 0.0);
}

TEST(GradWrtParams, FinalBiasGradientOfSumIsOnes) {
  std::mt19937_64 rng(8);
  auto p = oracle::random_mlp(rng, 3, 5);
  Tape t;
  auto pv = bind_mlp(t, p);
  t.backward(sum(forward_mlp(p, pv, t.constant(Tensor::vector({0.3, -0.7, 0.2})))));
  const MlpParams g = grad_wrt_params(t, p, pv);
  for (double v : g.layers.back().bias.values()) EXPECT_EQ(v, 1.0);
}

TEST(GradWrtParams, MatchesFiniteDifferences) {
  std::mt19937_64 rng(23);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = oracle::random_mlp(rng, 3, 3);
    const auto x0 = oracle::random_vector(rng, 3);
    Tape t;
    auto pv = bind_mlp(t, p);
    t.backward(scalar_loss(t, forward_mlp(p, pv, t.constant(Tensor::vector(x0)))));
    const auto g = flatten(grad_wrt_params(t, p, pv));
    const auto fd = oracle::central_difference(
        [&](const std::vector<double>& flat) {
          MlpParams q = p;
          unflatten(flat, q);
          return scalar_loss(q, x0);
        },
        flatten(p));
    for (std::size_t i = 0; i < fd.size(); ++i) {
      EXPECT_LE(oracle::relative_error(g[i], fd[i]), 1e-4) << "trial " << trial << " param " << i;
    }
  }
}

TEST(GradWrtParams, ReluNetworkAwayFromKinks) {
  std::mt19937_64 rng(29);
  for (int trial = 0; trial < 30; ++trial) {
    auto p = oracle::random_mlp(rng, 3, 2, Activation::kRelu);
    const auto x0 = oracle::random_vector(rng, 3);
    Tape t;
    auto pv = bind_mlp(t, p);
    t.backward(scalar_loss(t, forward_mlp(p, pv, t.constant(Tensor::vector(x0)))));
    const auto g = flatten(grad_wrt_params(t, p, pv));
    const auto fd = oracle::central_difference(
        [&](const std::vector<double>& flat) {
          MlpParams q = p;
          unflatten(flat, q);
          return scalar_loss(q, x0);
        },
        flatten(p));
    for (std::size_t i = 0; i < fd.size(); ++i) {
      EXPECT_LE(oracle::relative_error(g[i], fd[i]), 1e-3) << "trial " << trial << " param " << i;
    }
  }
}

TEST(Softmax, UniformForZeroLogits) {
  const Tensor p = softmax(Tensor::vector({0, 0, 0, 0}));
  for (double v : p.values()) EXPECT_DOUBLE_EQ(v, 0.25);
}

TEST(Softmax, ShiftInvariant) {
  const Tensor a = softmax(Tensor::vector({0.3, -1.2, 2.0}));
  const Tensor b = softmax(Tensor::vector({100.3, 98.8, 102.0}));
  for (std::size_t i = 0; i < 3; ++i) EXPECT_NEAR(a[i], b[i], 1e-13);
}

TEST(Softmax, KnownValues) {
  const Tensor p = softmax(Tensor::vector({1, 2, 3}));
  EXPECT_NEAR(p[0], 0.09003057, 1e-8);
  EXPECT_NEAR(p[1], 0.24472847, 1e-8);
  EXPECT_NEAR(p[2], 0.66524096, 1e-8);
}

TEST(Softmax, EmptyInputThrows) {
  EXPECT_THROW(softmax(Tensor::vector({})), UsageError);
  EXPECT_THROW(log_softmax(Tensor::vector({})), UsageError);
}

TEST(Softmax, StaysOnSimplexForExtremeLogits) {
  std::mt19937_64 rng(1);
  std::uniform_real_distribution<double> u(-500.0, 500.0);
  for (int trial = 0; trial < 200; ++trial) {
    std::vector<double> l(1 + trial % 7);
    for (double& v : l) v = u(rng);
    const Tensor p = softmax(Tensor::vector(l));
    double s = 0.0;
    for (double v : p.values()) {
      EXPECT_GE(v, 0.0);
      s += v;
    }
    EXPECT_NEAR(s, 1.0, 1e-12);
    EXPECT_TRUE(log_softmax(Tensor::vector(l)).all_finite());
  }
}

TEST(Tape, LogSoftmaxGradientMatchesFiniteDifferences) {
  std::mt19937_64 rng(41);
  for (int trial = 0; trial < 20; ++trial) {
    const auto l0 = oracle::random_vector(rng, 4, -3.0, 3.0);
    const auto c = oracle::random_vector(rng, 4);
    Tape t;
    const Var l = t.variable(Tensor::vector(l0));
    const Tensor g = grad_wrt_input(dot(t.constant(Tensor::vector(c)), softmax(l)), l);
    const auto fd = oracle::central_difference(
        [&](const std::vector<double>& v) {
          const Tensor p = softmax(Tensor::vector(v));
          return std::inner_product(c.begin(), c.end(), p.data().begin(), 0.0);
        },
        l0);
    for (std::size_t i = 0; i < 4; ++i) EXPECT_LE(oracle::relative_error(g[i], fd[i]), 1e-4);
  }
}

TEST(Tape, ClampAndMinimumRouteGradients) {
  Tape t;
  const Var a = t.variable(Tensor::vector({0.5, 2.0, -3.0}));
  const Var b = t.variable(Tensor::vector({1.0, 0.5, 1.0}));
  t.backward(sum(minimum(clamp(a, -1.0, 1.0), b)));
  EXPECT_EQ(t.grad(a).data(), (std::vector<double>{1.0, 0.0, 0.0}));
  EXPECT_EQ(t.grad(b).data(), (std::vector<double>{0.0, 1.0, 0.0}));
}
