#include <gtest/gtest.h>

#include <cmath>
#include <cstring>

#include "blotcheck/error.hpp"
#include "blotcheck/gradcheck.hpp"
#include "blotcheck/loss.hpp"
#include "blotcheck/optim.hpp"
#include "blotcheck/siamese.hpp"
#include "test_util.hpp"

using namespace blotcheck;

namespace {

template <typename S>
void fill_random(Tensor<S>& t, std::mt19937_64& rng, double lo = -1, double hi = 1) {
  std::uniform_real_distribution<double> u(lo, hi);
  for (Index i = 0; i < t.size(); ++i) t[i] = static_cast<S>(u(rng));
}

/// Direct six-loop cross-correlation.
Tensor<double> naive_conv(const Tensor<double>& x, const ConvLayer<double>& l) {
  const Index co = l.out_channels(), ci = l.in_channels(), kh = l.kernel_h(), kw = l.kernel_w();
  const Index ho = x.dim(1) - kh + 1, wo = x.dim(2) - kw + 1;
  Tensor<double> y({co, ho, wo});
  for (Index o = 0; o < co; ++o)
    for (Index r = 0; r < ho; ++r)
      for (Index c = 0; c < wo; ++c) {
        double acc = l.bias[o];
        for (Index i = 0; i < ci; ++i)
          for (Index u = 0; u < kh; ++u)
            for (Index v = 0; v < kw; ++v)
              acc += l.weights[((o * ci + i) * kh + u) * kw + v] * x(i, r + u, c + v);
        y(o, r, c) = acc;
      }
  return y;
}

double dot(const Tensor<double>& a, const Tensor<double>& b) { return a.values().dot(b.values()); }

bool bit_equal(float a, float b) { return std::memcmp(&a, &b, sizeof a) == 0; }

}  // namespace

TEST(Tensor, ShapeChecks) {
  EXPECT_THROW(Tensor<float>({2, 0, 3}), Error);
  EXPECT_THROW(Tensor<float>(std::vector<Index>{}), Error);
  EXPECT_THROW(Tensor<float>({2, 2}, Vector<float>(3)), Error);
  Tensor<float> t({2, 3, 4}, 1.5f);
  EXPECT_EQ(t.size(), 24);
  EXPECT_EQ(t.shape_string(), "(2,3,4)");
  t(1, 2, 3) = 7;
  EXPECT_EQ(t[23], 7);
  EXPECT_THROW(t.matrix(5, 5), Error);
}

TEST(Layers, ConvMatchesNaiveLoops) {
  std::mt19937_64 rng(1);
  for (int trial = 0; trial < 10; ++trial) {
    auto layer = ConvLayer<double>::zeros(1 + trial % 4, 1 + trial % 3, 3, 3);
    fill_random(layer.weights, rng);
    fill_random(layer.bias, rng);
    Tensor<double> x({layer.in_channels(), Index(5 + trial), Index(7 + trial % 2)});
    fill_random(x, rng);
    const auto got = conv2d_forward(x, layer);
    const auto want = naive_conv(x, layer);
    ASSERT_EQ(got.shape(), want.shape());
    for (Index i = 0; i < got.size(); ++i) EXPECT_NEAR(got[i], want[i], 1e-12);
  }
}

TEST(Layers, ConvBackwardMatchesFiniteDifferences) {
  // L = <g, conv(x)> is linear in x, W and b, so central differences are exact up to rounding.
  std::mt19937_64 rng(2);
  auto layer = ConvLayer<double>::zeros(3, 2, 3, 3);
  fill_random(layer.weights, rng);
  fill_random(layer.bias, rng);
  Tensor<double> x({2, 6, 5});
  fill_random(x, rng);
  Tensor<double> g({3, 4, 3});
  fill_random(g, rng);
  const auto grads = conv2d_backward(g, x, layer);
  const double h = 1e-6;
  auto loss = [&](const Tensor<double>& xi, const ConvLayer<double>& li) { return dot(g, naive_conv(xi, li)); };
  for (Index i = 0; i < x.size(); ++i) {
    auto xp = x, xm = x;
    xp[i] += h;
    xm[i] -= h;
    EXPECT_NEAR(grads.grad_input[i], (loss(xp, layer) - loss(xm, layer)) / (2 * h), 1e-7);
  }
  for (Index i = 0; i < layer.weights.size(); ++i) {
    auto lp = layer, lm = layer;
    lp.weights[i] += h;
    lm.weights[i] -= h;
    EXPECT_NEAR(grads.grad_weights[i], (loss(x, lp) - loss(x, lm)) / (2 * h), 1e-7);
  }
  for (Index i = 0; i < layer.bias.size(); ++i) {
    auto lp = layer, lm = layer;
    lp.bias[i] += h;
    lm.bias[i] -= h;
    EXPECT_NEAR(grads.grad_bias[i], (loss(x, lp) - loss(x, lm)) / (2 * h), 1e-7);
  }
}

TEST(Layers, ConvRejectsEvenKernelAndSmallInput) {
  EXPECT_THROW(ConvLayer<float>::zeros(1, 1, 2, 3), Error);
  const auto layer = ConvLayer<float>::zeros(1, 1, 3, 3);
  EXPECT_THROW(conv2d_forward(Tensor<float>({1, 2, 5}), layer), Error);
  EXPECT_THROW(conv2d_forward(Tensor<float>({2, 5, 5}), layer), Error);
}

TEST(Layers, ReluAndBackward) {
  Tensor<double> x({1, 1, 4}, Vector<double>((Vector<double>(4) << -1, 0, 2, 3).finished()));
  const auto y = relu(x);
  EXPECT_EQ(y[0], 0);
  EXPECT_EQ(y[3], 3);
  const auto g = relu_backward(Tensor<double>({1, 1, 4}, 1.0), x);
  EXPECT_EQ(g[0], 0);
  EXPECT_EQ(g[1], 0);
  EXPECT_EQ(g[2], 1);
}

TEST(Layers, MaxPoolValuesTiesAndOddEdges) {
  Tensor<double> x({1, 3, 5});
  for (Index i = 0; i < 15; ++i) x[i] = static_cast<double>(i % 4);
  x[0] = 9;
  x[1] = 9;  // tie in the first window
  const auto r = maxpool2(x);
  EXPECT_EQ(r.output.shape(), (std::vector<Index>{1, 1, 2}));
  EXPECT_EQ(r.output[0], 9);
  EXPECT_EQ(r.argmax[0], 0);
  const auto g = maxpool2_backward(Tensor<double>({1, 1, 2}, 1.0), r.argmax, x.shape());
  EXPECT_EQ(g[0], 1);
  EXPECT_EQ(g[1], 0);
  try {
    maxpool2(Tensor<double>({1, 1, 4}));
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::InputTooSmall);
  }
}

TEST(Layers, SigmoidIsStableAtExtremes) {
  EXPECT_DOUBLE_EQ(sigmoid(0.0), 0.5);
  EXPECT_EQ(sigmoid(-1000.0), 0.0);
  EXPECT_EQ(sigmoid(1000.0), 1.0);
  EXPECT_FALSE(std::isnan(sigmoid(-800.0f)));
  EXPECT_NEAR(sigmoid(2.0), 1 / (1 + std::exp(-2.0)), 1e-15);
}

TEST(Loss, ReferenceValues) {
  EXPECT_NEAR((bce_loss<double>({0.5}, {1.0}).loss), std::log(2.0), 1e-12);
  const double batch = -(std::log(0.9) + std::log(0.8)) / 2;
  EXPECT_NEAR((bce_loss<double>({0.9, 0.2}, {1.0, 0.0}).loss), batch, 1e-12);
  const auto saturated = bce_loss<double>({0.0}, {1.0});
  EXPECT_NEAR(saturated.loss, -std::log(kProbabilityClamp), 1e-9);
  EXPECT_TRUE(std::isfinite(saturated.grads[0]));
  EXPECT_LT(saturated.grads[0], 0);
}

TEST(Loss, GradientIsMeanOfPerSampleDerivative) {
  const auto r = bce_loss<double>({0.3, 0.6, 0.9}, {1.0, 0.0, 1.0});
  EXPECT_NEAR(r.grads[0], -1 / 0.3 / 3, 1e-12);
  EXPECT_NEAR(r.grads[1], 1 / 0.4 / 3, 1e-12);
  EXPECT_NEAR(r.grads[2], -1 / 0.9 / 3, 1e-12);
}

TEST(Loss, Errors) {
  try {
    bce_loss<double>({0.5, 0.5}, {1.0});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::LengthMismatch);
  }
  try {
    bce_loss<double>(std::vector<double>{}, std::vector<double>{});
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::EmptyBatch);
  }
}

TEST(Siamese, ArchitectureShapes) {
  const Architecture arch;
  EXPECT_EQ(spatial_trace(arch), (std::vector<Index>{64, 62, 31, 29, 14, 12, 6, 4, 2}));
  EXPECT_EQ(feature_dim(arch), 256);
  // conv: out*in*9 + out per layer; head: 256 + 1
  const Index expected = (8 * 1 * 9 + 8) + (16 * 8 * 9 + 16) + (32 * 16 * 9 + 32) + (64 * 32 * 9 + 64) + 257;
  EXPECT_EQ(SiameseModel<float>::zeros(arch).parameter_count(), expected);
  Architecture tiny = arch;
  tiny.input_size = 20;
  EXPECT_THROW(spatial_trace(tiny), Error);
}

TEST(Siamese, InitIsSeededAndHeUniform) {
  const Architecture arch;
  const auto a = init_model<float>(arch, 5);
  const auto b = init_model<float>(arch, 5);
  const auto c = init_model<float>(arch, 6);
  EXPECT_TRUE(a.branch[2].weights == b.branch[2].weights);
  EXPECT_FALSE(a.branch[2].weights == c.branch[2].weights);
  const double limit = std::sqrt(6.0 / (16 * 9));
  EXPECT_LE(a.branch[2].weights.values().cwiseAbs().maxCoeff(), limit);
  EXPECT_EQ(a.branch[2].bias.values().cwiseAbs().maxCoeff(), 0.0f);
}

TEST(Siamese, IdenticalInputsGiveHeadBiasOnly) {
  std::mt19937_64 rng(3);
  auto model = init_model<double>(Architecture{}, 1);
  model.head.bias[0] = -0.7;
  const auto x = testutil::random_panel(64, rng);
  EXPECT_DOUBLE_EQ(siamese_forward(x, x, model), sigmoid(-0.7));
}

TEST(Siamese, AbsDiffIsBitwiseSymmetric) {
  std::mt19937_64 rng(4);
  const auto model = init_model<float>(Architecture{}, 9);
  for (int i = 0; i < 20; ++i) {
    const auto a = testutil::random_panel_f(64, rng);
    const auto b = testutil::random_panel_f(64, rng);
    EXPECT_TRUE(bit_equal(siamese_forward(a, b, model), siamese_forward(b, a, model)));
  }
}

TEST(Siamese, RejectsWrongPanelShape) {
  const auto model = init_model<float>(Architecture{}, 1);
  EXPECT_THROW(siamese_forward(Tensor<float>({1, 32, 32}), Tensor<float>({1, 32, 32}), model), Error);
}

TEST(Siamese, GradCheckBothMergeModes) {
  std::mt19937_64 rng(10);
  Architecture arch;
  arch.input_size = 48;
  arch.channels = {3, 4, 4, 5};
  for (MergeMode mode : {MergeMode::AbsDiff, MergeMode::SignedDiff}) {
    arch.merge = mode;
    const auto model = init_model<double>(arch, 2);
    GradCheckOptions opt;
    opt.merge = mode;
    const auto r = grad_check(model, testutil::random_panel(48, rng), testutil::random_panel(48, rng), 1.0, opt);
    EXPECT_LE(r.max_relative_error, 1e-4) << to_string(mode);
    EXPECT_GT(r.checked, 100);
  }
}

TEST(Optim, SgdStepOracle) {
  auto model = init_model<double>(Architecture{}, 1);
  const auto before = model;
  auto grads = SiameseModel<double>::zeros(model.arch);
  grads.head.weights[3] = 2.0;
  grads.branch[0].bias[1] = -1.0;
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::SGD;
  cfg.learning_rate = 0.1;
  OptimizerState<double> state;
  optimizer_step(model, grads, cfg, state);
  EXPECT_DOUBLE_EQ(model.head.weights[3], before.head.weights[3] - 0.2);
  EXPECT_DOUBLE_EQ(model.branch[0].bias[1], before.branch[0].bias[1] + 0.1);
  EXPECT_EQ(model.head.weights[4], before.head.weights[4]);
}

TEST(Optim, AdamFirstStepMovesByLearningRate) {
  // After one step m_hat = g and v_hat = g^2, so the update is lr * g / (|g| + eps).
  auto model = init_model<double>(Architecture{}, 1);
  const auto before = model;
  auto grads = SiameseModel<double>::zeros(model.arch);
  grads.head.weights[0] = 3.0;
  grads.head.weights[1] = -0.01;
  TrainConfig cfg;
  cfg.learning_rate = 0.01;
  OptimizerState<double> state;
  optimizer_step(model, grads, cfg, state);
  EXPECT_NEAR(model.head.weights[0], before.head.weights[0] - 0.01 * 3.0 / (3.0 + 1e-8), 1e-15);
  EXPECT_NEAR(model.head.weights[1], before.head.weights[1] + 0.01 * 0.01 / (0.01 + 1e-8), 1e-15);
  EXPECT_EQ(model.head.weights[2], before.head.weights[2]);
  EXPECT_EQ(state.step, 1);
}

TEST(Optim, NonFiniteGradientLeavesModelUntouched) {
  auto model = init_model<float>(Architecture{}, 1);
  const auto before = model;
  auto grads = SiameseModel<float>::zeros(model.arch);
  grads.branch[1].weights[0] = std::nanf("");
  OptimizerState<float> state;
  try {
    optimizer_step(model, grads, TrainConfig{}, state);
    FAIL();
  } catch (const Error& e) {
    EXPECT_EQ(e.code(), ErrorCode::NonFiniteGradient);
  }
  EXPECT_TRUE(model.branch[1].weights == before.branch[1].weights);
}

TEST(Optim, TrainingStepReducesLossOnOnePair) {
  std::mt19937_64 rng(8);
  auto model = init_model<double>(Architecture{}, 3);
  const auto a = testutil::random_panel(64, rng);
  const auto b = testutil::random_panel(64, rng);
  auto loss_at = [&](const SiameseModel<double>& m) {
    return bce_loss<double>({siamese_forward(a, b, m)}, {1.0}).loss;
  };
  const double start = loss_at(model);
  TrainConfig cfg;
  cfg.optimizer = OptimizerKind::SGD;
  cfg.learning_rate = 0.01;
  OptimizerState<double> state;
  for (int step = 0; step < 5; ++step) {
    const auto f = siamese_forward_traced(a, b, model, MergeMode::AbsDiff);
    auto grads = SiameseModel<double>::zeros(model.arch);
    siamese_backward(f, bce_loss<double>({f.probability}, {1.0}).grads[0], MergeMode::AbsDiff, model, grads);
    optimizer_step(model, grads, cfg, state);
  }
  EXPECT_LT(loss_at(model), start);
}
