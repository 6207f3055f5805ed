#include <cmath>
#include <random>

#include <gtest/gtest.h>

#include "kooprel/nn/gradcheck.hpp"
#include "kooprel/nn/network.hpp"
#include "kooprel/nn/optimizer.hpp"
#include "kooprel/nn/serialize.hpp"

using namespace kooprel;
using namespace kooprel::nn;

namespace {

Parameters identity_dense(const NetworkSpec& spec) {
  auto p = zero_parameters(spec);
  auto& w = p.layers[0].weight;
  const std::size_t n = w.shape[0];
  for (std::size_t i = 0; i < n; ++i) w.data[i * n + i] = 1.0;
  return p;
}

}  // namespace

TEST(Forward, IdentityDenseLayer) {
  const auto spec = NetworkSpec::make({2}, {LayerSpec::dense(2, 2)});
  const auto y = forward(spec, identity_dense(spec), Tensor({2}, {1.5, -2.0}));
  EXPECT_EQ(y.data, (std::vector<double>{1.5, -2.0}));
}

TEST(Forward, Relu) {
  const auto spec = NetworkSpec::make({3}, {LayerSpec::relu()});
  const auto y = forward(spec, zero_parameters(spec), Tensor({3}, {-1.0, 0.0, 2.5}));
  EXPECT_EQ(y.data, (std::vector<double>{0.0, 0.0, 2.5}));
}

TEST(Forward, DenseHandMultiply) {
  const auto spec = NetworkSpec::make({2}, {LayerSpec::dense(2, 3)});
  auto p = zero_parameters(spec);
  std::fill(p.layers[0].weight.data.begin(), p.layers[0].weight.data.end(), 0.5);
  std::fill(p.layers[0].bias.data.begin(), p.layers[0].bias.data.end(), 0.1);
  const auto y = forward(spec, p, Tensor({2}, {1.0, 1.0}));
  ASSERT_EQ(y.shape, Shape{3});
  for (double v : y.data) EXPECT_NEAR(v, 1.1, 1e-15);
}

TEST(Forward, ShapeMismatchNamesLayer) {
  try {
    NetworkSpec::make({4}, {LayerSpec::dense(4, 3), LayerSpec::relu(), LayerSpec::dense(2, 1)});
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("layer 2"), std::string::npos) << e.what();
  }
  const auto spec = NetworkSpec::make({2}, {LayerSpec::dense(2, 2)});
  EXPECT_THROW(forward(spec, zero_parameters(spec), Tensor({3})), ConfigError);
}

TEST(Forward, BatchMatchesSingleSamples) {
  std::mt19937_64 rng(3);
  const auto spec = random_network(NetFamily::conv, rng);
  const auto p = random_parameters(spec, rng);
  Shape bs{4};
  bs.insert(bs.end(), spec.input_shape.begin(), spec.input_shape.end());
  Tensor xb(bs);
  std::normal_distribution<double> n(0, 1);
  for (auto& v : xb.data) v = n(rng);
  const auto yb = forward(spec, p, xb);
  const std::size_t in = spec.input_size(), out = spec.output_size();
  for (std::size_t b = 0; b < 4; ++b) {
    Tensor x(spec.input_shape, std::vector<double>(xb.data.begin() + b * in, xb.data.begin() + (b + 1) * in));
    const auto y = forward(spec, p, x);
    for (std::size_t i = 0; i < out; ++i) EXPECT_DOUBLE_EQ(y.data[i], yb.data[b * out + i]);
  }
}

TEST(Forward, Deterministic) {
  std::mt19937_64 rng(5);
  const auto spec = random_network(NetFamily::mixed, rng);
  const auto p = random_parameters(spec, rng);
  Tensor x(spec.input_shape, 0.3);
  EXPECT_EQ(forward(spec, p, x), forward(spec, p, x));
}

TEST(Forward, PointwiseConvIsIdentity) {
  const auto spec = NetworkSpec::make({3, 4, 4}, {LayerSpec::conv2d(3, 3, 1, 1, 0)});
  auto p = zero_parameters(spec);
  for (std::size_t c = 0; c < 3; ++c) p.layers[0].weight.data[c * 3 + c] = 1.0;
  Tensor x({3, 4, 4});
  for (std::size_t i = 0; i < x.size(); ++i) x.data[i] = 0.1 * static_cast<double>(i) - 2.0;
  EXPECT_EQ(forward(spec, p, x).data, x.data);
}

TEST(Forward, UpsampleRepeatsNeighbours) {
  const auto spec = NetworkSpec::make({1, 2, 2}, {LayerSpec::upsample(2)});
  const auto y = forward(spec, zero_parameters(spec), Tensor({1, 2, 2}, {1, 2, 3, 4}));
  EXPECT_EQ(y.data, (std::vector<double>{1, 1, 2, 2, 1, 1, 2, 2, 3, 3, 4, 4, 3, 3, 4, 4}));
}

TEST(Backward, IdentityLayerPassesGradient) {
  const auto spec = NetworkSpec::make({2}, {LayerSpec::dense(2, 2)});
  const auto g = backward(spec, identity_dense(spec), Tensor({2}, {0.3, -0.7}), Tensor({2}, {1.0, 0.0}));
  EXPECT_EQ(g.input.data, (std::vector<double>{1.0, 0.0}));
}

TEST(Backward, ReluSubgradientAtZeroIsZero) {
  const auto spec = NetworkSpec::make({3}, {LayerSpec::relu()});
  const auto g = backward(spec, zero_parameters(spec), Tensor({3}, {-1.0, 0.0, 2.0}), Tensor({3}, {1.0, 1.0, 1.0}));
  EXPECT_EQ(g.input.data, (std::vector<double>{0.0, 0.0, 1.0}));
}

TEST(Backward, UpstreamShapeChecked) {
  const auto spec = NetworkSpec::make({2}, {LayerSpec::dense(2, 3)});
  EXPECT_THROW(backward(spec, zero_parameters(spec), Tensor({2}), Tensor({2})), ConfigError);
}

class GradientFamilies : public ::testing::TestWithParam<int> {};

TEST_P(GradientFamilies, MatchesCentralDifferences) {
  std::mt19937_64 rng(100 + GetParam());
  std::normal_distribution<double> n(0, 1);
  for (int rep = 0; rep < 5; ++rep) {
    const auto family = static_cast<NetFamily>(GetParam());
    NetworkSpec spec;
    Parameters p;
    Tensor x;
    do {
      spec = random_network(family, rng);
      p = random_parameters(spec, rng);
      x = Tensor(spec.input_shape);
      for (auto& v : x.data) v = n(rng);
    } while (relu_margin(spec, p, x) < 1e-3);
    Tensor up(spec.output_shape);
    for (auto& v : up.data) v = n(rng);
    const auto r = gradient_check(spec, p, x, up);
    EXPECT_LT(r.max_rel_error, 1e-5) << "rep " << rep << " worst index " << r.worst_index;
  }
}

INSTANTIATE_TEST_SUITE_P(Families, GradientFamilies, ::testing::Values(0, 1, 2));

TEST(Mse, HandValues) {
  EXPECT_EQ(mse(Tensor({2}, {1, 2}), Tensor({2}, {1, 2})), 0.0);
  EXPECT_DOUBLE_EQ(mse(Tensor({2}, {0, 0}), Tensor({2}, {2, 0})), 2.0);
  EXPECT_DOUBLE_EQ(mse(Tensor({1}, {1}), Tensor({1}, {-1})), 4.0);
  EXPECT_THROW(mse(Tensor({2}), Tensor({3})), ConfigError);
}

TEST(Mse, NonNegativeAndZeroOnlyWhenEqual) {
  std::mt19937_64 rng(9);
  std::uniform_real_distribution<double> u(-3, 3);
  for (int i = 0; i < 100; ++i) {
    Tensor a({5}), b({5});
    for (auto& v : a.data) v = u(rng);
    for (auto& v : b.data) v = u(rng);
    EXPECT_GT(mse(a, b), 0.0);
    EXPECT_EQ(mse(a, a), 0.0);
  }
}

TEST(Adam, ZeroGradientLeavesParameters) {
  const auto spec = NetworkSpec::make({2}, {LayerSpec::dense(2, 2)});
  std::mt19937_64 rng(1);
  auto p = init_parameters(spec, rng);
  const auto before = p;
  auto st = AdamState::for_params(spec, 1e-3);
  adam_step(p, zero_parameters(spec), st);
  EXPECT_EQ(p, before);
  EXPECT_EQ(st.step, 1u);
}

TEST(Adam, FirstStepIsSignedLearningRate) {
  const auto spec = NetworkSpec::make({2}, {LayerSpec::dense(2, 1)});
  auto p = zero_parameters(spec);
  auto g = zero_parameters(spec);
  g.layers[0].weight.data = {0.3, -2.0};
  g.layers[0].bias.data = {1e-3};
  auto st = AdamState::for_params(spec, 0.01);
  adam_step(p, g, st);
  // m_hat = g, v_hat = g^2, so the step is -lr * g / (|g| + eps)
  EXPECT_NEAR(p.layers[0].weight.data[0], -0.01 * 0.3 / (0.3 + 1e-8), 1e-15);
  EXPECT_NEAR(p.layers[0].weight.data[1], 0.01 * 2.0 / (2.0 + 1e-8), 1e-15);
  EXPECT_NEAR(p.layers[0].bias.data[0], -0.01 * 1e-3 / (1e-3 + 1e-8), 1e-15);
}

TEST(Adam, DescendsScalarQuadratic) {
  const auto spec = NetworkSpec::make({1}, {LayerSpec::dense(1, 1, false)});
  auto p = zero_parameters(spec);
  p.layers[0].weight.data = {2.0};
  auto st = AdamState::for_params(spec, 0.1);
  double prev = 4.0;  // loss w^2
  for (int i = 0; i < 2; ++i) {
    auto g = zero_parameters(spec);
    g.layers[0].weight.data = {2.0 * p.layers[0].weight.data[0]};
    adam_step(p, g, st);
    const double w = p.layers[0].weight.data[0];
    EXPECT_LT(w * w, prev);
    prev = w * w;
  }
}

TEST(Adam, SgdOption) {
  const auto spec = NetworkSpec::make({1}, {LayerSpec::dense(1, 1, false)});
  auto p = zero_parameters(spec);
  p.layers[0].weight.data = {1.0};
  auto g = zero_parameters(spec);
  g.layers[0].weight.data = {0.5};
  auto st = AdamState::for_params(spec, 0.2, OptimizerKind::sgd);
  adam_step(p, g, st);
  EXPECT_DOUBLE_EQ(p.layers[0].weight.data[0], 0.9);
}

TEST(Init, GlorotRangeAndZeroBias) {
  const auto spec = NetworkSpec::make({10}, {LayerSpec::dense(10, 30)});
  std::mt19937_64 rng(4);
  const auto p = init_parameters(spec, rng);
  const double lim = std::sqrt(6.0 / 40.0);
  for (double w : p.layers[0].weight.data) EXPECT_LE(std::abs(w), lim);
  for (double b : p.layers[0].bias.data) EXPECT_EQ(b, 0.0);
}

TEST(Serialize, NetworkRoundTripIsBitExact) {
  std::mt19937_64 rng(11);
  Network n{random_network(NetFamily::mixed, rng), {}};
  n.params = random_parameters(n.spec, rng);
  const auto text = to_json(n).dump();
  const auto back = network_from_json(Json::parse(text));
  EXPECT_EQ(back, n);
}

TEST(Serialize, AdamStateRoundTrip) {
  const auto spec = NetworkSpec::make({3}, {LayerSpec::dense(3, 2), LayerSpec::relu(), LayerSpec::dense(2, 1)});
  std::mt19937_64 rng(2);
  auto p = init_parameters(spec, rng);
  auto st = AdamState::for_params(spec, 1e-3);
  auto g = random_parameters(spec, rng);
  adam_step(p, g, st);
  const auto back = adam_from_json(Json::parse(to_json(st).dump()), spec);
  EXPECT_EQ(back.m, st.m);
  EXPECT_EQ(back.v, st.v);
  EXPECT_EQ(back.step, st.step);
  EXPECT_EQ(back.lr, st.lr);
}
