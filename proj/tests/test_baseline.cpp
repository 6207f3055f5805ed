#include <cmath>

#include <gtest/gtest.h>

#include "kooprel/baseline/ar_model.hpp"

using namespace kooprel;
using namespace kooprel::baseline;

namespace {

dynamics::Dataset static_dataset(std::size_t n_series, std::size_t n_steps) {
  dynamics::Dataset ds;
  ds.system = "duffing";
  ds.mode = "ic_uncertainty";
  ds.dt = 0.1;
  ds.n_steps = n_steps;
  ds.state_shape = {2};
  for (std::size_t s = 0; s < n_series; ++s) {
    dynamics::Trajectory tr;
    tr.state_shape = {2};
    tr.times = dynamics::uniform_times(0.1, n_steps);
    const double a = -1.0 + 2.0 * static_cast<double>(s) / static_cast<double>(n_series - 1);
    for (std::size_t k = 0; k <= n_steps; ++k) {
      tr.states.push_back(a);
      tr.states.push_back(-a);
    }
    ds.series.push_back(tr);
  }
  return ds;
}

ArModel identity_model(std::size_t dim) {
  ArModel m;
  m.state_dim = dim;
  m.state_shape = {dim};
  m.dt = 0.1;
  m.network.spec = nn::NetworkSpec::make({dim}, {nn::LayerSpec::dense(dim, dim)});
  m.network.params = nn::zero_parameters(m.network.spec);
  for (std::size_t i = 0; i < dim; ++i) m.network.params.layers[0].weight.data[i * dim + i] = 1.0;
  m.state_norm = koopman::Normalization::identity(dim);
  m.validate();
  return m;
}

}  // namespace

TEST(ArBaseline, IdentityNetworkHoldsState) {
  const auto m = identity_model(2);
  const auto tr = rollout_ar(m, std::vector<double>{1.5, -0.5}, {}, 10);
  for (std::size_t k = 0; k <= 10; ++k) {
    EXPECT_EQ(tr.at(k, 0), 1.5);
    EXPECT_EQ(tr.at(k, 1), -0.5);
  }
}

TEST(ArBaseline, OneStepEqualsForwardPass) {
  koopman::TrainConfig c;
  c.epochs = 1;
  const auto r = train_ar(static_dataset(4, 3), nullptr, {8}, c);
  const std::vector<double> x0{0.3, 0.7};
  const auto tr = rollout_ar(r.model, x0, {}, 1);
  const auto in = r.model.state_norm.normalize(x0);
  const auto out = nn::forward(r.model.network.spec, r.model.network.params, nn::Tensor({2}, in));
  const auto expect = r.model.state_norm.denormalize(out.data);
  EXPECT_EQ(tr.at(1, 0), expect[0]);
  EXPECT_EQ(tr.at(1, 1), expect[1]);
}

TEST(ArBaseline, StaticDataReachesSmallError) {
  const auto ds = static_dataset(64, 10);
  koopman::TrainConfig c;
  c.epochs = 200;
  c.lr = 3e-3;
  c.batch_size = 16;
  const auto r = train_ar(ds, nullptr, {16}, c);
  EXPECT_LT(r.report.epochs.back().train.total, 1e-4);
  EXPECT_LT(r.report.epochs.back().train.total, r.report.initial_train_loss);
}

TEST(ArBaseline, SameSeedSameModel) {
  dynamics::SystemSetup s;
  const auto ds = dynamics::generate_dataset(
      s, {dynamics::Distribution::uniform(-2, 2), dynamics::Distribution::uniform(-2, 2)}, 10, 10, 4);
  koopman::TrainConfig c;
  c.epochs = 3;
  c.lr = 1e-3;
  EXPECT_EQ(train_ar(ds, nullptr, {8}, c).model, train_ar(ds, nullptr, {8}, c).model);
}

TEST(ArBaseline, ResumeContinuesEpochs) {
  dynamics::SystemSetup s;
  const auto ds = dynamics::generate_dataset(
      s, {dynamics::Distribution::uniform(-2, 2), dynamics::Distribution::uniform(-2, 2)}, 10, 10, 4);
  koopman::TrainConfig c;
  c.lr = 1e-3;
  c.epochs = 4;
  const auto full = train_ar(ds, &ds, {8}, c);
  c.epochs = 2;
  auto part = train_ar(ds, &ds, {8}, c);
  resume_ar_training(part, ds, &ds, c);
  EXPECT_EQ(part.state.current, full.state.current);
  EXPECT_EQ(part.report.epochs.back().epoch, 4u);
}

TEST(ArBaseline, ParameterModeNeedsParameters) {
  dynamics::SystemSetup s;
  s.mode = dynamics::Mode::parameter_uncertainty;
  s.fixed_ic = {1.0, 0.0};
  using D = dynamics::Distribution;
  const auto ds = dynamics::generate_dataset(
      s, {D::uniform(0.02, 0.04), D::uniform(2, 6), D::uniform(0.1, 0.3), D::uniform(2, 8)}, 6, 5, 2);
  koopman::TrainConfig c;
  c.epochs = 1;
  const auto r = train_ar(ds, nullptr, {8}, c);
  EXPECT_EQ(r.model.network.spec.input_size(), 6u);
  EXPECT_THROW(rollout_ar(r.model, std::vector<double>{1, 0}, {}, 3), ConfigError);
  EXPECT_NO_THROW(rollout_ar(r.model, std::vector<double>{1, 0}, std::vector<double>{0.03, 4, 0.2, 5}, 3));
  ArProvider p(s, r.model);
  EXPECT_EQ(p.trajectory(std::vector<double>{0.03, 4, 0.2, 5}, 4).length(), 5u);
}

TEST(ArBaseline, NonFiniteRolloutTruncates) {
  auto m = identity_model(1);
  m.network.params.layers[0].weight.data = {1e200};
  const auto tr = rollout_ar(m, std::vector<double>{1.0}, {}, 4);
  EXPECT_TRUE(tr.truncated);
  EXPECT_EQ(tr.truncated_at, 2u);
  EXPECT_TRUE(std::isfinite(tr.at(4, 0)));
}
