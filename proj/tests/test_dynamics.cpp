#include <algorithm>
#include <cmath>
#include <numbers>

#include <gtest/gtest.h>

#include "kooprel/dynamics/burgers.hpp"
#include "kooprel/dynamics/dataset.hpp"
#include "kooprel/dynamics/distribution.hpp"
#include "kooprel/dynamics/integrate.hpp"
#include "kooprel/dynamics/system.hpp"
#include "kooprel/dynamics/systems.hpp"

using namespace kooprel;
using namespace kooprel::dynamics;

namespace {

double harmonic_error(double dt, double t_end) {
  const auto n = static_cast<std::size_t>(std::llround(t_end / dt));
  const std::vector<double> x0{1.0, 0.0};
  const auto tr = rk4_integrate(
      [](std::span<const double> s, double, std::span<double> out) {
        out[0] = s[1];
        out[1] = -s[0];
      },
      x0, dt, n);
  const double t = tr.times.back();
  const auto last = tr.row(n);
  return std::max(std::abs(last[0] - std::cos(t)), std::abs(last[1] + std::sin(t)));
}

}  // namespace

TEST(DuffingRhs, Examples) {
  DuffingParams p{0.03, 4.0, 0.2, 0.0, 1.0};
  auto d = duffing_rhs(std::vector<double>{0, 0}, 0.0, p);
  EXPECT_EQ(d[0], 0.0);
  EXPECT_EQ(d[1], 0.0);
  d = duffing_rhs(std::vector<double>{1, 0}, 0.0, DuffingParams{0, 2, 1, 0, 1});
  EXPECT_EQ(d[0], 0.0);
  EXPECT_DOUBLE_EQ(d[1], -3.0);
  d = duffing_rhs(std::vector<double>{0, 1}, 0.0, DuffingParams{0.5, 0, 0, 0, 1});
  EXPECT_DOUBLE_EQ(d[0], 1.0);
  EXPECT_DOUBLE_EQ(d[1], -0.5);
}

TEST(DuffingRhs, Forcing) {
  const auto d = duffing_rhs(std::vector<double>{0, 0}, std::numbers::pi, DuffingParams{0, 0, 0, 2.0, 1.0});
  EXPECT_NEAR(d[1], -2.0, 1e-15);
}

TEST(LorenzRhs, Examples) {
  auto d = lorenz_rhs(std::vector<double>{0, 0, 0}, LorenzParams{10, 28, 8.0 / 3.0});
  EXPECT_EQ(d, (std::array<double, 3>{0, 0, 0}));
  d = lorenz_rhs(std::vector<double>{1, 1, 1}, LorenzParams{10, 28, 8.0 / 3.0});
  EXPECT_DOUBLE_EQ(d[0], 0.0);
  EXPECT_DOUBLE_EQ(d[1], 26.0);
  EXPECT_DOUBLE_EQ(d[2], 1.0 - 8.0 / 3.0);
  d = lorenz_rhs(std::vector<double>{1, 2, 3}, LorenzParams{1, 1, 1});
  EXPECT_EQ(d, (std::array<double, 3>{1, -4, -1}));
}

TEST(Rk4, ZeroStepsKeepsInitialState) {
  const std::vector<double> x0{0.25, -1.0};
  const auto tr = rk4_integrate([](std::span<const double>, double, std::span<double> out) { out[0] = out[1] = 1; },
                                x0, 0.1, 0);
  EXPECT_EQ(tr.length(), 1u);
  EXPECT_EQ(tr.states, x0);
}

TEST(Rk4, HarmonicOscillatorFullPeriod) { EXPECT_LT(harmonic_error(0.001, 2 * std::numbers::pi), 1e-6); }

TEST(Rk4, FourthOrderConvergence) {
  const double e1 = harmonic_error(0.1, 2.0), e2 = harmonic_error(0.05, 2.0), e3 = harmonic_error(0.025, 2.0);
  for (double order : {std::log2(e1 / e2), std::log2(e2 / e3)}) {
    EXPECT_GE(order, 3.7);
    EXPECT_LE(order, 4.3);
  }
}

TEST(Rk4, BlowupReportsStep) {
  const std::vector<double> x0{1.0};
  try {
    rk4_integrate([](std::span<const double> s, double, std::span<double> out) { out[0] = s[0] * s[0] * 1e200; }, x0,
                  0.1, 10);
    FAIL() << "expected BlowupError";
  } catch (const BlowupError& e) {
    EXPECT_GE(e.step(), 1u);
    EXPECT_LE(e.step(), 10u);
  }
}

TEST(Lorenz, SensitiveToInitialConditions) {
  SystemSetup s;
  s.kind = SystemKind::lorenz;
  s.dt = 0.01;
  const auto a = simulate(s, std::vector<double>{1.0, 1.0, 1.0}, 3000);
  const auto b = simulate(s, std::vector<double>{1.0 + 1e-8, 1.0, 1.0}, 3000);
  double gap = 0.0;
  for (std::size_t i = 0; i < a.states.size(); ++i) gap = std::max(gap, std::abs(a.states[i] - b.states[i]));
  EXPECT_GT(gap, 1e-2);
}

TEST(Burgers, UniformFieldIsSteady) {
  BurgersConfig cfg;
  cfg.grid_n = 12;
  BurgersFields f{std::vector<double>(144, 0.3), std::vector<double>(144, -0.2)};
  const auto before = f;
  burgers_step(f, cfg);
  for (std::size_t i = 0; i < f.u.size(); ++i) {
    EXPECT_NEAR(f.u[i], before.u[i], 1e-15);
    EXPECT_NEAR(f.v[i], before.v[i], 1e-15);
  }
}

TEST(Burgers, PureDiffusionDecayRate) {
  BurgersConfig cfg;
  cfg.grid_n = 33;
  cfg.nu = 0.01;
  cfg.dt = 0.01;
  cfg.substeps = 4;
  cfg.convection = false;
  const std::size_t n = cfg.grid_n;
  const double h = cfg.h();
  BurgersFields f{std::vector<double>(n * n), std::vector<double>(n * n)};
  for (std::size_t j = 0; j < n; ++j)
    for (std::size_t i = 0; i < n; ++i) {
      const double m = std::sin(2 * std::numbers::pi * i * h) * std::sin(2 * std::numbers::pi * j * h);
      f.u[j * n + i] = m;
      f.v[j * n + i] = 0.5 * m;
    }
  const std::size_t probe = (n / 4) * n + n / 4;  // peak of the mode
  const double a0 = f.u[probe];
  const std::size_t steps = 100;
  for (std::size_t k = 0; k < steps; ++k) burgers_step(f, cfg, k);
  const double rate = -std::log(f.u[probe] / a0) / (cfg.dt * static_cast<double>(steps));
  const double expected = cfg.nu * 8.0 * std::numbers::pi * std::numbers::pi;
  EXPECT_NEAR(rate, expected, 0.05 * expected);
}

TEST(Burgers, GridRefinementAgreement) {
  auto solve = [](std::size_t n, std::size_t substeps) {
    BurgersConfig cfg;
    cfg.grid_n = n;
    cfg.alpha_ic = 0.8;
    cfg.dt = 0.01;
    cfg.n_steps = 10;
    cfg.substeps = substeps;
    return burgers_solve(cfg);
  };
  const auto r32 = solve(32, 8), r64 = solve(64, 16), r128 = solve(128, 64);
  const auto a = r32.row(10), b = r64.row(10), ref = r128.row(10);
  // node i of the 32-grid coincides with node 2i / 4i of the finer grids
  double e32 = 0.0, e64 = 0.0, scale = 0.0;
  for (std::size_t fld = 0; fld < 2; ++fld)
    for (std::size_t j = 0; j < 32; ++j)
      for (std::size_t i = 0; i < 32; ++i) {
        const double z = ref[fld * 16384 + 4 * j * 128 + 4 * i];
        e32 = std::max(e32, std::abs(a[fld * 1024 + j * 32 + i] - z));
        e64 = std::max(e64, std::abs(b[fld * 4096 + 2 * j * 64 + 2 * i] - z));
        scale = std::max(scale, std::abs(z));
      }
  EXPECT_LT(e64, 0.5 * e32);
  EXPECT_LT(e64 / scale, 0.05);
}

TEST(Burgers, BoundariesStayFrozenAndStateIsFinite) {
  BurgersConfig cfg;
  const auto tr = burgers_solve(cfg);
  const std::size_t n = cfg.grid_n;
  const auto first = tr.row(0), last = tr.row(cfg.n_steps);
  for (std::size_t i = 0; i < n; ++i) {
    EXPECT_EQ(first[i], last[i]);
    EXPECT_EQ(first[(n - 1) * n + i], last[(n - 1) * n + i]);
    EXPECT_EQ(first[i * n], last[i * n]);
  }
  EXPECT_TRUE(all_finite(tr.states));
}

TEST(Burgers, StabilityViolationIsReported) {
  BurgersConfig cfg;
  cfg.grid_n = 64;
  cfg.dt = 0.05;
  EXPECT_THROW(burgers_solve(cfg), NumericError);
  cfg.nu = -1.0;
  EXPECT_THROW(burgers_solve(cfg), ConfigError);
}

TEST(Distribution, UniformMean) {
  const auto x = sample(Distribution::uniform(0, 1), 100000, 7);
  double m = 0.0;
  for (double v : x) m += v;
  EXPECT_NEAR(m / static_cast<double>(x.size()), 0.5, 0.01);
}

TEST(Distribution, TruncatedGaussianRespectsSupport) {
  const auto x = sample(Distribution::gaussian(-5, 5), 1000000, 3);
  EXPECT_EQ(std::count_if(x.begin(), x.end(), [](double v) { return v <= -5.0 || v >= 5.0; }), 0);
}

TEST(Distribution, LognormalSupportAndMedian) {
  const auto d = Distribution::lognormal(-6, 6);
  auto x = sample(d, 200001, 5);
  for (double v : x) {
    EXPECT_GT(v, -6.0);
    EXPECT_LT(v, 6.0);
  }
  std::nth_element(x.begin(), x.begin() + 100000, x.end());
  EXPECT_NEAR(x[100000], 0.0, 0.05);
}

TEST(Distribution, SeedReproducibility) {
  EXPECT_EQ(sample(Distribution::gaussian(0, 12), 100, 11), sample(Distribution::gaussian(0, 12), 100, 11));
  EXPECT_NE(sample(Distribution::uniform(0, 1), 100, 11), sample(Distribution::uniform(0, 1), 100, 12));
  EXPECT_THROW(Distribution::uniform(1, 1).validate(), ConfigError);
}

TEST(Dataset, PointMassReproducesIntegrator) {
  SystemSetup s;
  const auto ds = generate_dataset(s, {Distribution::constant(1.5), Distribution::constant(-0.5)}, 1, 30, 1);
  const std::vector<double> x0{1.5, -0.5};
  const DuffingParams p;
  const auto ref = rk4_integrate(
      [&p](std::span<const double> st, double t, std::span<double> out) {
        const auto d = duffing_rhs(st, t, p);
        out[0] = d[0];
        out[1] = d[1];
      },
      x0, s.dt, 30);
  EXPECT_EQ(ds.series.at(0).states, ref.states);
}

TEST(Dataset, InitialRowsInsideSupportAndSeedMatters) {
  SystemSetup s;
  const std::vector<Distribution> d{Distribution::uniform(-5, 5), Distribution::uniform(0, 10)};
  const auto a = generate_dataset(s, d, 50, 5, 1, 2);
  for (const auto& tr : a.series) {
    EXPECT_GT(tr.row(0)[0], -5.0);
    EXPECT_LT(tr.row(0)[0], 5.0);
    EXPECT_GE(tr.row(0)[1], 0.0);
    EXPECT_LT(tr.row(0)[1], 10.0);
    EXPECT_EQ(tr.length(), 6u);
  }
  const auto b = generate_dataset(s, d, 50, 5, 2);
  EXPECT_NE(a.series[0].states, b.series[0].states);
  EXPECT_EQ(a, generate_dataset(s, d, 50, 5, 1, 1));
}

TEST(Dataset, ParameterModeUsesFixedInitialState) {
  SystemSetup s;
  s.kind = SystemKind::lorenz;
  s.mode = Mode::parameter_uncertainty;
  s.dt = 0.01;
  s.fixed_ic = {10, 10, 0};
  const auto ds = generate_dataset(
      s, {Distribution::uniform(24, 32), Distribution::uniform(8, 12), Distribution::uniform(1.5, 3.5)}, 5, 10, 4);
  EXPECT_EQ(ds.param_dim, 3u);
  for (const auto& tr : ds.series) {
    EXPECT_EQ(std::vector<double>(tr.row(0).begin(), tr.row(0).end()), s.fixed_ic);
    EXPECT_EQ(tr.provenance.inputs.size(), 3u);
  }
}

TEST(SystemSetup, BurgersIsIcOnly) {
  SystemSetup s;
  s.kind = SystemKind::burgers;
  s.mode = Mode::parameter_uncertainty;
  EXPECT_THROW(s.validate(), ConfigError);
}
