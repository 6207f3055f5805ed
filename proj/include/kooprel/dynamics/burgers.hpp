#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <string>
#include <vector>

#include "kooprel/common.hpp"
#include "kooprel/dynamics/integrate.hpp"
#include "kooprel/dynamics/trajectory.hpp"

namespace kooprel::dynamics {

/// Coupled 2-D viscous Burgers equations on the unit square, grid_n points per
/// axis (spacing 1/(grid_n-1)). `dt` is the sampling interval of the stored
/// trajectory; each interval is advanced in `substeps` explicit Euler steps.
struct BurgersConfig {
  double nu = 0.01;
  std::size_t grid_n = 16;
  double alpha_ic = 0.8;
  double dt = 0.01;
  std::size_t n_steps = 100;
  std::size_t substeps = 1;
  bool convection = true;  // false leaves pure diffusion (test hook)

  [[nodiscard]] double h() const { return 1.0 / static_cast<double>(grid_n - 1); }
  [[nodiscard]] double sub_dt() const { return dt / static_cast<double>(substeps); }

  void validate() const {
    require(nu > 0.0 && std::isfinite(nu), "burgers: nu must be > 0");
    require(grid_n >= 8, "burgers: grid_n must be >= 8");
    require(dt > 0.0 && std::isfinite(dt), "burgers: dt must be > 0");
    require(substeps >= 1, "burgers: substeps must be >= 1");
    require(std::isfinite(alpha_ic), "burgers: alpha_ic must be finite");
  }
  friend bool operator==(const BurgersConfig&, const BurgersConfig&) = default;
};

/// Velocity fields, each row-major [y][x] with grid_n x grid_n entries.
struct BurgersFields {
  std::vector<double> u;
  std::vector<double> v;
};

/// u(x,y,0) = x + alpha y, v(x,y,0) = x - alpha y.
inline BurgersFields burgers_initial(const BurgersConfig& cfg) {
  const std::size_t n = cfg.grid_n;
  const double h = cfg.h();
  BurgersFields f{std::vector<double>(n * n), std::vector<double>(n * n)};
  for (std::size_t j = 0; j < n; ++j) {
    for (std::size_t i = 0; i < n; ++i) {
      const double x = static_cast<double>(i) * h, y = static_cast<double>(j) * h;
      f.u[j * n + i] = x + cfg.alpha_ic * y;
      f.v[j * n + i] = x - cfg.alpha_ic * y;
    }
  }
  return f;
}

/// Explicit stability number dt (max|u|/h + max|v|/h) + 4 nu dt / h^2.
inline double burgers_stability_number(const BurgersFields& f, const BurgersConfig& cfg) {
  double mu = 0.0, mv = 0.0;
  for (double a : f.u) mu = std::max(mu, std::abs(a));
  for (double a : f.v) mv = std::max(mv, std::abs(a));
  const double h = cfg.h(), dt = cfg.sub_dt();
  const double conv = cfg.convection ? dt * (mu / h + mv / h) : 0.0;
  return conv + 4.0 * cfg.nu * dt / (h * h);
}

inline constexpr double kBurgersStabilityLimit = 0.9;

inline void check_burgers_stability(const BurgersFields& f, const BurgersConfig& cfg, std::size_t step) {
  const double s = burgers_stability_number(f, cfg);
  if (!(s <= kBurgersStabilityLimit)) {
    throw NumericError("burgers: stability number " + std::to_string(s) + " exceeds " +
                       std::to_string(kBurgersStabilityLimit) + " at step " + std::to_string(step) +
                       " (increase substeps)");
  }
}

/// One explicit Euler sub-step: first-order upwind convection, central
/// second-difference diffusion. Boundary nodes are left untouched, so they
/// stay at their initial values.
inline void burgers_substep(BurgersFields& f, const BurgersConfig& cfg, BurgersFields& scratch) {
  const std::size_t n = cfg.grid_n;
  const double h = cfg.h(), dt = cfg.sub_dt(), nu = cfg.nu;
  const double inv_h = 1.0 / h, inv_h2 = 1.0 / (h * h);
  scratch.u = f.u;
  scratch.v = f.v;
  const auto& u = f.u;
  const auto& v = f.v;
  for (std::size_t j = 1; j + 1 < n; ++j) {
    for (std::size_t i = 1; i + 1 < n; ++i) {
      const std::size_t c = j * n + i;
      const double uc = u[c], vc = v[c];
      auto advance = [&](const std::vector<double>& q) {
        const double lap = (q[c + 1] + q[c - 1] + q[c + n] + q[c - n] - 4.0 * q[c]) * inv_h2;
        double adv = 0.0;
        if (cfg.convection) {
          const double dqdx = uc > 0.0 ? (q[c] - q[c - 1]) * inv_h : (q[c + 1] - q[c]) * inv_h;
          const double dqdy = vc > 0.0 ? (q[c] - q[c - n]) * inv_h : (q[c + n] - q[c]) * inv_h;
          adv = uc * dqdx + vc * dqdy;
        }
        return q[c] + dt * (nu * lap - adv);
      };
      scratch.u[c] = advance(u);
      scratch.v[c] = advance(v);
    }
  }
  std::swap(f.u, scratch.u);
  std::swap(f.v, scratch.v);
}

/// Advances by one sampling interval (cfg.substeps sub-steps), checking
/// stability before each sub-step and finiteness after.
inline void burgers_step(BurgersFields& f, const BurgersConfig& cfg, std::size_t step_index = 0) {
  BurgersFields scratch;
  for (std::size_t s = 0; s < cfg.substeps; ++s) {
    check_burgers_stability(f, cfg, step_index);
    burgers_substep(f, cfg, scratch);
  }
  if (!all_finite(f.u) || !all_finite(f.v)) throw BlowupError(step_index + 1, "burgers field not finite");
}

/// Full solve from the perturbed initial condition. States are stored as
/// {2, n, n}: channel 0 is u, channel 1 is v.
inline Trajectory burgers_solve(const BurgersConfig& cfg) {
  cfg.validate();
  BurgersFields f = burgers_initial(cfg);
  check_burgers_stability(f, cfg, 0);
  const std::size_t n2 = cfg.grid_n * cfg.grid_n;
  Trajectory tr;
  tr.state_shape = {2, cfg.grid_n, cfg.grid_n};
  tr.times = uniform_times(cfg.dt, cfg.n_steps);
  tr.states.resize((cfg.n_steps + 1) * 2 * n2);
  auto store = [&](std::size_t k) {
    auto row = tr.row(k);
    std::copy(f.u.begin(), f.u.end(), row.begin());
    std::copy(f.v.begin(), f.v.end(), row.begin() + static_cast<std::ptrdiff_t>(n2));
  };
  store(0);
  for (std::size_t k = 0; k < cfg.n_steps; ++k) {
    burgers_step(f, cfg, k);
    store(k + 1);
  }
  return tr;
}

}  // namespace kooprel::dynamics
