#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kooprel/common.hpp"

namespace kooprel::dynamics {

/// x'' + delta x' + alpha x + beta x^3 = gamma cos(omega t)
struct DuffingParams {
  double delta = 0.03;
  double alpha = 4.0;
  double beta = 0.2;
  double gamma = 5.0;
  double omega = 1.0;

  void validate() const {
    require(std::isfinite(delta) && std::isfinite(alpha) && std::isfinite(beta) && std::isfinite(gamma) &&
                std::isfinite(omega),
            "duffing: parameters must be finite");
    require(delta >= 0.0, "duffing: delta must be >= 0");
  }
  friend bool operator==(const DuffingParams&, const DuffingParams&) = default;
};

struct LorenzParams {
  double sigma = 10.0;
  double rho = 28.0;
  double beta = 8.0 / 3.0;

  void validate() const {
    require(std::isfinite(sigma) && std::isfinite(rho) && std::isfinite(beta), "lorenz: parameters must be finite");
    require(sigma > 0 && rho > 0 && beta > 0, "lorenz: parameters must be positive");
  }
  friend bool operator==(const LorenzParams&, const LorenzParams&) = default;
};

inline std::array<double, 2> duffing_rhs(std::span<const double> s, double t, const DuffingParams& p) {
  const double x = s[0], v = s[1];
  return {v, p.gamma * std::cos(p.omega * t) - p.delta * v - p.alpha * x - p.beta * x * x * x};
}

inline std::array<double, 3> lorenz_rhs(std::span<const double> s, const LorenzParams& p) {
  const double x = s[0], y = s[1], z = s[2];
  return {p.sigma * (y - x), x * (p.rho - z) - y, x * y - p.beta * z};
}

}  // namespace kooprel::dynamics
