#pragma once

#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kooprel/common.hpp"
#include "kooprel/dynamics/trajectory.hpp"

namespace kooprel::dynamics {

/// Raised when the integrated state stops being finite.
class BlowupError : public NumericError {
 public:
  BlowupError(std::size_t step, const std::string& what)
      : NumericError("integration blow-up at step " + std::to_string(step) + ": " + what), step_(step) {}
  [[nodiscard]] std::size_t step() const { return step_; }

 private:
  std::size_t step_;
};

/// Classical fixed-step RK4. `rhs(state, t, out)` writes the derivative.
template <class Rhs>
Trajectory rk4_integrate(Rhs&& rhs, std::span<const double> initial_state, double dt, std::size_t n_steps) {
  if (!(dt > 0.0)) throw ConfigError("rk4: dt must be > 0");
  if (initial_state.empty()) throw ConfigError("rk4: empty initial state");
  if (!all_finite(initial_state)) throw BlowupError(0, "non-finite initial state");
  const std::size_t d = initial_state.size();
  Trajectory tr;
  tr.state_shape = {d};
  tr.times = uniform_times(dt, n_steps);
  tr.states.resize((n_steps + 1) * d);
  std::copy(initial_state.begin(), initial_state.end(), tr.states.begin());

  std::vector<double> x(initial_state.begin(), initial_state.end());
  std::vector<double> k1(d), k2(d), k3(d), k4(d), tmp(d);
  for (std::size_t step = 0; step < n_steps; ++step) {
    const double t = tr.times[step];
    rhs(std::span<const double>(x), t, std::span<double>(k1));
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * dt * k1[i];
    rhs(std::span<const double>(tmp), t + 0.5 * dt, std::span<double>(k2));
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + 0.5 * dt * k2[i];
    rhs(std::span<const double>(tmp), t + 0.5 * dt, std::span<double>(k3));
    for (std::size_t i = 0; i < d; ++i) tmp[i] = x[i] + dt * k3[i];
    rhs(std::span<const double>(tmp), t + dt, std::span<double>(k4));
    for (std::size_t i = 0; i < d; ++i) x[i] += dt / 6.0 * (k1[i] + 2.0 * k2[i] + 2.0 * k3[i] + k4[i]);
    if (!all_finite(x)) throw BlowupError(step + 1, "non-finite state");
    std::copy(x.begin(), x.end(), tr.states.begin() + static_cast<std::ptrdiff_t>((step + 1) * d));
  }
  return tr;
}

}  // namespace kooprel::dynamics
