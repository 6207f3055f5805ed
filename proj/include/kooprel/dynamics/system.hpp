#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kooprel/common.hpp"
#include "kooprel/dynamics/burgers.hpp"
#include "kooprel/dynamics/distribution.hpp"
#include "kooprel/dynamics/integrate.hpp"
#include "kooprel/dynamics/systems.hpp"
#include "kooprel/dynamics/trajectory.hpp"

namespace kooprel::dynamics {

enum class SystemKind { duffing, lorenz, burgers };
enum class Mode { ic_uncertainty, parameter_uncertainty };

inline const char* to_string(SystemKind k) {
  switch (k) {
    case SystemKind::duffing: return "duffing";
    case SystemKind::lorenz: return "lorenz";
    case SystemKind::burgers: return "burgers";
  }
  return "?";
}
inline SystemKind system_from_string(const std::string& s) {
  if (s == "duffing") return SystemKind::duffing;
  if (s == "lorenz") return SystemKind::lorenz;
  if (s == "burgers") return SystemKind::burgers;
  throw ConfigError("unknown system '" + s + "' (expected duffing, lorenz or burgers)");
}
inline const char* to_string(Mode m) {
  return m == Mode::ic_uncertainty ? "ic_uncertainty" : "parameter_uncertainty";
}
inline Mode mode_from_string(const std::string& s) {
  if (s == "ic_uncertainty") return Mode::ic_uncertainty;
  if (s == "parameter_uncertainty") return Mode::parameter_uncertainty;
  throw ConfigError("unknown mode '" + s + "' (expected ic_uncertainty or parameter_uncertainty)");
}

/// A dynamical system plus the role of its stochastic inputs.
///
/// In ic_uncertainty mode the inputs are the initial state (for Burgers, the
/// single perturbation parameter alpha of the initial field). In
/// parameter_uncertainty mode the inputs are the system parameters
/// (duffing: delta, alpha, beta, gamma; lorenz: sigma, rho, beta) and the
/// initial state is `fixed_ic`.
struct SystemSetup {
  SystemKind kind = SystemKind::duffing;
  Mode mode = Mode::ic_uncertainty;
  DuffingParams duffing;
  LorenzParams lorenz;
  BurgersConfig burgers;
  std::vector<double> fixed_ic;
  double dt = 0.1;

  [[nodiscard]] std::size_t state_size() const {
    switch (kind) {
      case SystemKind::duffing: return 2;
      case SystemKind::lorenz: return 3;
      case SystemKind::burgers: return 2 * burgers.grid_n * burgers.grid_n;
    }
    return 0;
  }
  [[nodiscard]] std::vector<std::size_t> state_shape() const {
    if (kind == SystemKind::burgers) return {2, burgers.grid_n, burgers.grid_n};
    return {state_size()};
  }
  [[nodiscard]] std::size_t param_dim() const {
    if (mode == Mode::ic_uncertainty) return 0;
    return kind == SystemKind::duffing ? 4 : 3;
  }
  [[nodiscard]] std::size_t input_dim() const {
    if (mode == Mode::parameter_uncertainty) return param_dim();
    return kind == SystemKind::burgers ? 1 : state_size();
  }

  void validate() const {
    require(dt > 0.0 && std::isfinite(dt), "system: dt must be > 0");
    if (kind == SystemKind::burgers) {
      require(mode == Mode::ic_uncertainty, "burgers supports only ic_uncertainty mode");
      burgers.validate();
    }
    if (mode == Mode::parameter_uncertainty) {
      require(fixed_ic.size() == state_size(), "system: fixed_ic must have " + std::to_string(state_size()) +
                                                   " entries in parameter_uncertainty mode");
    }
    duffing.validate();
    lorenz.validate();
  }

  void check_inputs(std::span<const double> inputs) const {
    if (inputs.size() != input_dim()) {
      throw ConfigError(std::string("system: ") + to_string(kind) + "/" + to_string(mode) + " expects " +
                        std::to_string(input_dim()) + " stochastic inputs, got " + std::to_string(inputs.size()));
    }
  }

  [[nodiscard]] DuffingParams duffing_for(std::span<const double> inputs) const {
    DuffingParams p = duffing;
    if (mode == Mode::parameter_uncertainty) {
      p.delta = inputs[0];
      p.alpha = inputs[1];
      p.beta = inputs[2];
      p.gamma = inputs[3];
    }
    return p;
  }
  [[nodiscard]] LorenzParams lorenz_for(std::span<const double> inputs) const {
    LorenzParams p = lorenz;
    if (mode == Mode::parameter_uncertainty) {
      p.sigma = inputs[0];
      p.rho = inputs[1];
      p.beta = inputs[2];
    }
    return p;
  }
  [[nodiscard]] BurgersConfig burgers_for(std::span<const double> inputs, std::size_t n_steps) const {
    BurgersConfig c = burgers;
    c.alpha_ic = inputs[0];
    c.dt = dt;
    c.n_steps = n_steps;
    return c;
  }

  /// Initial state implied by a set of stochastic inputs.
  [[nodiscard]] std::vector<double> initial_state(std::span<const double> inputs) const {
    check_inputs(inputs);
    if (mode == Mode::parameter_uncertainty) return fixed_ic;
    if (kind != SystemKind::burgers) return {inputs.begin(), inputs.end()};
    const auto f = burgers_initial(burgers_for(inputs, 0));
    std::vector<double> s(f.u);
    s.insert(s.end(), f.v.begin(), f.v.end());
    return s;
  }

  /// Parameter vector fed to parameter-aware surrogates (empty in IC mode).
  [[nodiscard]] std::vector<double> model_params(std::span<const double> inputs) const {
    check_inputs(inputs);
    if (mode == Mode::ic_uncertainty) return {};
    return {inputs.begin(), inputs.end()};
  }
};

/// Ground-truth trajectory for one set of stochastic inputs.
inline Trajectory simulate(const SystemSetup& setup, std::span<const double> inputs, std::size_t n_steps) {
  setup.check_inputs(inputs);
  Trajectory tr;
  switch (setup.kind) {
    case SystemKind::duffing: {
      const auto p = setup.duffing_for(inputs);
      p.validate();
      const auto x0 = setup.initial_state(inputs);
      tr = rk4_integrate(
          [&p](std::span<const double> s, double t, std::span<double> out) {
            const auto d = duffing_rhs(s, t, p);
            out[0] = d[0];
            out[1] = d[1];
          },
          x0, setup.dt, n_steps);
      break;
    }
    case SystemKind::lorenz: {
      const auto p = setup.lorenz_for(inputs);
      p.validate();
      const auto x0 = setup.initial_state(inputs);
      tr = rk4_integrate(
          [&p](std::span<const double> s, double, std::span<double> out) {
            const auto d = lorenz_rhs(s, p);
            std::copy(d.begin(), d.end(), out.begin());
          },
          x0, setup.dt, n_steps);
      break;
    }
    case SystemKind::burgers:
      tr = burgers_solve(setup.burgers_for(inputs, n_steps));
      break;
  }
  tr.provenance.system = to_string(setup.kind);
  tr.provenance.inputs.assign(inputs.begin(), inputs.end());
  return tr;
}

}  // namespace kooprel::dynamics
