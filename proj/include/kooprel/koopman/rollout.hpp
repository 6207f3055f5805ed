#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <string>
#include <vector>

#include "kooprel/common.hpp"
#include "kooprel/dynamics/dataset.hpp"
#include "kooprel/dynamics/trajectory.hpp"
#include "kooprel/koopman/model.hpp"
#include "kooprel/koopman/pairs.hpp"

namespace kooprel::koopman {

enum class RolloutMode { latent, re_encode };

inline RolloutMode rollout_mode_from_string(const std::string& s) {
  if (s == "latent") return RolloutMode::latent;
  if (s == "re_encode") return RolloutMode::re_encode;
  throw ConfigError("unknown rollout mode '" + s + "' (expected latent or re_encode)");
}

/// Multi-step prediction from an initial state.
///
/// latent:    x_k = dec(K^k enc(x_0))
/// re_encode: x_{k+1} = dec(K enc(x_k))
/// Row 0 is the given initial state. If a prediction turns non-finite the
/// trajectory is flagged truncated and the last finite row is held.
inline dynamics::Trajectory rollout(const KoopmanModel& m, std::span<const double> initial_state,
                                    std::span<const double> params, std::size_t n_steps,
                                    RolloutMode mode = RolloutMode::latent) {
  if (initial_state.size() != m.state_dim) throw ConfigError("rollout: initial state has wrong dimension");
  detail::check_params_arg(m, params, 1);
  const std::size_t S = m.state_dim;
  dynamics::Trajectory tr;
  tr.state_shape = m.state_shape;
  tr.times = dynamics::uniform_times(m.dt, n_steps);
  tr.states.resize((n_steps + 1) * S);
  std::copy(initial_state.begin(), initial_state.end(), tr.states.begin());

  const auto p = m.param_dim ? m.param_norm.normalize(params) : std::vector<double>{};
  auto x = m.state_norm.normalize(initial_state);
  auto z = encode_normalized(m, x, p, 1);
  std::vector<double> phys(S);
  for (std::size_t k = 1; k <= n_steps; ++k) {
    z = advance_latent(m, z, 1);
    x = decode_normalized(m, z, p, 1);
    m.state_norm.denormalize(x, phys);
    if (!all_finite(phys)) {
      tr.truncated = true;
      tr.truncated_at = k;
      for (std::size_t j = k; j <= n_steps; ++j) {
        std::copy_n(tr.states.begin() + static_cast<std::ptrdiff_t>((k - 1) * S), S,
                    tr.states.begin() + static_cast<std::ptrdiff_t>(j * S));
      }
      break;
    }
    std::copy(phys.begin(), phys.end(), tr.states.begin() + static_cast<std::ptrdiff_t>(k * S));
    if (mode == RolloutMode::re_encode && k < n_steps) z = encode_normalized(m, x, p, 1);
  }
  return tr;
}

/// ||X_{k+1} - dec(K enc(X_k))||_F / ||X_{k+1}||_F over every pair of a
/// dataset, in physical units.
inline double one_step_relative_error(const KoopmanModel& m, const dynamics::Dataset& ds) {
  double num = 0.0, den = 0.0;
  for (const auto& tr : ds.series) {
    const std::size_t T = tr.length() - 1;
    const auto p = series_params(ds, tr);
    const auto pn = m.param_dim ? m.param_norm.normalize(p) : std::vector<double>{};
    std::vector<double> pb;
    for (std::size_t k = 0; k < T; ++k) pb.insert(pb.end(), pn.begin(), pn.end());
    const auto xk = m.state_norm.normalize(std::span<const double>(tr.states).subspan(0, T * m.state_dim));
    const auto z = advance_latent(m, encode_normalized(m, xk, pb, T), T);
    const auto pred = m.state_norm.denormalize(decode_normalized(m, z, pb, T));
    for (std::size_t i = 0; i < pred.size(); ++i) {
      const double truth = tr.states[m.state_dim + i];
      num += (pred[i] - truth) * (pred[i] - truth);
      den += truth * truth;
    }
  }
  return std::sqrt(num / den);
}

}  // namespace kooprel::koopman
