#pragma once

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "kooprel/common.hpp"

namespace kooprel::dynamics {

/// Where a trajectory came from: the sampled stochastic inputs and the RNG
/// coordinates that produced them.
struct Provenance {
  std::string system;
  std::vector<double> inputs;
  std::uint64_t seed = 0;
  std::uint64_t index = 0;
  friend bool operator==(const Provenance&, const Provenance&) = default;
};

/// Time-indexed states, row-major (T+1) x state_size. `state_shape` is {d}
/// for ODEs and {2, n, n} for the Burgers fields.
struct Trajectory {
  std::vector<double> times;
  std::vector<double> states;
  std::vector<std::size_t> state_shape;
  Provenance provenance;
  // Set when a surrogate rollout produced a non-finite value; rows from
  // `truncated_at` on are copies of the last finite row.
  bool truncated = false;
  std::size_t truncated_at = 0;

  [[nodiscard]] std::size_t state_size() const {
    std::size_t n = 1;
    for (auto d : state_shape) n *= d;
    return n;
  }
  [[nodiscard]] std::size_t length() const { return times.size(); }
  [[nodiscard]] std::span<const double> row(std::size_t k) const {
    return std::span<const double>(states).subspan(k * state_size(), state_size());
  }
  [[nodiscard]] std::span<double> row(std::size_t k) {
    return std::span<double>(states).subspan(k * state_size(), state_size());
  }
  [[nodiscard]] double at(std::size_t k, std::size_t c) const { return states[k * state_size() + c]; }

  friend bool operator==(const Trajectory&, const Trajectory&) = default;
};

inline std::vector<double> uniform_times(double dt, std::size_t n_steps) {
  std::vector<double> t(n_steps + 1);
  for (std::size_t k = 0; k <= n_steps; ++k) t[k] = static_cast<double>(k) * dt;
  return t;
}

}  // namespace kooprel::dynamics
