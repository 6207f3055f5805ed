#pragma once

#include <cstddef>
#include <cstdint>
#include <string>
#include <vector>

#include "kooprel/common.hpp"
#include "kooprel/dynamics/distribution.hpp"
#include "kooprel/dynamics/system.hpp"

namespace kooprel::dynamics {

/// A set of trajectories of one system, all with the same length and step.
struct Dataset {
  std::string system;
  std::string mode;
  double dt = 0.0;
  std::size_t n_steps = 0;
  std::vector<std::size_t> state_shape;
  std::size_t param_dim = 0;
  std::vector<Distribution> distributions;
  std::uint64_t seed = 0;
  std::vector<Trajectory> series;

  [[nodiscard]] std::size_t state_size() const {
    std::size_t n = 1;
    for (auto d : state_shape) n *= d;
    return n;
  }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

/// Draws n_series input sets (stream (seed, dataset, i) for sample i) and
/// integrates each one. Series are independent, so they are generated in
/// parallel; the result does not depend on `threads`.
inline Dataset generate_dataset(const SystemSetup& setup, const std::vector<Distribution>& inputs,
                                std::size_t n_series, std::size_t n_steps, std::uint64_t seed,
                                std::size_t threads = 1) {
  setup.validate();
  require(n_series >= 1, "generate_dataset: n_series must be >= 1");
  require(inputs.size() == setup.input_dim(), "generate_dataset: expected " + std::to_string(setup.input_dim()) +
                                                  " input distributions, got " + std::to_string(inputs.size()));
  for (const auto& d : inputs) d.validate();

  Dataset ds;
  ds.system = to_string(setup.kind);
  ds.mode = to_string(setup.mode);
  ds.dt = setup.dt;
  ds.n_steps = n_steps;
  ds.state_shape = setup.state_shape();
  ds.param_dim = setup.param_dim();
  ds.distributions = inputs;
  ds.seed = seed;
  ds.series.resize(n_series);
  parallel_for(n_series, threads, [&](std::size_t i) {
    const auto x = draw_inputs(inputs, seed, StreamTag::dataset, i);
    try {
      ds.series[i] = simulate(setup, x, n_steps);
    } catch (const NumericError& e) {
      throw NumericError("generate_dataset: sample " + std::to_string(i) + ": " + e.what());
    }
    ds.series[i].provenance.seed = seed;
    ds.series[i].provenance.index = i;
  });
  return ds;
}

}  // namespace kooprel::dynamics
