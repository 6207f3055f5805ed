#pragma once

#include <algorithm>
#include <cstddef>
#include <numeric>
#include <random>
#include <span>
#include <vector>

#include "kooprel/common.hpp"
#include "kooprel/dynamics/dataset.hpp"
#include "kooprel/koopman/normalization.hpp"

namespace kooprel::koopman {

/// System parameters attached to a trajectory (its sampled inputs in
/// parameter mode, nothing in IC mode).
inline std::vector<double> series_params(const dynamics::Dataset& ds, const dynamics::Trajectory& tr) {
  if (ds.param_dim == 0) return {};
  if (tr.provenance.inputs.size() != ds.param_dim) {
    throw ConfigError("dataset: series provenance does not carry " + std::to_string(ds.param_dim) + " parameters");
  }
  return tr.provenance.inputs;
}

inline Normalization fit_state_norm(const dynamics::Dataset& ds) {
  std::vector<double> rows;
  for (const auto& tr : ds.series) rows.insert(rows.end(), tr.states.begin(), tr.states.end());
  return Normalization::fit(rows, ds.state_size());
}

inline Normalization fit_param_norm(const dynamics::Dataset& ds) {
  if (ds.param_dim == 0) return {};
  std::vector<double> rows;
  for (const auto& tr : ds.series) {
    const auto p = series_params(ds, tr);
    rows.insert(rows.end(), p.begin(), p.end());
  }
  return Normalization::fit(rows, ds.param_dim);
}

/// All one-step (X_k, X_{k+1}) pairs of a dataset, normalized once up front.
/// Pair i refers to series i / n_steps, step i % n_steps.
struct PairSet {
  std::size_t state_dim = 0;
  std::size_t param_dim = 0;
  std::size_t n_series = 0;
  std::size_t n_steps = 0;
  std::vector<double> states;  // n_series x (n_steps+1) x state_dim
  std::vector<double> params;  // n_series x param_dim

  [[nodiscard]] std::size_t count() const { return n_series * n_steps; }

  void gather(std::span<const std::size_t> idx, std::vector<double>& xk, std::vector<double>& xk1,
              std::vector<double>& p) const {
    xk.resize(idx.size() * state_dim);
    xk1.resize(idx.size() * state_dim);
    p.resize(idx.size() * param_dim);
    for (std::size_t b = 0; b < idx.size(); ++b) {
      const std::size_t s = idx[b] / n_steps, k = idx[b] % n_steps;
      const double* row = states.data() + (s * (n_steps + 1) + k) * state_dim;
      std::copy_n(row, state_dim, xk.data() + b * state_dim);
      std::copy_n(row + state_dim, state_dim, xk1.data() + b * state_dim);
      std::copy_n(params.data() + s * param_dim, param_dim, p.data() + b * param_dim);
    }
  }
};

/// Anchored multi-step batch for the series in `idx`: X_0 rows and the
/// following `horizon` rows of each series.
inline void gather_series(const PairSet& ps, std::span<const std::size_t> idx, std::size_t horizon,
                          std::vector<double>& x0, std::vector<double>& targets, std::vector<double>& p) {
  const std::size_t S = ps.state_dim;
  x0.resize(idx.size() * S);
  targets.resize(idx.size() * horizon * S);
  p.resize(idx.size() * ps.param_dim);
  for (std::size_t b = 0; b < idx.size(); ++b) {
    const double* row = ps.states.data() + idx[b] * (ps.n_steps + 1) * S;
    std::copy_n(row, S, x0.data() + b * S);
    std::copy_n(row + S, horizon * S, targets.data() + b * horizon * S);
    std::copy_n(ps.params.data() + idx[b] * ps.param_dim, ps.param_dim, p.data() + b * ps.param_dim);
  }
}

inline PairSet make_pairs(const dynamics::Dataset& ds, const Normalization& state_norm,
                          const Normalization& param_norm) {
  require(!ds.series.empty(), "training: dataset is empty");
  require(ds.n_steps >= 1, "training: dataset needs at least one step per series");
  PairSet ps;
  ps.state_dim = ds.state_size();
  ps.param_dim = ds.param_dim;
  ps.n_series = ds.series.size();
  ps.n_steps = ds.n_steps;
  ps.states.resize(ps.n_series * (ps.n_steps + 1) * ps.state_dim);
  ps.params.resize(ps.n_series * ps.param_dim);
  for (std::size_t s = 0; s < ps.n_series; ++s) {
    const auto& tr = ds.series[s];
    require(tr.states.size() == (ps.n_steps + 1) * ps.state_dim, "training: series " + std::to_string(s) +
                                                                     " has inconsistent length");
    state_norm.normalize(tr.states, std::span<double>(ps.states).subspan(s * (ps.n_steps + 1) * ps.state_dim,
                                                                         tr.states.size()));
    if (ps.param_dim) {
      param_norm.normalize(series_params(ds, tr), std::span<double>(ps.params).subspan(s * ps.param_dim, ps.param_dim));
    }
  }
  return ps;
}

/// Pair order for one epoch; reseeded from (seed, epoch) so a resumed run
/// sees the same order as an uninterrupted one.
inline std::vector<std::size_t> epoch_order(std::size_t n, std::uint64_t seed, std::size_t epoch,
                                            StreamTag tag = StreamTag::shuffle) {
  std::vector<std::size_t> idx(n);
  std::iota(idx.begin(), idx.end(), std::size_t{0});
  auto rng = make_stream(seed, tag, epoch);
  std::shuffle(idx.begin(), idx.end(), rng);
  return idx;
}

}  // namespace kooprel::koopman
