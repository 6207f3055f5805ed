#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <span>
#include <string>
#include <vector>

#include "kooprel/common.hpp"
#include "kooprel/dynamics/dataset.hpp"
#include "kooprel/dynamics/system.hpp"
#include "kooprel/koopman/model.hpp"
#include "kooprel/koopman/pairs.hpp"
#include "kooprel/koopman/train.hpp"
#include "kooprel/nn/optimizer.hpp"
#include "kooprel/reliability/monte_carlo.hpp"

namespace kooprel::baseline {

/// Auto-regressive one-step network: normalized [x_k | p] -> normalized x_{k+1}.
struct ArModel {
  koopman::Variant variant = koopman::Variant::ic_uncertainty;
  nn::Network network;
  std::size_t state_dim = 0;
  std::size_t param_dim = 0;
  std::vector<std::size_t> state_shape;
  double dt = 0.0;
  koopman::Normalization state_norm;
  koopman::Normalization param_norm;

  void validate() const {
    network.spec.validate();
    nn::check_parameters(network.spec, network.params);
    require(network.spec.input_size() == state_dim + param_dim, "ar model: input != state+param dims");
    require(network.spec.output_size() == state_dim, "ar model: output != state dim");
    require(state_norm.dim() == state_dim && param_norm.dim() == param_dim, "ar model: normalization missing");
  }
  friend bool operator==(const ArModel&, const ArModel&) = default;
};

struct ArTrainState {
  ArModel current;
  nn::AdamState opt;
  std::size_t epochs_done = 0;
  double best_validation = std::numeric_limits<double>::infinity();
};

struct ArTrainResult {
  ArModel model;
  koopman::TrainReport report;  // one-step MSE reported in the `prediction` and `total` fields
  ArTrainState state;
};

namespace detail {

inline double one_step_mse(const ArModel& m, std::span<const double> xk, std::span<const double> xk1,
                           std::span<const double> p, std::size_t count, nn::Parameters* grads) {
  const auto in = koopman::detail::concat_rows(xk, m.state_dim, p, m.param_dim, count);
  const auto act = nn::forward_batch(m.network.spec, m.network.params, in, count);
  const double loss = nn::mse(act.output(), xk1);
  if (grads) {
    std::vector<double> d(xk1.size(), 0.0);
    nn::mse_grad_add(act.output(), xk1, 1.0, d);
    nn::backward_batch(m.network.spec, m.network.params, act, d, *grads, nullptr);
  }
  return loss;
}

inline double evaluate(const ArModel& m, const koopman::PairSet& pairs, std::size_t chunk = 4096) {
  double acc = 0.0;
  std::vector<std::size_t> idx;
  std::vector<double> xk, xk1, p;
  for (std::size_t lo = 0; lo < pairs.count(); lo += chunk) {
    const std::size_t hi = std::min(pairs.count(), lo + chunk);
    idx.resize(hi - lo);
    std::iota(idx.begin(), idx.end(), lo);
    pairs.gather(idx, xk, xk1, p);
    acc += one_step_mse(m, xk, xk1, p, idx.size(), nullptr) * static_cast<double>(idx.size());
  }
  return acc / static_cast<double>(pairs.count());
}

}  // namespace detail

inline void train_ar_epochs(ArTrainResult& r, const koopman::PairSet& train, const koopman::PairSet* validation,
                            const koopman::TrainConfig& cfg, const koopman::EpochCallback& on_epoch = {}) {
  auto& st = r.state;
  nn::Parameters grads = nn::zero_parameters(st.current.network.spec);
  std::vector<double> xk, xk1, p;
  const std::size_t n = train.count();
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const std::size_t epoch = st.epochs_done + 1;
    st.opt.lr = cfg.lr_at(epoch);
    const auto order = koopman::epoch_order(n, cfg.seed, epoch);
    double acc = 0.0;
    for (std::size_t lo = 0; lo < n; lo += cfg.batch_size) {
      const std::size_t hi = std::min(n, lo + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + lo, hi - lo);
      train.gather(idx, xk, xk1, p);
      grads.set_zero();
      const double loss = detail::one_step_mse(st.current, xk, xk1, p, idx.size(), &grads);
      if (!std::isfinite(loss)) {
        throw koopman::TrainingDiverged("AR training diverged in epoch " + std::to_string(epoch), r.report);
      }
      nn::adam_step(st.current.network.params, grads, st.opt);
      acc += loss * static_cast<double>(idx.size()) / static_cast<double>(n);
    }
    koopman::EpochRecord rec;
    rec.epoch = epoch;
    rec.train.total = rec.train.prediction = acc;
    const double val = validation ? detail::evaluate(st.current, *validation) : acc;
    rec.validation.total = rec.validation.prediction = val;
    st.epochs_done = epoch;
    r.report.epochs.push_back(rec);
    if (!cfg.keep_best || val < st.best_validation) {
      st.best_validation = val;
      r.report.best_epoch = epoch;
      r.model = st.current;
    }
    if (on_epoch) on_epoch(rec);
  }
}

/// Trains the baseline with the same optimizer, epochs and seed handling as
/// the Koopman model so the two are compared at a matched budget.
inline ArTrainResult train_ar(const dynamics::Dataset& train_set, const dynamics::Dataset* validation_set,
                              const std::vector<std::size_t>& hidden, const koopman::TrainConfig& cfg,
                              const koopman::EpochCallback& on_epoch = {}) {
  cfg.validate();
  require(!train_set.series.empty(), "train_ar: empty training set");
  ArTrainResult r;
  auto& m = r.state.current;
  m.variant = train_set.param_dim ? koopman::Variant::parameter_uncertainty : koopman::Variant::ic_uncertainty;
  m.state_shape = train_set.state_shape;
  m.state_dim = train_set.state_size();
  m.param_dim = train_set.param_dim;
  m.dt = train_set.dt;
  m.state_norm = koopman::fit_state_norm(train_set);
  m.param_norm = koopman::fit_param_norm(train_set);
  m.network.spec = koopman::dense_mlp(m.state_dim + m.param_dim, hidden, m.state_dim);
  auto rng = make_stream(cfg.seed, StreamTag::init);
  m.network.params = nn::init_parameters(m.network.spec, rng);
  m.validate();
  r.state.opt = nn::AdamState::for_params(m.network.spec, cfg.lr, cfg.optimizer);
  r.model = m;
  r.report.seed = cfg.seed;
  const auto train_pairs = koopman::make_pairs(train_set, m.state_norm, m.param_norm);
  koopman::PairSet val_pairs;
  if (validation_set) val_pairs = koopman::make_pairs(*validation_set, m.state_norm, m.param_norm);
  r.report.initial_train_loss = detail::evaluate(m, train_pairs);
  train_ar_epochs(r, train_pairs, validation_set ? &val_pairs : nullptr, cfg, on_epoch);
  return r;
}

inline void resume_ar_training(ArTrainResult& r, const dynamics::Dataset& train_set,
                               const dynamics::Dataset* validation_set, const koopman::TrainConfig& cfg,
                               const koopman::EpochCallback& on_epoch = {}) {
  const auto& m = r.state.current;
  const auto train_pairs = koopman::make_pairs(train_set, m.state_norm, m.param_norm);
  koopman::PairSet val_pairs;
  if (validation_set) val_pairs = koopman::make_pairs(*validation_set, m.state_norm, m.param_norm);
  r.state.opt.lr = cfg.lr;
  train_ar_epochs(r, train_pairs, validation_set ? &val_pairs : nullptr, cfg, on_epoch);
}

/// x_{k+1} = f(x_k [, p]) iterated from the initial state.
inline dynamics::Trajectory rollout_ar(const ArModel& m, std::span<const double> initial_state,
                                       std::span<const double> params, std::size_t n_steps) {
  if (initial_state.size() != m.state_dim) throw ConfigError("rollout_ar: initial state has wrong dimension");
  if (params.size() != m.param_dim) {
    throw ConfigError("rollout_ar: model expects " + std::to_string(m.param_dim) + " system parameters");
  }
  const std::size_t S = m.state_dim;
  dynamics::Trajectory tr;
  tr.state_shape = m.state_shape;
  tr.times = dynamics::uniform_times(m.dt, n_steps);
  tr.states.resize((n_steps + 1) * S);
  std::copy(initial_state.begin(), initial_state.end(), tr.states.begin());
  const auto p = m.param_dim ? m.param_norm.normalize(params) : std::vector<double>{};
  auto x = m.state_norm.normalize(initial_state);
  std::vector<double> phys(S);
  for (std::size_t k = 1; k <= n_steps; ++k) {
    const auto in = koopman::detail::concat_rows(x, S, p, m.param_dim, 1);
    x = std::move(nn::forward_batch(m.network.spec, m.network.params, in, 1).values.back());
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
  }
  return tr;
}

class ArProvider final : public reliability::TrajectoryProvider {
 public:
  ArProvider(dynamics::SystemSetup setup, const ArModel& model) : setup_(std::move(setup)), model_(&model) {
    setup_.validate();
    require(model.state_dim == setup_.state_size(), "ar provider: model state size does not match the system");
    require(model.param_dim == setup_.param_dim(), "ar provider: model parameter count does not match the mode");
  }
  [[nodiscard]] std::string name() const override { return "ar_fnn"; }
  [[nodiscard]] dynamics::Trajectory trajectory(std::span<const double> inputs, std::size_t n_steps) const override {
    auto tr = rollout_ar(*model_, setup_.initial_state(inputs), setup_.model_params(inputs), n_steps);
    tr.provenance.system = dynamics::to_string(setup_.kind);
    tr.provenance.inputs.assign(inputs.begin(), inputs.end());
    return tr;
  }

 private:
  dynamics::SystemSetup setup_;
  const ArModel* model_;
};

}  // namespace kooprel::baseline
