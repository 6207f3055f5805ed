#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <limits>
#include <string>
#include <vector>

#include "kooprel/common.hpp"
#include "kooprel/dynamics/dataset.hpp"
#include "kooprel/koopman/loss.hpp"
#include "kooprel/koopman/model.hpp"
#include "kooprel/koopman/pairs.hpp"
#include "kooprel/nn/optimizer.hpp"

namespace kooprel::koopman {

struct TrainConfig {
  std::size_t epochs = 250;
  double lr = 1e-5;
  double lr_decay = 1.0;  // per-epoch factor: epoch k uses lr * lr_decay^(k-1)
  std::size_t batch_size = 64;
  nn::OptimizerKind optimizer = nn::OptimizerKind::adam;
  std::uint64_t seed = 1;
  LossWeights weights;
  bool keep_best = true;  // return the parameters with the lowest validation loss
  // Optional anchored multi-step term (rollout_loss_normalized), off when the
  // weight is 0. Horizon 0 means the full series length.
  double rollout_weight = 0.0;
  std::size_t rollout_horizon = 0;
  std::size_t rollout_batch = 16;

  [[nodiscard]] bool uses_rollout() const { return rollout_weight > 0.0; }
  [[nodiscard]] double lr_at(std::size_t epoch) const {
    return lr * std::pow(lr_decay, static_cast<double>(epoch - 1));
  }

  void validate() const {
    require(lr > 0.0, "training: lr must be > 0");
    require(lr_decay > 0.0 && lr_decay <= 1.0, "training: lr_decay must be in (0, 1]");
    require(batch_size >= 1, "training: batch_size must be >= 1");
    require(rollout_weight >= 0.0, "training: rollout_weight must be >= 0");
    require(rollout_batch >= 1, "training: rollout_batch must be >= 1");
    weights.validate();
  }
};

struct EpochRecord {
  std::size_t epoch = 0;  // 1-based, continues across resumed runs
  LossTerms train;
  LossTerms validation;
};

struct TrainReport {
  std::vector<EpochRecord> epochs;
  double initial_train_loss = 0.0;
  std::size_t best_epoch = 0;
  std::uint64_t seed = 0;

  [[nodiscard]] std::size_t epochs_run() const { return epochs.size(); }
  [[nodiscard]] double final_validation_loss() const {
    return epochs.empty() ? std::numeric_limits<double>::quiet_NaN() : epochs.back().validation.total;
  }
  [[nodiscard]] double final_train_loss() const {
    return epochs.empty() ? initial_train_loss : epochs.back().train.total;
  }
};

/// Raised when the loss stops being finite; carries the epochs completed so far.
class TrainingDiverged : public NumericError {
 public:
  TrainingDiverged(const std::string& what, TrainReport report) : NumericError(what), report_(std::move(report)) {}
  [[nodiscard]] const TrainReport& report() const { return report_; }

 private:
  TrainReport report_;
};

/// Everything needed to continue a run: the latest parameters (not the best
/// ones), optimizer moments, and the epoch counter.
struct TrainState {
  KoopmanModel current;
  nn::AdamState encoder_opt;
  nn::AdamState koopman_opt;
  nn::AdamState decoder_opt;
  std::size_t epochs_done = 0;
  double best_validation = std::numeric_limits<double>::infinity();
};

struct TrainResult {
  KoopmanModel model;  // best-validation parameters when keep_best
  TrainReport report;
  TrainState state;
};

/// Mean loss over a whole pair set, evaluated in chunks.
inline LossTerms evaluate_loss(const KoopmanModel& m, const PairSet& pairs, const LossWeights& w,
                               std::size_t chunk = 2048) {
  LossTerms acc;
  const std::size_t n = pairs.count();
  std::vector<std::size_t> idx;
  std::vector<double> xk, xk1, p;
  for (std::size_t lo = 0; lo < n; lo += chunk) {
    const std::size_t hi = std::min(n, lo + chunk);
    idx.resize(hi - lo);
    std::iota(idx.begin(), idx.end(), lo);
    pairs.gather(idx, xk, xk1, p);
    const auto t = composite_loss_normalized(m, xk, xk1, p, idx.size(), w, nullptr);
    const double f = static_cast<double>(idx.size()) / static_cast<double>(n);
    acc.total += f * t.total;
    acc.reconstruction += f * t.reconstruction;
    acc.linearity += f * t.linearity;
    acc.prediction += f * t.prediction;
  }
  return acc;
}

inline std::size_t rollout_horizon_for(const TrainConfig& cfg, const PairSet& pairs) {
  const std::size_t h = cfg.rollout_horizon ? cfg.rollout_horizon : pairs.n_steps;
  if (h > pairs.n_steps) {
    throw ConfigError("training: rollout_horizon " + std::to_string(h) + " exceeds the series length " +
                      std::to_string(pairs.n_steps));
  }
  return h;
}

/// Mean anchored multi-step loss over every series of a pair set.
inline double evaluate_rollout_loss(const KoopmanModel& m, const PairSet& pairs, std::size_t horizon,
                                    std::size_t chunk = 64) {
  double acc = 0.0;
  std::vector<std::size_t> idx;
  std::vector<double> x0, tg, p;
  for (std::size_t lo = 0; lo < pairs.n_series; lo += chunk) {
    const std::size_t hi = std::min(pairs.n_series, lo + chunk);
    idx.resize(hi - lo);
    std::iota(idx.begin(), idx.end(), lo);
    gather_series(pairs, idx, horizon, x0, tg, p);
    acc += static_cast<double>(idx.size()) * rollout_loss_normalized(m, x0, tg, p, idx.size(), horizon, 1.0, nullptr);
  }
  return acc / static_cast<double>(pairs.n_series);
}

inline LossTerms evaluate_terms(const KoopmanModel& m, const PairSet& pairs, const TrainConfig& cfg) {
  auto t = evaluate_loss(m, pairs, cfg.weights);
  if (cfg.uses_rollout()) {
    t.rollout = evaluate_rollout_loss(m, pairs, rollout_horizon_for(cfg, pairs));
    t.total += cfg.rollout_weight * t.rollout;
  }
  return t;
}

using EpochCallback = std::function<void(const EpochRecord&)>;

/// Runs cfg.epochs further epochs of mini-batch training on `result`.
inline void train_epochs(TrainResult& result, const PairSet& train, const PairSet* validation,
                         const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  auto& st = result.state;
  auto& model = st.current;
  ModelGrads grads = ModelGrads::zeros(model);
  std::vector<double> xk, xk1, p;
  const std::size_t n = train.count();
  const std::size_t n_batches = (n + cfg.batch_size - 1) / cfg.batch_size;
  const std::size_t horizon = cfg.uses_rollout() ? rollout_horizon_for(cfg, train) : 0;
  const std::size_t n_series_batches =
      cfg.uses_rollout() ? (train.n_series + cfg.rollout_batch - 1) / cfg.rollout_batch : 0;
  std::vector<double> x0, tg, sp;
  for (std::size_t e = 0; e < cfg.epochs; ++e) {
    const std::size_t epoch = st.epochs_done + 1;
    for (auto* opt : {&st.encoder_opt, &st.koopman_opt, &st.decoder_opt}) opt->lr = cfg.lr_at(epoch);
    const auto order = epoch_order(n, cfg.seed, epoch);
    std::vector<std::size_t> series_order;
    if (cfg.uses_rollout()) series_order = epoch_order(train.n_series, cfg.seed, epoch, StreamTag::series_shuffle);
    std::size_t series_done = 0;
    LossTerms acc;
    auto step = [&] {
      nn::adam_step(model.encoder.params, grads.encoder, st.encoder_opt);
      nn::adam_step(model.koopman.params, grads.koopman, st.koopman_opt);
      nn::adam_step(model.decoder.params, grads.decoder, st.decoder_opt);
    };
    for (std::size_t b = 0; b < n_batches; ++b) {
      const std::size_t lo = b * cfg.batch_size, hi = std::min(n, lo + cfg.batch_size);
      const std::span<const std::size_t> idx(order.data() + lo, hi - lo);
      train.gather(idx, xk, xk1, p);
      grads.set_zero();
      const auto t = composite_loss_normalized(model, xk, xk1, p, idx.size(), cfg.weights, &grads);
      if (!std::isfinite(t.total)) {
        throw TrainingDiverged("training diverged (non-finite loss) in epoch " + std::to_string(epoch), result.report);
      }
      step();
      const double f = static_cast<double>(idx.size()) / static_cast<double>(n);
      acc.total += f * t.total;
      acc.reconstruction += f * t.reconstruction;
      acc.linearity += f * t.linearity;
      acc.prediction += f * t.prediction;
      // Series batches are spread evenly between the pair batches.
      while (series_done < n_series_batches && series_done * n_batches < (b + 1) * n_series_batches) {
        const std::size_t slo = series_done * cfg.rollout_batch;
        const std::size_t shi = std::min(train.n_series, slo + cfg.rollout_batch);
        const std::span<const std::size_t> sidx(series_order.data() + slo, shi - slo);
        gather_series(train, sidx, horizon, x0, tg, sp);
        grads.set_zero();
        const double l4 = rollout_loss_normalized(model, x0, tg, sp, sidx.size(), horizon, cfg.rollout_weight, &grads);
        if (!std::isfinite(l4)) {
          throw TrainingDiverged("training diverged (non-finite rollout loss) in epoch " + std::to_string(epoch),
                                 result.report);
        }
        step();
        const double g = static_cast<double>(sidx.size()) / static_cast<double>(train.n_series);
        acc.rollout += g * l4;
        acc.total += g * cfg.rollout_weight * l4;
        ++series_done;
      }
    }
    EpochRecord rec{epoch, acc, validation ? evaluate_terms(model, *validation, cfg) : acc};
    if (!std::isfinite(rec.validation.total)) {
      throw TrainingDiverged("validation loss non-finite in epoch " + std::to_string(epoch), result.report);
    }
    st.epochs_done = epoch;
    result.report.epochs.push_back(rec);
    if (!cfg.keep_best || rec.validation.total < st.best_validation) {
      st.best_validation = rec.validation.total;
      result.report.best_epoch = epoch;
      result.model = model;
    }
    if (on_epoch) on_epoch(rec);
  }
}

/// Fresh training run: fits normalization on the training set, initializes
/// the networks from cfg.seed, and trains for cfg.epochs epochs.
inline TrainResult train(const dynamics::Dataset& train_set, const dynamics::Dataset* validation_set,
                         const Architecture& arch, const TrainConfig& cfg, const EpochCallback& on_epoch = {}) {
  cfg.validate();
  require(!train_set.series.empty(), "training: empty training set");
  const Variant variant = train_set.param_dim ? Variant::parameter_uncertainty : Variant::ic_uncertainty;
  auto state_norm = fit_state_norm(train_set);
  auto param_norm = fit_param_norm(train_set);
  TrainResult r;
  r.state.current = make_model(variant, train_set.state_shape, train_set.param_dim, arch, train_set.dt, state_norm,
                               param_norm, cfg.seed);
  r.state.current.weights = cfg.weights;
  r.state.encoder_opt = nn::AdamState::for_params(r.state.current.encoder.spec, cfg.lr, cfg.optimizer);
  r.state.koopman_opt = nn::AdamState::for_params(r.state.current.koopman.spec, cfg.lr, cfg.optimizer);
  r.state.decoder_opt = nn::AdamState::for_params(r.state.current.decoder.spec, cfg.lr, cfg.optimizer);
  r.model = r.state.current;
  r.report.seed = cfg.seed;

  const auto train_pairs = make_pairs(train_set, r.model.state_norm, r.model.param_norm);
  PairSet val_pairs;
  if (validation_set) val_pairs = make_pairs(*validation_set, r.model.state_norm, r.model.param_norm);
  r.report.initial_train_loss = evaluate_terms(r.model, train_pairs, cfg).total;
  train_epochs(r, train_pairs, validation_set ? &val_pairs : nullptr, cfg, on_epoch);
  return r;
}

/// Continues a previous run for cfg.epochs more epochs; epoch numbering and
/// the shuffle stream pick up where they stopped.
inline void resume_training(TrainResult& r, const dynamics::Dataset& train_set,
                            const dynamics::Dataset* validation_set, const TrainConfig& cfg,
                            const EpochCallback& on_epoch = {}) {
  const auto train_pairs = make_pairs(train_set, r.state.current.state_norm, r.state.current.param_norm);
  PairSet val_pairs;
  if (validation_set) val_pairs = make_pairs(*validation_set, r.state.current.state_norm, r.state.current.param_norm);
  for (auto* opt : {&r.state.encoder_opt, &r.state.koopman_opt, &r.state.decoder_opt}) opt->lr = cfg.lr;
  train_epochs(r, train_pairs, validation_set ? &val_pairs : nullptr, cfg, on_epoch);
}

}  // namespace kooprel::koopman
