#pragma once

#include <cmath>
#include <cstddef>
#include <cstdint>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kooprel/common.hpp"
#include "kooprel/dynamics/distribution.hpp"
#include "kooprel/dynamics/system.hpp"
#include "kooprel/koopman/rollout.hpp"
#include "kooprel/reliability/first_passage.hpp"
#include "kooprel/reliability/stats.hpp"

namespace kooprel::reliability {

/// Produces a trajectory for one draw of the stochastic inputs. Implementations
/// must be safe to call concurrently.
class TrajectoryProvider {
 public:
  virtual ~TrajectoryProvider() = default;
  [[nodiscard]] virtual std::string name() const = 0;
  [[nodiscard]] virtual dynamics::Trajectory trajectory(std::span<const double> inputs, std::size_t n_steps) const = 0;
};

/// Ground truth from the numerical solver.
class ExactProvider final : public TrajectoryProvider {
 public:
  explicit ExactProvider(dynamics::SystemSetup setup) : setup_(std::move(setup)) { setup_.validate(); }
  [[nodiscard]] std::string name() const override { return "exact_mcs"; }
  [[nodiscard]] dynamics::Trajectory trajectory(std::span<const double> inputs, std::size_t n_steps) const override {
    return dynamics::simulate(setup_, inputs, n_steps);
  }

 private:
  dynamics::SystemSetup setup_;
};

/// Rollout of a trained Koopman model from the initial state (and system
/// parameters) implied by the inputs.
class KoopmanProvider final : public TrajectoryProvider {
 public:
  KoopmanProvider(dynamics::SystemSetup setup, const koopman::KoopmanModel& model,
                  koopman::RolloutMode mode = koopman::RolloutMode::latent)
      : setup_(std::move(setup)), model_(&model), mode_(mode) {
    setup_.validate();
    require(model.state_dim == setup_.state_size(), "koopman provider: model state size does not match the system");
    require(model.param_dim == setup_.param_dim(), "koopman provider: model parameter count does not match the mode");
  }
  [[nodiscard]] std::string name() const override { return "koopman"; }
  [[nodiscard]] dynamics::Trajectory trajectory(std::span<const double> inputs, std::size_t n_steps) const override {
    auto tr = koopman::rollout(*model_, setup_.initial_state(inputs), setup_.model_params(inputs), n_steps, mode_);
    tr.provenance.system = dynamics::to_string(setup_.kind);
    tr.provenance.inputs.assign(inputs.begin(), inputs.end());
    return tr;
  }

 private:
  dynamics::SystemSetup setup_;
  const koopman::KoopmanModel* model_;
  koopman::RolloutMode mode_;
};

struct FirstPassageResult {
  std::string provider;
  std::size_t n_samples = 0;
  std::size_t censored = 0;
  std::size_t truncated = 0;  // surrogate rollouts that went non-finite
  double pf = 0.0;
  std::optional<double> beta;  // empty when P_f is 0 or 1
  std::string beta_message;
  std::optional<double> beta_reference;
  std::optional<double> epsilon_percent;
  std::vector<Passage> passages;
  std::vector<std::vector<double>> inputs;  // the draws, in sample order
  Histogram histogram;                      // empty if fewer than 2 failures
  double dt = 0.0;
  std::size_t horizon_steps = 0;

  /// Attaches a reference index (normally the exact-MCS beta) and the
  /// percentage error against it.
  void compare_to(double reference_beta) {
    beta_reference = reference_beta;
    if (beta && reference_beta != 0.0) epsilon_percent = beta_error_percent(*beta, reference_beta);
  }
};

struct ReliabilityConfig {
  std::size_t n_samples = 10000;
  std::uint64_t seed = 1;
  std::size_t threads = 1;
  std::size_t bins = 0;  // 0: one bin per time step of the horizon
};

/// Monte-Carlo first-passage analysis. Sample i uses inputs drawn from the
/// stream (seed, reliability, i), so two providers run with the same seed see
/// identical inputs. Aggregation is in sample order and independent of the
/// thread count.
inline FirstPassageResult run_reliability(const TrajectoryProvider& provider,
                                          const std::vector<dynamics::Distribution>& distributions,
                                          const LimitState& limit, const ReliabilityConfig& cfg) {
  require(cfg.n_samples >= 1, "run_reliability: N_s must be >= 1");
  for (const auto& d : distributions) d.validate();
  FirstPassageResult r;
  r.provider = provider.name();
  r.n_samples = cfg.n_samples;
  r.horizon_steps = limit.horizon_steps;
  r.passages.resize(cfg.n_samples);
  r.inputs.resize(cfg.n_samples);
  std::vector<char> truncated(cfg.n_samples, 0);
  std::vector<double> dts(cfg.n_samples, 0.0);
  parallel_for(cfg.n_samples, cfg.threads, [&](std::size_t i) {
    r.inputs[i] = dynamics::draw_inputs(distributions, cfg.seed, StreamTag::reliability, i);
    dynamics::Trajectory tr;
    try {
      tr = provider.trajectory(r.inputs[i], limit.horizon_steps);
    } catch (const Error& e) {
      throw NumericError(provider.name() + ": sample " + std::to_string(i) + ": " + e.what());
    }
    r.passages[i] = first_passage_time(tr, limit);
    truncated[i] = tr.truncated ? 1 : 0;
    if (tr.length() > 1) dts[i] = tr.times[1] - tr.times[0];
  });
  r.dt = dts.front();
  for (std::size_t i = 0; i < cfg.n_samples; ++i) {
    if (!r.passages[i].failed) ++r.censored;
    if (truncated[i]) ++r.truncated;
  }
  r.pf = failure_probability(r.passages);
  try {
    r.beta = reliability_index(r.pf);
  } catch (const UnboundedIndexError& e) {
    r.beta_message = e.what();
  }
  const auto times = failure_times(r.passages);
  if (times.size() >= 2) {
    const std::size_t bins = cfg.bins ? cfg.bins : limit.horizon_steps + 1;
    const double lo = -0.5 * r.dt;
    const double hi = (static_cast<double>(limit.horizon_steps) + 0.5) * r.dt;
    r.histogram = cfg.bins ? histogram(times, bins) : histogram(times, bins, lo, hi);
  }
  return r;
}

/// KS statistic between the uncensored failure times of two runs (1 when
/// exactly one of them has no failures, 0 when neither has any).
inline double fttf_ks(const FirstPassageResult& a, const FirstPassageResult& b) {
  const auto ta = failure_times(a.passages), tb = failure_times(b.passages);
  if (ta.empty() && tb.empty()) return 0.0;
  if (ta.empty() || tb.empty()) return 1.0;
  return ks_statistic(ta, tb);
}

}  // namespace kooprel::reliability
