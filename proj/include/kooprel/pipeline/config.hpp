#pragma once

#include <cstdint>
#include <filesystem>
#include <optional>
#include <set>
#include <string>
#include <vector>

#include <json.hpp>

#include "kooprel/common.hpp"
#include "kooprel/dynamics/system.hpp"
#include "kooprel/koopman/model.hpp"
#include "kooprel/koopman/rollout.hpp"
#include "kooprel/koopman/train.hpp"
#include "kooprel/reliability/first_passage.hpp"
#include "kooprel/store/dataset_io.hpp"
#include "kooprel/store/files.hpp"

namespace kooprel::pipeline {

using Json = nlohmann::ordered_json;
namespace fs = std::filesystem;

struct TestSet {
  std::string name;
  std::vector<dynamics::Distribution> distributions;
};

struct ExperimentConfig {
  std::string name = "experiment";
  dynamics::SystemSetup setup;
  std::size_t n_steps = 100;

  std::size_t n_train = 1800;
  std::size_t n_validation = 200;
  std::vector<dynamics::Distribution> distributions;
  std::uint64_t data_seed = 1;
  std::uint64_t validation_seed = 2;

  koopman::Architecture architecture;
  koopman::TrainConfig training;
  std::vector<std::size_t> baseline_hidden = {64, 64};

  reliability::LimitState limit;
  std::size_t n_samples = 10000;
  std::optional<std::uint64_t> reliability_seed;
  std::size_t bins = 0;
  koopman::RolloutMode rollout_mode = koopman::RolloutMode::latent;
  std::vector<TestSet> test_sets;  // first entry is the training distribution

  std::string output_dir;  // empty: derived from the output root and name

  void validate() const;
  [[nodiscard]] const TestSet& test_set(const std::string& name) const;
};

namespace detail {

inline void check_keys(const Json& j, std::initializer_list<const char*> allowed, const std::string& where) {
  if (!j.is_object()) throw ConfigError(where + ": expected an object");
  std::set<std::string> ok(allowed.begin(), allowed.end());
  for (const auto& [k, v] : j.items()) {
    if (!ok.count(k)) throw ConfigError(where + ": unknown field '" + k + "'");
  }
}

template <class T>
void read(const Json& j, const char* key, T& out, const std::string& where) {
  if (!j.contains(key)) return;
  try {
    out = j.at(key).get<T>();
  } catch (const Json::exception& e) {
    throw ConfigError(where + "." + key + ": " + e.what());
  }
}

inline std::vector<dynamics::Distribution> read_distributions(const Json& j, const std::string& where) {
  if (!j.is_array()) throw ConfigError(where + ": expected an array of distributions");
  std::vector<dynamics::Distribution> out;
  for (std::size_t i = 0; i < j.size(); ++i) {
    const auto w = where + "[" + std::to_string(i) + "]";
    check_keys(j[i], {"kind", "a", "b", "value"}, w);
    try {
      out.push_back(store::distribution_from_json(j[i]));
    } catch (const Json::exception& e) {
      throw ConfigError(w + ": " + e.what());
    } catch (const ConfigError& e) {
      throw ConfigError(w + ": " + e.what());
    }
  }
  return out;
}

inline Json distributions_json(const std::vector<dynamics::Distribution>& ds) {
  Json a = Json::array();
  for (const auto& d : ds) a.push_back(store::to_json(d));
  return a;
}

}  // namespace detail

/// Reads the channel list of a limit state: plain indices, or Burgers probes
/// {"field": "u"|"v", "ix": i, "iy": j} (iy defaults to mid-grid).
inline std::vector<std::size_t> read_channels(const Json& j, const dynamics::SystemSetup& setup,
                                              const std::string& where) {
  std::vector<std::size_t> out;
  if (!j.is_array()) throw ConfigError(where + ": expected an array");
  for (const auto& c : j) {
    if (c.is_number_unsigned()) {
      out.push_back(c.get<std::size_t>());
      continue;
    }
    detail::check_keys(c, {"field", "ix", "iy"}, where);
    if (setup.kind != dynamics::SystemKind::burgers) throw ConfigError(where + ": probes apply to burgers only");
    const auto field = c.at("field").get<std::string>();
    if (field != "u" && field != "v") throw ConfigError(where + ": probe field must be 'u' or 'v'");
    const std::size_t n = setup.burgers.grid_n;
    const std::size_t ix = c.at("ix").get<std::size_t>();
    const std::size_t iy = c.contains("iy") ? c.at("iy").get<std::size_t>() : n / 2;
    out.push_back(reliability::burgers_probe(field == "u" ? 0 : 1, ix, iy, n));
  }
  return out;
}

inline ExperimentConfig config_from_json(const Json& j) {
  detail::check_keys(j,
                     {"name", "system", "mode", "constants", "fixed_ic", "integration", "data", "architecture",
                      "training", "baseline", "limit_state", "reliability", "output_dir"},
                     "config");
  ExperimentConfig c;
  try {
    detail::read(j, "name", c.name, "config");
    auto& s = c.setup;
    s.kind = dynamics::system_from_string(j.at("system").get<std::string>());
    if (j.contains("mode")) s.mode = dynamics::mode_from_string(j.at("mode").get<std::string>());
    s.dt = s.kind == dynamics::SystemKind::duffing ? 0.1 : 0.01;
    if (s.mode == dynamics::Mode::parameter_uncertainty) {
      s.fixed_ic = s.kind == dynamics::SystemKind::lorenz ? std::vector<double>{10, 10, 0} : std::vector<double>{1, 0};
    }
    detail::read(j, "fixed_ic", s.fixed_ic, "config");

    if (j.contains("constants")) {
      const auto& k = j.at("constants");
      detail::check_keys(k, {"duffing", "lorenz", "burgers"}, "constants");
      if (k.contains("duffing")) {
        const auto& d = k.at("duffing");
        detail::check_keys(d, {"delta", "alpha", "beta", "gamma", "omega"}, "constants.duffing");
        detail::read(d, "delta", s.duffing.delta, "constants.duffing");
        detail::read(d, "alpha", s.duffing.alpha, "constants.duffing");
        detail::read(d, "beta", s.duffing.beta, "constants.duffing");
        detail::read(d, "gamma", s.duffing.gamma, "constants.duffing");
        detail::read(d, "omega", s.duffing.omega, "constants.duffing");
      }
      if (k.contains("lorenz")) {
        const auto& l = k.at("lorenz");
        detail::check_keys(l, {"sigma", "rho", "beta"}, "constants.lorenz");
        detail::read(l, "sigma", s.lorenz.sigma, "constants.lorenz");
        detail::read(l, "rho", s.lorenz.rho, "constants.lorenz");
        detail::read(l, "beta", s.lorenz.beta, "constants.lorenz");
      }
      if (k.contains("burgers")) {
        const auto& b = k.at("burgers");
        detail::check_keys(b, {"nu", "grid_n", "substeps", "convection"}, "constants.burgers");
        detail::read(b, "nu", s.burgers.nu, "constants.burgers");
        detail::read(b, "grid_n", s.burgers.grid_n, "constants.burgers");
        detail::read(b, "substeps", s.burgers.substeps, "constants.burgers");
        detail::read(b, "convection", s.burgers.convection, "constants.burgers");
      }
    }
    if (j.contains("integration")) {
      const auto& in = j.at("integration");
      detail::check_keys(in, {"dt", "n_steps"}, "integration");
      detail::read(in, "dt", s.dt, "integration");
      detail::read(in, "n_steps", c.n_steps, "integration");
    }

    const auto& data = j.at("data");
    detail::check_keys(data, {"n_train", "n_validation", "distributions", "seed", "validation_seed"}, "data");
    detail::read(data, "n_train", c.n_train, "data");
    detail::read(data, "n_validation", c.n_validation, "data");
    detail::read(data, "seed", c.data_seed, "data");
    c.validation_seed = c.data_seed + 1;
    detail::read(data, "validation_seed", c.validation_seed, "data");
    c.distributions = detail::read_distributions(data.at("distributions"), "data.distributions");

    if (j.contains("architecture")) {
      const auto& a = j.at("architecture");
      detail::check_keys(a, {"latent_dim", "hidden", "conv", "conv_channels", "dense_hidden"}, "architecture");
      detail::read(a, "latent_dim", c.architecture.latent_dim, "architecture");
      detail::read(a, "hidden", c.architecture.hidden, "architecture");
      detail::read(a, "conv", c.architecture.conv, "architecture");
      detail::read(a, "conv_channels", c.architecture.conv_channels, "architecture");
      detail::read(a, "dense_hidden", c.architecture.dense_hidden, "architecture");
    }
    if (j.contains("training")) {
      const auto& t = j.at("training");
      detail::check_keys(t, {"epochs", "lr", "lr_decay", "batch_size", "optimizer", "seed", "keep_best", "loss_weights", "rollout_loss"},
                         "training");
      detail::read(t, "epochs", c.training.epochs, "training");
      detail::read(t, "lr", c.training.lr, "training");
      detail::read(t, "lr_decay", c.training.lr_decay, "training");
      detail::read(t, "batch_size", c.training.batch_size, "training");
      detail::read(t, "seed", c.training.seed, "training");
      detail::read(t, "keep_best", c.training.keep_best, "training");
      if (t.contains("optimizer")) c.training.optimizer = nn::optimizer_from_string(t.at("optimizer").get<std::string>());
      if (t.contains("loss_weights")) {
        const auto& w = t.at("loss_weights");
        detail::check_keys(w, {"lambda1", "lambda2", "lambda3"}, "training.loss_weights");
        detail::read(w, "lambda1", c.training.weights.lambda1, "training.loss_weights");
        detail::read(w, "lambda2", c.training.weights.lambda2, "training.loss_weights");
        detail::read(w, "lambda3", c.training.weights.lambda3, "training.loss_weights");
      }
      if (t.contains("rollout_loss")) {
        const auto& r = t.at("rollout_loss");
        detail::check_keys(r, {"weight", "horizon", "batch"}, "training.rollout_loss");
        detail::read(r, "weight", c.training.rollout_weight, "training.rollout_loss");
        detail::read(r, "horizon", c.training.rollout_horizon, "training.rollout_loss");
        detail::read(r, "batch", c.training.rollout_batch, "training.rollout_loss");
      }
    }
    if (j.contains("baseline")) {
      detail::check_keys(j.at("baseline"), {"hidden"}, "baseline");
      detail::read(j.at("baseline"), "hidden", c.baseline_hidden, "baseline");
    }

    const auto& ls = j.at("limit_state");
    detail::check_keys(ls, {"channels", "thresholds", "time_varying", "horizon_steps", "direction"},
                       "limit_state");
    c.limit.channels = read_channels(ls.at("channels"), s, "limit_state.channels");
    detail::read(ls, "thresholds", c.limit.thresholds, "limit_state");
    detail::read(ls, "time_varying", c.limit.time_varying, "limit_state");
    detail::read(ls, "horizon_steps", c.limit.horizon_steps, "limit_state");
    if (ls.contains("direction")) {
      c.limit.direction = reliability::crossing_from_string(ls.at("direction").get<std::string>());
    }

    c.test_sets.push_back({"in_distribution", c.distributions});
    if (j.contains("reliability")) {
      const auto& r = j.at("reliability");
      detail::check_keys(r, {"n_samples", "seed", "bins", "rollout_mode", "test_sets"}, "reliability");
      detail::read(r, "n_samples", c.n_samples, "reliability");
      detail::read(r, "bins", c.bins, "reliability");
      if (r.contains("seed") && !r.at("seed").is_null()) c.reliability_seed = r.at("seed").get<std::uint64_t>();
      if (r.contains("rollout_mode")) {
        const auto m = r.at("rollout_mode").get<std::string>();
        if (m == "latent") c.rollout_mode = koopman::RolloutMode::latent;
        else if (m == "re_encode") c.rollout_mode = koopman::RolloutMode::re_encode;
        else throw ConfigError("reliability.rollout_mode: expected 'latent' or 're_encode'");
      }
      if (r.contains("test_sets")) {
        for (const auto& ts : r.at("test_sets")) {
          detail::check_keys(ts, {"name", "distributions"}, "reliability.test_sets");
          TestSet t;
          t.name = ts.at("name").get<std::string>();
          t.distributions = detail::read_distributions(ts.at("distributions"), "reliability.test_sets." + t.name);
          c.test_sets.push_back(std::move(t));
        }
      }
    }
    detail::read(j, "output_dir", c.output_dir, "config");
  } catch (const Json::exception& e) {
    throw ConfigError(std::string("config: ") + e.what());
  }
  c.validate();
  return c;
}

inline void ExperimentConfig::validate() const {
  setup.validate();
  require(!name.empty() && name.find('/') == std::string::npos, "config.name must be a non-empty plain name");
  require(n_steps >= 1, "integration.n_steps must be >= 1");
  require(n_train >= 1, "data.n_train must be >= 1");
  if (distributions.size() != setup.input_dim()) {
    throw ConfigError(std::string("data.distributions: ") + dynamics::to_string(setup.kind) + "/" +
                      dynamics::to_string(setup.mode) + " needs " + std::to_string(setup.input_dim()) +
                      " distributions, got " + std::to_string(distributions.size()));
  }
  if (setup.kind == dynamics::SystemKind::burgers) {
    require(architecture.conv, "architecture.conv must be true for burgers");
  }
  training.validate();
  limit.validate(setup.state_size());
  require(n_samples >= 1, "reliability.n_samples must be >= 1");
  std::set<std::string> names;
  for (const auto& t : test_sets) {
    require(names.insert(t.name).second, "reliability.test_sets: duplicate name '" + t.name + "'");
    require(t.distributions.size() == setup.input_dim(),
            "reliability.test_sets." + t.name + ": wrong number of distributions");
  }
}

inline const TestSet& ExperimentConfig::test_set(const std::string& n) const {
  for (const auto& t : test_sets)
    if (t.name == n) return t;
  std::string known;
  for (const auto& t : test_sets) known += (known.empty() ? "" : ", ") + t.name;
  throw ConfigError("unknown test set '" + n + "' (known: " + known + ")");
}

inline ExperimentConfig load_config(const fs::path& path) {
  Json j;
  try {
    j = Json::parse(store::read_file(path));
  } catch (const Json::exception& e) {
    throw ConfigError("config '" + path.string() + "': " + e.what());
  }
  return config_from_json(j);
}

/// Canonical, fully-resolved echo of a config (defaults filled in).
inline Json to_json(const ExperimentConfig& c) {
  const auto& s = c.setup;
  Json j;
  j["name"] = c.name;
  j["system"] = dynamics::to_string(s.kind);
  j["mode"] = dynamics::to_string(s.mode);
  Json k;
  if (s.kind == dynamics::SystemKind::duffing) {
    k["duffing"] = {{"delta", s.duffing.delta}, {"alpha", s.duffing.alpha}, {"beta", s.duffing.beta},
                    {"gamma", s.duffing.gamma}, {"omega", s.duffing.omega}};
  } else if (s.kind == dynamics::SystemKind::lorenz) {
    k["lorenz"] = {{"sigma", s.lorenz.sigma}, {"rho", s.lorenz.rho}, {"beta", s.lorenz.beta}};
  } else {
    k["burgers"] = {{"nu", s.burgers.nu},
                    {"grid_n", s.burgers.grid_n},
                    {"substeps", s.burgers.substeps},
                    {"convection", s.burgers.convection}};
  }
  j["constants"] = k;
  if (!s.fixed_ic.empty()) j["fixed_ic"] = s.fixed_ic;
  j["integration"] = {{"dt", s.dt}, {"n_steps", c.n_steps}};
  j["data"] = {{"n_train", c.n_train},
               {"n_validation", c.n_validation},
               {"distributions", detail::distributions_json(c.distributions)},
               {"seed", c.data_seed},
               {"validation_seed", c.validation_seed}};
  j["architecture"] = {{"latent_dim", c.architecture.latent_dim},
                       {"hidden", c.architecture.hidden},
                       {"conv", c.architecture.conv},
                       {"conv_channels", c.architecture.conv_channels},
                       {"dense_hidden", c.architecture.dense_hidden}};
  j["training"] = {{"epochs", c.training.epochs},
                   {"lr", c.training.lr},
                   {"lr_decay", c.training.lr_decay},
                   {"batch_size", c.training.batch_size},
                   {"optimizer", nn::to_string(c.training.optimizer)},
                   {"seed", c.training.seed},
                   {"keep_best", c.training.keep_best},
                   {"loss_weights",
                    {{"lambda1", c.training.weights.lambda1},
                     {"lambda2", c.training.weights.lambda2},
                     {"lambda3", c.training.weights.lambda3}}},
                   {"rollout_loss",
                    {{"weight", c.training.rollout_weight},
                     {"horizon", c.training.rollout_horizon},
                     {"batch", c.training.rollout_batch}}}};
  j["baseline"] = {{"hidden", c.baseline_hidden}};
  Json ls;
  ls["channels"] = c.limit.channels;
  ls["thresholds"] = c.limit.thresholds;
  if (!c.limit.time_varying.empty()) ls["time_varying"] = c.limit.time_varying;
  ls["horizon_steps"] = c.limit.horizon_steps;
  ls["direction"] = reliability::to_string(c.limit.direction);
  j["limit_state"] = ls;
  Json r;
  r["n_samples"] = c.n_samples;
  r["seed"] = c.reliability_seed ? Json(*c.reliability_seed) : Json(nullptr);
  r["bins"] = c.bins;
  r["rollout_mode"] = c.rollout_mode == koopman::RolloutMode::latent ? "latent" : "re_encode";
  Json ts = Json::array();
  for (std::size_t i = 1; i < c.test_sets.size(); ++i) {
    ts.push_back({{"name", c.test_sets[i].name}, {"distributions", detail::distributions_json(c.test_sets[i].distributions)}});
  }
  r["test_sets"] = ts;
  j["reliability"] = r;
  return j;
}

}  // namespace kooprel::pipeline
