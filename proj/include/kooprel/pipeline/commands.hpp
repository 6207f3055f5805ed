#pragma once

#include <chrono>
#include <cstdlib>
#include <filesystem>
#include <functional>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kooprel/baseline/ar_model.hpp"
#include "kooprel/dynamics/dataset.hpp"
#include "kooprel/koopman/rollout.hpp"
#include "kooprel/koopman/train.hpp"
#include "kooprel/pipeline/config.hpp"
#include "kooprel/reliability/monte_carlo.hpp"
#include "kooprel/store/dataset_io.hpp"
#include "kooprel/store/manifest.hpp"
#include "kooprel/store/model_io.hpp"
#include "kooprel/store/results_io.hpp"

namespace kooprel::pipeline {

inline constexpr const char* kOutputRootEnv = "KOOPREL_OUTPUT_ROOT";

/// Run directory layout:
///   data/{train,validation}.{json,bin}
///   model/koopman.json, model/koopman_train.csv, model/ar_fnn.json, ...
///   reliability/<test set>/results.json plus CSVs
///   manifest_<command>.json next to the outputs of each command
struct RunPaths {
  fs::path root;
  [[nodiscard]] fs::path data_dir() const { return root / "data"; }
  [[nodiscard]] fs::path train_data() const { return data_dir() / "train.json"; }
  [[nodiscard]] fs::path validation_data() const { return data_dir() / "validation.json"; }
  [[nodiscard]] fs::path model_dir() const { return root / "model"; }
  [[nodiscard]] fs::path checkpoint(const std::string& kind) const { return model_dir() / (kind + ".json"); }
  [[nodiscard]] fs::path reliability_dir(const std::string& test_set) const {
    return root / "reliability" / test_set;
  }
};

/// --out if given, else the config's output_dir, else $KOOPREL_OUTPUT_ROOT/<name>
/// (default root "runs").
inline RunPaths resolve_paths(const ExperimentConfig& cfg, const std::string& out_flag = {}) {
  if (!out_flag.empty()) return {fs::path(out_flag)};
  if (!cfg.output_dir.empty()) return {fs::path(cfg.output_dir)};
  const char* env = std::getenv(kOutputRootEnv);
  const fs::path root = env && *env ? fs::path(env) : fs::path("runs");
  return {root / cfg.name};
}

using Log = std::function<void(const std::string&)>;

inline double seconds_since(std::chrono::steady_clock::time_point t0) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
}

// ---------------------------------------------------------------- generate

struct GenerateResult {
  dynamics::Dataset train;
  dynamics::Dataset validation;
};

inline GenerateResult cmd_generate(const ExperimentConfig& cfg, const RunPaths& paths, std::size_t threads,
                                   const Log& log = {}) {
  store::RunManifest manifest("generate", to_json(cfg));
  manifest.add_seed("data", cfg.data_seed);
  manifest.add_seed("validation", cfg.validation_seed);
  const auto t0 = std::chrono::steady_clock::now();
  GenerateResult r;
  r.train = dynamics::generate_dataset(cfg.setup, cfg.distributions, cfg.n_train, cfg.n_steps, cfg.data_seed, threads);
  if (cfg.n_validation) {
    r.validation = dynamics::generate_dataset(cfg.setup, cfg.distributions, cfg.n_validation, cfg.n_steps,
                                              cfg.validation_seed, threads);
  }
  manifest.add_timing("generate_seconds", seconds_since(t0));
  store::save_dataset(r.train, paths.train_data());
  manifest.add_output(paths.train_data());
  manifest.add_output(fs::path(paths.train_data()).replace_extension(".bin"));
  if (cfg.n_validation) {
    store::save_dataset(r.validation, paths.validation_data());
    manifest.add_output(paths.validation_data());
    manifest.add_output(fs::path(paths.validation_data()).replace_extension(".bin"));
  }
  manifest.write(paths.data_dir() / "manifest_generate.json");
  if (log) {
    log("generated " + std::to_string(cfg.n_train) + " training and " + std::to_string(cfg.n_validation) +
        " validation series in " + paths.data_dir().string());
  }
  return r;
}

// ---------------------------------------------------------------- train

enum class ModelKind { koopman, ar_fnn };

inline const char* to_string(ModelKind k) { return k == ModelKind::koopman ? "koopman" : "ar_fnn"; }
inline ModelKind model_kind_from_string(const std::string& s) {
  if (s == "koopman") return ModelKind::koopman;
  if (s == "ar_fnn") return ModelKind::ar_fnn;
  throw ConfigError("unknown model kind '" + s + "' (expected koopman or ar_fnn)");
}

struct TrainOptions {
  ModelKind kind = ModelKind::koopman;
  bool resume = false;
  std::optional<std::size_t> epochs;  // overrides training.epochs
};

inline koopman::TrainReport cmd_train(const ExperimentConfig& cfg, const RunPaths& paths, const TrainOptions& opt,
                                      const Log& log = {}) {
  auto tcfg = cfg.training;
  if (opt.epochs) tcfg.epochs = *opt.epochs;
  store::RunManifest manifest(std::string("train ") + to_string(opt.kind), to_json(cfg));
  manifest.add_seed("training", tcfg.seed);
  const auto train_set = store::load_dataset(paths.train_data());
  manifest.add_input(paths.train_data());
  std::optional<dynamics::Dataset> val_set;
  if (fs::exists(paths.validation_data())) {
    val_set = store::load_dataset(paths.validation_data());
    manifest.add_input(paths.validation_data());
  }
  const auto* val = val_set ? &*val_set : nullptr;
  const auto ckpt_path = paths.checkpoint(to_string(opt.kind));
  const auto csv_path = paths.model_dir() / (std::string(to_string(opt.kind)) + "_train.csv");
  auto on_epoch = [&](const koopman::EpochRecord& e) {
    if (log) {
      std::ostringstream s;
      s << "epoch " << e.epoch << "  train " << e.train.total << "  validation " << e.validation.total;
      log(s.str());
    }
  };
  const auto t0 = std::chrono::steady_clock::now();
  koopman::TrainReport report;
  if (opt.kind == ModelKind::koopman) {
    store::KoopmanCheckpoint ck;
    if (opt.resume) {
      ck = store::load_checkpoint(ckpt_path);
      manifest.add_input(ckpt_path);
      ck.config.epochs = tcfg.epochs;
      ck.config.lr = tcfg.lr;
      ck.config.lr_decay = tcfg.lr_decay;
      koopman::resume_training(ck.result, train_set, val, ck.config, on_epoch);
    } else {
      ck.config = tcfg;
      ck.result = koopman::train(train_set, val, cfg.architecture, tcfg, on_epoch);
    }
    store::save_checkpoint(ck, ckpt_path);
    report = ck.result.report;
  } else {
    store::ArCheckpoint ck;
    if (opt.resume) {
      ck = store::load_ar_checkpoint(ckpt_path);
      manifest.add_input(ckpt_path);
      ck.config.epochs = tcfg.epochs;
      ck.config.lr = tcfg.lr;
      ck.config.lr_decay = tcfg.lr_decay;
      baseline::resume_ar_training(ck.result, train_set, val, ck.config, on_epoch);
    } else {
      ck.config = tcfg;
      ck.hidden = cfg.baseline_hidden;
      ck.result = baseline::train_ar(train_set, val, cfg.baseline_hidden, tcfg, on_epoch);
    }
    store::save_ar_checkpoint(ck, ckpt_path);
    report = ck.result.report;
  }
  manifest.add_timing("train_seconds", seconds_since(t0));
  store::write_file_atomic(csv_path, store::train_report_csv(report));
  manifest.add_output(ckpt_path);
  manifest.add_output(csv_path);
  manifest.write(paths.model_dir() / (std::string("manifest_train_") + to_string(opt.kind) + ".json"));
  return report;
}

// ---------------------------------------------------------------- rollout

struct RolloutOptions {
  ModelKind kind = ModelKind::koopman;
  std::vector<double> inputs;  // empty: mean response over the validation set
  std::optional<std::size_t> n_steps;
};

namespace detail {

inline void append_row(std::ostringstream& out, std::size_t k, double t, std::span<const double> a,
                       std::span<const double> b) {
  out << k << ',' << store::fmt_double(t);
  for (double v : a) out << ',' << store::fmt_double(v);
  for (double v : b) out << ',' << store::fmt_double(v);
  out << '\n';
}

inline std::string rollout_header(std::size_t dim, const std::string& a, const std::string& b) {
  std::ostringstream out;
  out << "step,time";
  for (std::size_t i = 0; i < dim; ++i) out << ',' << a << '_' << i;
  for (std::size_t i = 0; i < dim; ++i) out << ',' << b << '_' << i;
  out << '\n';
  return out.str();
}

}  // namespace detail

/// Writes `rollout_<kind>.csv`: exact vs surrogate state per step, either for
/// one input vector or averaged over the validation series. Returns the path.
inline fs::path cmd_rollout(const ExperimentConfig& cfg, const RunPaths& paths, const RolloutOptions& opt) {
  store::RunManifest manifest(std::string("rollout ") + to_string(opt.kind), to_json(cfg));
  const auto ckpt_path = paths.checkpoint(to_string(opt.kind));
  std::unique_ptr<reliability::TrajectoryProvider> surrogate;
  koopman::KoopmanModel km;
  baseline::ArModel am;
  if (opt.kind == ModelKind::koopman) {
    km = store::load_model(ckpt_path);
    surrogate = std::make_unique<reliability::KoopmanProvider>(cfg.setup, km, cfg.rollout_mode);
  } else {
    am = store::load_ar_checkpoint(ckpt_path).result.model;
    surrogate = std::make_unique<baseline::ArProvider>(cfg.setup, am);
  }
  manifest.add_input(ckpt_path);
  const reliability::ExactProvider exact(cfg.setup);
  const std::size_t n_steps = opt.n_steps.value_or(cfg.n_steps);
  const std::size_t S = cfg.setup.state_size();
  std::ostringstream out;
  out << detail::rollout_header(S, "exact", std::string(to_string(opt.kind)));
  const auto times = dynamics::uniform_times(cfg.setup.dt, n_steps);
  if (!opt.inputs.empty()) {
    const auto a = exact.trajectory(opt.inputs, n_steps);
    const auto b = surrogate->trajectory(opt.inputs, n_steps);
    for (std::size_t k = 0; k <= n_steps; ++k) detail::append_row(out, k, times[k], a.row(k), b.row(k));
  } else {
    const auto val = store::load_dataset(paths.validation_data());
    manifest.add_input(paths.validation_data());
    require(!val.series.empty(), "rollout: validation set is empty");
    std::vector<double> ma((n_steps + 1) * S, 0.0), mb((n_steps + 1) * S, 0.0);
    const double w = 1.0 / static_cast<double>(val.series.size());
    for (const auto& tr : val.series) {
      const auto a = exact.trajectory(tr.provenance.inputs, n_steps);
      const auto b = surrogate->trajectory(tr.provenance.inputs, n_steps);
      for (std::size_t i = 0; i < ma.size(); ++i) {
        ma[i] += w * a.states[i];
        mb[i] += w * b.states[i];
      }
    }
    for (std::size_t k = 0; k <= n_steps; ++k) {
      detail::append_row(out, k, times[k], std::span<const double>(ma).subspan(k * S, S),
                         std::span<const double>(mb).subspan(k * S, S));
    }
  }
  const auto path = paths.root / "rollout" / (std::string("rollout_") + to_string(opt.kind) + ".csv");
  store::write_file_atomic(path, out.str());
  manifest.add_output(path);
  manifest.write(path.parent_path() / (std::string("manifest_rollout_") + to_string(opt.kind) + ".json"));
  return path;
}

// ---------------------------------------------------------------- reliability

struct ReliabilityOptions {
  std::uint64_t seed = 0;
  std::size_t threads = 1;
  std::string test_set = "in_distribution";
  bool exact = true;
  bool koopman = false;
  bool ar = false;
  std::optional<std::size_t> n_samples;
};

struct ReliabilityRun {
  std::vector<reliability::FirstPassageResult> runs;  // exact first when present
  std::vector<std::optional<double>> ks;              // vs exact, per run
  fs::path results_path;
};

/// Paired analysis: every provider sees the same sampled inputs (same seed),
/// surrogate rows carry ε and the KS distance to the exact FTTF sample.
inline ReliabilityRun cmd_reliability(const ExperimentConfig& cfg, const RunPaths& paths,
                                      const ReliabilityOptions& opt, const Log& log = {}) {
  require(opt.exact || opt.koopman || opt.ar, "reliability: no provider selected");
  const auto& ts = cfg.test_set(opt.test_set);
  const fs::path dir = paths.reliability_dir(ts.name);
  const auto cfg_json = to_json(cfg);
  store::RunManifest manifest("reliability", cfg_json);
  manifest.add_seed("reliability", opt.seed);

  reliability::ReliabilityConfig rc;
  rc.n_samples = opt.n_samples.value_or(cfg.n_samples);
  rc.seed = opt.seed;
  rc.threads = opt.threads;
  rc.bins = cfg.bins;

  std::vector<std::unique_ptr<reliability::TrajectoryProvider>> providers;
  koopman::KoopmanModel km;
  baseline::ArModel am;
  if (opt.exact) providers.push_back(std::make_unique<reliability::ExactProvider>(cfg.setup));
  if (opt.koopman) {
    km = store::load_model(paths.checkpoint("koopman"));
    manifest.add_input(paths.checkpoint("koopman"));
    providers.push_back(std::make_unique<reliability::KoopmanProvider>(cfg.setup, km, cfg.rollout_mode));
  }
  if (opt.ar) {
    am = store::load_ar_checkpoint(paths.checkpoint("ar_fnn")).result.model;
    manifest.add_input(paths.checkpoint("ar_fnn"));
    providers.push_back(std::make_unique<baseline::ArProvider>(cfg.setup, am));
  }

  ReliabilityRun out;
  for (const auto& p : providers) {
    const auto t0 = std::chrono::steady_clock::now();
    out.runs.push_back(reliability::run_reliability(*p, ts.distributions, cfg.limit, rc));
    manifest.add_timing(p->name() + "_seconds", seconds_since(t0));
    if (log) log(p->name() + ": P_f = " + store::fmt_double(out.runs.back().pf));
  }
  out.ks.assign(out.runs.size(), std::nullopt);
  if (opt.exact) {
    const auto& ref = out.runs.front();
    for (std::size_t i = 1; i < out.runs.size(); ++i) {
      if (ref.beta) out.runs[i].compare_to(*ref.beta);
      out.ks[i] = reliability::fttf_ks(out.runs[i], ref);
    }
  }

  Json j;
  j["format"] = store::kResultsFormat;
  j["version"] = 1;
  j["experiment"] = cfg.name;
  j["test_set"] = ts.name;
  j["manifest"] = "manifest_reliability.json";
  j["seed"] = opt.seed;
  j["n_samples"] = rc.n_samples;
  j["distributions"] = detail::distributions_json(ts.distributions);
  Json runs = Json::array();
  for (std::size_t i = 0; i < out.runs.size(); ++i) {
    Json r = store::to_json(out.runs[i]);
    r["ks_vs_reference"] = store::optional_json(out.ks[i]);
    runs.push_back(std::move(r));
    for (const auto& f : store::write_result_csvs(out.runs[i], dir)) manifest.add_output(f);
  }
  j["runs"] = runs;
  j["config"] = cfg_json;
  out.results_path = dir / "results.json";
  store::write_file_atomic(out.results_path, j.dump(1));
  manifest.add_output(out.results_path);
  manifest.write(dir / "manifest_reliability.json");
  return out;
}

// ---------------------------------------------------------------- report

struct ReportOutput {
  fs::path csv;
  fs::path text;
  std::string table;
};

inline ReportOutput cmd_report(const fs::path& dir) {
  const auto rows = store::collect_results(dir);
  ReportOutput r;
  r.csv = dir / "summary.csv";
  r.text = dir / "summary.txt";
  r.table = store::summary_table(rows);
  store::write_file_atomic(r.csv, store::summary_csv(rows));
  store::write_file_atomic(r.text, r.table);
  return r;
}

}  // namespace kooprel::pipeline
