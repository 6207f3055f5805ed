#include <cstdlib>
#include <iostream>
#include <optional>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "kooprel/common.hpp"
#include "kooprel/pipeline/commands.hpp"

using namespace kooprel;

namespace {

void print_result(const reliability::FirstPassageResult& r, const std::optional<double>& ks) {
  std::cout << r.provider << ": P_f=" << r.pf << " censored=" << r.censored << "/" << r.n_samples;
  if (r.beta) std::cout << " beta=" << *r.beta;
  else std::cout << " beta=undefined (" << r.beta_message << ")";
  if (r.epsilon_percent) std::cout << " eps=" << *r.epsilon_percent << "%";
  if (ks) std::cout << " ks=" << *ks;
  if (r.truncated) std::cout << " truncated=" << r.truncated;
  std::cout << '\n';
}

std::vector<double> parse_inputs(const std::string& s) {
  std::vector<double> v;
  std::size_t pos = 0;
  while (pos < s.size()) {
    const auto next = s.find(',', pos);
    const auto tok = s.substr(pos, next == std::string::npos ? std::string::npos : next - pos);
    try {
      std::size_t used = 0;
      v.push_back(std::stod(tok, &used));
      if (used != tok.size()) throw std::invalid_argument(tok);
    } catch (const std::exception&) {
      throw ConfigError("--inputs: cannot parse '" + tok + "' as a number");
    }
    if (next == std::string::npos) break;
    pos = next + 1;
  }
  return v;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Koopman-operator surrogates for first-passage reliability analysis"};
  app.set_version_flag("--version", std::string(kVersion));
  app.require_subcommand(1);

  std::string config_path, out_dir;
  std::size_t threads = default_threads();
  bool quiet = false;
  auto add_common = [&](CLI::App* sub) {
    sub->add_option("config", config_path, "experiment config (JSON)")->required();
    sub->add_option("--out", out_dir, std::string("run directory (default: $") + pipeline::kOutputRootEnv +
                                          "/<name>, root defaults to ./runs)");
    sub->add_flag("-q,--quiet", quiet, "suppress progress output");
  };

  auto* gen = app.add_subcommand("generate", "simulate training and validation datasets");
  add_common(gen);
  gen->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);

  auto* trn = app.add_subcommand("train", "train a Koopman model or the AR baseline");
  add_common(trn);
  std::string model_kind = "koopman";
  bool resume = false;
  std::optional<std::size_t> epochs;
  trn->add_option("--model", model_kind, "koopman or ar_fnn")->check(CLI::IsMember({"koopman", "ar_fnn"}));
  trn->add_flag("--resume", resume, "continue from the existing checkpoint");
  trn->add_option("--epochs", epochs, "epochs to run (overrides the config)");

  auto* rol = app.add_subcommand("rollout", "exact vs surrogate trajectories as CSV");
  add_common(rol);
  std::string inputs;
  std::optional<std::size_t> steps;
  rol->add_option("--model", model_kind, "koopman or ar_fnn")->check(CLI::IsMember({"koopman", "ar_fnn"}));
  rol->add_option("--inputs", inputs, "comma-separated stochastic inputs (default: validation-set mean)");
  rol->add_option("--steps", steps, "rollout length");

  auto* rel = app.add_subcommand("reliability", "Monte-Carlo first-passage analysis");
  add_common(rel);
  std::optional<std::uint64_t> seed;
  std::string test_set = "in_distribution";
  bool exact_only = false, with_ar = false, no_exact = false;
  std::optional<std::size_t> n_samples;
  rel->add_option("--seed", seed, "sampling seed (required unless set in the config)");
  rel->add_option("--threads", threads, "worker threads")->check(CLI::PositiveNumber);
  rel->add_option("--test-set", test_set, "named input distribution set");
  rel->add_option("--samples", n_samples, "N_s (overrides the config)")->check(CLI::PositiveNumber);
  rel->add_flag("--exact-only", exact_only, "skip the surrogate");
  rel->add_flag("--baseline", with_ar, "also run the AR baseline");
  rel->add_flag("--no-exact", no_exact, "surrogates only (no reference, no eps)");

  auto* rep = app.add_subcommand("report", "summary table of all results under a directory");
  std::string report_dir;
  rep->add_option("dir", report_dir, "run directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(ExitCode::config);
  }

  const pipeline::Log log = [&](const std::string& s) {
    if (!quiet) std::cerr << s << '\n';
  };
  try {
    if (rep->parsed()) {
      const auto r = pipeline::cmd_report(report_dir);
      std::cout << r.table;
      return 0;
    }
    const auto cfg = pipeline::load_config(config_path);
    const auto paths = pipeline::resolve_paths(cfg, out_dir);
    if (gen->parsed()) {
      pipeline::cmd_generate(cfg, paths, threads, log);
    } else if (trn->parsed()) {
      pipeline::TrainOptions o;
      o.kind = pipeline::model_kind_from_string(model_kind);
      o.resume = resume;
      o.epochs = epochs;
      const auto report = pipeline::cmd_train(cfg, paths, o, log);
      std::cout << "trained " << report.epochs_run() << " epochs, best epoch " << report.best_epoch
                << ", final validation loss " << report.final_validation_loss() << '\n';
    } else if (rol->parsed()) {
      pipeline::RolloutOptions o;
      o.kind = pipeline::model_kind_from_string(model_kind);
      if (!inputs.empty()) o.inputs = parse_inputs(inputs);
      o.n_steps = steps;
      std::cout << pipeline::cmd_rollout(cfg, paths, o).string() << '\n';
    } else if (rel->parsed()) {
      if (!seed) seed = cfg.reliability_seed;
      if (!seed) throw ConfigError("reliability: --seed is required (or set reliability.seed in the config)");
      if (exact_only && no_exact) throw ConfigError("reliability: --exact-only and --no-exact exclude each other");
      pipeline::ReliabilityOptions o;
      o.seed = *seed;
      o.threads = threads;
      o.test_set = test_set;
      o.exact = !no_exact;
      o.koopman = !exact_only;
      o.ar = with_ar && !exact_only;
      o.n_samples = n_samples;
      const auto r = pipeline::cmd_reliability(cfg, paths, o, log);
      for (std::size_t i = 0; i < r.runs.size(); ++i) print_result(r.runs[i], r.ks[i]);
      std::cout << r.results_path.string() << '\n';
    }
    return 0;
  } catch (const Error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(exit_code_for(e));
  } catch (const std::filesystem::filesystem_error& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::io);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::other);
  }
}
