#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sys/wait.h>

#include <gtest/gtest.h>

#include "kooprel/pipeline/commands.hpp"

using namespace kooprel;
namespace fs = std::filesystem;
using pipeline::Json;

namespace {

class PipelineTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("kooprel_pipe_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  fs::path write_config(const Json& j, const std::string& name = "cfg.json") {
    const auto p = dir_ / name;
    std::ofstream(p) << j.dump(1);
    return p;
  }

  int cli(const std::string& args) {
    const std::string cmd = std::string(KOOPREL_CLI_PATH) + " " + args + " > " + (dir_ / "stdout.txt").string() +
                            " 2> " + (dir_ / "stderr.txt").string();
    const int status = std::system(cmd.c_str());
    return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  }
  std::string stderr_text() const { return store::read_file(dir_ / "stderr.txt"); }

  fs::path dir_;
};

Json base_config(const fs::path& out) {
  auto j = Json::parse(R"({
    "name": "tiny",
    "system": "duffing",
    "mode": "ic_uncertainty",
    "integration": {"dt": 0.1, "n_steps": 40},
    "data": {"n_train": 12, "n_validation": 4, "seed": 3,
             "distributions": [{"kind": "uniform", "a": -5, "b": 5}, {"kind": "uniform", "a": 0, "b": 10}]},
    "architecture": {"latent_dim": 4, "hidden": [8]},
    "training": {"epochs": 1, "lr": 1e-3, "batch_size": 64, "seed": 1},
    "baseline": {"hidden": [8]},
    "limit_state": {"channels": [0], "thresholds": [6.0], "horizon_steps": 40},
    "reliability": {"n_samples": 200}
  })");
  j["output_dir"] = out.string();
  return j;
}

}  // namespace

TEST(Config, ShippedConfigsLoad) {
  for (const auto& e : fs::directory_iterator(KOOPREL_CONFIG_DIR)) {
    if (e.path().extension() != ".json") continue;
    SCOPED_TRACE(e.path().string());
    const auto cfg = pipeline::load_config(e.path());
    EXPECT_NO_THROW(cfg.validate());
    EXPECT_EQ(cfg.test_sets.front().name, "in_distribution");
    // the canonical echo parses back to the same echo
    const auto echo = pipeline::to_json(cfg);
    EXPECT_EQ(pipeline::to_json(pipeline::config_from_json(echo)), echo);
  }
}

TEST(Config, DuffingDefaults) {
  const auto cfg = pipeline::load_config(fs::path(KOOPREL_CONFIG_DIR) / "duffing_ic.json");
  EXPECT_EQ(cfg.n_train, 1800u);
  EXPECT_EQ(cfg.n_validation, 200u);
  EXPECT_EQ(cfg.n_steps, 100u);
  EXPECT_EQ(cfg.setup.duffing.gamma, 5.0);
  EXPECT_EQ(cfg.setup.duffing.omega, 1.0);
  EXPECT_EQ(cfg.limit.thresholds, std::vector<double>{6.0});
  EXPECT_EQ(cfg.n_samples, 10000u);
}

TEST(Config, UnknownKeyIsNamed) {
  auto j = base_config("/tmp/x");
  j["training"]["learning_rate"] = 0.1;
  try {
    pipeline::config_from_json(j);
    FAIL() << "expected ConfigError";
  } catch (const ConfigError& e) {
    EXPECT_NE(std::string(e.what()).find("learning_rate"), std::string::npos) << e.what();
  }
}

TEST(Config, InvalidValues) {
  auto j = base_config("/tmp/x");
  j["limit_state"]["channels"] = {5};
  EXPECT_THROW(pipeline::config_from_json(j), ConfigError);
  j = base_config("/tmp/x");
  j["data"]["distributions"][0]["b"] = -10;
  EXPECT_THROW(pipeline::config_from_json(j), ConfigError);
  j = base_config("/tmp/x");
  j["system"] = "pendulum";
  EXPECT_THROW(pipeline::config_from_json(j), ConfigError);
  j = base_config("/tmp/x");
  j.erase("limit_state");
  EXPECT_THROW(pipeline::config_from_json(j), ConfigError);
  j = base_config("/tmp/x");
  j["limit_state"]["horizon_steps"] = 0;
  EXPECT_THROW(pipeline::config_from_json(j), ConfigError);
  j = base_config("/tmp/x");
  j["limit_state"]["direction"] = "left";
  EXPECT_THROW(pipeline::config_from_json(j), ConfigError);
  j["training"]["lr_decay"] = 2.0;
  j["limit_state"]["direction"] = "down";
  EXPECT_THROW(pipeline::config_from_json(j), ConfigError);
}

TEST(Config, BurgersMonitorsDownCrossing) {
  const auto cfg = pipeline::load_config(fs::path(KOOPREL_CONFIG_DIR) / "burgers_16.json");
  EXPECT_EQ(cfg.limit.direction, reliability::Crossing::down);
  EXPECT_EQ(pipeline::load_config(fs::path(KOOPREL_CONFIG_DIR) / "duffing_ic.json").limit.direction,
            reliability::Crossing::up);
}

TEST(Config, OutputDirectoryResolution) {
  auto cfg = pipeline::config_from_json(base_config(""));
  EXPECT_EQ(pipeline::resolve_paths(cfg, "/a/b").root, fs::path("/a/b"));
  cfg.output_dir = "/c";
  EXPECT_EQ(pipeline::resolve_paths(cfg).root, fs::path("/c"));
  cfg.output_dir.clear();
  ::setenv(pipeline::kOutputRootEnv, "/env/root", 1);
  EXPECT_EQ(pipeline::resolve_paths(cfg).root, fs::path("/env/root/tiny"));
  ::unsetenv(pipeline::kOutputRootEnv);
  EXPECT_EQ(pipeline::resolve_paths(cfg).root, fs::path("runs/tiny"));
}

TEST_F(PipelineTest, GenerateIsReproducible) {
  auto cfg = pipeline::config_from_json(base_config(dir_ / "a"));
  const auto a = pipeline::cmd_generate(cfg, pipeline::resolve_paths(cfg), 1);
  const auto b = pipeline::cmd_generate(cfg, {dir_ / "b"}, 3);
  EXPECT_EQ(a.train, b.train);
  EXPECT_EQ(store::read_file(dir_ / "a" / "data" / "train.bin"), store::read_file(dir_ / "b" / "data" / "train.bin"));
  EXPECT_EQ(a.train.series.size(), 12u);
  EXPECT_EQ(a.validation.series.size(), 4u);
  EXPECT_NE(a.train.series[0].states, a.validation.series[0].states);
  EXPECT_TRUE(fs::exists(dir_ / "a" / "data" / "manifest_generate.json"));
}

TEST_F(PipelineTest, ExactOnlyReliability) {
  auto cfg = pipeline::config_from_json(base_config(dir_));
  pipeline::ReliabilityOptions o;
  o.seed = 5;
  const auto r = pipeline::cmd_reliability(cfg, {dir_}, o);
  ASSERT_EQ(r.runs.size(), 1u);
  EXPECT_GT(r.runs[0].pf, 0.0);
  EXPECT_LT(r.runs[0].pf, 1.0);

  cfg.limit.thresholds = {1e9};
  const auto never = pipeline::cmd_reliability(cfg, {dir_ / "never"}, o);
  EXPECT_EQ(never.runs[0].pf, 0.0);
  const auto j = Json::parse(store::read_file(never.results_path));
  EXPECT_TRUE(j.at("runs").at(0).at("beta").is_null());
  EXPECT_NE(j.at("runs").at(0).at("beta_message").get<std::string>().find("unbounded"), std::string::npos);
}

TEST_F(PipelineTest, EndToEndThroughCli) {
  const auto cfg_path = write_config(base_config(dir_ / "run"));
  const std::string c = cfg_path.string();
  ASSERT_EQ(cli("generate " + c + " -q"), 0) << stderr_text();
  ASSERT_EQ(cli("train " + c + " -q"), 0) << stderr_text();
  ASSERT_EQ(cli("train " + c + " --model ar_fnn -q"), 0) << stderr_text();
  ASSERT_EQ(cli("train " + c + " --resume --epochs 1 -q"), 0) << stderr_text();
  const auto csv = store::read_file(dir_ / "run" / "model" / "koopman_train.csv");
  EXPECT_EQ(csv.substr(csv.rfind('\n', csv.size() - 2) + 1, 2), "2,");

  ASSERT_EQ(cli("rollout " + c + " -q"), 0) << stderr_text();
  ASSERT_EQ(cli("rollout " + c + " --inputs 1,2 --steps 10 -q"), 0) << stderr_text();

  ASSERT_EQ(cli("reliability " + c + " --seed 9 --baseline -q"), 0) << stderr_text();
  const auto rel = dir_ / "run" / "reliability" / "in_distribution";
  const auto first = store::read_file(rel / "results.json");
  const auto first_csv = store::read_file(rel / "failure_times_koopman.csv");
  const auto j = Json::parse(first);
  ASSERT_EQ(j.at("runs").size(), 3u);
  EXPECT_EQ(j.at("runs").at(0).at("method"), "exact_mcs");
  EXPECT_FALSE(j.at("runs").at(1).at("ks_vs_reference").is_null());
  if (!j.at("runs").at(1).at("beta").is_null() && !j.at("runs").at(0).at("beta").is_null()) {
    EXPECT_FALSE(j.at("runs").at(1).at("epsilon_percent").is_null());
  }
  // identical seed, different thread count: byte-identical results
  ASSERT_EQ(cli("reliability " + c + " --seed 9 --baseline --threads 3 -q"), 0) << stderr_text();
  EXPECT_EQ(store::read_file(rel / "results.json"), first);
  EXPECT_EQ(store::read_file(rel / "failure_times_koopman.csv"), first_csv);

  ASSERT_EQ(cli("report " + (dir_ / "run").string()), 0) << stderr_text();
  const auto summary = store::read_file(dir_ / "run" / "summary.csv");
  EXPECT_NE(summary.find("tiny,in_distribution,koopman"), std::string::npos) << summary;
  EXPECT_NE(summary.find("tiny,in_distribution,ar_fnn"), std::string::npos) << summary;
}

TEST_F(PipelineTest, CliExitCodes) {
  const auto cfg_path = write_config(base_config(dir_ / "run"));
  EXPECT_EQ(cli("reliability " + cfg_path.string() + " -q"), 2);
  EXPECT_NE(stderr_text().find("--seed"), std::string::npos);
  EXPECT_EQ(cli("generate " + (dir_ / "missing.json").string()), 4);
  auto bad = base_config(dir_ / "run");
  bad["bogus"] = 1;
  EXPECT_EQ(cli("generate " + write_config(bad, "bad.json").string()), 2);
  EXPECT_EQ(cli("train " + cfg_path.string() + " -q"), 4);  // no dataset yet
  fs::create_directories(dir_ / "empty");
  EXPECT_EQ(cli("report " + (dir_ / "empty").string()), 4);
  EXPECT_EQ(cli("frobnicate"), 2);
  EXPECT_EQ(cli("--help"), 0);
}

TEST_F(PipelineTest, ReportRequiresResults) {
  EXPECT_THROW(pipeline::cmd_report(dir_), IoError);
}
