#include <filesystem>
#include <random>

#include <gtest/gtest.h>

#include "kooprel/store/dataset_io.hpp"
#include "kooprel/store/manifest.hpp"
#include "kooprel/store/model_io.hpp"
#include "kooprel/store/results_io.hpp"

using namespace kooprel;
namespace fs = std::filesystem;
using dynamics::Distribution;

namespace {

class StoreTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("kooprel_store_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }
  fs::path dir_;
};

dynamics::Dataset random_dataset() {
  dynamics::SystemSetup s;
  s.mode = dynamics::Mode::parameter_uncertainty;
  s.fixed_ic = {1.0, 0.0};
  return dynamics::generate_dataset(
      s, {Distribution::uniform(0.02, 0.04), Distribution::gaussian(2, 6), Distribution::lognormal(0.1, 0.3),
          Distribution::uniform(2, 8)},
      7, 12, 99);
}

koopman::TrainResult small_training(const dynamics::Dataset& ds) {
  koopman::Architecture a;
  a.latent_dim = 4;
  a.hidden = {8};
  koopman::TrainConfig c;
  c.epochs = 2;
  c.lr = 1e-3;
  return koopman::train(ds, &ds, a, c);
}

}  // namespace

TEST_F(StoreTest, DatasetRoundTripIsBitIdentical) {
  const auto ds = random_dataset();
  store::save_dataset(ds, dir_ / "train.json");
  ASSERT_TRUE(fs::exists(dir_ / "train.bin"));
  auto back = store::load_dataset(dir_ / "train.json");
  // The system tag on loaded provenance comes from the metadata.
  for (auto& tr : back.series) tr.provenance.system = ds.series.front().provenance.system;
  EXPECT_EQ(back, ds);
}

TEST_F(StoreTest, TruncatedPayloadIsDetected) {
  store::save_dataset(random_dataset(), dir_ / "d.json");
  auto bytes = store::read_file(dir_ / "d.bin");
  bytes.resize(bytes.size() - 8);
  store::write_file_atomic(dir_ / "d.bin", bytes);
  try {
    store::load_dataset(dir_ / "d.json");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("checksum"), std::string::npos) << e.what();
  }
}

TEST_F(StoreTest, PayloadShapeMismatchIsReported) {
  dynamics::Dataset ds;
  ds.system = "lorenz";
  ds.mode = "ic_uncertainty";
  ds.dt = 0.01;
  ds.n_steps = 1;
  ds.state_shape = {3};
  dynamics::Trajectory tr;
  tr.state_shape = {3};
  tr.times = {0.0, 0.01};
  tr.states = {1, 2, 3, 4, 5, 6};
  ds.series.push_back(tr);
  store::save_dataset(ds, dir_ / "d.json");
  // Rewrite the payload with 5 floats and a matching digest: shape 2x3 cannot hold it.
  const auto bytes = store::detail::encode_f64_le({1, 2, 3, 4, 5});
  store::write_file_atomic(dir_ / "d.bin", bytes);
  auto meta = store::Json::parse(store::read_file(dir_ / "d.json"));
  meta["payload_bytes"] = bytes.size();
  meta["payload_sha256"] = store::sha256_hex(bytes);
  store::write_file_atomic(dir_ / "d.json", meta.dump());
  try {
    store::load_dataset(dir_ / "d.json");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("6 values"), std::string::npos) << e.what();
  }
}

TEST_F(StoreTest, MissingFilesAndBadJson) {
  EXPECT_THROW(store::load_dataset(dir_ / "nope.json"), IoError);
  store::write_file_atomic(dir_ / "bad.json", "{ not json");
  EXPECT_THROW(store::load_dataset(dir_ / "bad.json"), IoError);
  EXPECT_THROW(store::load_model(dir_ / "bad.json"), IoError);
}

TEST(StoreEncoding, LittleEndianDoubles) {
  const auto bytes = store::detail::encode_f64_le({1.0});
  ASSERT_EQ(bytes.size(), 8u);
  EXPECT_EQ(static_cast<unsigned char>(bytes[7]), 0x3f);
  EXPECT_EQ(static_cast<unsigned char>(bytes[6]), 0xf0);
  std::mt19937_64 rng(1);
  std::normal_distribution<double> n(0, 1e3);
  std::vector<double> v(100);
  for (auto& x : v) x = n(rng);
  v.push_back(-0.0);
  v.push_back(std::numeric_limits<double>::denorm_min());
  EXPECT_EQ(store::detail::decode_f64_le(store::detail::encode_f64_le(v)), v);
  EXPECT_EQ(store::sha256_hex("abc"), "ba7816bf8f01cfea414140de5dae2223b00361a396177a9cb410ff61f20015ad");
}

TEST_F(StoreTest, ModelRoundTripAndBitExactRollout) {
  const auto ds = random_dataset();
  const auto r = small_training(ds);
  store::save_model(r.model, dir_ / "m.json");
  const auto back = store::load_model(dir_ / "m.json");
  EXPECT_EQ(back, r.model);
  const std::vector<double> x0{1.0, 0.0}, p{0.03, 4.0, 0.2, 5.0};
  EXPECT_EQ(koopman::rollout(back, x0, p, 50).states, koopman::rollout(r.model, x0, p, 50).states);
  EXPECT_EQ(store::peek_variant(dir_ / "m.json"), "parameter_uncertainty");
}

TEST_F(StoreTest, UnknownVariantTagIsVersionedError) {
  const auto r = small_training(random_dataset());
  auto j = store::koopman_model_json(r.model);
  j["variant"] = "lstm";
  store::write_file_atomic(dir_ / "m.json", j.dump());
  try {
    store::load_model(dir_ / "m.json");
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("unknown variant tag 'lstm'"), std::string::npos) << msg;
    EXPECT_NE(msg.find("v1"), std::string::npos) << msg;
  }
  j["variant"] = "ic_uncertainty";
  j["version"] = 7;
  store::write_file_atomic(dir_ / "m.json", j.dump());
  EXPECT_THROW(store::load_model(dir_ / "m.json"), IoError);
}

TEST_F(StoreTest, CheckpointResumesLikeUninterruptedRun) {
  const auto ds = random_dataset();
  koopman::Architecture a;
  a.latent_dim = 4;
  a.hidden = {8};
  koopman::TrainConfig c;
  c.lr = 1e-3;
  c.epochs = 3;
  const auto full = koopman::train(ds, &ds, a, c);
  c.epochs = 1;
  const auto first = koopman::train(ds, &ds, a, c);
  store::save_checkpoint({first, c}, dir_ / "ck.json");
  auto ck = store::load_checkpoint(dir_ / "ck.json");
  EXPECT_EQ(ck.result.state.current, first.state.current);
  EXPECT_EQ(ck.result.state.encoder_opt.m, first.state.encoder_opt.m);
  c.epochs = 2;
  koopman::resume_training(ck.result, ds, &ds, c);
  EXPECT_EQ(ck.result.state.current, full.state.current);
  EXPECT_EQ(ck.result.model, full.model);
  EXPECT_EQ(ck.result.report.epochs.back().epoch, 3u);
}

TEST_F(StoreTest, ArCheckpointRoundTrip) {
  const auto ds = random_dataset();
  koopman::TrainConfig c;
  c.epochs = 1;
  const auto r = baseline::train_ar(ds, nullptr, {8}, c);
  store::save_ar_checkpoint({r, c, {8}}, dir_ / "ar.json");
  EXPECT_EQ(store::peek_variant(dir_ / "ar.json"), "ar_fnn");
  const auto back = store::load_ar_checkpoint(dir_ / "ar.json");
  EXPECT_EQ(back.result.model, r.model);
  EXPECT_EQ(back.hidden, std::vector<std::size_t>{8});
  EXPECT_THROW(store::load_model(dir_ / "ar.json"), ConfigError);
}

TEST_F(StoreTest, ResultCsvsAndSummary) {
  reliability::FirstPassageResult r;
  r.provider = "exact_mcs";
  r.n_samples = 4;
  r.passages = {{true, 2, 0.2}, {}, {true, 3, 0.3}, {}};
  r.censored = 2;
  r.pf = 0.5;
  r.beta = 0.0;
  r.dt = 0.1;
  r.horizon_steps = 3;
  r.histogram = reliability::histogram(reliability::failure_times(r.passages), 2, 0.15, 0.35);
  const auto files = store::write_result_csvs(r, dir_);
  ASSERT_FALSE(files.empty());
  const auto ft = store::read_file(dir_ / store::result_files_for("exact_mcs").failure_times);
  EXPECT_EQ(ft, "sample_index,tau_or_censored\n0,0.2\n1,censored\n2,0.3\n3,censored\n");
  const auto hist = store::read_file(dir_ / store::result_files_for("exact_mcs").histogram);
  EXPECT_EQ(hist.substr(0, hist.find('\n')), "bin_left,bin_right,density");

  store::Json res;
  res["format"] = store::kResultsFormat;
  res["experiment"] = "toy";
  res["test_set"] = "in_distribution";
  res["runs"] = store::Json::array({store::to_json(r)});
  fs::create_directories(dir_ / "a");
  store::write_file_atomic(dir_ / "a" / "results.json", res.dump());
  store::write_file_atomic(dir_ / "a" / "other.json", "{\"format\": \"something-else\"}");
  const auto rows = store::collect_results(dir_);
  ASSERT_EQ(rows.size(), 1u);
  EXPECT_EQ(rows[0].method, "exact_mcs");
  const auto csv = store::summary_csv(rows);
  EXPECT_EQ(csv, "experiment,test_set,method,beta,pf,n_samples,epsilon_percent,ks\n"
                 "toy,in_distribution,exact_mcs,0,0.5,4,,\n");
  EXPECT_NE(store::summary_table(rows).find("toy"), std::string::npos);
}

TEST_F(StoreTest, EmptyReportDirectoryIsError) {
  try {
    store::collect_results(dir_);
    FAIL() << "expected IoError";
  } catch (const IoError& e) {
    EXPECT_NE(std::string(e.what()).find("no reliability results"), std::string::npos);
  }
}

TEST_F(StoreTest, ManifestRecordsHashes) {
  store::write_file_atomic(dir_ / "in.txt", "abc");
  store::RunManifest m("generate", store::Json{{"a", 1}});
  m.add_seed("data", 7);
  m.add_input(dir_ / "in.txt");
  m.add_output(dir_ / "in.txt");
  const auto j = m.to_json();
  EXPECT_EQ(j.at("command"), "generate");
  EXPECT_EQ(j.at("inputs").at(0).at("sha256"), store::sha256_hex("abc"));
  EXPECT_TRUE(j.contains("config_sha256"));
}
