#pragma once

#include <cmath>
#include <filesystem>
#include <limits>
#include <string>
#include <vector>

#include <json.hpp>

#include "kooprel/baseline/ar_model.hpp"
#include "kooprel/koopman/model.hpp"
#include "kooprel/koopman/train.hpp"
#include "kooprel/nn/serialize.hpp"
#include "kooprel/store/files.hpp"

namespace kooprel::store {

using Json = nlohmann::ordered_json;

inline constexpr int kModelFormatVersion = 1;
inline constexpr const char* kArVariantTag = "ar_fnn";

/// A checkpoint holds the retained (best) model plus everything needed to
/// resume: latest parameters, optimizer moments, epoch counter, report.
struct KoopmanCheckpoint {
  koopman::TrainResult result;
  koopman::TrainConfig config;
};

struct ArCheckpoint {
  baseline::ArTrainResult result;
  koopman::TrainConfig config;
  std::vector<std::size_t> hidden;
};

namespace detail {

// JSON has no infinity; an unset best-validation loss is stored as null.
inline Json finite_or_null(double v) { return std::isfinite(v) ? Json(v) : Json(nullptr); }
inline double from_finite_or_null(const Json& j) {
  return j.is_null() ? std::numeric_limits<double>::infinity() : j.get<double>();
}

inline Json to_json(const koopman::Normalization& n) {
  Json j;
  j["mean"] = n.mean;
  j["scale"] = n.scale;
  return j;
}
inline koopman::Normalization norm_from_json(const Json& j) {
  return {j.at("mean").get<std::vector<double>>(), j.at("scale").get<std::vector<double>>()};
}

inline Json to_json(const koopman::LossTerms& t) {
  Json j;
  j["total"] = t.total;
  j["reconstruction"] = t.reconstruction;
  j["linearity"] = t.linearity;
  j["prediction"] = t.prediction;
  j["rollout"] = t.rollout;
  return j;
}
inline koopman::LossTerms terms_from_json(const Json& j) {
  koopman::LossTerms t;
  t.total = j.at("total").get<double>();
  t.reconstruction = j.at("reconstruction").get<double>();
  t.linearity = j.at("linearity").get<double>();
  t.prediction = j.at("prediction").get<double>();
  t.rollout = j.value("rollout", 0.0);
  return t;
}

inline Json to_json(const koopman::TrainConfig& c) {
  Json j;
  j["epochs"] = c.epochs;
  j["lr"] = c.lr;
  j["lr_decay"] = c.lr_decay;
  j["batch_size"] = c.batch_size;
  j["optimizer"] = nn::to_string(c.optimizer);
  j["seed"] = c.seed;
  j["keep_best"] = c.keep_best;
  j["rollout_weight"] = c.rollout_weight;
  j["rollout_horizon"] = c.rollout_horizon;
  j["rollout_batch"] = c.rollout_batch;
  return j;
}
inline koopman::TrainConfig train_config_from_json(const Json& j) {
  koopman::TrainConfig c;
  c.epochs = j.at("epochs").get<std::size_t>();
  c.lr = j.at("lr").get<double>();
  c.lr_decay = j.value("lr_decay", 1.0);
  c.batch_size = j.at("batch_size").get<std::size_t>();
  c.optimizer = nn::optimizer_from_string(j.at("optimizer").get<std::string>());
  c.seed = j.at("seed").get<std::uint64_t>();
  c.keep_best = j.at("keep_best").get<bool>();
  c.rollout_weight = j.value("rollout_weight", 0.0);
  c.rollout_horizon = j.value("rollout_horizon", std::size_t{0});
  c.rollout_batch = j.value("rollout_batch", std::size_t{16});
  return c;
}

inline Json to_json(const koopman::TrainReport& r) {
  Json j;
  j["seed"] = r.seed;
  j["initial_train_loss"] = r.initial_train_loss;
  j["best_epoch"] = r.best_epoch;
  Json ep = Json::array();
  for (const auto& e : r.epochs) {
    Json je;
    je["epoch"] = e.epoch;
    je["train"] = to_json(e.train);
    je["validation"] = to_json(e.validation);
    ep.push_back(std::move(je));
  }
  j["epochs"] = std::move(ep);
  return j;
}
inline koopman::TrainReport report_from_json(const Json& j) {
  koopman::TrainReport r;
  r.seed = j.at("seed").get<std::uint64_t>();
  r.initial_train_loss = j.at("initial_train_loss").get<double>();
  r.best_epoch = j.at("best_epoch").get<std::size_t>();
  for (const auto& je : j.at("epochs")) {
    koopman::EpochRecord e;
    e.epoch = je.at("epoch").get<std::size_t>();
    e.train = terms_from_json(je.at("train"));
    e.validation = terms_from_json(je.at("validation"));
    r.epochs.push_back(e);
  }
  return r;
}

inline Json header(const std::string& variant) {
  Json j;
  j["format"] = "kooprel-model";
  j["version"] = kModelFormatVersion;
  j["variant"] = variant;
  return j;
}

inline std::string check_header(const Json& j, const std::string& where) {
  if (!j.is_object() || j.value("format", "") != "kooprel-model") throw IoError(where + ": not a kooprel model checkpoint");
  const int version = j.at("version").get<int>();
  if (version != kModelFormatVersion) {
    throw IoError(where + ": checkpoint format version " + std::to_string(version) + " is not supported (this build reads v" +
                  std::to_string(kModelFormatVersion) + ")");
  }
  const auto tag = j.at("variant").get<std::string>();
  if (tag != "ic_uncertainty" && tag != "parameter_uncertainty" && tag != kArVariantTag) {
    throw IoError(where + ": unknown variant tag '" + tag + "' in checkpoint format v" + std::to_string(version) +
                  " (expected ic_uncertainty, parameter_uncertainty or ar_fnn)");
  }
  return tag;
}

inline Json parse_json_file(const fs::path& path) {
  try {
    return Json::parse(read_file(path));
  } catch (const Json::exception& e) {
    throw IoError("'" + path.string() + "': " + e.what());
  }
}

}  // namespace detail

inline Json koopman_model_json(const koopman::KoopmanModel& m) {
  Json j = detail::header(koopman::to_string(m.variant));
  j["state_dim"] = m.state_dim;
  j["latent_dim"] = m.latent_dim;
  j["param_dim"] = m.param_dim;
  j["state_shape"] = m.state_shape;
  j["dt"] = m.dt;
  Json norm;
  norm["state"] = detail::to_json(m.state_norm);
  norm["param"] = detail::to_json(m.param_norm);
  j["normalization"] = norm;
  Json w;
  w["lambda1"] = m.weights.lambda1;
  w["lambda2"] = m.weights.lambda2;
  w["lambda3"] = m.weights.lambda3;
  j["loss_weights"] = w;
  j["encoder"] = nn::to_json(m.encoder);
  j["koopman"] = nn::to_json(m.koopman);
  j["decoder"] = nn::to_json(m.decoder);
  return j;
}

inline koopman::KoopmanModel koopman_model_from_json(const Json& j, const std::string& where = "model") {
  const auto tag = detail::check_header(j, where);
  if (tag == kArVariantTag) throw ConfigError(where + ": checkpoint holds an ar_fnn baseline, not a Koopman model");
  try {
    koopman::KoopmanModel m;
    m.variant = koopman::variant_from_string(tag);
    m.state_dim = j.at("state_dim").get<std::size_t>();
    m.latent_dim = j.at("latent_dim").get<std::size_t>();
    m.param_dim = j.at("param_dim").get<std::size_t>();
    m.state_shape = j.at("state_shape").get<std::vector<std::size_t>>();
    m.dt = j.at("dt").get<double>();
    m.state_norm = detail::norm_from_json(j.at("normalization").at("state"));
    m.param_norm = detail::norm_from_json(j.at("normalization").at("param"));
    const auto& w = j.at("loss_weights");
    m.weights = {w.at("lambda1").get<double>(), w.at("lambda2").get<double>(), w.at("lambda3").get<double>()};
    m.encoder = nn::network_from_json(j.at("encoder"));
    m.koopman = nn::network_from_json(j.at("koopman"));
    m.decoder = nn::network_from_json(j.at("decoder"));
    m.validate();
    return m;
  } catch (const Json::exception& e) {
    throw IoError(where + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(where + ": " + e.what());
  }
}

inline Json ar_model_json(const baseline::ArModel& m) {
  Json j = detail::header(kArVariantTag);
  j["mode"] = koopman::to_string(m.variant);
  j["state_dim"] = m.state_dim;
  j["param_dim"] = m.param_dim;
  j["state_shape"] = m.state_shape;
  j["dt"] = m.dt;
  Json norm;
  norm["state"] = detail::to_json(m.state_norm);
  norm["param"] = detail::to_json(m.param_norm);
  j["normalization"] = norm;
  j["network"] = nn::to_json(m.network);
  return j;
}

inline baseline::ArModel ar_model_from_json(const Json& j, const std::string& where = "model") {
  const auto tag = detail::check_header(j, where);
  if (tag != kArVariantTag) throw ConfigError(where + ": checkpoint holds a Koopman model, not an ar_fnn baseline");
  try {
    baseline::ArModel m;
    m.variant = koopman::variant_from_string(j.at("mode").get<std::string>());
    m.state_dim = j.at("state_dim").get<std::size_t>();
    m.param_dim = j.at("param_dim").get<std::size_t>();
    m.state_shape = j.at("state_shape").get<std::vector<std::size_t>>();
    m.dt = j.at("dt").get<double>();
    m.state_norm = detail::norm_from_json(j.at("normalization").at("state"));
    m.param_norm = detail::norm_from_json(j.at("normalization").at("param"));
    m.network = nn::network_from_json(j.at("network"));
    m.validate();
    return m;
  } catch (const Json::exception& e) {
    throw IoError(where + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(where + ": " + e.what());
  }
}

inline Json to_json(const KoopmanCheckpoint& c) {
  const auto& st = c.result.state;
  Json j = koopman_model_json(c.result.model);
  j["training_config"] = detail::to_json(c.config);
  Json s;
  s["epochs_done"] = st.epochs_done;
  s["best_validation"] = detail::finite_or_null(st.best_validation);
  s["encoder"] = nn::to_json(st.current.encoder.params);
  s["koopman"] = nn::to_json(st.current.koopman.params);
  s["decoder"] = nn::to_json(st.current.decoder.params);
  Json opt;
  opt["encoder"] = nn::to_json(st.encoder_opt);
  opt["koopman"] = nn::to_json(st.koopman_opt);
  opt["decoder"] = nn::to_json(st.decoder_opt);
  s["optimizer"] = opt;
  j["training_state"] = s;
  j["report"] = detail::to_json(c.result.report);
  return j;
}

inline KoopmanCheckpoint koopman_checkpoint_from_json(const Json& j, const std::string& where = "checkpoint") {
  KoopmanCheckpoint c;
  c.result.model = koopman_model_from_json(j, where);
  try {
    c.config = detail::train_config_from_json(j.at("training_config"));
    c.config.weights = c.result.model.weights;
    const auto& s = j.at("training_state");
    auto& st = c.result.state;
    st.current = c.result.model;
    st.current.encoder.params = nn::params_from_json(s.at("encoder"), st.current.encoder.spec);
    st.current.koopman.params = nn::params_from_json(s.at("koopman"), st.current.koopman.spec);
    st.current.decoder.params = nn::params_from_json(s.at("decoder"), st.current.decoder.spec);
    st.epochs_done = s.at("epochs_done").get<std::size_t>();
    st.best_validation = detail::from_finite_or_null(s.at("best_validation"));
    st.encoder_opt = nn::adam_from_json(s.at("optimizer").at("encoder"), st.current.encoder.spec);
    st.koopman_opt = nn::adam_from_json(s.at("optimizer").at("koopman"), st.current.koopman.spec);
    st.decoder_opt = nn::adam_from_json(s.at("optimizer").at("decoder"), st.current.decoder.spec);
    c.result.report = detail::report_from_json(j.at("report"));
  } catch (const Json::exception& e) {
    throw IoError(where + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(where + ": " + e.what());
  }
  return c;
}

inline Json to_json(const ArCheckpoint& c) {
  const auto& st = c.result.state;
  Json j = ar_model_json(c.result.model);
  j["hidden"] = c.hidden;
  j["training_config"] = detail::to_json(c.config);
  Json s;
  s["epochs_done"] = st.epochs_done;
  s["best_validation"] = detail::finite_or_null(st.best_validation);
  s["network"] = nn::to_json(st.current.network.params);
  s["optimizer"] = nn::to_json(st.opt);
  j["training_state"] = s;
  j["report"] = detail::to_json(c.result.report);
  return j;
}

inline ArCheckpoint ar_checkpoint_from_json(const Json& j, const std::string& where = "checkpoint") {
  ArCheckpoint c;
  c.result.model = ar_model_from_json(j, where);
  try {
    c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    c.config = detail::train_config_from_json(j.at("training_config"));
    const auto& s = j.at("training_state");
    auto& st = c.result.state;
    st.current = c.result.model;
    st.current.network.params = nn::params_from_json(s.at("network"), st.current.network.spec);
    st.epochs_done = s.at("epochs_done").get<std::size_t>();
    st.best_validation = detail::from_finite_or_null(s.at("best_validation"));
    st.opt = nn::adam_from_json(s.at("optimizer"), st.current.network.spec);
    c.result.report = detail::report_from_json(j.at("report"));
  } catch (const Json::exception& e) {
    throw IoError(where + ": " + e.what());
  } catch (const ConfigError& e) {
    throw IoError(where + ": " + e.what());
  }
  return c;
}

/// Variant tag of a checkpoint file, validated against the known tags.
inline std::string peek_variant(const fs::path& path) {
  return detail::check_header(detail::parse_json_file(path), path.string());
}

inline void save_model(const koopman::KoopmanModel& m, const fs::path& path) {
  write_file_atomic(path, koopman_model_json(m).dump(1));
}
inline koopman::KoopmanModel load_model(const fs::path& path) {
  return koopman_model_from_json(detail::parse_json_file(path), path.string());
}

inline void save_checkpoint(const KoopmanCheckpoint& c, const fs::path& path) {
  write_file_atomic(path, to_json(c).dump(1));
}
inline KoopmanCheckpoint load_checkpoint(const fs::path& path) {
  return koopman_checkpoint_from_json(detail::parse_json_file(path), path.string());
}

inline void save_ar_checkpoint(const ArCheckpoint& c, const fs::path& path) {
  write_file_atomic(path, to_json(c).dump(1));
}
inline ArCheckpoint load_ar_checkpoint(const fs::path& path) {
  return ar_checkpoint_from_json(detail::parse_json_file(path), path.string());
}

}  // namespace kooprel::store
