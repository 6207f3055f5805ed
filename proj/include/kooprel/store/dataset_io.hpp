#pragma once

#include <bit>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "kooprel/dynamics/dataset.hpp"
#include "kooprel/store/files.hpp"

namespace kooprel::store {

using Json = nlohmann::ordered_json;

inline constexpr int kDatasetFormatVersion = 1;

inline Json to_json(const dynamics::Distribution& d) {
  Json j;
  j["kind"] = dynamics::to_string(d.kind);
  j["a"] = d.a;
  j["b"] = d.b;
  return j;
}

inline dynamics::Distribution distribution_from_json(const Json& j) {
  dynamics::Distribution d;
  d.kind = dynamics::dist_kind_from_string(j.at("kind").get<std::string>());
  if (d.kind == dynamics::DistKind::constant && j.contains("value")) {
    d.a = d.b = j.at("value").get<double>();
  } else {
    d.a = j.at("a").get<double>();
    d.b = j.contains("b") ? j.at("b").get<double>() : d.a;
  }
  d.validate();
  return d;
}

namespace detail {

inline std::string encode_f64_le(const std::vector<double>& values) {
  std::string bytes(values.size() * sizeof(double), '\0');
  for (std::size_t i = 0; i < values.size(); ++i) {
    auto bits = std::bit_cast<std::uint64_t>(values[i]);
    for (int b = 0; b < 8; ++b) bytes[i * 8 + static_cast<std::size_t>(b)] = static_cast<char>((bits >> (8 * b)) & 0xFF);
  }
  return bytes;
}

inline std::vector<double> decode_f64_le(const std::string& bytes) {
  std::vector<double> values(bytes.size() / 8);
  for (std::size_t i = 0; i < values.size(); ++i) {
    std::uint64_t bits = 0;
    for (int b = 0; b < 8; ++b) {
      bits |= static_cast<std::uint64_t>(static_cast<unsigned char>(bytes[i * 8 + static_cast<std::size_t>(b)])) << (8 * b);
    }
    values[i] = std::bit_cast<double>(bits);
  }
  return values;
}

}  // namespace detail

/// Writes `<stem>.json` (metadata) and `<stem>.bin` (little-endian f64
/// payload ordered series, time, state...). The metadata records the payload
/// digest so truncation or corruption is detected on load.
inline void save_dataset(const dynamics::Dataset& ds, const fs::path& metadata_path) {
  const std::size_t S = ds.state_size();
  std::vector<double> payload;
  payload.reserve(ds.series.size() * (ds.n_steps + 1) * S);
  for (const auto& tr : ds.series) {
    if (tr.states.size() != (ds.n_steps + 1) * S) throw ConfigError("save_dataset: series length mismatch");
    payload.insert(payload.end(), tr.states.begin(), tr.states.end());
  }
  const std::string bytes = detail::encode_f64_le(payload);
  fs::path payload_path = metadata_path;
  payload_path.replace_extension(".bin");

  Json meta;
  meta["format"] = "kooprel-dataset";
  meta["version"] = kDatasetFormatVersion;
  meta["system"] = ds.system;
  meta["mode"] = ds.mode;
  Json shapes;
  shapes["series"] = ds.series.size();
  shapes["time"] = ds.n_steps + 1;
  shapes["state"] = ds.state_shape;
  shapes["param_dim"] = ds.param_dim;
  meta["shapes"] = shapes;
  meta["dt"] = ds.dt;
  meta["n_series"] = ds.series.size();
  meta["n_steps"] = ds.n_steps;
  Json dists = Json::array();
  for (const auto& d : ds.distributions) dists.push_back(to_json(d));
  meta["distributions"] = dists;
  meta["seed"] = ds.seed;
  meta["payload_file"] = payload_path.filename().string();
  meta["byte_order"] = "little";
  meta["dtype"] = "f64";
  meta["payload_bytes"] = bytes.size();
  meta["payload_sha256"] = sha256_hex(bytes);
  Json prov = Json::array();
  for (const auto& tr : ds.series) {
    Json p;
    p["index"] = tr.provenance.index;
    p["seed"] = tr.provenance.seed;
    p["inputs"] = tr.provenance.inputs;
    prov.push_back(std::move(p));
  }
  meta["provenance"] = prov;
  write_file_atomic(payload_path, bytes);
  write_file_atomic(metadata_path, meta.dump(1));
}

inline dynamics::Dataset load_dataset(const fs::path& metadata_path) {
  Json meta;
  try {
    meta = Json::parse(read_file(metadata_path));
  } catch (const Json::exception& e) {
    throw IoError("dataset metadata '" + metadata_path.string() + "': " + e.what());
  }
  try {
    if (meta.value("format", "") != "kooprel-dataset") throw IoError("not a kooprel dataset: " + metadata_path.string());
    if (meta.at("version").get<int>() != kDatasetFormatVersion) {
      throw IoError("dataset format version " + std::to_string(meta.at("version").get<int>()) + " not supported");
    }
    if (meta.at("byte_order") != "little" || meta.at("dtype") != "f64") throw IoError("dataset: unsupported payload encoding");
    dynamics::Dataset ds;
    ds.system = meta.at("system").get<std::string>();
    ds.mode = meta.at("mode").get<std::string>();
    ds.dt = meta.at("dt").get<double>();
    ds.n_steps = meta.at("n_steps").get<std::size_t>();
    ds.state_shape = meta.at("shapes").at("state").get<std::vector<std::size_t>>();
    ds.param_dim = meta.at("shapes").at("param_dim").get<std::size_t>();
    ds.seed = meta.at("seed").get<std::uint64_t>();
    for (const auto& d : meta.at("distributions")) ds.distributions.push_back(distribution_from_json(d));
    const std::size_t n_series = meta.at("n_series").get<std::size_t>();
    if (meta.at("shapes").at("series").get<std::size_t>() != n_series ||
        meta.at("shapes").at("time").get<std::size_t>() != ds.n_steps + 1) {
      throw IoError("dataset: shape fields disagree with n_series/n_steps");
    }

    const fs::path payload_path = metadata_path.parent_path() / meta.at("payload_file").get<std::string>();
    const std::string bytes = read_file(payload_path);
    if (bytes.size() != meta.at("payload_bytes").get<std::size_t>() ||
        sha256_hex(bytes) != meta.at("payload_sha256").get<std::string>()) {
      throw IoError("dataset payload '" + payload_path.string() + "' fails its checksum (truncated or corrupted)");
    }
    const std::size_t S = ds.state_size();
    const std::size_t expected = n_series * (ds.n_steps + 1) * S;
    if (bytes.size() != expected * sizeof(double)) {
      throw IoError("dataset: metadata shape implies " + std::to_string(expected) + " values, payload holds " +
                    std::to_string(bytes.size() / sizeof(double)) + (bytes.size() % 8 ? " (+ partial)" : ""));
    }
    const auto values = detail::decode_f64_le(bytes);
    const auto& prov = meta.at("provenance");
    if (prov.size() != n_series) throw IoError("dataset: provenance count != n_series");
    ds.series.resize(n_series);
    const std::size_t per = (ds.n_steps + 1) * S;
    for (std::size_t s = 0; s < n_series; ++s) {
      auto& tr = ds.series[s];
      tr.state_shape = ds.state_shape;
      tr.times = dynamics::uniform_times(ds.dt, ds.n_steps);
      tr.states.assign(values.begin() + static_cast<std::ptrdiff_t>(s * per),
                       values.begin() + static_cast<std::ptrdiff_t>((s + 1) * per));
      tr.provenance.system = ds.system;
      tr.provenance.index = prov[s].at("index").get<std::uint64_t>();
      tr.provenance.seed = prov[s].at("seed").get<std::uint64_t>();
      tr.provenance.inputs = prov[s].at("inputs").get<std::vector<double>>();
    }
    return ds;
  } catch (const Json::exception& e) {
    throw IoError("dataset metadata '" + metadata_path.string() + "': " + e.what());
  }
}

}  // namespace kooprel::store
