#pragma once

#include <chrono>
#include <cstdint>
#include <ctime>
#include <filesystem>
#include <string>
#include <vector>

#include <json.hpp>

#include "kooprel/common.hpp"
#include "kooprel/store/files.hpp"

namespace kooprel::store {

using Json = nlohmann::ordered_json;

/// Provenance record of one command invocation. Timestamps and timings live
/// only here, so every other artifact is byte-identical across reruns.
class RunManifest {
 public:
  RunManifest(std::string command, const Json& config)
      : command_(std::move(command)), config_sha256_(sha256_hex(config.dump())),
        started_(std::chrono::system_clock::now()), t0_(std::chrono::steady_clock::now()) {}

  void add_seed(const std::string& name, std::uint64_t seed) { seeds_[name] = seed; }
  void add_input(const fs::path& p) { inputs_.push_back(entry(p)); }
  void add_output(const fs::path& p) { outputs_.push_back(entry(p)); }
  void add_timing(const std::string& name, double seconds) { timings_[name] = seconds; }

  [[nodiscard]] const std::string& config_sha256() const { return config_sha256_; }

  /// Digests outputs as they are on disk now; call after writing them.
  [[nodiscard]] Json to_json() const {
    Json j;
    j["format"] = "kooprel-manifest";
    j["tool_version"] = kVersion;
    j["command"] = command_;
    j["config_sha256"] = config_sha256_;
    j["seeds"] = seeds_.is_null() ? Json::object() : seeds_;
    j["inputs"] = inputs_;
    j["outputs"] = outputs_;
    Json t = timings_.is_null() ? Json::object() : timings_;
    t["started_utc"] = iso8601(started_);
    t["finished_utc"] = iso8601(std::chrono::system_clock::now());
    t["wall_seconds"] = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0_).count();
    j["timings"] = t;
    return j;
  }

  void write(const fs::path& path) const { write_file_atomic(path, to_json().dump(1)); }

 private:
  static Json entry(const fs::path& p) {
    Json e;
    e["path"] = p.string();
    e["sha256"] = file_sha256(p);
    return e;
  }

  static std::string iso8601(std::chrono::system_clock::time_point tp) {
    const std::time_t t = std::chrono::system_clock::to_time_t(tp);
    std::tm tm{};
    gmtime_r(&t, &tm);
    char buf[32];
    std::strftime(buf, sizeof buf, "%Y-%m-%dT%H:%M:%SZ", &tm);
    return buf;
  }

  std::string command_;
  std::string config_sha256_;
  Json seeds_;
  Json inputs_ = Json::array();
  Json outputs_ = Json::array();
  Json timings_;
  std::chrono::system_clock::time_point started_;
  std::chrono::steady_clock::time_point t0_;
};

}  // namespace kooprel::store
