#pragma once

#include <algorithm>
#include <filesystem>
#include <optional>
#include <sstream>
#include <string>
#include <vector>

#include <json.hpp>

#include "kooprel/koopman/train.hpp"
#include "kooprel/reliability/monte_carlo.hpp"
#include "kooprel/store/files.hpp"

namespace kooprel::store {

using Json = nlohmann::ordered_json;

inline constexpr const char* kResultsFormat = "kooprel-results";

/// Per-provider file names inside a reliability output directory.
struct ResultFiles {
  std::string histogram;
  std::string failure_times;
  std::string kde;
};

inline ResultFiles result_files_for(const std::string& provider) {
  return {"histogram_" + provider + ".csv", "failure_times_" + provider + ".csv", "kde_" + provider + ".csv"};
}

inline Json optional_json(const std::optional<double>& v) { return v ? Json(*v) : Json(nullptr); }

inline Json to_json(const reliability::FirstPassageResult& r) {
  Json j;
  j["method"] = r.provider;
  j["n_samples"] = r.n_samples;
  j["censored"] = r.censored;
  j["failures"] = r.n_samples - r.censored;
  j["truncated"] = r.truncated;
  j["pf"] = r.pf;
  j["beta"] = optional_json(r.beta);
  if (!r.beta) j["beta_message"] = r.beta_message;
  j["beta_reference"] = optional_json(r.beta_reference);
  j["epsilon_percent"] = optional_json(r.epsilon_percent);
  j["dt"] = r.dt;
  j["horizon_steps"] = r.horizon_steps;
  const auto files = result_files_for(r.provider);
  j["histogram_csv"] = r.histogram.density.empty() ? Json(nullptr) : Json(files.histogram);
  j["failure_times_csv"] = files.failure_times;
  return j;
}

inline std::string histogram_csv(const reliability::Histogram& h) {
  std::ostringstream out;
  out << "bin_left,bin_right,density\n";
  for (std::size_t i = 0; i < h.density.size(); ++i) {
    out << fmt_double(h.edges[i]) << ',' << fmt_double(h.edges[i + 1]) << ',' << fmt_double(h.density[i]) << '\n';
  }
  return out.str();
}

/// One row per sample; censored samples read "censored".
inline std::string failure_times_csv(const std::vector<reliability::Passage>& passages) {
  std::ostringstream out;
  out << "sample_index,tau_or_censored\n";
  for (std::size_t i = 0; i < passages.size(); ++i) {
    out << i << ',' << (passages[i].failed ? fmt_double(passages[i].tau) : std::string("censored")) << '\n';
  }
  return out.str();
}

inline std::string kde_csv(const reliability::KdeCurve& k) {
  std::ostringstream out;
  out << "x,density\n";
  for (std::size_t i = 0; i < k.x.size(); ++i) out << fmt_double(k.x[i]) << ',' << fmt_double(k.density[i]) << '\n';
  return out.str();
}

/// Writes the CSV artifacts of one provider run into `dir`; returns the
/// paths written.
inline std::vector<fs::path> write_result_csvs(const reliability::FirstPassageResult& r, const fs::path& dir) {
  std::vector<fs::path> written;
  const auto files = result_files_for(r.provider);
  write_file_atomic(dir / files.failure_times, failure_times_csv(r.passages));
  written.push_back(dir / files.failure_times);
  if (!r.histogram.density.empty()) {
    write_file_atomic(dir / files.histogram, histogram_csv(r.histogram));
    written.push_back(dir / files.histogram);
    const auto times = reliability::failure_times(r.passages);
    write_file_atomic(dir / files.kde, kde_csv(reliability::kde(times)));
    written.push_back(dir / files.kde);
  }
  return written;
}

/// Per-epoch loss table of a training run.
inline std::string train_report_csv(const koopman::TrainReport& r) {
  std::ostringstream out;
  out << "epoch,train_total,train_reconstruction,train_linearity,train_prediction,train_rollout,"
         "val_total,val_reconstruction,val_linearity,val_prediction,val_rollout\n";
  for (const auto& e : r.epochs) {
    out << e.epoch << ',' << fmt_double(e.train.total) << ',' << fmt_double(e.train.reconstruction) << ','
        << fmt_double(e.train.linearity) << ',' << fmt_double(e.train.prediction) << ','
        << fmt_double(e.train.rollout) << ',' << fmt_double(e.validation.total) << ','
        << fmt_double(e.validation.reconstruction) << ',' << fmt_double(e.validation.linearity) << ','
        << fmt_double(e.validation.prediction) << ',' << fmt_double(e.validation.rollout) << '\n';
  }
  return out.str();
}

/// One summary row of the report table.
struct SummaryRow {
  std::string experiment;
  std::string test_set;
  std::string method;
  std::optional<double> beta;
  double pf = 0.0;
  std::size_t n_samples = 0;
  std::optional<double> epsilon_percent;
  std::optional<double> ks;
};

/// Collects the rows of every results JSON under `dir` (recursively), in
/// path order. Throws IoError when there are none.
inline std::vector<SummaryRow> collect_results(const fs::path& dir) {
  std::error_code ec;
  if (!fs::is_directory(dir, ec)) throw IoError("report: '" + dir.string() + "' is not a directory");
  std::vector<fs::path> files;
  for (const auto& e : fs::recursive_directory_iterator(dir, ec)) {
    if (e.is_regular_file() && e.path().extension() == ".json") files.push_back(e.path());
  }
  if (ec) throw IoError("report: cannot scan '" + dir.string() + "': " + ec.message());
  std::sort(files.begin(), files.end());
  std::vector<SummaryRow> rows;
  for (const auto& f : files) {
    Json j;
    try {
      j = Json::parse(read_file(f));
    } catch (const Json::exception&) {
      continue;
    }
    if (!j.is_object() || j.value("format", "") != kResultsFormat) continue;
    try {
      const auto experiment = j.at("experiment").get<std::string>();
      const auto test_set = j.value("test_set", std::string());
      for (const auto& run : j.at("runs")) {
        SummaryRow r;
        r.experiment = experiment;
        r.test_set = test_set;
        r.method = run.at("method").get<std::string>();
        if (!run.at("beta").is_null()) r.beta = run.at("beta").get<double>();
        r.pf = run.at("pf").get<double>();
        r.n_samples = run.at("n_samples").get<std::size_t>();
        if (!run.at("epsilon_percent").is_null()) r.epsilon_percent = run.at("epsilon_percent").get<double>();
        if (run.contains("ks_vs_reference") && !run.at("ks_vs_reference").is_null()) {
          r.ks = run.at("ks_vs_reference").get<double>();
        }
        rows.push_back(r);
      }
    } catch (const Json::exception& e) {
      throw IoError("report: malformed results file '" + f.string() + "': " + e.what());
    }
  }
  if (rows.empty()) throw IoError("report: no reliability results found under '" + dir.string() + "'");
  return rows;
}

inline std::string summary_csv(const std::vector<SummaryRow>& rows) {
  auto opt = [](const std::optional<double>& v) { return v ? fmt_double(*v) : std::string(); };
  std::ostringstream out;
  out << "experiment,test_set,method,beta,pf,n_samples,epsilon_percent,ks\n";
  for (const auto& r : rows) {
    out << r.experiment << ',' << r.test_set << ',' << r.method << ',' << opt(r.beta) << ',' << fmt_double(r.pf) << ',' << r.n_samples
        << ',' << opt(r.epsilon_percent) << ',' << opt(r.ks) << '\n';
  }
  return out.str();
}

inline std::string summary_table(const std::vector<SummaryRow>& rows) {
  auto cell = [](const std::optional<double>& v, int prec) {
    if (!v) return std::string("-");
    std::ostringstream s;
    s.setf(std::ios::fixed);
    s.precision(prec);
    s << *v;
    return s.str();
  };
  std::size_t w_exp = 10, w_t = 8, w_m = 6;
  for (const auto& r : rows) {
    w_exp = std::max(w_exp, r.experiment.size());
    w_t = std::max(w_t, r.test_set.size());
    w_m = std::max(w_m, r.method.size());
  }
  auto pad = [](std::string s, std::size_t w) {
    s.resize(std::max(s.size(), w), ' ');
    return s;
  };
  std::ostringstream out;
  out << pad("experiment", w_exp) << "  " << pad("test_set", w_t) << "  " << pad("method", w_m) << "  " << pad("beta", 8) << "  " << pad("P_f", 8)
      << "  " << pad("N_s", 7) << "  " << pad("eps(%)", 7) << "  ks\n";
  for (const auto& r : rows) {
    out << pad(r.experiment, w_exp) << "  " << pad(r.test_set, w_t) << "  " << pad(r.method, w_m) << "  " << pad(cell(r.beta, 3), 8) << "  "
        << pad(cell(r.pf, 4), 8) << "  " << pad(std::to_string(r.n_samples), 7) << "  "
        << pad(cell(r.epsilon_percent, 2), 7) << "  " << cell(r.ks, 3) << '\n';
  }
  return out.str();
}

}  // namespace kooprel::store
