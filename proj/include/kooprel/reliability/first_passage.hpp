#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "kooprel/common.hpp"
#include "kooprel/dynamics/trajectory.hpp"

namespace kooprel::reliability {

enum class Crossing { up, down };

/// Limit state over a set of monitored state components.
///
/// `channels` are flat indices into the state vector (for the Burgers fields
/// use burgers_probe()). Failure is the first step k in [0, horizon_steps]
/// at which any monitored value strictly exceeds its threshold (or, for
/// Crossing::down, falls strictly below it). If
/// `time_varying` is non-empty it holds one threshold row per step
/// (horizon_steps + 1 rows, one entry per channel) and overrides `thresholds`.
struct LimitState {
  std::vector<std::size_t> channels;
  std::vector<double> thresholds;
  std::vector<std::vector<double>> time_varying;
  std::size_t horizon_steps = 40;
  Crossing direction = Crossing::up;

  [[nodiscard]] bool violated(double value, std::size_t step, std::size_t c) const {
    return direction == Crossing::up ? value > threshold(step, c) : value < threshold(step, c);
  }
  [[nodiscard]] double threshold(std::size_t step, std::size_t c) const {
    return time_varying.empty() ? thresholds[c] : time_varying[step][c];
  }

  void validate(std::size_t state_size) const {
    require(!channels.empty(), "limit state: no monitored channels");
    require(horizon_steps >= 1, "limit state: horizon must be >= 1 step");
    require(thresholds.size() == channels.size(), "limit state: need one threshold per channel");
    for (double t : thresholds) require(std::isfinite(t), "limit state: thresholds must be finite");
    for (auto c : channels) {
      if (c >= state_size) {
        throw ConfigError("limit state: channel index " + std::to_string(c) + " out of range for state size " +
                          std::to_string(state_size));
      }
    }
    if (!time_varying.empty()) {
      require(time_varying.size() == horizon_steps + 1, "limit state: time-varying thresholds need horizon+1 rows");
      for (const auto& row : time_varying) {
        require(row.size() == channels.size(), "limit state: time-varying row size != channel count");
        for (double t : row) require(std::isfinite(t), "limit state: thresholds must be finite");
      }
    }
  }
};

inline const char* to_string(Crossing c) { return c == Crossing::up ? "up" : "down"; }
inline Crossing crossing_from_string(const std::string& s) {
  if (s == "up") return Crossing::up;
  if (s == "down") return Crossing::down;
  throw ConfigError("limit state: direction must be 'up' or 'down', got '" + s + "'");
}

/// Flat state index of grid node (ix, iy) of a field (0 = u, 1 = v) in a
/// {2, n, n} Burgers state.
inline std::size_t burgers_probe(std::size_t field, std::size_t ix, std::size_t iy, std::size_t grid_n) {
  require(field < 2 && ix < grid_n && iy < grid_n, "burgers probe out of range");
  return field * grid_n * grid_n + iy * grid_n + ix;
}

/// Outcome of one sample: failure time or censored.
struct Passage {
  bool failed = false;
  std::size_t step = 0;
  double tau = 0.0;
  friend bool operator==(const Passage&, const Passage&) = default;
};

inline Passage first_passage_time(const dynamics::Trajectory& tr, const LimitState& limit) {
  limit.validate(tr.state_size());
  if (tr.length() < limit.horizon_steps + 1) {
    throw ConfigError("first_passage_time: trajectory has " + std::to_string(tr.length()) + " rows, horizon needs " +
                      std::to_string(limit.horizon_steps + 1));
  }
  for (std::size_t k = 0; k <= limit.horizon_steps; ++k) {
    const auto row = tr.row(k);
    for (std::size_t c = 0; c < limit.channels.size(); ++c) {
      if (limit.violated(row[limit.channels[c]], k, c)) return {true, k, tr.times[k]};
    }
  }
  return {};
}

/// Fraction of samples that failed within the horizon.
inline double failure_probability(std::span<const Passage> passages) {
  require(!passages.empty(), "failure_probability: no samples");
  const auto n = std::count_if(passages.begin(), passages.end(), [](const Passage& p) { return p.failed; });
  return static_cast<double>(n) / static_cast<double>(passages.size());
}

inline std::vector<double> failure_times(std::span<const Passage> passages) {
  std::vector<double> t;
  for (const auto& p : passages)
    if (p.failed) t.push_back(p.tau);
  return t;
}

/// Density-normalized histogram: sum(density * width) == 1.
struct Histogram {
  std::vector<double> edges;    // bins + 1
  std::vector<double> density;  // bins
  std::vector<std::size_t> counts;
};

/// Gaussian kernel density estimate sampled on a grid.
struct KdeCurve {
  double bandwidth = 0.0;
  std::vector<double> x;
  std::vector<double> density;
};

inline Histogram histogram(std::span<const double> values, std::size_t bins, double lo, double hi) {
  require(!values.empty(), "histogram: no uncensored samples");
  require(bins >= 1, "histogram: bins must be >= 1");
  require(hi > lo, "histogram: empty range");
  Histogram h;
  h.edges.resize(bins + 1);
  const double w = (hi - lo) / static_cast<double>(bins);
  for (std::size_t i = 0; i <= bins; ++i) h.edges[i] = lo + w * static_cast<double>(i);
  h.edges[bins] = hi;
  h.counts.assign(bins, 0);
  for (double v : values) {
    if (v < lo || v > hi) throw ConfigError("histogram: value outside range");
    auto i = static_cast<std::size_t>((v - lo) / w);
    h.counts[std::min(i, bins - 1)]++;
  }
  h.density.resize(bins);
  const double n = static_cast<double>(values.size());
  for (std::size_t i = 0; i < bins; ++i) {
    h.density[i] = static_cast<double>(h.counts[i]) / (n * (h.edges[i + 1] - h.edges[i]));
  }
  return h;
}

/// Histogram over [min, max] of the values (widened by 0.5 if degenerate).
inline Histogram histogram(std::span<const double> values, std::size_t bins) {
  require(!values.empty(), "histogram: no uncensored samples");
  auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  double lo = *mn, hi = *mx;
  if (hi <= lo) {
    lo -= 0.5;
    hi += 0.5;
  }
  return histogram(values, bins, lo, hi);
}

/// Silverman's rule 0.9 min(sd, IQR/1.34) n^-1/5, with fallbacks for
/// degenerate samples.
inline double silverman_bandwidth(std::span<const double> values) {
  std::vector<double> v(values.begin(), values.end());
  std::sort(v.begin(), v.end());
  const double n = static_cast<double>(v.size());
  double mean = 0.0;
  for (double x : v) mean += x;
  mean /= n;
  double var = 0.0;
  for (double x : v) var += (x - mean) * (x - mean);
  const double sd = v.size() > 1 ? std::sqrt(var / (n - 1.0)) : 0.0;
  auto quantile = [&](double q) {
    const double pos = q * (n - 1.0);
    const auto i = static_cast<std::size_t>(pos);
    const double f = pos - static_cast<double>(i);
    return i + 1 < v.size() ? v[i] * (1.0 - f) + v[i + 1] * f : v[i];
  };
  const double iqr = quantile(0.75) - quantile(0.25);
  double spread = sd;
  if (iqr > 0.0) spread = std::min(sd, iqr / 1.34);
  double h = 0.9 * spread * std::pow(n, -0.2);
  if (!(h > 0.0)) h = 1.06 * sd * std::pow(n, -0.2);
  if (!(h > 0.0)) h = 1e-3 * std::max(1.0, std::abs(mean));
  return h;
}

inline KdeCurve kde(std::span<const double> values, std::size_t points = 200, double bandwidth = 0.0) {
  require(!values.empty(), "kde: no uncensored samples");
  require(points >= 2, "kde: need at least two grid points");
  KdeCurve k;
  k.bandwidth = bandwidth > 0.0 ? bandwidth : silverman_bandwidth(values);
  auto [mn, mx] = std::minmax_element(values.begin(), values.end());
  const double lo = *mn - 3.0 * k.bandwidth, hi = *mx + 3.0 * k.bandwidth;
  k.x.resize(points);
  k.density.assign(points, 0.0);
  const double norm = 1.0 / (static_cast<double>(values.size()) * k.bandwidth * std::sqrt(2.0 * M_PI));
  for (std::size_t i = 0; i < points; ++i) {
    k.x[i] = lo + (hi - lo) * static_cast<double>(i) / static_cast<double>(points - 1);
    double s = 0.0;
    for (double v : values) {
      const double u = (k.x[i] - v) / k.bandwidth;
      s += std::exp(-0.5 * u * u);
    }
    k.density[i] = s * norm;
  }
  return k;
}

struct PdfEstimate {
  Histogram histogram;
  KdeCurve kde;
};

/// Histogram plus KDE overlay of uncensored failure times.
inline PdfEstimate estimate_pdf(std::span<const double> times, std::size_t bins, double bandwidth = 0.0) {
  if (times.empty()) throw ConfigError("estimate_pdf: every sample is censored");
  if (times.size() < 2) throw ConfigError("estimate_pdf: need at least two uncensored samples");
  return {histogram(times, bins), kde(times, 200, bandwidth)};
}

}  // namespace kooprel::reliability
