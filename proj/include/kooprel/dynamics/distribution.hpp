#pragma once

#include <cmath>
#include <cstdint>
#include <random>
#include <string>
#include <vector>

#include "kooprel/common.hpp"

namespace kooprel::dynamics {

enum class DistKind { uniform, truncated_gaussian, truncated_lognormal, constant };

inline const char* to_string(DistKind k) {
  switch (k) {
    case DistKind::uniform: return "uniform";
    case DistKind::truncated_gaussian: return "truncated_gaussian";
    case DistKind::truncated_lognormal: return "truncated_lognormal";
    case DistKind::constant: return "constant";
  }
  return "?";
}

inline DistKind dist_kind_from_string(const std::string& s) {
  if (s == "uniform") return DistKind::uniform;
  if (s == "truncated_gaussian" || s == "gaussian") return DistKind::truncated_gaussian;
  if (s == "truncated_lognormal" || s == "lognormal") return DistKind::truncated_lognormal;
  if (s == "constant") return DistKind::constant;
  throw ConfigError("unknown distribution kind '" + s + "'");
}

/// A scalar distribution supported on [a, b].
///
/// truncated_gaussian: N((a+b)/2, ((b-a)/6)^2) restricted to [a, b].
/// truncated_lognormal: a + exp(Y), Y ~ N(log((b-a)/2), (log 2 / 3)^2), so the
/// median sits at (a+b)/2 and +3 sd of Y lands on b; draws >= b are rejected.
/// The lower tail is bounded by a through the exponential.
/// constant: a point mass at a (b is ignored).
struct Distribution {
  DistKind kind = DistKind::uniform;
  double a = 0.0;
  double b = 1.0;

  static Distribution uniform(double a, double b) { return {DistKind::uniform, a, b}; }
  static Distribution gaussian(double a, double b) { return {DistKind::truncated_gaussian, a, b}; }
  static Distribution lognormal(double a, double b) { return {DistKind::truncated_lognormal, a, b}; }
  static Distribution constant(double value) { return {DistKind::constant, value, value}; }

  void validate() const {
    require(std::isfinite(a) && std::isfinite(b), "distribution: support must be finite");
    if (kind != DistKind::constant) {
      require(a < b, "distribution: invalid support [" + std::to_string(a) + ", " + std::to_string(b) + "]");
    }
  }

  [[nodiscard]] double lognormal_mu() const { return std::log((b - a) / 2.0); }
  [[nodiscard]] static double lognormal_sigma() { return std::log(2.0) / 3.0; }

  friend bool operator==(const Distribution&, const Distribution&) = default;
};

inline double draw(const Distribution& d, std::mt19937_64& rng) {
  switch (d.kind) {
    case DistKind::constant:
      return d.a;
    case DistKind::uniform: {
      std::uniform_real_distribution<double> u(d.a, d.b);
      double x = u(rng);
      // uniform_real_distribution may return b through rounding.
      while (x >= d.b) x = u(rng);
      return x;
    }
    case DistKind::truncated_gaussian: {
      std::normal_distribution<double> g(0.5 * (d.a + d.b), (d.b - d.a) / 6.0);
      for (;;) {
        const double x = g(rng);
        if (x > d.a && x < d.b) return x;
      }
    }
    case DistKind::truncated_lognormal: {
      std::normal_distribution<double> g(d.lognormal_mu(), Distribution::lognormal_sigma());
      for (;;) {
        const double x = d.a + std::exp(g(rng));
        if (x > d.a && x < d.b) return x;
      }
    }
  }
  return d.a;
}

/// n i.i.d. draws from one seeded stream.
inline std::vector<double> sample(const Distribution& d, std::size_t n, std::uint64_t seed) {
  d.validate();
  require(n >= 1, "sample: n must be >= 1");
  auto rng = make_stream(seed, StreamTag::sampler);
  std::vector<double> out(n);
  for (auto& x : out) x = draw(d, rng);
  return out;
}

/// One draw per input, in order, from the stream of (seed, tag, index). This
/// is the single source of stochastic inputs for both data generation and
/// Monte-Carlo runs, so paired providers see identical samples.
inline std::vector<double> draw_inputs(const std::vector<Distribution>& dists, std::uint64_t seed, StreamTag tag,
                                       std::uint64_t index) {
  auto rng = make_stream(seed, tag, index);
  std::vector<double> x(dists.size());
  for (std::size_t i = 0; i < dists.size(); ++i) x[i] = draw(dists[i], rng);
  return x;
}

}  // namespace kooprel::dynamics
