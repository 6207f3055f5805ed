#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <exception>
#include <random>
#include <span>
#include <stdexcept>
#include <string>
#include <thread>
#include <vector>

namespace kooprel {

inline constexpr const char* kVersion = "0.3.0";

/// Base of every error raised by the library. The CLI maps the subclasses
/// onto distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Invalid configuration, shapes, or arguments.
class ConfigError : public Error {
 public:
  using Error::Error;
};

/// Non-finite values, integration blow-up, training divergence.
class NumericError : public Error {
 public:
  using Error::Error;
};

/// File system or format problems (missing file, bad checksum, truncated payload).
class IoError : public Error {
 public:
  using Error::Error;
};

enum class ExitCode : int { ok = 0, other = 1, config = 2, numeric = 3, io = 4 };

inline ExitCode exit_code_for(const std::exception& e) {
  if (dynamic_cast<const ConfigError*>(&e)) return ExitCode::config;
  if (dynamic_cast<const NumericError*>(&e)) return ExitCode::numeric;
  if (dynamic_cast<const IoError*>(&e)) return ExitCode::io;
  return ExitCode::other;
}

inline void require(bool cond, const std::string& msg) {
  if (!cond) throw ConfigError(msg);
}

inline bool all_finite(std::span<const double> v) {
  return std::all_of(v.begin(), v.end(), [](double x) { return std::isfinite(x); });
}

// Independent RNG streams. Every consumer derives its generator from
// (seed, purpose, index) so results never depend on scheduling order.
enum class StreamTag : std::uint64_t {
  init = 1,
  shuffle = 2,
  dataset = 3,
  reliability = 4,
  sampler = 5,
  test = 6,
  series_shuffle = 7,
};

inline std::mt19937_64 make_stream(std::uint64_t seed, StreamTag tag, std::uint64_t index = 0) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(tag), static_cast<std::uint32_t>(index),
                    static_cast<std::uint32_t>(index >> 32)};
  return std::mt19937_64(seq);
}

inline std::size_t default_threads() {
  const unsigned n = std::thread::hardware_concurrency();
  return n == 0 ? 1 : n;
}

/// Runs fn(i) for i in [0, n) over `threads` workers with static chunking.
/// Callers write results into per-index slots, so output is independent of
/// the thread count. The first exception thrown by any worker is rethrown.
template <class Fn>
void parallel_for(std::size_t n, std::size_t threads, Fn&& fn) {
  threads = std::max<std::size_t>(1, std::min(threads, n));
  if (threads <= 1) {
    for (std::size_t i = 0; i < n; ++i) fn(i);
    return;
  }
  std::vector<std::exception_ptr> errors(threads);
  std::vector<std::thread> pool;
  pool.reserve(threads);
  const std::size_t chunk = (n + threads - 1) / threads;
  for (std::size_t t = 0; t < threads; ++t) {
    pool.emplace_back([&, t] {
      const std::size_t lo = t * chunk;
      const std::size_t hi = std::min(n, lo + chunk);
      try {
        for (std::size_t i = lo; i < hi; ++i) fn(i);
      } catch (...) {
        errors[t] = std::current_exception();
      }
    });
  }
  for (auto& th : pool) th.join();
  for (auto& e : errors) {
    if (e) std::rethrow_exception(e);
  }
}

}  // namespace kooprel
