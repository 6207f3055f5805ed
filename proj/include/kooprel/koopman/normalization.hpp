#pragma once

#include <cmath>
#include <cstddef>
#include <span>
#include <vector>

#include "kooprel/common.hpp"

namespace kooprel::koopman {

/// Per-feature affine map z = (x - mean) / scale.
struct Normalization {
  std::vector<double> mean;
  std::vector<double> scale;

  [[nodiscard]] std::size_t dim() const { return mean.size(); }
  [[nodiscard]] bool empty() const { return mean.empty(); }

  static Normalization identity(std::size_t dim) {
    return {std::vector<double>(dim, 0.0), std::vector<double>(dim, 1.0)};
  }

  /// Fits mean and population standard deviation over `rows` (row-major,
  /// each row `dim` features). Features with (numerically) zero spread get
  /// scale 1, so they pass through shifted only.
  static Normalization fit(std::span<const double> rows, std::size_t dim) {
    require(dim > 0 && !rows.empty() && rows.size() % dim == 0, "normalization: bad data layout");
    const std::size_t n = rows.size() / dim;
    Normalization s{std::vector<double>(dim, 0.0), std::vector<double>(dim, 0.0)};
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < dim; ++c) s.mean[c] += rows[r * dim + c];
    for (auto& m : s.mean) m /= static_cast<double>(n);
    for (std::size_t r = 0; r < n; ++r)
      for (std::size_t c = 0; c < dim; ++c) {
        const double d = rows[r * dim + c] - s.mean[c];
        s.scale[c] += d * d;
      }
    for (std::size_t c = 0; c < dim; ++c) {
      const double sd = std::sqrt(s.scale[c] / static_cast<double>(n));
      s.scale[c] = sd > 1e-12 * (1.0 + std::abs(s.mean[c])) ? sd : 1.0;
    }
    return s;
  }

  void normalize(std::span<const double> x, std::span<double> out) const {
    check(x.size());
    for (std::size_t i = 0; i < x.size(); ++i) {
      const std::size_t c = i % dim();
      out[i] = (x[i] - mean[c]) / scale[c];
    }
  }
  void denormalize(std::span<const double> z, std::span<double> out) const {
    check(z.size());
    for (std::size_t i = 0; i < z.size(); ++i) {
      const std::size_t c = i % dim();
      out[i] = z[i] * scale[c] + mean[c];
    }
  }
  [[nodiscard]] std::vector<double> normalize(std::span<const double> x) const {
    std::vector<double> out(x.size());
    normalize(x, out);
    return out;
  }
  [[nodiscard]] std::vector<double> denormalize(std::span<const double> z) const {
    std::vector<double> out(z.size());
    denormalize(z, out);
    return out;
  }

  friend bool operator==(const Normalization&, const Normalization&) = default;

 private:
  void check(std::size_t n) const {
    if (empty()) throw ConfigError("normalization: statistics missing");
    if (n % dim() != 0) throw ConfigError("normalization: value count not a multiple of feature count");
  }
};

}  // namespace kooprel::koopman
