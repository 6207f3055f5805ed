#pragma once

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <limits>
#include <random>
#include <string>
#include <vector>

#include "kooprel/nn/network.hpp"

namespace kooprel::nn {

struct GradCheckResult {
  double max_rel_error = 0.0;
  std::size_t checked = 0;
  std::size_t worst_index = 0;  // parameters first, then inputs
};

/// Compares backward() against central differences of the scalar
/// <upstream, forward(input)>. Relative error is |a - fd| / max(|a|, floor).
inline GradCheckResult gradient_check(const NetworkSpec& spec, const Parameters& params, const Tensor& input,
                                      const Tensor& upstream, double h = 1e-6, double floor = 1e-8) {
  const auto g = backward(spec, params, input, upstream);
  auto objective = [&](const Parameters& p, const Tensor& x) {
    const auto y = forward(spec, p, x);
    double s = 0.0;
    for (std::size_t i = 0; i < y.size(); ++i) s += upstream.data[i] * y.data[i];
    return s;
  };
  GradCheckResult r;
  auto record = [&](double analytic, double fd) {
    const double e = std::abs(analytic - fd) / std::max(std::abs(analytic), floor);
    if (e > r.max_rel_error) {
      r.max_rel_error = e;
      r.worst_index = r.checked;
    }
    ++r.checked;
  };

  Parameters p = params;
  auto flat = p.flatten();
  const auto ga = g.params.flatten();
  for (std::size_t i = 0; i < flat.size(); ++i) {
    const double orig = flat[i];
    flat[i] = orig + h;
    p.assign_flat(flat);
    const double up = objective(p, input);
    flat[i] = orig - h;
    p.assign_flat(flat);
    const double dn = objective(p, input);
    flat[i] = orig;
    record(ga[i], (up - dn) / (2.0 * h));
  }
  p.assign_flat(flat);
  Tensor x = input;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double orig = x.data[i];
    x.data[i] = orig + h;
    const double up = objective(params, x);
    x.data[i] = orig - h;
    const double dn = objective(params, x);
    x.data[i] = orig;
    record(g.input.data[i], (up - dn) / (2.0 * h));
  }
  return r;
}

/// Smallest |value| entering any ReLU for this input. Finite differences are
/// only meaningful when it is well above the step size.
inline double relu_margin(const NetworkSpec& spec, const Parameters& params, const Tensor& input) {
  const auto act = forward_batch(spec, params, input.data, 1);
  double m = std::numeric_limits<double>::infinity();
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    if (spec.layers[i].kind != LayerKind::relu) continue;
    for (double v : act.values[i]) m = std::min(m, std::abs(v));
  }
  return m;
}

enum class NetFamily { dense, conv, mixed };

/// Random small network (at most a few hundred parameters) of the given family.
inline NetworkSpec random_network(NetFamily family, std::mt19937_64& rng) {
  auto pick = [&](std::size_t lo, std::size_t hi) { return std::uniform_int_distribution<std::size_t>(lo, hi)(rng); };
  auto coin = [&] { return std::bernoulli_distribution(0.5)(rng); };
  std::vector<LayerSpec> layers;
  if (family == NetFamily::dense) {
    std::size_t in = pick(1, 5);
    const std::size_t input = in;
    const std::size_t depth = pick(1, 3);
    for (std::size_t d = 0; d < depth; ++d) {
      const std::size_t out = pick(1, 8);
      layers.push_back(LayerSpec::dense(in, out, coin()));
      if (d + 1 < depth) layers.push_back(LayerSpec::relu());
      in = out;
    }
    return NetworkSpec::make({input}, layers);
  }
  const std::size_t c = pick(1, 2);
  const std::size_t n = pick(4, 6);
  const std::size_t k = pick(1, 3);
  const std::size_t stride = family == NetFamily::mixed ? 2 : pick(1, 2);
  const std::size_t pad = k / 2;
  const std::size_t oc = pick(1, 3);
  layers.push_back(LayerSpec::conv2d(c, oc, k, stride, pad, coin()));
  layers.push_back(LayerSpec::relu());
  const std::size_t m = (n + 2 * pad - k) / stride + 1;
  if (family == NetFamily::conv) {
    const std::size_t oc2 = pick(1, 2);
    layers.push_back(LayerSpec::conv2d(oc, oc2, 3, 1, 1, coin()));
    layers.push_back(LayerSpec::flatten());
    layers.push_back(LayerSpec::dense(oc2 * m * m, pick(1, 4), coin()));
    return NetworkSpec::make({c, n, n}, layers);
  }
  // mixed: conv -> flatten -> dense -> reshape -> upsample -> conv
  layers.push_back(LayerSpec::flatten());
  const std::size_t side = 2;
  const std::size_t ch = pick(1, 2);
  layers.push_back(LayerSpec::dense(oc * m * m, ch * side * side, coin()));
  layers.push_back(LayerSpec::relu());
  layers.push_back(LayerSpec::reshape({ch, side, side}));
  layers.push_back(LayerSpec::upsample(2));
  layers.push_back(LayerSpec::conv2d(ch, 1, 3, 1, 1, coin()));
  return NetworkSpec::make({c, n, n}, layers);
}

/// Random parameters with nonzero biases so every code path is exercised.
inline Parameters random_parameters(const NetworkSpec& spec, std::mt19937_64& rng) {
  Parameters p = init_parameters(spec, rng);
  std::uniform_real_distribution<double> u(-0.5, 0.5);
  for (auto& l : p.layers)
    for (auto& b : l.bias.data) b = u(rng);
  return p;
}

}  // namespace kooprel::nn
