#pragma once

#include <cmath>
#include <cstdint>
#include <string>

#include "kooprel/nn/network.hpp"

namespace kooprel::nn {

enum class OptimizerKind { adam, sgd };

inline OptimizerKind optimizer_from_string(const std::string& s) {
  if (s == "adam") return OptimizerKind::adam;
  if (s == "sgd") return OptimizerKind::sgd;
  throw ConfigError("unknown optimizer '" + s + "' (expected adam or sgd)");
}
inline const char* to_string(OptimizerKind k) { return k == OptimizerKind::adam ? "adam" : "sgd"; }

/// Adam moments for one Parameters block. With kind == sgd the moments are
/// left untouched and the update is p -= lr * g.
struct AdamState {
  OptimizerKind kind = OptimizerKind::adam;
  Parameters m;
  Parameters v;
  std::uint64_t step = 0;
  double lr = 1e-3;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;

  static AdamState for_params(const NetworkSpec& spec, double lr, OptimizerKind kind = OptimizerKind::adam) {
    if (!(lr > 0.0)) throw ConfigError("optimizer: learning rate must be > 0");
    AdamState s;
    s.kind = kind;
    s.m = zero_parameters(spec);
    s.v = zero_parameters(spec);
    s.lr = lr;
    return s;
  }

  friend bool operator==(const AdamState&, const AdamState&) = default;
};

inline void adam_step(Parameters& params, const Parameters& grads, AdamState& state) {
  if (params.layers.size() != grads.layers.size() || params.total_count() != grads.total_count() ||
      (state.kind == OptimizerKind::adam && state.m.total_count() != params.total_count())) {
    throw ConfigError("adam_step: parameter/gradient/state shapes differ");
  }
  ++state.step;
  const double t = static_cast<double>(state.step);
  const double c1 = 1.0 - std::pow(state.beta1, t);
  const double c2 = 1.0 - std::pow(state.beta2, t);
  for (std::size_t li = 0; li < params.layers.size(); ++li) {
    auto update = [&](std::vector<double>& p, const std::vector<double>& g, std::vector<double>& m,
                      std::vector<double>& v) {
      if (p.size() != g.size()) throw ConfigError("adam_step: shape mismatch at layer " + std::to_string(li));
      if (state.kind == OptimizerKind::sgd) {
        for (std::size_t i = 0; i < p.size(); ++i) p[i] -= state.lr * g[i];
        return;
      }
      for (std::size_t i = 0; i < p.size(); ++i) {
        m[i] = state.beta1 * m[i] + (1.0 - state.beta1) * g[i];
        v[i] = state.beta2 * v[i] + (1.0 - state.beta2) * g[i] * g[i];
        p[i] -= state.lr * (m[i] / c1) / (std::sqrt(v[i] / c2) + state.eps);
      }
    };
    auto& pl = params.layers[li];
    const auto& gl = grads.layers[li];
    auto& ml = state.kind == OptimizerKind::adam ? state.m.layers[li] : pl;
    auto& vl = state.kind == OptimizerKind::adam ? state.v.layers[li] : pl;
    if (!pl.weight.empty()) update(pl.weight.data, gl.weight.data, ml.weight.data, vl.weight.data);
    if (!pl.bias.empty()) update(pl.bias.data, gl.bias.data, ml.bias.data, vl.bias.data);
  }
}

}  // namespace kooprel::nn
