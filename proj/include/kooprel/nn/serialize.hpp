#pragma once

#include <string>
#include <vector>

#include <json.hpp>

#include "kooprel/nn/network.hpp"
#include "kooprel/nn/optimizer.hpp"

namespace kooprel::nn {

using Json = nlohmann::ordered_json;

inline Json to_json(const LayerSpec& l) {
  Json j;
  j["kind"] = to_string(l.kind);
  switch (l.kind) {
    case LayerKind::dense:
      j["in_dim"] = l.in_dim;
      j["out_dim"] = l.out_dim;
      j["bias"] = l.bias;
      break;
    case LayerKind::conv2d:
      j["in_channels"] = l.in_channels;
      j["out_channels"] = l.out_channels;
      j["kernel_size"] = l.kernel_size;
      j["stride"] = l.stride;
      j["padding"] = l.padding;
      j["bias"] = l.bias;
      break;
    case LayerKind::reshape:
      j["target_shape"] = l.target_shape;
      break;
    case LayerKind::upsample:
      j["factor"] = l.factor;
      break;
    default:
      break;
  }
  return j;
}

inline LayerSpec layer_from_json(const Json& j) {
  LayerSpec l;
  l.kind = layer_kind_from_string(j.at("kind").get<std::string>());
  switch (l.kind) {
    case LayerKind::dense:
      l.in_dim = j.at("in_dim").get<std::size_t>();
      l.out_dim = j.at("out_dim").get<std::size_t>();
      l.bias = j.at("bias").get<bool>();
      break;
    case LayerKind::conv2d:
      l.in_channels = j.at("in_channels").get<std::size_t>();
      l.out_channels = j.at("out_channels").get<std::size_t>();
      l.kernel_size = j.at("kernel_size").get<std::size_t>();
      l.stride = j.at("stride").get<std::size_t>();
      l.padding = j.at("padding").get<std::size_t>();
      l.bias = j.at("bias").get<bool>();
      break;
    case LayerKind::reshape:
      l.target_shape = j.at("target_shape").get<Shape>();
      break;
    case LayerKind::upsample:
      l.factor = j.at("factor").get<std::size_t>();
      break;
    default:
      break;
  }
  return l;
}

inline Json to_json(const NetworkSpec& s) {
  Json j;
  j["input_shape"] = s.input_shape;
  j["output_shape"] = s.output_shape;
  Json layers = Json::array();
  for (const auto& l : s.layers) layers.push_back(to_json(l));
  j["layers"] = std::move(layers);
  return j;
}

inline NetworkSpec spec_from_json(const Json& j) {
  NetworkSpec s;
  s.input_shape = j.at("input_shape").get<Shape>();
  s.output_shape = j.at("output_shape").get<Shape>();
  for (const auto& l : j.at("layers")) s.layers.push_back(layer_from_json(l));
  s.validate();
  return s;
}

// Parameters are stored as one array per layer {weight, bias}; doubles are
// printed in shortest round-trip form so reloading is bit-exact.
inline Json to_json(const Parameters& p) {
  Json arr = Json::array();
  for (const auto& l : p.layers) {
    Json jl;
    jl["weight"] = l.weight.data;
    jl["bias"] = l.bias.data;
    arr.push_back(std::move(jl));
  }
  return arr;
}

inline Parameters params_from_json(const Json& j, const NetworkSpec& spec) {
  Parameters p = zero_parameters(spec);
  if (!j.is_array() || j.size() != p.layers.size()) throw ConfigError("checkpoint: parameter layer count mismatch");
  for (std::size_t i = 0; i < p.layers.size(); ++i) {
    auto w = j[i].at("weight").get<std::vector<double>>();
    auto b = j[i].at("bias").get<std::vector<double>>();
    if (w.size() != p.layers[i].weight.size() || b.size() != p.layers[i].bias.size()) {
      throw ConfigError("checkpoint: parameter count mismatch at layer " + std::to_string(i));
    }
    p.layers[i].weight.data = std::move(w);
    p.layers[i].bias.data = std::move(b);
  }
  return p;
}

inline Json to_json(const AdamState& s) {
  Json j;
  j["kind"] = to_string(s.kind);
  j["step"] = s.step;
  j["lr"] = s.lr;
  j["beta1"] = s.beta1;
  j["beta2"] = s.beta2;
  j["eps"] = s.eps;
  j["m"] = to_json(s.m);
  j["v"] = to_json(s.v);
  return j;
}

inline AdamState adam_from_json(const Json& j, const NetworkSpec& spec) {
  AdamState s;
  s.kind = optimizer_from_string(j.at("kind").get<std::string>());
  s.step = j.at("step").get<std::uint64_t>();
  s.lr = j.at("lr").get<double>();
  s.beta1 = j.at("beta1").get<double>();
  s.beta2 = j.at("beta2").get<double>();
  s.eps = j.at("eps").get<double>();
  s.m = params_from_json(j.at("m"), spec);
  s.v = params_from_json(j.at("v"), spec);
  return s;
}

/// A network with its parameters, as stored in checkpoints.
struct Network {
  NetworkSpec spec;
  Parameters params;
  friend bool operator==(const Network&, const Network&) = default;
};

inline Json to_json(const Network& n) {
  Json j;
  j["spec"] = to_json(n.spec);
  j["parameters"] = to_json(n.params);
  return j;
}

inline Network network_from_json(const Json& j) {
  Network n;
  n.spec = spec_from_json(j.at("spec"));
  n.params = params_from_json(j.at("parameters"), n.spec);
  return n;
}

}  // namespace kooprel::nn
