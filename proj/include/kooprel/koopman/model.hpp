#pragma once

#include <cstddef>
#include <cstdint>
#include <random>
#include <span>
#include <string>
#include <vector>

#include "kooprel/common.hpp"
#include "kooprel/koopman/normalization.hpp"
#include "kooprel/nn/network.hpp"
#include "kooprel/nn/serialize.hpp"

namespace kooprel::koopman {

enum class Variant { ic_uncertainty, parameter_uncertainty };

inline const char* to_string(Variant v) {
  return v == Variant::ic_uncertainty ? "ic_uncertainty" : "parameter_uncertainty";
}
inline Variant variant_from_string(const std::string& s) {
  if (s == "ic_uncertainty") return Variant::ic_uncertainty;
  if (s == "parameter_uncertainty") return Variant::parameter_uncertainty;
  throw ConfigError("unknown Koopman variant '" + s + "'");
}

struct LossWeights {
  double lambda1 = 1.0;
  double lambda2 = 1.0;
  double lambda3 = 1.0;

  void validate() const {
    require(lambda1 >= 0 && lambda2 >= 0 && lambda3 >= 0, "loss weights must be nonnegative");
    require(lambda1 > 0 || lambda2 > 0 || lambda3 > 0, "at least one loss weight must be positive");
  }
  friend bool operator==(const LossWeights&, const LossWeights&) = default;
};

/// Encoder/decoder topology.
///
/// Dense (ODE systems): state(+params) -> hidden... -> latent and back, ReLU
/// on hidden layers. Conv (2-D fields): five stride-2 3x3 convolutions over
/// `conv_channels`, then dense layers `dense_hidden` ending at the latent
/// size; the decoder mirrors it with nearest-neighbour upsampling.
struct Architecture {
  std::size_t latent_dim = 32;
  std::vector<std::size_t> hidden = {64, 64};
  bool conv = false;
  std::vector<std::size_t> conv_channels = {8, 16, 32, 64, 64};
  std::vector<std::size_t> dense_hidden = {128, 128};
  friend bool operator==(const Architecture&, const Architecture&) = default;
};

/// Encoder, linear Koopman layer, decoder, and the data statistics they were
/// trained on. All three networks operate in normalized coordinates.
struct KoopmanModel {
  Variant variant = Variant::ic_uncertainty;
  nn::Network encoder;
  nn::Network koopman;  // one bias-free dense layer latent -> latent
  nn::Network decoder;
  std::size_t state_dim = 0;
  std::size_t latent_dim = 0;
  std::size_t param_dim = 0;
  std::vector<std::size_t> state_shape;
  double dt = 0.0;
  Normalization state_norm;
  Normalization param_norm;
  LossWeights weights;

  /// Row-major latent_dim x latent_dim.
  [[nodiscard]] const std::vector<double>& koopman_matrix() const { return koopman.params.layers.at(0).weight.data; }
  std::vector<double>& koopman_matrix() { return koopman.params.layers.at(0).weight.data; }

  void validate() const {
    encoder.spec.validate();
    decoder.spec.validate();
    koopman.spec.validate();
    nn::check_parameters(encoder.spec, encoder.params);
    nn::check_parameters(decoder.spec, decoder.params);
    nn::check_parameters(koopman.spec, koopman.params);
    require(variant == Variant::parameter_uncertainty ? param_dim > 0 : param_dim == 0,
            "koopman model: param_dim inconsistent with variant");
    require(encoder.spec.output_size() == latent_dim, "koopman model: encoder output != latent_dim");
    require(koopman.spec.input_size() == latent_dim && koopman.spec.output_size() == latent_dim,
            "koopman model: Koopman layer is not latent x latent");
    require(koopman.spec.layers.size() == 1 && koopman.spec.layers[0].kind == nn::LayerKind::dense &&
                !koopman.spec.layers[0].bias,
            "koopman model: Koopman layer must be one bias-free dense layer");
    require(decoder.spec.output_size() == state_dim, "koopman model: decoder output != state_dim");
    require(encoder.spec.input_size() == state_dim + param_dim, "koopman model: encoder input != state+param dims");
    require(decoder.spec.input_size() == latent_dim + param_dim, "koopman model: decoder input != latent+param dims");
    require(state_norm.dim() == state_dim, "koopman model: state normalization missing");
    require(param_norm.dim() == param_dim, "koopman model: parameter normalization missing");
  }

  friend bool operator==(const KoopmanModel&, const KoopmanModel&) = default;
};

// ---------------------------------------------------------------------------
// Architecture builders.

inline nn::NetworkSpec dense_mlp(std::size_t in, const std::vector<std::size_t>& hidden, std::size_t out) {
  std::vector<nn::LayerSpec> layers;
  std::size_t prev = in;
  for (auto h : hidden) {
    layers.push_back(nn::LayerSpec::dense(prev, h));
    layers.push_back(nn::LayerSpec::relu());
    prev = h;
  }
  layers.push_back(nn::LayerSpec::dense(prev, out));
  return nn::NetworkSpec::make({in}, std::move(layers));
}

namespace detail {

inline std::size_t conv_out(std::size_t n) { return (n + 2 - 3) / 2 + 1; }

inline bool is_pow2(std::size_t n) { return n != 0 && (n & (n - 1)) == 0; }

}  // namespace detail

inline nn::NetworkSpec conv_encoder(const std::vector<std::size_t>& state_shape, const Architecture& arch) {
  require(state_shape.size() == 3 && state_shape[1] == state_shape[2], "conv encoder: state must be [C, n, n]");
  require(!arch.conv_channels.empty(), "conv encoder: conv_channels empty");
  std::vector<nn::LayerSpec> layers;
  std::size_t c = state_shape[0], n = state_shape[1];
  for (auto oc : arch.conv_channels) {
    layers.push_back(nn::LayerSpec::conv2d(c, oc, 3, 2, 1));
    layers.push_back(nn::LayerSpec::relu());
    c = oc;
    n = detail::conv_out(n);
  }
  layers.push_back(nn::LayerSpec::flatten());
  std::size_t prev = c * n * n;
  for (auto h : arch.dense_hidden) {
    layers.push_back(nn::LayerSpec::dense(prev, h));
    layers.push_back(nn::LayerSpec::relu());
    prev = h;
  }
  layers.push_back(nn::LayerSpec::dense(prev, arch.latent_dim));
  return nn::NetworkSpec::make(nn::Shape(state_shape.begin(), state_shape.end()), std::move(layers));
}

inline nn::NetworkSpec conv_decoder(const std::vector<std::size_t>& state_shape, const Architecture& arch) {
  require(state_shape.size() == 3 && state_shape[1] == state_shape[2], "conv decoder: state must be [C, n, n]");
  const std::size_t grid = state_shape[1];
  require(detail::is_pow2(grid), "conv decoder: grid size must be a power of two");
  std::size_t bottleneck = grid;
  for (std::size_t i = 0; i < arch.conv_channels.size(); ++i) bottleneck = detail::conv_out(bottleneck);
  std::size_t n_up = 0;
  for (std::size_t s = bottleneck; s < grid; s *= 2) ++n_up;
  const std::size_t n_conv = arch.conv_channels.size();
  require(n_up <= n_conv, "conv decoder: not enough conv layers to reach the grid size");

  std::vector<nn::LayerSpec> layers;
  std::size_t prev = arch.latent_dim;
  for (auto it = arch.dense_hidden.rbegin(); it != arch.dense_hidden.rend(); ++it) {
    layers.push_back(nn::LayerSpec::dense(prev, *it));
    layers.push_back(nn::LayerSpec::relu());
    prev = *it;
  }
  const std::size_t c0 = arch.conv_channels.back();
  layers.push_back(nn::LayerSpec::dense(prev, c0 * bottleneck * bottleneck));
  layers.push_back(nn::LayerSpec::relu());
  layers.push_back(nn::LayerSpec::reshape({c0, bottleneck, bottleneck}));
  // Channel schedule mirrored: last encoder channel count down to the state channels.
  std::vector<std::size_t> chans(arch.conv_channels.rbegin(), arch.conv_channels.rend());
  chans.push_back(state_shape[0]);
  for (std::size_t i = 0; i < n_conv; ++i) {
    if (i >= n_conv - n_up) layers.push_back(nn::LayerSpec::upsample(2));
    layers.push_back(nn::LayerSpec::conv2d(chans[i], chans[i + 1], 3, 1, 1));
    if (i + 1 < n_conv) layers.push_back(nn::LayerSpec::relu());
  }
  return nn::NetworkSpec::make({arch.latent_dim}, std::move(layers));
}

/// Fresh model with Glorot-initialized networks and the given statistics.
inline KoopmanModel make_model(Variant variant, const std::vector<std::size_t>& state_shape, std::size_t param_dim,
                               const Architecture& arch, double dt, Normalization state_norm,
                               Normalization param_norm, std::uint64_t seed) {
  KoopmanModel m;
  m.variant = variant;
  m.state_shape = state_shape;
  m.state_dim = nn::shape_size(nn::Shape(state_shape.begin(), state_shape.end()));
  m.latent_dim = arch.latent_dim;
  m.param_dim = variant == Variant::parameter_uncertainty ? param_dim : 0;
  require(variant == Variant::ic_uncertainty || param_dim > 0, "parameter_uncertainty variant needs param_dim > 0");
  require(arch.latent_dim > 0, "latent_dim must be > 0");
  m.dt = dt;
  if (arch.conv) {
    require(m.param_dim == 0, "conv architecture supports only the ic_uncertainty variant");
    m.encoder.spec = conv_encoder(state_shape, arch);
    m.decoder.spec = conv_decoder(state_shape, arch);
  } else {
    m.encoder.spec = dense_mlp(m.state_dim + m.param_dim, arch.hidden, arch.latent_dim);
    std::vector<std::size_t> rev(arch.hidden.rbegin(), arch.hidden.rend());
    m.decoder.spec = dense_mlp(arch.latent_dim + m.param_dim, rev, m.state_dim);
  }
  m.koopman.spec = nn::NetworkSpec::make({arch.latent_dim}, {nn::LayerSpec::dense(arch.latent_dim, arch.latent_dim, false)});
  auto rng = make_stream(seed, StreamTag::init);
  m.encoder.params = nn::init_parameters(m.encoder.spec, rng);
  m.koopman.params = nn::init_parameters(m.koopman.spec, rng);
  m.decoder.params = nn::init_parameters(m.decoder.spec, rng);
  m.state_norm = state_norm.empty() ? Normalization::identity(m.state_dim) : std::move(state_norm);
  m.param_norm = m.param_dim == 0 ? Normalization{}
                 : param_norm.empty() ? Normalization::identity(m.param_dim)
                                      : std::move(param_norm);
  m.validate();
  return m;
}

// ---------------------------------------------------------------------------
// Evaluation in normalized coordinates. Batches are row-major, one sample per
// row; `params` holds batch x param_dim normalized values (empty in IC mode).

namespace detail {

/// Row-wise concatenation [a_i | p_i].
inline std::vector<double> concat_rows(std::span<const double> a, std::size_t a_dim, std::span<const double> p,
                                       std::size_t p_dim, std::size_t batch) {
  if (p_dim == 0) return {a.begin(), a.end()};
  std::vector<double> out(batch * (a_dim + p_dim));
  for (std::size_t i = 0; i < batch; ++i) {
    std::copy_n(a.begin() + static_cast<std::ptrdiff_t>(i * a_dim), a_dim, out.begin() + static_cast<std::ptrdiff_t>(i * (a_dim + p_dim)));
    std::copy_n(p.begin() + static_cast<std::ptrdiff_t>(i * p_dim), p_dim,
                out.begin() + static_cast<std::ptrdiff_t>(i * (a_dim + p_dim) + a_dim));
  }
  return out;
}

/// Drops the trailing p_dim columns of each row.
inline std::vector<double> leading_cols(std::span<const double> x, std::size_t keep, std::size_t p_dim,
                                        std::size_t batch) {
  if (p_dim == 0) return {x.begin(), x.end()};
  std::vector<double> out(batch * keep);
  for (std::size_t i = 0; i < batch; ++i)
    std::copy_n(x.begin() + static_cast<std::ptrdiff_t>(i * (keep + p_dim)), keep, out.begin() + static_cast<std::ptrdiff_t>(i * keep));
  return out;
}

inline void check_params_arg(const KoopmanModel& m, std::span<const double> params, std::size_t batch) {
  if (m.variant == Variant::parameter_uncertainty) {
    if (params.size() != batch * m.param_dim) {
      throw ConfigError("parameter_uncertainty model requires " + std::to_string(m.param_dim) +
                        " system parameters per sample");
    }
  } else if (!params.empty()) {
    throw ConfigError("ic_uncertainty model does not take system parameters");
  }
}

}  // namespace detail

inline std::vector<double> encode_normalized(const KoopmanModel& m, std::span<const double> x,
                                             std::span<const double> p, std::size_t batch) {
  const auto in = detail::concat_rows(x, m.state_dim, p, m.param_dim, batch);
  return std::move(nn::forward_batch(m.encoder.spec, m.encoder.params, in, batch).values.back());
}

inline std::vector<double> decode_normalized(const KoopmanModel& m, std::span<const double> z,
                                             std::span<const double> p, std::size_t batch) {
  const auto in = detail::concat_rows(z, m.latent_dim, p, m.param_dim, batch);
  return std::move(nn::forward_batch(m.decoder.spec, m.decoder.params, in, batch).values.back());
}

inline std::vector<double> advance_latent(const KoopmanModel& m, std::span<const double> z, std::size_t batch) {
  return std::move(nn::forward_batch(m.koopman.spec, m.koopman.params, z, batch).values.back());
}

// ---------------------------------------------------------------------------
// Public single-sample operations in physical units.

/// psi(x): lift a state (plus system parameters for the parameter variant).
inline std::vector<double> encode(const KoopmanModel& m, std::span<const double> state,
                                  std::span<const double> params = {}) {
  if (state.size() != m.state_dim) throw ConfigError("encode: state has wrong dimension");
  detail::check_params_arg(m, params, 1);
  const auto x = m.state_norm.normalize(state);
  const auto p = m.param_dim ? m.param_norm.normalize(params) : std::vector<double>{};
  return encode_normalized(m, x, p, 1);
}

/// psi^-1(z): map latent coordinates back to a physical state.
inline std::vector<double> decode(const KoopmanModel& m, std::span<const double> latent,
                                  std::span<const double> params = {}) {
  if (latent.size() != m.latent_dim) throw ConfigError("decode: latent has wrong dimension");
  detail::check_params_arg(m, params, 1);
  const auto p = m.param_dim ? m.param_norm.normalize(params) : std::vector<double>{};
  return m.state_norm.denormalize(decode_normalized(m, latent, p, 1));
}

/// K^n z.
inline std::vector<double> koopman_advance(const KoopmanModel& m, std::span<const double> latent, std::size_t n) {
  if (latent.size() != m.latent_dim) throw ConfigError("koopman_advance: latent has wrong dimension");
  std::vector<double> z(latent.begin(), latent.end());
  for (std::size_t i = 0; i < n; ++i) z = advance_latent(m, z, 1);
  return z;
}

}  // namespace kooprel::koopman
