#pragma once

#include <cmath>
#include <cstddef>
#include <random>
#include <span>
#include <string>
#include <utility>
#include <vector>

// Small products otherwise take a coefficient-wise path whose vectorized
// reductions depend on buffer alignment, so results would vary between runs.
#ifndef EIGEN_GEMM_TO_COEFFBASED_THRESHOLD
#define EIGEN_GEMM_TO_COEFFBASED_THRESHOLD 1
#endif
#include <Eigen/Dense>

#include "kooprel/common.hpp"
#include "kooprel/nn/tensor.hpp"

namespace kooprel::nn {

enum class LayerKind { dense, conv2d, relu, flatten, reshape, upsample };

inline const char* to_string(LayerKind k) {
  switch (k) {
    case LayerKind::dense: return "dense";
    case LayerKind::conv2d: return "conv2d";
    case LayerKind::relu: return "relu";
    case LayerKind::flatten: return "flatten";
    case LayerKind::reshape: return "reshape";
    case LayerKind::upsample: return "upsample";
  }
  return "?";
}

inline LayerKind layer_kind_from_string(const std::string& s) {
  for (auto k : {LayerKind::dense, LayerKind::conv2d, LayerKind::relu, LayerKind::flatten,
                 LayerKind::reshape, LayerKind::upsample}) {
    if (s == to_string(k)) return k;
  }
  throw ConfigError("unknown layer kind '" + s + "'");
}

struct LayerSpec {
  LayerKind kind = LayerKind::relu;
  // dense
  std::size_t in_dim = 0;
  std::size_t out_dim = 0;
  bool bias = true;
  // conv2d
  std::size_t in_channels = 0;
  std::size_t out_channels = 0;
  std::size_t kernel_size = 1;
  std::size_t stride = 1;
  std::size_t padding = 0;
  // reshape
  Shape target_shape;
  // upsample (nearest neighbour)
  std::size_t factor = 2;

  static LayerSpec dense(std::size_t in, std::size_t out, bool with_bias = true) {
    LayerSpec l;
    l.kind = LayerKind::dense;
    l.in_dim = in;
    l.out_dim = out;
    l.bias = with_bias;
    return l;
  }
  static LayerSpec conv2d(std::size_t in_c, std::size_t out_c, std::size_t k, std::size_t stride = 1,
                          std::size_t pad = 0, bool with_bias = true) {
    LayerSpec l;
    l.kind = LayerKind::conv2d;
    l.in_channels = in_c;
    l.out_channels = out_c;
    l.kernel_size = k;
    l.stride = stride;
    l.padding = pad;
    l.bias = with_bias;
    return l;
  }
  static LayerSpec relu() { return LayerSpec{}; }
  static LayerSpec flatten() {
    LayerSpec l;
    l.kind = LayerKind::flatten;
    return l;
  }
  static LayerSpec reshape(Shape target) {
    LayerSpec l;
    l.kind = LayerKind::reshape;
    l.target_shape = std::move(target);
    return l;
  }
  static LayerSpec upsample(std::size_t factor) {
    LayerSpec l;
    l.kind = LayerKind::upsample;
    l.factor = factor;
    return l;
  }

  [[nodiscard]] bool has_params() const { return kind == LayerKind::dense || kind == LayerKind::conv2d; }

  friend bool operator==(const LayerSpec&, const LayerSpec&) = default;
};

/// Per-sample output shape of one layer; throws ConfigError naming the layer.
inline Shape layer_output_shape(const LayerSpec& l, const Shape& in, std::size_t index) {
  const auto fail = [&](const std::string& why) {
    throw ConfigError("layer " + std::to_string(index) + " (" + to_string(l.kind) + "): " + why +
                      ", input shape " + shape_str(in));
  };
  switch (l.kind) {
    case LayerKind::dense:
      if (l.in_dim == 0 || l.out_dim == 0) fail("zero dimension");
      if (in.size() != 1 || in[0] != l.in_dim) fail("expects [" + std::to_string(l.in_dim) + "]");
      return {l.out_dim};
    case LayerKind::conv2d: {
      if (l.kernel_size < 1) fail("kernel_size must be >= 1");
      if (l.stride < 1) fail("stride must be >= 1");
      if (l.in_channels == 0 || l.out_channels == 0) fail("zero channels");
      if (in.size() != 3 || in[0] != l.in_channels) fail("expects [" + std::to_string(l.in_channels) + ",H,W]");
      const std::size_t h = in[1] + 2 * l.padding;
      const std::size_t w = in[2] + 2 * l.padding;
      if (h < l.kernel_size || w < l.kernel_size) fail("kernel larger than padded input");
      return {l.out_channels, (h - l.kernel_size) / l.stride + 1, (w - l.kernel_size) / l.stride + 1};
    }
    case LayerKind::relu:
      return in;
    case LayerKind::flatten:
      return {shape_size(in)};
    case LayerKind::reshape:
      if (l.target_shape.empty() || shape_size(l.target_shape) != shape_size(in)) {
        fail("cannot reshape to " + shape_str(l.target_shape));
      }
      return l.target_shape;
    case LayerKind::upsample:
      if (l.factor < 1) fail("factor must be >= 1");
      if (in.size() != 3) fail("expects [C,H,W]");
      return {in[0], in[1] * l.factor, in[2] * l.factor};
  }
  fail("unknown kind");
  return {};
}

struct NetworkSpec {
  std::vector<LayerSpec> layers;
  Shape input_shape;
  Shape output_shape;

  /// Builds a spec and derives output_shape by shape propagation.
  static NetworkSpec make(Shape input, std::vector<LayerSpec> layers) {
    NetworkSpec s;
    s.input_shape = std::move(input);
    s.layers = std::move(layers);
    s.output_shape = s.propagate();
    return s;
  }

  [[nodiscard]] std::vector<Shape> layer_shapes() const {
    std::vector<Shape> shapes{input_shape};
    for (std::size_t i = 0; i < layers.size(); ++i) shapes.push_back(layer_output_shape(layers[i], shapes.back(), i));
    return shapes;
  }

  [[nodiscard]] Shape propagate() const {
    if (input_shape.empty() || shape_size(input_shape) == 0) throw ConfigError("network: empty input shape");
    return layer_shapes().back();
  }

  void validate() const {
    if (propagate() != output_shape) {
      throw ConfigError("network: declared output shape " + shape_str(output_shape) + " but layers produce " +
                        shape_str(propagate()));
    }
  }

  [[nodiscard]] std::size_t input_size() const { return shape_size(input_shape); }
  [[nodiscard]] std::size_t output_size() const { return shape_size(output_shape); }

  friend bool operator==(const NetworkSpec&, const NetworkSpec&) = default;
};

/// Weights and biases of one layer. Empty for parameter-free layers.
struct LayerParams {
  Tensor weight;  // dense: [out, in]; conv2d: [out_c, in_c, k, k]
  Tensor bias;    // [out] / [out_c]; empty when the layer has no bias
  friend bool operator==(const LayerParams&, const LayerParams&) = default;
};

struct Parameters {
  std::vector<LayerParams> layers;

  [[nodiscard]] std::size_t total_count() const {
    std::size_t n = 0;
    for (const auto& l : layers) n += l.weight.size() + l.bias.size();
    return n;
  }

  /// Visits every non-empty weight/bias array in a fixed order.
  template <class Fn>
  void for_each_array(Fn&& fn) {
    for (auto& l : layers) {
      if (!l.weight.empty()) fn(l.weight.data);
      if (!l.bias.empty()) fn(l.bias.data);
    }
  }
  template <class Fn>
  void for_each_array(Fn&& fn) const {
    for (const auto& l : layers) {
      if (!l.weight.empty()) fn(l.weight.data);
      if (!l.bias.empty()) fn(l.bias.data);
    }
  }

  [[nodiscard]] std::vector<double> flatten() const {
    std::vector<double> flat;
    flat.reserve(total_count());
    for_each_array([&](const std::vector<double>& a) { flat.insert(flat.end(), a.begin(), a.end()); });
    return flat;
  }

  void assign_flat(std::span<const double> flat) {
    if (flat.size() != total_count()) throw ConfigError("parameters: flat size mismatch");
    std::size_t off = 0;
    for_each_array([&](std::vector<double>& a) {
      std::copy_n(flat.begin() + static_cast<std::ptrdiff_t>(off), a.size(), a.begin());
      off += a.size();
    });
  }

  void set_zero() {
    for_each_array([](std::vector<double>& a) { std::fill(a.begin(), a.end(), 0.0); });
  }

  friend bool operator==(const Parameters&, const Parameters&) = default;
};

/// Zero-filled parameters with the shapes the spec requires.
inline Parameters zero_parameters(const NetworkSpec& spec) {
  Parameters p;
  p.layers.resize(spec.layers.size());
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (l.kind == LayerKind::dense) {
      p.layers[i].weight = Tensor({l.out_dim, l.in_dim});
      if (l.bias) p.layers[i].bias = Tensor({l.out_dim});
    } else if (l.kind == LayerKind::conv2d) {
      p.layers[i].weight = Tensor({l.out_channels, l.in_channels, l.kernel_size, l.kernel_size});
      if (l.bias) p.layers[i].bias = Tensor({l.out_channels});
    }
  }
  return p;
}

/// Glorot-uniform weights, zero biases.
inline Parameters init_parameters(const NetworkSpec& spec, std::mt19937_64& rng) {
  spec.validate();
  Parameters p = zero_parameters(spec);
  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    if (!l.has_params()) continue;
    double fan_in = 0, fan_out = 0;
    if (l.kind == LayerKind::dense) {
      fan_in = static_cast<double>(l.in_dim);
      fan_out = static_cast<double>(l.out_dim);
    } else {
      const double area = static_cast<double>(l.kernel_size * l.kernel_size);
      fan_in = static_cast<double>(l.in_channels) * area;
      fan_out = static_cast<double>(l.out_channels) * area;
    }
    const double limit = std::sqrt(6.0 / (fan_in + fan_out));
    std::uniform_real_distribution<double> u(-limit, limit);
    for (auto& w : p.layers[i].weight.data) w = u(rng);
  }
  return p;
}

inline void check_parameters(const NetworkSpec& spec, const Parameters& params) {
  if (params.layers.size() != spec.layers.size()) throw ConfigError("parameters: layer count mismatch");
  const Parameters ref = zero_parameters(spec);
  for (std::size_t i = 0; i < ref.layers.size(); ++i) {
    if (ref.layers[i].weight.shape != params.layers[i].weight.shape ||
        ref.layers[i].bias.shape != params.layers[i].bias.shape) {
      throw ConfigError("parameters: shape mismatch at layer " + std::to_string(i));
    }
  }
}

// ---------------------------------------------------------------------------
// Batched evaluation. A batch is a flat buffer of `batch` samples, each laid
// out row-major with the per-sample shape; samples are contiguous.

using ColMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::ColMajor>;
using RowMat = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using ConstColMap = Eigen::Map<const ColMat>;
using ColMap = Eigen::Map<ColMat>;
using ConstRowMap = Eigen::Map<const RowMat>;
using RowMap = Eigen::Map<RowMat>;

/// Inputs to every layer of one batched forward pass (values[0] is the input,
/// values.back() the network output).
struct Activations {
  std::size_t batch = 0;
  std::vector<std::vector<double>> values;

  [[nodiscard]] std::span<const double> output() const { return values.back(); }
};

namespace detail {

struct ConvGeom {
  std::size_t c, h, w, k, s, p, oh, ow;
};

inline ConvGeom conv_geom(const LayerSpec& l, const Shape& in, const Shape& out) {
  return {in[0], in[1], in[2], l.kernel_size, l.stride, l.padding, out[1], out[2]};
}

// cols is row-major [(c*k*k), (oh*ow)].
inline void im2col(const ConvGeom& g, const double* x, double* cols) {
  const std::size_t n_out = g.oh * g.ow;
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        double* row = cols + ((c * g.k + ki) * g.k + kj) * n_out;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.s + ki) - static_cast<std::ptrdiff_t>(g.p);
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.s + kj) - static_cast<std::ptrdiff_t>(g.p);
            const bool inside = iy >= 0 && ix >= 0 && iy < static_cast<std::ptrdiff_t>(g.h) &&
                                ix < static_cast<std::ptrdiff_t>(g.w);
            row[oy * g.ow + ox] = inside ? x[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] : 0.0;
          }
        }
      }
    }
  }
}

inline void col2im_add(const ConvGeom& g, const double* cols, double* dx) {
  const std::size_t n_out = g.oh * g.ow;
  for (std::size_t c = 0; c < g.c; ++c) {
    for (std::size_t ki = 0; ki < g.k; ++ki) {
      for (std::size_t kj = 0; kj < g.k; ++kj) {
        const double* row = cols + ((c * g.k + ki) * g.k + kj) * n_out;
        for (std::size_t oy = 0; oy < g.oh; ++oy) {
          const std::ptrdiff_t iy = static_cast<std::ptrdiff_t>(oy * g.s + ki) - static_cast<std::ptrdiff_t>(g.p);
          if (iy < 0 || iy >= static_cast<std::ptrdiff_t>(g.h)) continue;
          for (std::size_t ox = 0; ox < g.ow; ++ox) {
            const std::ptrdiff_t ix = static_cast<std::ptrdiff_t>(ox * g.s + kj) - static_cast<std::ptrdiff_t>(g.p);
            if (ix < 0 || ix >= static_cast<std::ptrdiff_t>(g.w)) continue;
            dx[(c * g.h + static_cast<std::size_t>(iy)) * g.w + static_cast<std::size_t>(ix)] += row[oy * g.ow + ox];
          }
        }
      }
    }
  }
}

// out[i] += sum_j m(i, j), fixed summation order.
inline void add_row_sums(const double* m, std::size_t rows, std::size_t cols, bool row_major, double* out) {
  std::vector<double> acc(rows, 0.0);
  for (std::size_t j = 0; j < cols; ++j)
    for (std::size_t i = 0; i < rows; ++i) acc[i] += row_major ? m[i * cols + j] : m[j * rows + i];
  for (std::size_t i = 0; i < rows; ++i) out[i] += acc[i];
}

}  // namespace detail

/// Forward pass over a batch, keeping every intermediate for backward().
inline Activations forward_batch(const NetworkSpec& spec, const Parameters& params, std::span<const double> input,
                                 std::size_t batch) {
  if (batch == 0 || input.size() != batch * spec.input_size()) {
    throw ConfigError("forward: input has " + std::to_string(input.size()) + " values, expected batch x " +
                      shape_str(spec.input_shape));
  }
  if (params.layers.size() != spec.layers.size()) throw ConfigError("forward: parameter/layer count mismatch");
  const auto shapes = spec.layer_shapes();
  Activations act;
  act.batch = batch;
  act.values.reserve(spec.layers.size() + 1);
  act.values.emplace_back(input.begin(), input.end());
  const auto b = static_cast<Eigen::Index>(batch);

  for (std::size_t i = 0; i < spec.layers.size(); ++i) {
    const auto& l = spec.layers[i];
    const auto& lp = params.layers[i];
    const std::vector<double>& x = act.values.back();
    std::vector<double> y(batch * shape_size(shapes[i + 1]));
    switch (l.kind) {
      case LayerKind::dense: {
        const auto in = static_cast<Eigen::Index>(l.in_dim);
        const auto out = static_cast<Eigen::Index>(l.out_dim);
        if (lp.weight.size() != l.in_dim * l.out_dim) throw ConfigError("forward: weight shape mismatch at layer " + std::to_string(i));
        ConstRowMap w(lp.weight.data.data(), out, in);
        ConstColMap xm(x.data(), in, b);
        ColMap ym(y.data(), out, b);
        ym.noalias() = w * xm;
        if (l.bias) ym.colwise() += Eigen::Map<const Eigen::VectorXd>(lp.bias.data.data(), out);
        break;
      }
      case LayerKind::conv2d: {
        const auto g = detail::conv_geom(l, shapes[i], shapes[i + 1]);
        const auto rows = static_cast<Eigen::Index>(g.c * g.k * g.k);
        const auto n_out = static_cast<Eigen::Index>(g.oh * g.ow);
        const auto oc = static_cast<Eigen::Index>(l.out_channels);
        ConstRowMap w(lp.weight.data.data(), oc, rows);
        std::vector<double> cols(static_cast<std::size_t>(rows * n_out));
        const std::size_t in_sz = g.c * g.h * g.w;
        const std::size_t out_sz = l.out_channels * g.oh * g.ow;
        for (std::size_t s = 0; s < batch; ++s) {
          detail::im2col(g, x.data() + s * in_sz, cols.data());
          RowMap ym(y.data() + s * out_sz, oc, n_out);
          ym.noalias() = w * ConstRowMap(cols.data(), rows, n_out);
          if (l.bias) ym.colwise() += Eigen::Map<const Eigen::VectorXd>(lp.bias.data.data(), oc);
        }
        break;
      }
      case LayerKind::relu:
        for (std::size_t j = 0; j < y.size(); ++j) y[j] = x[j] > 0.0 ? x[j] : 0.0;
        break;
      case LayerKind::flatten:
      case LayerKind::reshape:
        y = x;
        break;
      case LayerKind::upsample: {
        const auto& in = shapes[i];
        const std::size_t f = l.factor, c = in[0], h = in[1], w = in[2];
        const std::size_t in_sz = c * h * w, out_sz = in_sz * f * f;
        for (std::size_t s = 0; s < batch; ++s) {
          const double* xs = x.data() + s * in_sz;
          double* ys = y.data() + s * out_sz;
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t oy = 0; oy < h * f; ++oy)
              for (std::size_t ox = 0; ox < w * f; ++ox)
                ys[(ch * h * f + oy) * w * f + ox] = xs[(ch * h + oy / f) * w + ox / f];
        }
        break;
      }
    }
    act.values.push_back(std::move(y));
  }
  return act;
}

/// Backward pass. Accumulates parameter gradients into `grads` (which must be
/// shaped like `params`) and, if `input_grad` is non-null, writes the gradient
/// with respect to the batch input.
inline void backward_batch(const NetworkSpec& spec, const Parameters& params, const Activations& act,
                           std::span<const double> upstream, Parameters& grads, std::vector<double>* input_grad) {
  const std::size_t batch = act.batch;
  if (upstream.size() != batch * spec.output_size()) {
    throw ConfigError("backward: upstream gradient has " + std::to_string(upstream.size()) +
                      " values, expected batch x " + shape_str(spec.output_shape));
  }
  const auto shapes = spec.layer_shapes();
  const auto b = static_cast<Eigen::Index>(batch);
  std::vector<double> dy(upstream.begin(), upstream.end());

  for (std::size_t ii = spec.layers.size(); ii-- > 0;) {
    const auto& l = spec.layers[ii];
    const auto& lp = params.layers[ii];
    auto& lg = grads.layers[ii];
    const std::vector<double>& x = act.values[ii];
    const bool need_dx = ii > 0 || input_grad != nullptr;
    std::vector<double> dx;
    switch (l.kind) {
      case LayerKind::dense: {
        const auto in = static_cast<Eigen::Index>(l.in_dim);
        const auto out = static_cast<Eigen::Index>(l.out_dim);
        ConstColMap dym(dy.data(), out, b);
        ConstColMap xm(x.data(), in, b);
        RowMap(lg.weight.data.data(), out, in).noalias() += dym * xm.transpose();
        if (l.bias) detail::add_row_sums(dy.data(), l.out_dim, batch, false, lg.bias.data.data());
        if (need_dx) {
          dx.resize(x.size());
          ColMap(dx.data(), in, b).noalias() = ConstRowMap(lp.weight.data.data(), out, in).transpose() * dym;
        }
        break;
      }
      case LayerKind::conv2d: {
        const auto g = detail::conv_geom(l, shapes[ii], shapes[ii + 1]);
        const auto rows = static_cast<Eigen::Index>(g.c * g.k * g.k);
        const auto n_out = static_cast<Eigen::Index>(g.oh * g.ow);
        const auto oc = static_cast<Eigen::Index>(l.out_channels);
        ConstRowMap w(lp.weight.data.data(), oc, rows);
        RowMap gw(lg.weight.data.data(), oc, rows);
        std::vector<double> cols(static_cast<std::size_t>(rows * n_out));
        RowMat dcols(rows, n_out);
        const std::size_t in_sz = g.c * g.h * g.w;
        const std::size_t out_sz = l.out_channels * g.oh * g.ow;
        if (need_dx) dx.assign(x.size(), 0.0);
        for (std::size_t s = 0; s < batch; ++s) {
          ConstRowMap dys(dy.data() + s * out_sz, oc, n_out);
          detail::im2col(g, x.data() + s * in_sz, cols.data());
          gw.noalias() += dys * ConstRowMap(cols.data(), rows, n_out).transpose();
          if (l.bias) detail::add_row_sums(dy.data() + s * out_sz, l.out_channels, g.oh * g.ow, true, lg.bias.data.data());
          if (need_dx) {
            dcols.noalias() = w.transpose() * dys;
            detail::col2im_add(g, dcols.data(), dx.data() + s * in_sz);
          }
        }
        break;
      }
      case LayerKind::relu:
        dx.resize(x.size());
        for (std::size_t j = 0; j < x.size(); ++j) dx[j] = x[j] > 0.0 ? dy[j] : 0.0;
        break;
      case LayerKind::flatten:
      case LayerKind::reshape:
        dx = std::move(dy);
        break;
      case LayerKind::upsample: {
        const auto& in = shapes[ii];
        const std::size_t f = l.factor, c = in[0], h = in[1], w = in[2];
        const std::size_t in_sz = c * h * w, out_sz = in_sz * f * f;
        dx.assign(x.size(), 0.0);
        for (std::size_t s = 0; s < batch; ++s) {
          const double* dys = dy.data() + s * out_sz;
          double* dxs = dx.data() + s * in_sz;
          for (std::size_t ch = 0; ch < c; ++ch)
            for (std::size_t oy = 0; oy < h * f; ++oy)
              for (std::size_t ox = 0; ox < w * f; ++ox)
                dxs[(ch * h + oy / f) * w + ox / f] += dys[(ch * h * f + oy) * w * f + ox];
        }
        break;
      }
    }
    dy = std::move(dx);
  }
  if (input_grad) *input_grad = std::move(dy);
}

namespace detail {

// Accepts either the bare per-sample shape or [batch] + per-sample shape.
inline std::size_t batch_of(const NetworkSpec& spec, const Shape& shape, const char* what) {
  if (shape == spec.input_shape) return 1;
  if (shape.size() == spec.input_shape.size() + 1 && Shape(shape.begin() + 1, shape.end()) == spec.input_shape) {
    return shape[0];
  }
  throw ConfigError(std::string(what) + ": shape " + shape_str(shape) + " does not match network input " +
                    shape_str(spec.input_shape));
}

inline Shape with_batch(const Shape& s, std::size_t batch, bool batched) {
  if (!batched) return s;
  Shape out{batch};
  out.insert(out.end(), s.begin(), s.end());
  return out;
}

}  // namespace detail

/// Evaluates the network on one sample (shape == input_shape) or a batch
/// ([B] + input_shape).
inline Tensor forward(const NetworkSpec& spec, const Parameters& params, const Tensor& input) {
  const std::size_t batch = detail::batch_of(spec, input.shape, "forward");
  const bool batched = input.shape != spec.input_shape;
  auto act = forward_batch(spec, params, input.data, batch);
  return Tensor(detail::with_batch(spec.output_shape, batch, batched), std::move(act.values.back()));
}

struct Gradients {
  Parameters params;
  Tensor input;
};

/// Gradients of <upstream, forward(input)> with respect to parameters and input.
inline Gradients backward(const NetworkSpec& spec, const Parameters& params, const Tensor& input,
                          const Tensor& upstream) {
  const std::size_t batch = detail::batch_of(spec, input.shape, "backward");
  const bool batched = input.shape != spec.input_shape;
  if (upstream.shape != detail::with_batch(spec.output_shape, batch, batched)) {
    throw ConfigError("backward: upstream shape " + shape_str(upstream.shape) + " does not match output " +
                      shape_str(spec.output_shape));
  }
  const auto act = forward_batch(spec, params, input.data, batch);
  Gradients g{zero_parameters(spec), {}};
  std::vector<double> dx;
  backward_batch(spec, params, act, upstream.data, g.params, &dx);
  g.input = Tensor(input.shape, std::move(dx));
  return g;
}

/// Mean squared error over all elements.
inline double mse(std::span<const double> prediction, std::span<const double> target) {
  if (prediction.size() != target.size() || prediction.empty()) {
    throw ConfigError("mse: size mismatch (" + std::to_string(prediction.size()) + " vs " +
                      std::to_string(target.size()) + ")");
  }
  double acc = 0.0;
  for (std::size_t i = 0; i < prediction.size(); ++i) {
    const double d = prediction[i] - target[i];
    acc += d * d;
  }
  return acc / static_cast<double>(prediction.size());
}

inline double mse(const Tensor& prediction, const Tensor& target) {
  if (prediction.shape != target.shape) {
    throw ConfigError("mse: shape " + shape_str(prediction.shape) + " vs " + shape_str(target.shape));
  }
  return mse(std::span<const double>(prediction.data), std::span<const double>(target.data));
}

/// Adds scale * d mse / d prediction into grad.
inline void mse_grad_add(std::span<const double> prediction, std::span<const double> target, double scale,
                         std::span<double> grad) {
  const double k = 2.0 * scale / static_cast<double>(prediction.size());
  for (std::size_t i = 0; i < prediction.size(); ++i) grad[i] += k * (prediction[i] - target[i]);
}

}  // namespace kooprel::nn
