#pragma once

#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aucmax/errors.hpp"
#include "aucmax/matrix.hpp"
#include "aucmax/rng.hpp"

namespace aucmax {

enum class Activation { relu, tanh };

inline std::string to_string(Activation a) {
  return a == Activation::relu ? "relu" : "tanh";
}

inline Activation activation_from_string(const std::string &s) {
  if (s == "relu")
    return Activation::relu;
  if (s == "tanh")
    return Activation::tanh;
  throw SpecError("unknown activation '" + s + "'");
}

//==============================================================================
//! Feed-forward architecture: layer_dims = {input, hidden..., output}.
//! Hidden layers use `activation`; the final layer is affine.
struct ModelSpec {
  std::vector<std::size_t> layer_dims;
  Activation activation = Activation::relu;

  std::size_t num_layers() const noexcept {
    return layer_dims.empty() ? 0 : layer_dims.size() - 1;
  }
  std::size_t input_dim() const { return layer_dims.front(); }
  std::size_t output_dim() const { return layer_dims.back(); }

  //! Checks the shape invariants. A scorer must end in a single output.
  void validate(bool scorer = true) const {
    if (layer_dims.size() < 2)
      throw SpecError("model spec needs an input dim and at least one layer");
    for (auto d : layer_dims)
      if (d == 0)
        throw SpecError("model spec dims must be >= 1");
    if (scorer && layer_dims.back() != 1)
      throw SpecError("scorer spec must end in a single output, got " +
                      std::to_string(layer_dims.back()));
  }

  friend bool operator==(const ModelSpec &, const ModelSpec &) = default;
};

//! One affine layer; weight is out x in, row-major.
struct Layer {
  std::size_t in = 0;
  std::size_t out = 0;
  std::vector<double> weight;
  std::vector<double> bias;

  friend bool operator==(const Layer &, const Layer &) = default;
};

//! Weights and biases of a ModelSpec. Gradients and optimizer buffers reuse this
//! type since they share its shape.
struct ModelParams {
  ModelSpec spec;
  std::vector<Layer> layers;

  //! Zero-filled parameters with the shape of `spec`.
  static ModelParams zeros(const ModelSpec &spec) {
    ModelParams p;
    p.spec = spec;
    for (std::size_t l = 0; l < spec.num_layers(); ++l) {
      Layer layer;
      layer.in = spec.layer_dims[l];
      layer.out = spec.layer_dims[l + 1];
      layer.weight.assign(layer.in * layer.out, 0.0);
      layer.bias.assign(layer.out, 0.0);
      p.layers.push_back(std::move(layer));
    }
    return p;
  }

  std::size_t size() const noexcept {
    std::size_t n = 0;
    for (const auto &l : layers)
      n += l.weight.size() + l.bias.size();
    return n;
  }

  bool same_shape(const ModelParams &o) const noexcept {
    if (layers.size() != o.layers.size())
      return false;
    for (std::size_t l = 0; l < layers.size(); ++l)
      if (layers[l].in != o.layers[l].in || layers[l].out != o.layers[l].out)
        return false;
    return true;
  }

  bool all_finite() const noexcept {
    for (const auto &l : layers) {
      for (double w : l.weight)
        if (!std::isfinite(w))
          return false;
      for (double b : l.bias)
        if (!std::isfinite(b))
          return false;
    }
    return true;
  }

  //! Visits every scalar, layer by layer, weights before biases.
  template <typename F> void for_each(F &&f) {
    for (auto &l : layers) {
      for (double &w : l.weight)
        f(w);
      for (double &b : l.bias)
        f(b);
    }
  }
  template <typename F> void for_each(F &&f) const {
    for (const auto &l : layers) {
      for (double w : l.weight)
        f(w);
      for (double b : l.bias)
        f(b);
    }
  }

  std::vector<double> flatten() const {
    std::vector<double> out;
    out.reserve(size());
    for_each([&](double v) { out.push_back(v); });
    return out;
  }

  friend bool operator==(const ModelParams &, const ModelParams &) = default;
};

using Gradients = ModelParams;

inline void require_same_shape(const ModelParams &a, const ModelParams &b,
                               const char *where) {
  if (!a.same_shape(b))
    throw ShapeError(std::string(where) + ": parameter shapes disagree");
}

//! Cached per-layer values from one forward pass.
//! inputs[l] is the input to layer l (inputs[0] is the batch);
//! pre[l] is layer l's affine output before activation.
struct ForwardTrace {
  std::vector<Matrix> inputs;
  std::vector<Matrix> pre;
  Activation activation = Activation::relu;

  std::size_t batch_size() const { return inputs.empty() ? 0 : inputs[0].rows; }
};

struct ForwardResult {
  Matrix output;
  ForwardTrace trace;
};

struct ScoreResult {
  std::vector<double> logits;
  ForwardTrace trace;
};

//==============================================================================
namespace detail {

inline void glorot_fill(ModelParams &p, std::uint64_t seed) {
  Rng rng(seed);
  for (auto &layer : p.layers) {
    const double bound =
        std::sqrt(6.0 / static_cast<double>(layer.in + layer.out));
    for (double &w : layer.weight)
      w = rng.uniform(-bound, bound);
    std::fill(layer.bias.begin(), layer.bias.end(), 0.0);
  }
}

inline double activate(Activation a, double z) {
  return a == Activation::relu ? (z > 0.0 ? z : 0.0) : std::tanh(z);
}

// Derivative expressed through the pre-activation. ReLU'(0) = 0.
inline double activate_grad(Activation a, double z) {
  if (a == Activation::relu)
    return z > 0.0 ? 1.0 : 0.0;
  const double t = std::tanh(z);
  return 1.0 - t * t;
}

} // namespace detail

//! Glorot-uniform weights, zero biases. The spec must describe a scorer.
inline ModelParams init_params(const ModelSpec &spec, std::uint64_t seed) {
  spec.validate(true);
  auto p = ModelParams::zeros(spec);
  detail::glorot_fill(p, seed);
  return p;
}

//! Same initialization for an embedding network of any output width.
inline ModelParams init_encoder(const ModelSpec &spec, std::uint64_t seed) {
  spec.validate(false);
  auto p = ModelParams::zeros(spec);
  detail::glorot_fill(p, seed);
  return p;
}

//! Full forward pass; output is n x output_dim.
inline ForwardResult forward_all(const ModelParams &params, const Matrix &batch) {
  if (params.layers.empty())
    throw ShapeError("forward: model has no layers");
  if (batch.cols != params.layers.front().in)
    throw ShapeError("forward: batch has " + std::to_string(batch.cols) +
                     " columns, model expects " +
                     std::to_string(params.layers.front().in));
  ForwardResult r;
  r.trace.activation = params.spec.activation;
  const std::size_t n = batch.rows;
  Matrix current = batch;
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    const Layer &layer = params.layers[l];
    Matrix z(n, layer.out);
    for (std::size_t i = 0; i < n; ++i) {
      auto x = current.row(i);
      for (std::size_t o = 0; o < layer.out; ++o) {
        std::span<const double> w(layer.weight.data() + o * layer.in, layer.in);
        z(i, o) = dot(w, x) + layer.bias[o];
      }
    }
    const bool last = l + 1 == params.layers.size();
    Matrix a = z;
    if (!last)
      for (double &v : a.data)
        v = detail::activate(params.spec.activation, v);
    r.trace.inputs.push_back(std::move(current));
    r.trace.pre.push_back(std::move(z));
    current = std::move(a);
  }
  r.output = std::move(current);
  return r;
}

//! Raw logits of a single-output scorer.
inline ScoreResult forward(const ModelParams &params, const Matrix &batch) {
  if (params.layers.empty() || params.layers.back().out != 1)
    throw ShapeError("forward: scorer must have a single output");
  auto r = forward_all(params, batch);
  return {std::move(r.output.data), std::move(r.trace)};
}

//! Logits only, without keeping the trace.
inline std::vector<double> predict_logits(const ModelParams &params,
                                          const Matrix &batch) {
  return forward(params, batch).logits;
}

//! Numerically stable logistic function.
inline double sigmoid(double z) noexcept {
  if (z >= 0.0)
    return 1.0 / (1.0 + std::exp(-z));
  const double e = std::exp(z);
  return e / (1.0 + e);
}

inline std::vector<double> sigmoid(std::span<const double> z) {
  std::vector<double> out(z.size());
  for (std::size_t i = 0; i < z.size(); ++i)
    out[i] = sigmoid(z[i]);
  return out;
}

//! Backpropagates dL/d(output) (n x output_dim) to parameter gradients.
//! The upstream gradient is taken as-is, so batch averaging belongs to the
//! loss that produced it.
inline Gradients backward_all(const ModelParams &params,
                              const ForwardTrace &trace,
                              const Matrix &dloss_doutput) {
  if (trace.pre.size() != params.layers.size() ||
      trace.inputs.size() != params.layers.size())
    throw ShapeError("backward: trace layer count does not match params");
  const std::size_t n = trace.batch_size();
  if (dloss_doutput.rows != n || dloss_doutput.cols != params.layers.back().out)
    throw ShapeError("backward: upstream gradient shape mismatch");
  for (std::size_t l = 0; l < params.layers.size(); ++l)
    if (trace.pre[l].cols != params.layers[l].out ||
        trace.inputs[l].cols != params.layers[l].in || trace.pre[l].rows != n)
      throw ShapeError("backward: trace shape does not match layer " +
                       std::to_string(l));

  Gradients g = Gradients::zeros(params.spec);
  g.spec = params.spec;
  Matrix delta = dloss_doutput;
  for (std::size_t l = params.layers.size(); l-- > 0;) {
    const Layer &layer = params.layers[l];
    Layer &gl = g.layers[l];
    if (l + 1 != params.layers.size()) {
      for (std::size_t k = 0; k < delta.data.size(); ++k)
        delta.data[k] *= detail::activate_grad(trace.activation, trace.pre[l].data[k]);
    }
    const Matrix &x = trace.inputs[l];
    for (std::size_t i = 0; i < n; ++i) {
      auto xi = x.row(i);
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double d = delta(i, o);
        if (d == 0.0)
          continue;
        double *gw = gl.weight.data() + o * layer.in;
        for (std::size_t c = 0; c < layer.in; ++c)
          gw[c] += d * xi[c];
        gl.bias[o] += d;
      }
    }
    if (l == 0)
      break;
    Matrix prev(n, layer.in);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t o = 0; o < layer.out; ++o) {
        const double d = delta(i, o);
        if (d == 0.0)
          continue;
        const double *w = layer.weight.data() + o * layer.in;
        for (std::size_t c = 0; c < layer.in; ++c)
          prev(i, c) += d * w[c];
      }
    delta = std::move(prev);
  }
  return g;
}

//! Scorer backward pass from per-sample dL/dlogit.
inline Gradients backward(const ModelParams &params, const ForwardTrace &trace,
                          std::span<const double> dloss_dlogit) {
  if (params.layers.empty() || params.layers.back().out != 1)
    throw ShapeError("backward: scorer must have a single output");
  if (dloss_dlogit.size() != trace.batch_size())
    throw ShapeError("backward: got " + std::to_string(dloss_dlogit.size()) +
                     " logit gradients for a batch of " +
                     std::to_string(trace.batch_size()));
  Matrix up(dloss_dlogit.size(), 1);
  std::copy(dloss_dlogit.begin(), dloss_dlogit.end(), up.data.begin());
  return backward_all(params, trace, up);
}

} // namespace aucmax
