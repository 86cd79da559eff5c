#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "aucmax/errors.hpp"
#include "aucmax/matrix.hpp"
#include "aucmax/model.hpp"
#include "aucmax/optim.hpp"
#include "aucmax/rng.hpp"

namespace aucmax {

enum class Augmentation { vector_noise_mask, horizontal_flip };

inline std::string to_string(Augmentation a) {
  return a == Augmentation::vector_noise_mask ? "vector_noise_mask"
                                              : "horizontal_flip";
}

inline Augmentation augmentation_from_string(const std::string &s) {
  if (s == "vector_noise_mask")
    return Augmentation::vector_noise_mask;
  if (s == "horizontal_flip")
    return Augmentation::horizontal_flip;
  throw UsageError("unknown augmentation '" + s + "'");
}

//==============================================================================
//! Momentum-contrast pretraining settings.
//!
//! The queue holds `queue_size` negative keys and is refreshed `batch_size`
//! keys at a time, so queue_size must be a multiple of batch_size.
struct MocoConfig {
  std::size_t embed_dim = 128;
  std::size_t queue_size = 256;
  std::size_t batch_size = 32;
  double key_momentum = 0.999;
  double temperature = 0.07;
  Augmentation augmentation = Augmentation::vector_noise_mask;
  double noise_std = 0.1;
  double mask_prob = 0.2;
  double flip_prob = 0.5;
  // Query-encoder SGD.
  double lr = 0.03;
  double momentum = 0.9;
  double weight_decay = 1e-4;

  void validate() const {
    if (embed_dim == 0)
      throw UsageError("MocoConfig: embed_dim must be >= 1");
    if (queue_size == 0 || batch_size == 0)
      throw UsageError("MocoConfig: queue_size and batch_size must be >= 1");
    if (queue_size % batch_size != 0)
      throw UsageError("MocoConfig: queue_size " + std::to_string(queue_size) +
                       " is not a multiple of batch_size " +
                       std::to_string(batch_size));
    if (!(key_momentum >= 0.0 && key_momentum <= 1.0))
      throw UsageError("MocoConfig: key_momentum must lie in [0,1]");
    if (!(temperature > 0.0))
      throw UsageError("MocoConfig: temperature must be > 0");
    if (!(noise_std >= 0.0) || !(mask_prob >= 0.0 && mask_prob <= 1.0) ||
        !(flip_prob >= 0.0 && flip_prob <= 1.0))
      throw UsageError("MocoConfig: augmentation parameters out of range");
  }
};

//! Query/key encoders and the FIFO queue of negative keys.
//! `queue` is a ring buffer; `head` points at the oldest entry.
struct MocoState {
  ModelParams query;
  ModelParams key;
  Matrix queue;
  std::size_t head = 0;

  //! Fresh encoders (key = copy of query) and a queue of random unit vectors.
  static MocoState init(const ModelSpec &encoder_spec, const MocoConfig &cfg,
                        std::uint64_t seed) {
    cfg.validate();
    if (encoder_spec.layer_dims.empty() ||
        encoder_spec.layer_dims.back() != cfg.embed_dim)
      throw SpecError("MocoState: encoder output must equal embed_dim");
    MocoState s;
    s.query = init_encoder(encoder_spec, Rng::derive(seed, 1));
    s.key = s.query;
    s.queue = Matrix(cfg.queue_size, cfg.embed_dim);
    Rng rng(Rng::derive(seed, 2));
    for (std::size_t r = 0; r < s.queue.rows; ++r) {
      auto row = s.queue.row(r);
      double norm = 0.0;
      do {
        for (double &v : row)
          v = rng.gaussian();
        norm = std::sqrt(dot(row, row));
      } while (norm == 0.0);
      for (double &v : row)
        v /= norm;
    }
    return s;
  }

  //! Queue entries from oldest to newest.
  Matrix queue_in_order() const {
    Matrix out(queue.rows, queue.cols);
    for (std::size_t i = 0; i < queue.rows; ++i) {
      auto src = queue.row((head + i) % queue.rows);
      std::copy(src.begin(), src.end(), out.row(i).begin());
    }
    return out;
  }
};

//------------------------------------------------------------------------------
struct AugmentedPair {
  std::vector<double> query_view;
  std::vector<double> key_view;
};

namespace detail {

inline std::vector<double> augment_one(std::span<const double> x,
                                       Augmentation mode, double noise_std,
                                       double mask_prob, double flip_prob,
                                       Rng &rng) {
  std::vector<double> v(x.begin(), x.end());
  if (mode == Augmentation::horizontal_flip) {
    if (rng.bernoulli(flip_prob))
      std::reverse(v.begin(), v.end());
    return v;
  }
  for (double &e : v) {
    const double noise = rng.gaussian() * noise_std;
    const bool drop = rng.bernoulli(mask_prob);
    e = drop ? 0.0 : e + noise;
  }
  return v;
}

} // namespace detail

//! Two independently augmented views of `x`, fully determined by `seed`.
inline AugmentedPair augment_pair(std::span<const double> x, std::uint64_t seed,
                                  const MocoConfig &cfg) {
  for (double v : x)
    if (!std::isfinite(v))
      throw DomainError("augment_pair: input is not finite");
  Rng rng(seed);
  AugmentedPair p;
  p.query_view = detail::augment_one(x, cfg.augmentation, cfg.noise_std,
                                     cfg.mask_prob, cfg.flip_prob, rng);
  p.key_view = detail::augment_one(x, cfg.augmentation, cfg.noise_std,
                                   cfg.mask_prob, cfg.flip_prob, rng);
  return p;
}

//! key <- m*key + (1-m)*query, elementwise.
inline void momentum_update(ModelParams &key, const ModelParams &query,
                            double m) {
  require_same_shape(key, query, "momentum_update");
  for (std::size_t l = 0; l < key.layers.size(); ++l) {
    auto blend = [m](std::vector<double> &k, const std::vector<double> &q) {
      for (std::size_t i = 0; i < k.size(); ++i)
        k[i] = m * k[i] + (1.0 - m) * q[i];
    };
    blend(key.layers[l].weight, query.layers[l].weight);
    blend(key.layers[l].bias, query.layers[l].bias);
  }
}

//------------------------------------------------------------------------------
struct InfoNceResult {
  double loss = 0.0;
  std::vector<double> grad_query;
};

namespace detail {

inline InfoNceResult info_nce_unchecked(std::span<const double> q,
                                        std::span<const double> k_pos,
                                        const Matrix &queue, double tau) {
  const std::size_t K = queue.rows;
  std::vector<double> logits(K + 1);
  logits[0] = dot(q, k_pos) / tau;
  for (std::size_t j = 0; j < K; ++j)
    logits[j + 1] = dot(q, queue.row(j)) / tau;
  const double mx = *std::max_element(logits.begin(), logits.end());
  double sum = 0.0;
  for (double l : logits)
    sum += std::exp(l - mx);
  const double lse = mx + std::log(sum);

  InfoNceResult r;
  r.loss = lse - logits[0];
  r.grad_query.assign(q.size(), 0.0);
  // dL/dq = sum_j (softmax_j - [j == 0]) v_j / tau
  const double w0 = (std::exp(logits[0] - lse) - 1.0) / tau;
  for (std::size_t c = 0; c < q.size(); ++c)
    r.grad_query[c] = w0 * k_pos[c];
  for (std::size_t j = 0; j < K; ++j) {
    const double w = std::exp(logits[j + 1] - lse) / tau;
    auto v = queue.row(j);
    for (std::size_t c = 0; c < q.size(); ++c)
      r.grad_query[c] += w * v[c];
  }
  return r;
}

inline void require_unit(std::span<const double> v, const char *what) {
  const double n = std::sqrt(dot(v, v));
  if (!(std::abs(n - 1.0) <= 1e-6))
    throw DomainError(std::string("info_nce: ") + what +
                      " is not unit-norm (norm " + std::to_string(n) + ")");
}

} // namespace detail

//! Softmax cross-entropy over [q.k_pos, q.n_1, ..., q.n_K] / tau with target 0.
//! Keys and queue are constants; only dL/dq is returned.
inline InfoNceResult info_nce(std::span<const double> q,
                              std::span<const double> k_pos,
                              const Matrix &queue, double tau) {
  if (k_pos.size() != q.size() || (queue.rows > 0 && queue.cols != q.size()))
    throw ShapeError("info_nce: embedding widths disagree");
  if (!(tau > 0.0))
    throw DomainError("info_nce: temperature must be > 0");
  detail::require_unit(q, "query");
  detail::require_unit(k_pos, "positive key");
  for (std::size_t j = 0; j < queue.rows; ++j)
    detail::require_unit(queue.row(j), "queue entry");
  return detail::info_nce_unchecked(q, k_pos, queue, tau);
}

//! Overwrites the oldest keys.rows entries. keys.rows must divide the queue.
inline void enqueue(MocoState &state, const Matrix &keys) {
  const std::size_t K = state.queue.rows;
  if (keys.rows == 0 || K % keys.rows != 0)
    throw UsageError("enqueue: batch of " + std::to_string(keys.rows) +
                     " keys does not divide queue size " + std::to_string(K));
  if (keys.cols != state.queue.cols)
    throw ShapeError("enqueue: key width does not match queue");
  for (std::size_t i = 0; i < keys.rows; ++i) {
    auto src = keys.row(i);
    std::copy(src.begin(), src.end(), state.queue.row(state.head).begin());
    state.head = (state.head + 1) % K;
  }
}

//! Copies every pretrained layer and appends a freshly initialized
//! single-output head on top of the embedding.
inline ModelParams replace_head(const ModelParams &pretrained,
                                std::uint64_t seed) {
  if (pretrained.layers.empty())
    throw SpecError("replace_head: pretrained model has no layers");
  ModelParams out = pretrained;
  out.spec.layer_dims.push_back(1);
  Layer head;
  head.in = pretrained.layers.back().out;
  head.out = 1;
  head.weight.resize(head.in);
  head.bias.assign(1, 0.0);
  Rng rng(seed);
  const double bound = std::sqrt(6.0 / static_cast<double>(head.in + 1));
  for (double &w : head.weight)
    w = rng.uniform(-bound, bound);
  out.layers.push_back(std::move(head));
  return out;
}

//------------------------------------------------------------------------------
namespace detail {

// Row-wise L2 normalization; returns norms for the backward pass. A row with
// (near) zero norm has no direction: it stays zero and gets no gradient. This
// happens with ReLU encoders when augmentation masks every input coordinate.
inline constexpr double min_embed_norm = 1e-12;

inline std::vector<double> normalize_rows(Matrix &m) {
  std::vector<double> norms(m.rows);
  for (std::size_t i = 0; i < m.rows; ++i) {
    auto r = m.row(i);
    norms[i] = std::sqrt(dot(r, r));
    if (norms[i] < min_embed_norm) {
      std::fill(r.begin(), r.end(), 0.0);
      continue;
    }
    for (double &v : r)
      v /= norms[i];
  }
  return norms;
}

// Given e = y/|y| and dL/de, returns dL/dy = (g - (g.e)e)/|y|.
inline Matrix normalize_rows_backward(const Matrix &unit,
                                      std::span<const double> norms,
                                      const Matrix &grad_unit) {
  Matrix out(unit.rows, unit.cols);
  for (std::size_t i = 0; i < unit.rows; ++i) {
    if (norms[i] < min_embed_norm)
      continue;
    auto e = unit.row(i);
    auto g = grad_unit.row(i);
    const double ge = dot(g, e);
    for (std::size_t c = 0; c < unit.cols; ++c)
      out(i, c) = (g[c] - ge * e[c]) / norms[i];
  }
  return out;
}

} // namespace detail

//! Unit-norm embeddings of a batch.
inline Matrix embed(const ModelParams &encoder, const Matrix &batch) {
  auto r = forward_all(encoder, batch);
  detail::normalize_rows(r.output);
  return std::move(r.output);
}

//! One pretraining step on a batch of raw samples: augment, encode both
//! views, InfoNCE against the queue, SGD on the query encoder, momentum update
//! of the key encoder, enqueue the new keys. Returns the mean InfoNCE loss.
inline double moco_step(MocoState &state, const Matrix &batch,
                        const MocoConfig &cfg, SgdState &opt, Rng &rng) {
  if (batch.rows != cfg.batch_size)
    throw UsageError("moco_step: batch has " + std::to_string(batch.rows) +
                     " rows, config expects " + std::to_string(cfg.batch_size));
  const std::size_t B = batch.rows;
  Matrix xq(B, batch.cols), xk(B, batch.cols);
  for (std::size_t i = 0; i < B; ++i) {
    auto pair = augment_pair(batch.row(i), rng.next(), cfg);
    std::copy(pair.query_view.begin(), pair.query_view.end(), xq.row(i).begin());
    std::copy(pair.key_view.begin(), pair.key_view.end(), xk.row(i).begin());
  }

  auto fq = forward_all(state.query, xq);
  Matrix q = fq.output;
  const auto q_norms = detail::normalize_rows(q);
  const Matrix k = embed(state.key, xk);

  double loss = 0.0;
  Matrix grad_q(B, q.cols);
  for (std::size_t i = 0; i < B; ++i) {
    auto r = detail::info_nce_unchecked(q.row(i), k.row(i), state.queue,
                                        cfg.temperature);
    loss += r.loss;
    auto dst = grad_q.row(i);
    for (std::size_t c = 0; c < dst.size(); ++c)
      dst[c] = r.grad_query[c] / static_cast<double>(B);
  }
  const Matrix grad_y = detail::normalize_rows_backward(q, q_norms, grad_q);
  const auto grads = backward_all(state.query, fq.trace, grad_y);
  sgd_step(state.query, grads, opt);
  momentum_update(state.key, state.query, cfg.key_momentum);
  enqueue(state, k);
  return loss / static_cast<double>(B);
}

} // namespace aucmax
