#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "aucmax/errors.hpp"
#include "aucmax/model.hpp"

namespace aucmax {

//! Auxiliaries of the AUC-margin min-max objective.
//!
//! `a` and `b` track the mean score of positives and negatives, `alpha` is the
//! dual variable of the margin hinge, `margin` is m and `prior` is the
//! positive-class fraction p of the training set.
struct AucState {
  double a = 0.0;
  double b = 0.0;
  double alpha = 0.0;
  double margin = 1.0;
  double prior = 0.5;

  void validate() const {
    if (!(alpha >= 0.0) || !std::isfinite(alpha))
      throw DomainError("AucState: alpha must be finite and >= 0, got " +
                        std::to_string(alpha));
    if (!(prior > 0.0 && prior < 1.0))
      throw DomainError("AucState: prior must lie in (0,1), got " +
                        std::to_string(prior));
    if (!(margin > 0.0) || !std::isfinite(margin))
      throw DomainError("AucState: margin must be > 0, got " +
                        std::to_string(margin));
    if (!std::isfinite(a) || !std::isfinite(b))
      throw DomainError("AucState: a and b must be finite");
  }

  friend bool operator==(const AucState &, const AucState &) = default;
};

//! Loss value plus gradients w.r.t. the per-sample loss inputs and the
//! auxiliaries. `d_inputs` is with respect to logits for BCE and with respect
//! to sigmoid scores for the AUC-margin loss.
struct LossGrad {
  double loss = 0.0;
  std::vector<double> d_inputs;
  double d_a = 0.0;
  double d_b = 0.0;
  double d_alpha = 0.0;
};

namespace detail {

inline void check_labels(std::span<const int> labels, std::size_t n,
                         const char *where) {
  if (labels.size() != n)
    throw ShapeError(std::string(where) + ": " + std::to_string(n) +
                     " inputs but " + std::to_string(labels.size()) + " labels");
  for (int y : labels)
    if (y != 0 && y != 1)
      throw DomainError(std::string(where) + ": labels must be 0 or 1");
}

} // namespace detail

//------------------------------------------------------------------------------
//! Mean binary cross-entropy on raw logits.
inline LossGrad bce_with_logits(std::span<const double> logits,
                                std::span<const int> labels) {
  if (logits.empty())
    throw UsageError("bce_with_logits: empty batch");
  detail::check_labels(labels, logits.size(), "bce_with_logits");
  const double n = static_cast<double>(logits.size());
  LossGrad g;
  g.d_inputs.resize(logits.size());
  double total = 0.0;
  for (std::size_t i = 0; i < logits.size(); ++i) {
    const double z = logits[i];
    const double y = labels[i];
    total += std::max(z, 0.0) - z * y + std::log1p(std::exp(-std::abs(z)));
    g.d_inputs[i] = (sigmoid(z) - y) / n;
  }
  g.loss = total / n;
  return g;
}

//------------------------------------------------------------------------------
//! Prior-weighted AUC-margin surrogate on sigmoid scores h in (0,1):
//!
//!   f_i = (1-p)(h_i-a)^2 [y=1] + p(h_i-b)^2 [y=0]
//!       + 2 alpha (p(1-p)m + p h_i [y=0] - (1-p) h_i [y=1]) - p(1-p) alpha^2
//!
//! The loss is the batch mean of f_i. It is minimized over the model and (a,b)
//! and maximized over alpha >= 0. Chaining through the sigmoid is left to the
//! caller.
inline LossGrad auc_margin_batch(std::span<const double> scores,
                                 std::span<const int> labels,
                                 const AucState &state) {
  if (scores.empty())
    throw UsageError("auc_margin_batch: empty batch");
  detail::check_labels(labels, scores.size(), "auc_margin_batch");
  state.validate();
  const double p = state.prior;
  const double q = 1.0 - p;
  const double pq = p * q;
  const double a = state.a, b = state.b, alpha = state.alpha,
               m = state.margin;
  const double inv_n = 1.0 / static_cast<double>(scores.size());

  LossGrad g;
  g.d_inputs.resize(scores.size());
  double total = 0.0, sum_da = 0.0, sum_db = 0.0, sum_dalpha = 0.0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const double h = scores[i];
    if (!(h > 0.0 && h < 1.0))
      throw DomainError("auc_margin_batch: score " + std::to_string(h) +
                        " at index " + std::to_string(i) +
                        " is outside (0,1)");
    double f, dh, hinge;
    if (labels[i] == 1) {
      const double r = h - a;
      hinge = pq * m - q * h;
      f = q * r * r;
      dh = 2.0 * q * r - 2.0 * alpha * q;
      sum_da += -2.0 * q * r;
    } else {
      const double r = h - b;
      hinge = pq * m + p * h;
      f = p * r * r;
      dh = 2.0 * p * r + 2.0 * alpha * p;
      sum_db += -2.0 * p * r;
    }
    f += 2.0 * alpha * hinge - pq * alpha * alpha;
    sum_dalpha += 2.0 * hinge - 2.0 * pq * alpha;
    total += f;
    g.d_inputs[i] = dh * inv_n;
  }
  g.loss = total * inv_n;
  g.d_a = sum_da * inv_n;
  g.d_b = sum_db * inv_n;
  g.d_alpha = sum_dalpha * inv_n;
  return g;
}

//! Stationary point of the AUC-margin loss in (a, b, alpha) for fixed scores.
struct InnerOptima {
  double a = 0.0;
  double b = 0.0;
  double alpha = 0.0;
};

//! Closed-form inner optimum. Requires the batch's positive fraction to equal
//! `prior`, which is what makes alpha* = m + mean_neg - mean_pos.
inline InnerOptima inner_optima(std::span<const double> scores,
                                std::span<const int> labels, double prior,
                                double margin) {
  detail::check_labels(labels, scores.size(), "inner_optima");
  double sum_pos = 0.0, sum_neg = 0.0;
  std::size_t n_pos = 0, n_neg = 0;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    if (labels[i] == 1) {
      sum_pos += scores[i];
      ++n_pos;
    } else {
      sum_neg += scores[i];
      ++n_neg;
    }
  }
  if (n_pos == 0 || n_neg == 0)
    throw UsageError("inner_optima: batch must contain both classes");
  const double frac =
      static_cast<double>(n_pos) / static_cast<double>(scores.size());
  if (std::abs(frac - prior) > 1e-12)
    throw UsageError("inner_optima: batch positive fraction " +
                     std::to_string(frac) + " differs from prior " +
                     std::to_string(prior));
  InnerOptima opt;
  opt.a = sum_pos / static_cast<double>(n_pos);
  opt.b = sum_neg / static_cast<double>(n_neg);
  opt.alpha = std::max(0.0, margin + opt.b - opt.a);
  return opt;
}

//! Fraction of positive labels.
inline double estimate_prior(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int y : labels) {
    if (y != 0 && y != 1)
      throw DomainError("estimate_prior: labels must be 0 or 1");
    pos += static_cast<std::size_t>(y);
  }
  if (pos == 0 || pos == labels.size())
    throw UsageError("estimate_prior: both classes must be present");
  return static_cast<double>(pos) / static_cast<double>(labels.size());
}

} // namespace aucmax
