#pragma once

#include <cmath>
#include <numbers>
#include <optional>
#include <string>
#include <vector>

#include "aucmax/errors.hpp"
#include "aucmax/losses.hpp"
#include "aucmax/model.hpp"

namespace aucmax {

//==============================================================================
//! SGD with heavy-ball momentum and L2 weight decay folded into the gradient.
struct SgdState {
  ModelParams velocity;
  double lr = 1e-3;
  double momentum = 0.9;
  double weight_decay = 1e-4;

  static SgdState for_params(const ModelParams &params, double lr,
                             double momentum, double weight_decay) {
    SgdState s;
    s.velocity = ModelParams::zeros(params.spec);
    s.lr = lr;
    s.momentum = momentum;
    s.weight_decay = weight_decay;
    s.validate();
    return s;
  }

  void validate() const {
    if (!(lr > 0.0))
      throw UsageError("SgdState: lr must be > 0");
    if (!(momentum >= 0.0 && momentum < 1.0))
      throw UsageError("SgdState: momentum must lie in [0,1)");
    if (!(weight_decay >= 0.0))
      throw UsageError("SgdState: weight_decay must be >= 0");
  }
};

//! v <- momentum*v + (grad + wd*param); param <- param - lr*v
inline void sgd_step(ModelParams &params, const Gradients &grads,
                     SgdState &state) {
  require_same_shape(params, grads, "sgd_step");
  require_same_shape(params, state.velocity, "sgd_step");
  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto update = [&](std::vector<double> &p, const std::vector<double> &g,
                      std::vector<double> &v) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        v[i] = state.momentum * v[i] + (g[i] + state.weight_decay * p[i]);
        p[i] -= state.lr * v[i];
      }
    };
    update(params.layers[l].weight, grads.layers[l].weight,
           state.velocity.layers[l].weight);
    update(params.layers[l].bias, grads.layers[l].bias,
           state.velocity.layers[l].bias);
  }
}

//==============================================================================
//! Primal-dual stochastic step sizes for the AUC-margin objective.
//!
//! `prox_gamma` > 0 adds gamma*(w - reference) to the model gradient, pulling
//! weights toward `reference` (typically re-anchored once per epoch).
struct PesgState {
  double primal_lr = 0.1;
  double dual_lr = 0.1;
  double weight_decay = 0.0;
  double prox_gamma = 0.0;
  std::optional<ModelParams> reference;
  int epoch = 0;

  void validate() const {
    if (!(primal_lr > 0.0) || !(dual_lr > 0.0))
      throw UsageError("PesgState: learning rates must be > 0");
    if (!(weight_decay >= 0.0) || !(prox_gamma >= 0.0))
      throw UsageError("PesgState: weight_decay and prox_gamma must be >= 0");
  }
};

//! Descends the model and (a, b); ascends alpha and projects it onto [0, inf).
//! Weight decay touches model parameters only.
inline void pesg_step(ModelParams &params, AucState &aux,
                      const Gradients &model_grads, const LossGrad &loss_grads,
                      const PesgState &state) {
  require_same_shape(params, model_grads, "pesg_step");
  if (state.prox_gamma > 0.0) {
    if (!state.reference)
      throw UsageError("pesg_step: prox_gamma > 0 needs a reference point");
    require_same_shape(params, *state.reference, "pesg_step");
  }
  if (!(aux.alpha >= 0.0))
    throw UsageError("pesg_step: alpha must be >= 0 on entry");
  if (!std::isfinite(loss_grads.d_a) || !std::isfinite(loss_grads.d_b) ||
      !std::isfinite(loss_grads.d_alpha))
    throw NumericalError("pesg_step: non-finite auxiliary gradient (d_a=" +
                         std::to_string(loss_grads.d_a) +
                         ", d_b=" + std::to_string(loss_grads.d_b) +
                         ", d_alpha=" + std::to_string(loss_grads.d_alpha) + ")");
  for (std::size_t l = 0; l < model_grads.layers.size(); ++l) {
    for (double g : model_grads.layers[l].weight)
      if (!std::isfinite(g))
        throw NumericalError("pesg_step: non-finite weight gradient in layer " +
                             std::to_string(l));
    for (double g : model_grads.layers[l].bias)
      if (!std::isfinite(g))
        throw NumericalError("pesg_step: non-finite bias gradient in layer " +
                             std::to_string(l));
  }

  for (std::size_t l = 0; l < params.layers.size(); ++l) {
    auto update = [&](std::vector<double> &p, const std::vector<double> &g,
                      const std::vector<double> *ref) {
      for (std::size_t i = 0; i < p.size(); ++i) {
        double step = g[i] + state.weight_decay * p[i];
        if (ref)
          step += state.prox_gamma * (p[i] - (*ref)[i]);
        p[i] -= state.primal_lr * step;
      }
    };
    const bool prox = state.prox_gamma > 0.0;
    update(params.layers[l].weight, model_grads.layers[l].weight,
           prox ? &state.reference->layers[l].weight : nullptr);
    update(params.layers[l].bias, model_grads.layers[l].bias,
           prox ? &state.reference->layers[l].bias : nullptr);
  }
  aux.a -= state.primal_lr * loss_grads.d_a;
  aux.b -= state.primal_lr * loss_grads.d_b;
  aux.alpha = std::max(0.0, aux.alpha + state.dual_lr * loss_grads.d_alpha);
}

//==============================================================================
struct Schedule {
  enum class Kind { step_decay, cosine };

  Kind kind = Kind::step_decay;
  double base_lr = 0.1;
  std::vector<int> milestones{15};
  double factor = 0.1;
  int total_epochs = 30;

  static Schedule step(double base_lr, std::vector<int> milestones,
                       double factor) {
    Schedule s;
    s.kind = Kind::step_decay;
    s.base_lr = base_lr;
    s.milestones = std::move(milestones);
    s.factor = factor;
    s.validate();
    return s;
  }

  static Schedule cosine(double base_lr, int total_epochs) {
    Schedule s;
    s.kind = Kind::cosine;
    s.base_lr = base_lr;
    s.milestones.clear();
    s.total_epochs = total_epochs;
    s.validate();
    return s;
  }

  void validate() const {
    if (!(base_lr > 0.0))
      throw UsageError("Schedule: base_lr must be > 0");
    if (kind == Kind::step_decay) {
      if (!(factor > 0.0 && factor < 1.0))
        throw UsageError("Schedule: factor must lie in (0,1)");
      for (std::size_t i = 1; i < milestones.size(); ++i)
        if (milestones[i] <= milestones[i - 1])
          throw UsageError("Schedule: milestones must be strictly increasing");
    } else if (total_epochs < 1) {
      throw UsageError("Schedule: cosine needs total_epochs >= 1");
    }
  }
};

//! Learning rate for a 0-indexed epoch. Cosine clamps past total_epochs.
inline double schedule_lr(const Schedule &s, int epoch) {
  if (epoch < 0)
    throw UsageError("schedule_lr: epoch must be >= 0");
  if (s.kind == Schedule::Kind::step_decay) {
    double lr = s.base_lr;
    for (int m : s.milestones)
      if (m <= epoch)
        lr *= s.factor;
    return lr;
  }
  const int e = std::min(epoch, s.total_epochs);
  return s.base_lr * 0.5 *
         (1.0 + std::cos(std::numbers::pi * e / s.total_epochs));
}

} // namespace aucmax
