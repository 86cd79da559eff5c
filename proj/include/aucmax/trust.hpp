#pragma once

#include <cmath>
#include <span>
#include <string>
#include <vector>

#include "aucmax/errors.hpp"

namespace aucmax {

//! Question-answer trust parameters. `threshold` defines the predicted class
//! (positive iff prob >= threshold); the harness feeds it the fold's
//! F1-optimal validation threshold.
struct TrustConfig {
  double reward_exponent = 1.0;
  double penalty_exponent = 1.0;
  double threshold = 0.5;

  void validate() const {
    if (!(reward_exponent > 0.0) || !(penalty_exponent > 0.0))
      throw UsageError("TrustConfig: exponents must be > 0");
  }
};

struct TrustReport {
  std::vector<double> per_sample;
  double trust_pos = 0.0;
  double trust_neg = 0.0;
  double overall = 0.0;
};

//! Trust in one answer. With c = confidence assigned to the true class,
//! a correct prediction earns c^reward and a wrong one earns c^penalty, which
//! for a binary output is 1 minus the confidence placed on the wrong answer.
inline double qa_trust(double prob_pos, int y_true, const TrustConfig &cfg) {
  if (!(prob_pos >= 0.0 && prob_pos <= 1.0))
    throw DomainError("qa_trust: probability " + std::to_string(prob_pos) +
                      " outside [0,1]");
  if (y_true != 0 && y_true != 1)
    throw DomainError("qa_trust: label must be 0 or 1");
  cfg.validate();
  const int predicted = prob_pos >= cfg.threshold ? 1 : 0;
  const double c_true = y_true == 1 ? prob_pos : 1.0 - prob_pos;
  return std::pow(c_true, predicted == y_true ? cfg.reward_exponent
                                              : cfg.penalty_exponent);
}

//! Mean question-answer trust over samples whose true label is `cls`.
inline double class_trust(std::span<const double> probs, std::span<const int> labels,
                          const TrustConfig &cfg, int cls) {
  if (probs.size() != labels.size())
    throw ShapeError("class_trust: probs and labels differ in length");
  double sum = 0.0;
  std::size_t n = 0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    if (labels[i] != cls)
      continue;
    sum += qa_trust(probs[i], labels[i], cfg);
    ++n;
  }
  if (n == 0)
    throw UsageError("class_trust: no samples of class " + std::to_string(cls));
  return sum / static_cast<double>(n);
}

inline TrustReport trust_report(std::span<const double> probs,
                                std::span<const int> labels, const TrustConfig &cfg) {
  if (probs.size() != labels.size())
    throw ShapeError("trust_report: probs and labels differ in length");
  TrustReport r;
  r.per_sample.reserve(probs.size());
  double total = 0.0;
  for (std::size_t i = 0; i < probs.size(); ++i) {
    r.per_sample.push_back(qa_trust(probs[i], labels[i], cfg));
    total += r.per_sample.back();
  }
  r.trust_pos = class_trust(probs, labels, cfg, 1);
  r.trust_neg = class_trust(probs, labels, cfg, 0);
  r.overall = probs.empty() ? 0.0 : total / static_cast<double>(probs.size());
  return r;
}

} // namespace aucmax
