#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <numeric>
#include <ostream>
#include <span>
#include <string>
#include <vector>

#include "aucmax/errors.hpp"
#include "aucmax/rng.hpp"

namespace aucmax {

namespace detail {

inline void check_binary(std::span<const double> scores,
                         std::span<const int> labels, const char *where) {
  if (scores.size() != labels.size())
    throw ShapeError(std::string(where) + ": scores and labels differ in length");
  for (int y : labels)
    if (y != 0 && y != 1)
      throw DomainError(std::string(where) + ": labels must be 0 or 1");
}

inline std::pair<std::size_t, std::size_t> class_counts(std::span<const int> labels) {
  std::size_t pos = 0;
  for (int y : labels)
    pos += static_cast<std::size_t>(y == 1);
  return {pos, labels.size() - pos};
}

} // namespace detail

//==============================================================================
//! Mann-Whitney AUC: P(score_pos > score_neg) + 0.5 P(tie), via average ranks.
inline double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  detail::check_binary(scores, labels, "roc_auc");
  const auto [n_pos, n_neg] = detail::class_counts(labels);
  if (n_pos == 0 || n_neg == 0)
    throw UsageError("roc_auc: both classes must be present");

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });

  // Ranks are 1-based; tied blocks share their average rank. Twice the rank is
  // an integer, which keeps the sum exact.
  std::uint64_t twice_rank_sum_pos = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    std::size_t j = i + 1;
    while (j < order.size() && scores[order[j]] == scores[order[i]])
      ++j;
    const std::uint64_t twice_avg = (i + 1) + j; // (first + last) ranks
    for (std::size_t k = i; k < j; ++k)
      if (labels[order[k]] == 1)
        twice_rank_sum_pos += twice_avg;
    i = j;
  }
  const double np = static_cast<double>(n_pos);
  const double nn = static_cast<double>(n_neg);
  const double u = static_cast<double>(twice_rank_sum_pos) / 2.0 - np * (np + 1.0) / 2.0;
  return u / (np * nn);
}

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
};

//! ROC curve from (0,0) to (1,1); one point per distinct score, sorted by fpr.
inline std::vector<RocPoint> roc_curve(std::span<const double> scores,
                                       std::span<const int> labels) {
  detail::check_binary(scores, labels, "roc_curve");
  const auto [n_pos, n_neg] = detail::class_counts(labels);
  if (n_pos == 0 || n_neg == 0)
    throw UsageError("roc_curve: both classes must be present");
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::stable_sort(order.begin(), order.end(),
                   [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });
  std::vector<RocPoint> pts{{0.0, 0.0}};
  std::size_t tp = 0, fp = 0, i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    while (i < order.size() && scores[order[i]] == s) {
      (labels[order[i]] == 1 ? tp : fp) += 1;
      ++i;
    }
    pts.push_back({static_cast<double>(fp) / static_cast<double>(n_neg),
                   static_cast<double>(tp) / static_cast<double>(n_pos)});
  }
  return pts;
}

//! Two-column CSV with header "fpr,tpr".
inline void write_roc_csv(std::ostream &os, std::span<const RocPoint> pts) {
  os << "fpr,tpr\n";
  os.precision(17);
  for (const auto &p : pts)
    os << p.fpr << ',' << p.tpr << '\n';
}

//==============================================================================
struct ConfusionMatrix {
  std::size_t tp = 0, fp = 0, tn = 0, fn = 0;

  std::size_t total() const noexcept { return tp + fp + tn + fn; }

  // Zero-denominator precision is reported as 1.0: no predictions of that
  // class means no false ones. The flags below record when that happened.
  bool precision_pos_undefined() const noexcept { return tp + fp == 0; }
  bool precision_neg_undefined() const noexcept { return tn + fn == 0; }

  double precision_pos() const noexcept {
    return tp + fp == 0 ? 1.0 : static_cast<double>(tp) / static_cast<double>(tp + fp);
  }
  double precision_neg() const noexcept {
    return tn + fn == 0 ? 1.0 : static_cast<double>(tn) / static_cast<double>(tn + fn);
  }
  //! Recall of the positive class. 0 when there are no positives.
  double sensitivity_pos() const noexcept {
    return tp + fn == 0 ? 0.0 : static_cast<double>(tp) / static_cast<double>(tp + fn);
  }
  //! Specificity.
  double sensitivity_neg() const noexcept {
    return tn + fp == 0 ? 0.0 : static_cast<double>(tn) / static_cast<double>(tn + fp);
  }
  double accuracy() const noexcept {
    return total() == 0 ? 0.0
                        : static_cast<double>(tp + tn) / static_cast<double>(total());
  }
  //! F1 of the positive class; 0 when tp == 0.
  double f1() const noexcept {
    const auto denom = 2 * tp + fp + fn;
    return tp == 0 ? 0.0 : 2.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }

  friend bool operator==(const ConfusionMatrix &, const ConfusionMatrix &) = default;
};

//! Predicts positive iff score >= threshold.
inline ConfusionMatrix confusion_at(std::span<const double> scores,
                                    std::span<const int> labels, double threshold) {
  detail::check_binary(scores, labels, "confusion_at");
  ConfusionMatrix cm;
  for (std::size_t i = 0; i < scores.size(); ++i) {
    const bool pred = scores[i] >= threshold;
    if (labels[i] == 1)
      (pred ? cm.tp : cm.fn) += 1;
    else
      (pred ? cm.fp : cm.tn) += 1;
  }
  return cm;
}

//! Candidate thresholds: one below the minimum, midpoints between consecutive
//! distinct scores, one above the maximum. Ascending.
inline std::vector<double> f1_candidates(std::span<const double> scores) {
  std::vector<double> s(scores.begin(), scores.end());
  std::sort(s.begin(), s.end());
  s.erase(std::unique(s.begin(), s.end()), s.end());
  std::vector<double> c;
  if (s.empty())
    return c;
  c.reserve(s.size() + 1);
  c.push_back(s.front() - 1.0);
  for (std::size_t i = 1; i < s.size(); ++i) {
    // For adjacent doubles the midpoint can round down onto s[i-1]; the upper
    // score then induces the same split.
    const double mid = (s[i - 1] + s[i]) / 2.0;
    c.push_back(mid > s[i - 1] ? mid : s[i]);
  }
  c.push_back(s.back() + 1.0);
  return c;
}

struct ThresholdChoice {
  double threshold = 0.0;
  double f1 = 0.0;
};

//! Smallest candidate threshold that maximizes positive-class F1.
//! A single descending sweep; equivalent to evaluating every candidate.
inline ThresholdChoice best_f1_threshold(std::span<const double> scores,
                                         std::span<const int> labels) {
  detail::check_binary(scores, labels, "best_f1_threshold");
  const auto [n_pos, n_neg] = detail::class_counts(labels);
  if (n_pos == 0 || n_neg == 0)
    throw UsageError("best_f1_threshold: both classes must be present");

  const auto cands = f1_candidates(scores);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] > scores[b]; });

  // F1 for each candidate, walking from the highest threshold down.
  std::vector<double> f1(cands.size(), 0.0);
  std::size_t tp = 0, fp = 0, k = 0;
  for (std::size_t c = cands.size(); c-- > 0;) {
    while (k < order.size() && scores[order[k]] >= cands[c]) {
      (labels[order[k]] == 1 ? tp : fp) += 1;
      ++k;
    }
    const std::size_t fn = n_pos - tp;
    f1[c] = tp == 0 ? 0.0
                    : 2.0 * static_cast<double>(tp) /
                          static_cast<double>(2 * tp + fp + fn);
  }
  ThresholdChoice best{cands.front(), f1.front()};
  for (std::size_t c = 1; c < cands.size(); ++c)
    if (f1[c] > best.f1)
      best = {cands[c], f1[c]};
  return best;
}

//==============================================================================
//! Fold index per sample; every fold holds both classes in near-equal counts.
struct FoldAssignment {
  std::size_t k = 0;
  std::vector<std::size_t> fold_of;

  std::vector<std::size_t> members(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] == fold)
        out.push_back(i);
    return out;
  }
  std::vector<std::size_t> complement(std::size_t fold) const {
    std::vector<std::size_t> out;
    for (std::size_t i = 0; i < fold_of.size(); ++i)
      if (fold_of[i] != fold)
        out.push_back(i);
    return out;
  }

  friend bool operator==(const FoldAssignment &, const FoldAssignment &) = default;
};

//! Shuffles each class with the seed and deals it round-robin over k folds.
//! Negatives continue the deal where positives stopped so fold sizes stay even.
inline FoldAssignment stratified_kfold(std::span<const int> labels, std::size_t k,
                                       std::uint64_t seed) {
  if (k < 2)
    throw UsageError("stratified_kfold: k must be >= 2");
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < labels.size(); ++i) {
    if (labels[i] == 1)
      pos.push_back(i);
    else if (labels[i] == 0)
      neg.push_back(i);
    else
      throw DomainError("stratified_kfold: labels must be 0 or 1");
  }
  if (pos.size() < k || neg.size() < k)
    throw UsageError("stratified_kfold: each class needs at least k=" +
                     std::to_string(k) + " samples (have " +
                     std::to_string(pos.size()) + " positive, " +
                     std::to_string(neg.size()) + " negative)");
  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);
  FoldAssignment fa;
  fa.k = k;
  fa.fold_of.assign(labels.size(), 0);
  std::size_t slot = 0;
  for (auto i : pos)
    fa.fold_of[i] = slot++ % k;
  for (auto i : neg)
    fa.fold_of[i] = slot++ % k;
  return fa;
}

} // namespace aucmax
