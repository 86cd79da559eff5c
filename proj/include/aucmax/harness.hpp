#pragma once

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <filesystem>
#include <fstream>
#include <functional>
#include <limits>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "json.hpp"

#include "aucmax/config.hpp"
#include "aucmax/data.hpp"
#include "aucmax/losses.hpp"
#include "aucmax/metrics.hpp"
#include "aucmax/moco.hpp"
#include "aucmax/model.hpp"
#include "aucmax/optim.hpp"
#include "aucmax/trust.hpp"

namespace aucmax {

//==============================================================================
// Seed streams. Each consumer gets its own derived seed so adding draws in one
// place never shifts another.
namespace seeds {
inline constexpr std::uint64_t test_split = 11;
inline constexpr std::uint64_t folds = 12;
inline constexpr std::uint64_t label_subset = 13;
inline constexpr std::uint64_t model_init = 14;
inline constexpr std::uint64_t shuffle = 15;
inline constexpr std::uint64_t pretrain = 16;
} // namespace seeds

//! Observers for every row the harness reads, by purpose. Rows are indices
//! into the full dataset. Used to prove the test split stays untouched until
//! final evaluation.
struct RunHooks {
  using RowsFn = std::function<void(std::size_t fold, std::span<const std::size_t> rows)>;
  RowsFn on_train_rows;
  RowsFn on_selection_rows;
  RowsFn on_test_rows;
};

inline constexpr std::size_t pretrain_fold = std::numeric_limits<std::size_t>::max();

//==============================================================================
//! Dataset split into a balanced held-out test set and a pool that is folded
//! (and, for pretraining, read without labels).
struct PreparedData {
  DatasetTable table;
  std::vector<std::size_t> test_rows;
  std::vector<std::size_t> pool_rows;
  FoldAssignment folds; // indexed by position in pool_rows

  std::vector<std::size_t> fold_rows(std::size_t f) const {
    std::vector<std::size_t> out;
    for (auto i : folds.members(f))
      out.push_back(pool_rows[i]);
    return out;
  }
  std::vector<std::size_t> train_rows(std::size_t f) const {
    std::vector<std::size_t> out;
    for (auto i : folds.complement(f))
      out.push_back(pool_rows[i]);
    return out;
  }
};

inline DatasetTable load_dataset(const ExperimentConfig &cfg) {
  if (cfg.data_source == "csv")
    return load_csv(cfg.csv_path, cfg.label_column);
  return gen_gaussian_mixture(cfg.synthetic_spec());
}

inline PreparedData prepare_data(const ExperimentConfig &cfg, DatasetTable table) {
  PreparedData d;
  d.table = std::move(table);
  std::vector<std::size_t> pos, neg;
  for (std::size_t i = 0; i < d.table.size(); ++i)
    (d.table.labels[i] == 1 ? pos : neg).push_back(i);
  if (pos.size() <= cfg.test_pos || neg.size() <= cfg.test_neg)
    throw UsageError("dataset has " + std::to_string(pos.size()) + " positives and " +
                     std::to_string(neg.size()) + " negatives; cannot hold out " +
                     std::to_string(cfg.test_pos) + "/" + std::to_string(cfg.test_neg) +
                     " for testing");
  Rng rng(Rng::derive(cfg.seed, seeds::test_split));
  rng.shuffle(pos);
  rng.shuffle(neg);
  d.test_rows.assign(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(cfg.test_pos));
  d.test_rows.insert(d.test_rows.end(), neg.begin(),
                     neg.begin() + static_cast<std::ptrdiff_t>(cfg.test_neg));
  std::sort(d.test_rows.begin(), d.test_rows.end());
  std::vector<char> is_test(d.table.size(), 0);
  for (auto i : d.test_rows)
    is_test[i] = 1;
  for (std::size_t i = 0; i < d.table.size(); ++i)
    if (!is_test[i])
      d.pool_rows.push_back(i);
  std::vector<int> pool_labels;
  for (auto i : d.pool_rows)
    pool_labels.push_back(d.table.labels[i]);
  d.folds = stratified_kfold(pool_labels, cfg.folds, Rng::derive(cfg.seed, seeds::folds));
  return d;
}

inline PreparedData prepare_data(const ExperimentConfig &cfg) {
  return prepare_data(cfg, load_dataset(cfg));
}

//! FNV-1a over the fold indices; lets reports prove runs shared their folds.
inline std::string fold_digest(const FoldAssignment &fa) {
  std::uint64_t h = 0xcbf29ce484222325ull;
  for (auto f : fa.fold_of) {
    h ^= static_cast<std::uint64_t>(f);
    h *= 0x100000001b3ull;
  }
  std::ostringstream os;
  os << std::hex << h;
  return os.str();
}

//==============================================================================
struct EvalResult {
  ConfusionMatrix confusion;
  double auc = 0.0;
  double threshold = 0.0;
  TrustReport trust;
  std::vector<RocPoint> roc;
  std::vector<double> probs;
};

//! Scores `rows` of `table` with a scorer and reports confusion metrics at
//! `threshold`, AUC, ROC points, and question-answer trust.
inline EvalResult evaluate_model(const ModelParams &model, const DatasetTable &table,
                                 std::span<const std::size_t> rows, double threshold,
                                 const TrustConfig &trust_cfg = {}) {
  if (model.layers.empty() || model.layers.front().in != table.dim())
    throw ShapeError("model expects " +
                     std::to_string(model.layers.empty() ? 0 : model.layers.front().in) +
                     " features, dataset has " + std::to_string(table.dim()));
  const Matrix x = take_rows(table.features, rows);
  const auto y = take(std::span<const int>(table.labels), rows);
  EvalResult r;
  r.threshold = threshold;
  r.probs = sigmoid(predict_logits(model, x));
  r.confusion = confusion_at(r.probs, y, threshold);
  r.auc = roc_auc(r.probs, y);
  r.roc = roc_curve(r.probs, y);
  TrustConfig tc = trust_cfg;
  tc.threshold = threshold;
  r.trust = trust_report(r.probs, y, tc);
  return r;
}

//! Evaluates a checkpoint; the threshold defaults to the one stored with it.
inline EvalResult run_eval(const Checkpoint &ck, const DatasetTable &table,
                           std::span<const std::size_t> rows,
                           std::optional<double> threshold = std::nullopt,
                           const TrustConfig &trust_cfg = {}) {
  const double t = threshold ? *threshold : ck.threshold.value_or(0.5);
  return evaluate_model(ck.params, table, rows, t, trust_cfg);
}

//==============================================================================
struct FoldMetrics {
  std::size_t fold = 0;
  double auc = 0.0;
  double precision_neg = 0.0;
  double precision_pos = 0.0;
  double sensitivity_neg = 0.0;
  double sensitivity_pos = 0.0;
  double accuracy = 0.0;
  double f1_threshold = 0.0;
  double trust_pos = 0.0;
  double trust_neg = 0.0;
  int best_epoch = 0;
  double best_val_accuracy = 0.0;
  bool precision_pos_undefined = false;
  bool precision_neg_undefined = false;
  std::vector<double> epoch_val_accuracy;
  std::vector<double> epoch_train_loss;
};

struct MetricField {
  const char *name;
  double FoldMetrics::*member;
};

//! Report columns in output order.
inline const std::vector<MetricField> &metric_fields() {
  static const std::vector<MetricField> fields = {
      {"auc", &FoldMetrics::auc},
      {"precision_neg", &FoldMetrics::precision_neg},
      {"precision_pos", &FoldMetrics::precision_pos},
      {"sensitivity_neg", &FoldMetrics::sensitivity_neg},
      {"sensitivity_pos", &FoldMetrics::sensitivity_pos},
      {"accuracy", &FoldMetrics::accuracy},
      {"f1_threshold", &FoldMetrics::f1_threshold},
      {"trust_pos", &FoldMetrics::trust_pos},
      {"trust_neg", &FoldMetrics::trust_neg},
  };
  return fields;
}

struct Aggregate {
  double mean = 0.0;
  double std = 0.0; // sample standard deviation over folds
};

inline Aggregate aggregate(std::span<const double> v) {
  Aggregate a;
  if (v.empty())
    return a;
  double s = 0.0;
  for (double x : v)
    s += x;
  a.mean = s / static_cast<double>(v.size());
  if (v.size() > 1) {
    double ss = 0.0;
    for (double x : v)
      ss += (x - a.mean) * (x - a.mean);
    a.std = std::sqrt(ss / static_cast<double>(v.size() - 1));
  }
  return a;
}

struct RunResult {
  ExperimentConfig config;
  FoldAssignment fold_assignment;
  std::vector<FoldMetrics> folds;
  std::vector<Checkpoint> models;
  std::vector<std::vector<RocPoint>> roc;

  Aggregate aggregate_of(double FoldMetrics::*member) const {
    std::vector<double> v;
    for (const auto &f : folds)
      v.push_back(f.*member);
    return aggregate(v);
  }
};

//==============================================================================
namespace detail {

inline std::vector<std::size_t> label_subset(const DatasetTable &t,
                                             std::vector<std::size_t> rows,
                                             double fraction, std::uint64_t seed) {
  if (fraction >= 1.0)
    return rows;
  std::vector<std::size_t> pos, neg;
  for (auto r : rows)
    (t.labels[r] == 1 ? pos : neg).push_back(r);
  Rng rng(seed);
  rng.shuffle(pos);
  rng.shuffle(neg);
  auto keep = [&](std::size_t n) {
    return std::max<std::size_t>(1, static_cast<std::size_t>(std::ceil(fraction * n)));
  };
  std::vector<std::size_t> out(pos.begin(), pos.begin() + static_cast<std::ptrdiff_t>(keep(pos.size())));
  out.insert(out.end(), neg.begin(), neg.begin() + static_cast<std::ptrdiff_t>(keep(neg.size())));
  std::sort(out.begin(), out.end());
  return out;
}

inline ModelParams initial_model(const ExperimentConfig &cfg, std::size_t input_dim,
                                 std::size_t fold, const ModelParams *encoder) {
  const auto seed = Rng::derive(Rng::derive(cfg.seed, seeds::model_init), fold);
  if (cfg.init == InitKind::scratch)
    return init_params(cfg.scorer_spec(input_dim), seed);
  const ModelParams pretrained =
      encoder ? *encoder : load_checkpoint(cfg.pretrained_checkpoint).params;
  if (pretrained.layers.empty() || pretrained.layers.front().in != input_dim)
    throw ShapeError("pretrained encoder expects " +
                     std::to_string(pretrained.layers.empty() ? 0 : pretrained.layers.front().in) +
                     " features, dataset has " + std::to_string(input_dim));
  return replace_head(pretrained, seed);
}

inline std::vector<int> labels_of(const DatasetTable &t, std::span<const std::size_t> rows) {
  return take(std::span<const int>(t.labels), rows);
}

} // namespace detail

//! Trains and evaluates one fold under the configured loss and schedule.
//! After every epoch the F1-optimal validation threshold is recomputed and the
//! model with the best validation accuracy at its threshold is retained
//! (ties go to the later epoch, which has trained longer). Only the retained
//! model sees the test rows.
//! `encoder` overrides cfg.pretrained_checkpoint when init = pretrained.
inline FoldMetrics run_fold(const ExperimentConfig &cfg, const PreparedData &data,
                            std::size_t fold, const RunHooks &hooks = {},
                            Checkpoint *saved = nullptr,
                            std::vector<RocPoint> *roc = nullptr,
                            const ModelParams *encoder = nullptr) {
  const DatasetTable &t = data.table;
  const auto val_rows = data.fold_rows(fold);
  const auto train_rows = detail::label_subset(
      t, data.train_rows(fold), cfg.label_fraction,
      Rng::derive(Rng::derive(cfg.seed, seeds::label_subset), fold));
  const auto train_labels = detail::labels_of(t, train_rows);
  const auto val_labels = detail::labels_of(t, val_rows);
  auto count_pos = [](const std::vector<int> &y) { return std::count(y.begin(), y.end(), 1); };
  if (count_pos(train_labels) == 0 || count_pos(train_labels) == std::ssize(train_labels) ||
      count_pos(val_labels) == 0 || count_pos(val_labels) == std::ssize(val_labels))
    throw UsageError("fold " + std::to_string(fold) +
                     " is degenerate: training and validation need both classes");

  ModelParams model = detail::initial_model(cfg, t.dim(), fold, encoder);
  const bool auc_path = cfg.loss == LossKind::auc_max;

  Schedule schedule = auc_path
                          ? Schedule::step(cfg.auc_lr, cfg.auc_milestones, cfg.auc_decay_factor)
                          : Schedule::cosine(cfg.ce_lr, cfg.epochs);
  SgdState sgd;
  PesgState pesg;
  AucState aux;
  if (auc_path) {
    aux.margin = cfg.margin;
    aux.prior = estimate_prior(train_labels);
    // Start the auxiliaries at their closed-form optimum for the initial
    // scores. From a = b = alpha = 0 the square terms drag every score toward
    // zero before alpha has grown, which can saturate the sigmoid for good.
    const auto h0 = sigmoid(predict_logits(model, take_rows(t.features, train_rows)));
    const auto warm = inner_optima(h0, train_labels, aux.prior, aux.margin);
    aux.a = warm.a;
    aux.b = warm.b;
    aux.alpha = warm.alpha;
    pesg.weight_decay = cfg.auc_weight_decay;
    pesg.prox_gamma = cfg.prox_gamma;
  } else {
    sgd = SgdState::for_params(model, cfg.ce_lr, cfg.ce_momentum, cfg.ce_weight_decay);
  }
  const double dual_base = cfg.dual_lr > 0.0 ? cfg.dual_lr : cfg.auc_lr;

  const Matrix val_x = take_rows(t.features, val_rows);
  Rng rng(Rng::derive(Rng::derive(cfg.seed, seeds::shuffle), fold));

  FoldMetrics fm;
  fm.fold = fold;
  ModelParams best_model = model;
  AucState best_aux = aux;
  double best_acc = -1.0, best_threshold = 0.5;

  const double h_lo = std::numeric_limits<double>::min();
  const double h_hi = std::nextafter(1.0, 0.0);
  std::vector<std::size_t> order = train_rows;
  for (int epoch = 0; epoch < cfg.epochs; ++epoch) {
    const double lr = schedule_lr(schedule, epoch);
    if (auc_path) {
      pesg.primal_lr = lr;
      pesg.dual_lr = dual_base * (lr / cfg.auc_lr);
      pesg.epoch = epoch;
      if (pesg.prox_gamma > 0.0)
        pesg.reference = model;
    } else {
      sgd.lr = lr;
    }
    rng.shuffle(order);
    double epoch_loss = 0.0;
    std::size_t seen = 0;
    for (std::size_t start = 0; start < order.size(); start += cfg.batch_size) {
      const std::size_t stop = std::min(order.size(), start + cfg.batch_size);
      std::span<const std::size_t> batch_rows(order.data() + start, stop - start);
      if (hooks.on_train_rows)
        hooks.on_train_rows(fold, batch_rows);
      const Matrix x = take_rows(t.features, batch_rows);
      const auto y = detail::labels_of(t, batch_rows);
      auto fwd = forward(model, x);
      if (auc_path) {
        std::vector<double> h(fwd.logits.size());
        for (std::size_t i = 0; i < h.size(); ++i)
          h[i] = std::clamp(sigmoid(fwd.logits[i]), h_lo, h_hi);
        auto lg = auc_margin_batch(h, y, aux);
        std::vector<double> dz(h.size());
        for (std::size_t i = 0; i < h.size(); ++i)
          dz[i] = lg.d_inputs[i] * h[i] * (1.0 - h[i]);
        const auto grads = backward(model, fwd.trace, dz);
        pesg_step(model, aux, grads, lg, pesg);
        epoch_loss += lg.loss * static_cast<double>(h.size());
      } else {
        auto lg = bce_with_logits(fwd.logits, y);
        const auto grads = backward(model, fwd.trace, lg.d_inputs);
        sgd_step(model, grads, sgd);
        epoch_loss += lg.loss * static_cast<double>(y.size());
      }
      seen += batch_rows.size();
    }
    if (!model.all_finite())
      throw NumericalError("fold " + std::to_string(fold) + ", epoch " + std::to_string(epoch) +
                           ": model parameters became non-finite");
    fm.epoch_train_loss.push_back(seen ? epoch_loss / static_cast<double>(seen) : 0.0);

    if (hooks.on_selection_rows)
      hooks.on_selection_rows(fold, val_rows);
    const auto val_probs = sigmoid(predict_logits(model, val_x));
    const auto choice = best_f1_threshold(val_probs, val_labels);
    const double acc = confusion_at(val_probs, val_labels, choice.threshold).accuracy();
    fm.epoch_val_accuracy.push_back(acc);
    if (acc >= best_acc) {
      best_acc = acc;
      best_threshold = choice.threshold;
      best_model = model;
      best_aux = aux;
      fm.best_epoch = epoch;
    }
  }
  fm.best_val_accuracy = best_acc;
  fm.f1_threshold = best_threshold;

  if (hooks.on_test_rows)
    hooks.on_test_rows(fold, data.test_rows);
  TrustConfig tc;
  tc.reward_exponent = cfg.trust_reward_exponent;
  tc.penalty_exponent = cfg.trust_penalty_exponent;
  const auto ev = evaluate_model(best_model, t, data.test_rows, best_threshold, tc);
  fm.auc = ev.auc;
  fm.precision_neg = ev.confusion.precision_neg();
  fm.precision_pos = ev.confusion.precision_pos();
  fm.sensitivity_neg = ev.confusion.sensitivity_neg();
  fm.sensitivity_pos = ev.confusion.sensitivity_pos();
  fm.accuracy = ev.confusion.accuracy();
  fm.precision_pos_undefined = ev.confusion.precision_pos_undefined();
  fm.precision_neg_undefined = ev.confusion.precision_neg_undefined();
  fm.trust_pos = ev.trust.trust_pos;
  fm.trust_neg = ev.trust.trust_neg;

  if (saved) {
    saved->params = best_model;
    saved->threshold = best_threshold;
    saved->provenance = "finetune:" + to_string(cfg.loss) + ":" + to_string(cfg.init) +
                        ":fold" + std::to_string(fold);
    saved->seed = cfg.seed;
    if (auc_path)
      saved->aux = best_aux;
  }
  if (roc)
    *roc = ev.roc;
  return fm;
}

//==============================================================================
// Report serialization.

inline nlohmann::ordered_json config_json(const ExperimentConfig &cfg) {
  nlohmann::ordered_json j = nlohmann::ordered_json::object();
  for (const auto &[k, v] : config_echo(cfg))
    j[k] = v;
  return j;
}

inline nlohmann::ordered_json run_report_json(const RunResult &r) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["schema"] = "aucmax.run_report/1";
  j["loss"] = to_string(r.config.loss);
  j["init"] = to_string(r.config.init);
  j["seed"] = r.config.seed;
  j["fold_digest"] = fold_digest(r.fold_assignment);
  j["config"] = config_json(r.config);
  ordered_json folds = ordered_json::array();
  ordered_json notes = ordered_json::array();
  for (const auto &f : r.folds) {
    ordered_json fj;
    fj["fold"] = f.fold;
    for (const auto &m : metric_fields())
      fj[m.name] = f.*(m.member);
    fj["best_epoch"] = f.best_epoch;
    fj["best_val_accuracy"] = f.best_val_accuracy;
    fj["epoch_val_accuracy"] = f.epoch_val_accuracy;
    folds.push_back(fj);
    if (f.precision_pos_undefined)
      notes.push_back("fold " + std::to_string(f.fold) +
                      ": no positive predictions; precision_pos reported as 1.0");
    if (f.precision_neg_undefined)
      notes.push_back("fold " + std::to_string(f.fold) +
                      ": no negative predictions; precision_neg reported as 1.0");
  }
  j["folds"] = folds;
  ordered_json agg;
  for (const auto &m : metric_fields()) {
    const auto a = r.aggregate_of(m.member);
    agg[m.name] = {{"mean", a.mean}, {"std", a.std}};
  }
  j["aggregate"] = agg;
  j["notes"] = notes;
  return j;
}

inline std::string folds_csv(const RunResult &r) {
  std::ostringstream os;
  os << "fold";
  for (const auto &m : metric_fields())
    os << ',' << m.name;
  os << ",best_epoch,best_val_accuracy\n";
  for (const auto &f : r.folds) {
    os << f.fold;
    for (const auto &m : metric_fields())
      os << ',' << format_double(f.*(m.member));
    os << ',' << f.best_epoch << ',' << format_double(f.best_val_accuracy) << '\n';
  }
  return os.str();
}

namespace detail {

inline void write_text(const std::filesystem::path &p, const std::string &text) {
  std::ofstream out(p, std::ios::binary);
  if (!out)
    throw std::runtime_error("cannot write '" + p.string() + "'");
  out << text;
  if (!out)
    throw std::runtime_error("write failed for '" + p.string() + "'");
}

inline void ensure_dir(const std::filesystem::path &p) {
  std::error_code ec;
  std::filesystem::create_directories(p, ec);
  if (ec)
    throw std::runtime_error("cannot create directory '" + p.string() + "': " + ec.message());
}

} // namespace detail

//! Writes report.json, folds.csv, roc_fold<i>.csv and model_fold<i>.ckpt.
inline void write_run_outputs(const RunResult &r, const std::filesystem::path &dir) {
  detail::ensure_dir(dir);
  detail::write_text(dir / "report.json", run_report_json(r).dump(2) + "\n");
  detail::write_text(dir / "folds.csv", folds_csv(r));
  for (std::size_t f = 0; f < r.folds.size(); ++f) {
    std::ostringstream os;
    write_roc_csv(os, r.roc[f]);
    detail::write_text(dir / ("roc_fold" + std::to_string(f) + ".csv"), os.str());
    save_checkpoint(r.models[f], (dir / ("model_fold" + std::to_string(f) + ".ckpt")).string());
  }
}

//==============================================================================
//! Stratified k-fold fine-tuning with per-fold model selection and test
//! evaluation. Writes outputs when cfg.output_dir is non-empty.
inline RunResult run_finetune(const ExperimentConfig &cfg, const PreparedData &data,
                              const RunHooks &hooks = {},
                              const ModelParams *encoder = nullptr) {
  cfg.validate();
  RunResult r;
  r.config = cfg;
  r.fold_assignment = data.folds;
  r.models.resize(cfg.folds);
  r.roc.resize(cfg.folds);
  for (std::size_t f = 0; f < cfg.folds; ++f)
    r.folds.push_back(run_fold(cfg, data, f, hooks, &r.models[f], &r.roc[f], encoder));
  if (!cfg.output_dir.empty())
    write_run_outputs(r, cfg.output_dir);
  return r;
}

inline RunResult run_finetune(const ExperimentConfig &cfg, const RunHooks &hooks = {}) {
  cfg.validate();
  return run_finetune(cfg, prepare_data(cfg), hooks);
}

//==============================================================================
struct PretrainResult {
  Checkpoint checkpoint;
  std::vector<double> losses;
  std::string checkpoint_path;
};

//! Momentum-contrast pretraining on the unlabeled pool (test rows excluded).
//! Writes encoder.ckpt and pretrain_loss.csv when cfg.output_dir is non-empty.
inline PretrainResult run_pretrain(const ExperimentConfig &cfg, const PreparedData &data,
                                   const RunHooks &hooks = {}) {
  cfg.validate();
  const auto &t = data.table;
  const MocoConfig &mc = cfg.moco;
  const std::uint64_t seed = Rng::derive(cfg.seed, seeds::pretrain);
  MocoState state = MocoState::init(cfg.encoder_spec(t.dim()), mc, seed);
  SgdState opt = SgdState::for_params(state.query, mc.lr, mc.momentum, mc.weight_decay);
  Rng rng(Rng::derive(seed, 3));
  if (data.pool_rows.size() < mc.batch_size)
    throw UsageError("pretraining pool smaller than moco_batch_size");

  PretrainResult res;
  std::vector<std::size_t> order = data.pool_rows;
  std::size_t cursor = order.size();
  for (std::size_t step = 0; step < cfg.pretrain_steps; ++step) {
    if (cursor + mc.batch_size > order.size()) {
      rng.shuffle(order);
      cursor = 0;
    }
    std::span<const std::size_t> rows(order.data() + cursor, mc.batch_size);
    cursor += mc.batch_size;
    if (hooks.on_train_rows)
      hooks.on_train_rows(pretrain_fold, rows);
    res.losses.push_back(moco_step(state, take_rows(t.features, rows), mc, opt, rng));
  }
  res.checkpoint.params = state.query;
  res.checkpoint.provenance = "pretrain";
  res.checkpoint.seed = cfg.seed;

  if (!cfg.output_dir.empty()) {
    const std::filesystem::path dir(cfg.output_dir);
    detail::ensure_dir(dir);
    res.checkpoint_path = (dir / "encoder.ckpt").string();
    save_checkpoint(res.checkpoint, res.checkpoint_path);
    std::ostringstream os;
    os << "step,loss\n";
    for (std::size_t i = 0; i < res.losses.size(); ++i)
      os << i << ',' << format_double(res.losses[i]) << '\n';
    detail::write_text(dir / "pretrain_loss.csv", os.str());
  }
  return res;
}

inline PretrainResult run_pretrain(const ExperimentConfig &cfg, const RunHooks &hooks = {}) {
  cfg.validate();
  return run_pretrain(cfg, prepare_data(cfg), hooks);
}

//==============================================================================
//! Columns compared across the grid (higher is better for each).
inline const std::vector<std::string> &grid_metric_names() {
  static const std::vector<std::string> names = {
      "auc",          "precision_neg", "precision_pos", "sensitivity_neg",
      "sensitivity_pos", "accuracy",   "trust_pos",     "trust_neg"};
  return names;
}

struct GridResult {
  PretrainResult pretrain;
  std::vector<RunResult> runs; // ce/scratch, ce/pretrained, auc_max/scratch, auc_max/pretrained
  std::vector<std::size_t> best_run; // per grid_metric_names() entry
};

inline std::string run_label(const ExperimentConfig &c) {
  return to_string(c.loss) + "_" + to_string(c.init);
}

inline double mean_metric(const RunResult &r, const std::string &name) {
  for (const auto &m : metric_fields())
    if (name == m.name)
      return r.aggregate_of(m.member).mean;
  throw UsageError("unknown metric '" + name + "'");
}

inline nlohmann::ordered_json grid_summary_json(const GridResult &g) {
  using nlohmann::ordered_json;
  ordered_json j;
  j["schema"] = "aucmax.grid_summary/1";
  j["seed"] = g.runs.empty() ? 0 : g.runs.front().config.seed;
  j["fold_digest"] = g.runs.empty() ? "" : fold_digest(g.runs.front().fold_assignment);
  j["metrics"] = grid_metric_names();
  ordered_json rows = ordered_json::array();
  for (std::size_t r = 0; r < g.runs.size(); ++r) {
    const auto &run = g.runs[r];
    ordered_json row;
    row["run"] = run_label(run.config);
    row["loss"] = to_string(run.config.loss);
    row["init"] = to_string(run.config.init);
    for (std::size_t m = 0; m < grid_metric_names().size(); ++m) {
      const auto &name = grid_metric_names()[m];
      for (const auto &f : metric_fields())
        if (name == f.name) {
          const auto a = run.aggregate_of(f.member);
          row[name] = {{"mean", a.mean}, {"std", a.std}, {"best", g.best_run[m] == r}};
        }
    }
    rows.push_back(row);
  }
  j["runs"] = rows;
  return j;
}

//! The 2x2 grid {ce, auc_max} x {scratch, pretrained} on shared data, folds and
//! seeds. Pretraining runs once and feeds both pretrained arms.
inline GridResult run_grid(const ExperimentConfig &base) {
  base.validate();
  const auto data = prepare_data(base);
  const std::filesystem::path root(base.output_dir);
  GridResult g;

  ExperimentConfig pcfg = base;
  pcfg.output_dir = base.output_dir.empty() ? "" : (root / "pretrain").string();
  g.pretrain = run_pretrain(pcfg, data);
  const std::string encoder_label =
      g.pretrain.checkpoint_path.empty() ? "<in-memory>" : g.pretrain.checkpoint_path;

  for (LossKind loss : {LossKind::ce, LossKind::auc_max})
    for (InitKind init : {InitKind::scratch, InitKind::pretrained}) {
      ExperimentConfig c = base;
      c.loss = loss;
      c.init = init;
      c.pretrained_checkpoint = init == InitKind::pretrained ? encoder_label : "";
      if (init == InitKind::pretrained)
        c.model = "mlp";
      c.output_dir = base.output_dir.empty() ? "" : (root / run_label(c)).string();
      g.runs.push_back(run_finetune(c, data, {}, &g.pretrain.checkpoint.params));
    }

  for (const auto &name : grid_metric_names()) {
    std::size_t best = 0;
    for (std::size_t r = 1; r < g.runs.size(); ++r)
      if (mean_metric(g.runs[r], name) > mean_metric(g.runs[best], name))
        best = r;
    g.best_run.push_back(best);
  }
  if (!base.output_dir.empty())
    detail::write_text(root / "summary.json", grid_summary_json(g).dump(2) + "\n");
  return g;
}

} // namespace aucmax
