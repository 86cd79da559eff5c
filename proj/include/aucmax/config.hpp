#pragma once

#include <cstdint>
#include <fstream>
#include <functional>
#include <map>
#include <string>
#include <string_view>
#include <vector>

#include "aucmax/data.hpp"
#include "aucmax/errors.hpp"
#include "aucmax/moco.hpp"
#include "aucmax/model.hpp"

namespace aucmax {

enum class LossKind { ce, auc_max };
enum class InitKind { scratch, pretrained };

inline std::string to_string(LossKind k) { return k == LossKind::ce ? "ce" : "auc_max"; }
inline std::string to_string(InitKind k) {
  return k == InitKind::scratch ? "scratch" : "pretrained";
}

//==============================================================================
//! Everything one experiment needs. Every field is reachable through a
//! `key = value` config line and the matching `--key` CLI flag (see
//! config_keys()).
struct ExperimentConfig {
  // Objective and initialization.
  LossKind loss = LossKind::auc_max;
  InitKind init = InitKind::scratch;
  std::string pretrained_checkpoint;

  // Architecture. "mlp" is {input, hidden_dims..., embed_dim, 1}, the same
  // shape a pretrained encoder has after head replacement; "linear" is {input, 1}.
  std::string model = "mlp";
  std::vector<std::size_t> hidden_dims{64};
  Activation activation = Activation::relu;

  // Fine-tuning protocol.
  int epochs = 30;
  std::size_t batch_size = 32;
  std::size_t folds = 5;
  double label_fraction = 1.0;

  // AUC-margin path: step decay.
  double auc_lr = 0.1;
  std::vector<int> auc_milestones{15};
  double auc_decay_factor = 0.1;
  double dual_lr = 0.0; // 0 means "same as auc_lr"
  double auc_weight_decay = 1e-4;
  double margin = 1.0;
  double prox_gamma = 0.0;

  // Cross-entropy path: SGD + cosine annealing.
  double ce_lr = 1e-3;
  double ce_momentum = 0.9;
  double ce_weight_decay = 1e-4;

  // Trust scoring.
  double trust_reward_exponent = 1.0;
  double trust_penalty_exponent = 1.0;

  // Data.
  std::string data_source = "synthetic";
  std::string csv_path;
  std::string label_column = "label";
  SyntheticSpec synthetic{2, 0, 0, 2.0, 1.0, 0};
  double synthetic_scale = 0.1;
  std::size_t test_neg = 100;
  std::size_t test_pos = 100;

  // Momentum-contrast pretraining.
  std::size_t pretrain_steps = 200;
  MocoConfig moco{};

  std::uint64_t seed = 0;
  std::string output_dir = "out";

  //! Class counts of the synthetic generator: explicit counts win over scale.
  SyntheticSpec synthetic_spec() const {
    SyntheticSpec s = synthetic;
    if (s.n_neg == 0 || s.n_pos == 0) {
      SyntheticSpec scaled;
      scaled.set_scale(synthetic_scale);
      if (s.n_neg == 0)
        s.n_neg = scaled.n_neg;
      if (s.n_pos == 0)
        s.n_pos = scaled.n_pos;
    }
    s.seed = seed;
    return s;
  }

  //! Encoder shape for a given input width: {input, hidden..., embed}.
  ModelSpec encoder_spec(std::size_t input_dim) const {
    ModelSpec s;
    s.activation = activation;
    s.layer_dims.push_back(input_dim);
    for (auto h : hidden_dims)
      s.layer_dims.push_back(h);
    s.layer_dims.push_back(moco.embed_dim);
    return s;
  }

  ModelSpec scorer_spec(std::size_t input_dim) const {
    if (model == "linear")
      return ModelSpec{{input_dim, 1}, activation};
    ModelSpec s = encoder_spec(input_dim);
    s.layer_dims.push_back(1);
    return s;
  }

  void validate() const {
    if (folds < 2)
      throw ConfigError("folds must be >= 2");
    if (epochs < 1)
      throw ConfigError("epochs must be >= 1");
    if (batch_size < 1)
      throw ConfigError("batch_size must be >= 1");
    if (!(label_fraction > 0.0 && label_fraction <= 1.0))
      throw ConfigError("label_fraction must lie in (0,1]");
    if (model != "mlp" && model != "linear")
      throw ConfigError("model must be 'mlp' or 'linear'");
    if (init == InitKind::pretrained && pretrained_checkpoint.empty())
      throw ConfigError("init = pretrained needs pretrained_checkpoint");
    if (data_source != "synthetic" && data_source != "csv")
      throw ConfigError("data_source must be 'synthetic' or 'csv'");
    if (data_source == "csv" && csv_path.empty())
      throw ConfigError("data_source = csv needs csv_path");
    if (!(auc_lr > 0.0) || !(ce_lr > 0.0) || dual_lr < 0.0)
      throw ConfigError("learning rates must be positive");
    if (!(margin > 0.0))
      throw ConfigError("margin must be > 0");
    if (test_neg == 0 || test_pos == 0)
      throw ConfigError("test split needs both classes");
    try {
      moco.validate();
    } catch (const UsageError &e) {
      throw ConfigError(e.what());
    }
  }
};

//==============================================================================
//! One settable configuration key.
struct ConfigKey {
  std::string name;
  std::string help;
  std::function<void(ExperimentConfig &, const std::string &)> set;
  std::function<std::string(const ExperimentConfig &)> get;
};

namespace detail {

inline double to_double(const std::string &key, const std::string &v) {
  auto d = parse_double(v);
  if (!d || !std::isfinite(*d))
    throw ConfigError(key + ": expected a number, got '" + v + "'");
  return *d;
}

inline std::uint64_t to_u64(const std::string &key, const std::string &v) {
  auto d = parse_u64(v);
  if (!d)
    throw ConfigError(key + ": expected a non-negative integer, got '" + v + "'");
  return *d;
}

template <typename T>
std::vector<T> to_list(const std::string &key, const std::string &v) {
  std::vector<T> out;
  for (auto tok : split(v, ' ')) {
    tok = trim(tok);
    if (tok.empty())
      continue;
    for (auto part : split(tok, ',')) {
      part = trim(part);
      if (!part.empty())
        out.push_back(static_cast<T>(to_u64(key, std::string(part))));
    }
  }
  return out;
}

template <typename T> std::string join_list(const std::vector<T> &v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i)
    s += (i ? " " : "") + std::to_string(v[i]);
  return s;
}

inline std::string fmt(double v) { return format_double(v); }

} // namespace detail

inline const std::vector<ConfigKey> &config_keys() {
  using C = ExperimentConfig;
  using namespace detail;
  auto num = [](std::string name, std::string help, auto member) {
    return ConfigKey{name, std::move(help),
                     [name, member](C &c, const std::string &v) { c.*member = to_double(name, v); },
                     [member](const C &c) { return fmt(c.*member); }};
  };
  auto count = [](std::string name, std::string help, auto member) {
    return ConfigKey{name, std::move(help),
                     [name, member](C &c, const std::string &v) {
                       c.*member = static_cast<std::remove_reference_t<decltype(c.*member)>>(
                           to_u64(name, v));
                     },
                     [member](const C &c) { return std::to_string(c.*member); }};
  };
  auto text = [](std::string name, std::string help, auto member) {
    return ConfigKey{name, std::move(help), [member](C &c, const std::string &v) { c.*member = v; },
                     [member](const C &c) { return c.*member; }};
  };

  static const std::vector<ConfigKey> keys = {
      {"loss", "ce | auc_max",
       [](C &c, const std::string &v) {
         if (v == "ce")
           c.loss = LossKind::ce;
         else if (v == "auc_max")
           c.loss = LossKind::auc_max;
         else
           throw ConfigError("loss: expected ce or auc_max, got '" + v + "'");
       },
       [](const C &c) { return to_string(c.loss); }},
      {"init", "scratch | pretrained",
       [](C &c, const std::string &v) {
         if (v == "scratch")
           c.init = InitKind::scratch;
         else if (v == "pretrained")
           c.init = InitKind::pretrained;
         else
           throw ConfigError("init: expected scratch or pretrained, got '" + v + "'");
       },
       [](const C &c) { return to_string(c.init); }},
      text("pretrained_checkpoint", "encoder checkpoint used when init = pretrained",
           &C::pretrained_checkpoint),
      text("model", "mlp | linear", &C::model),
      {"hidden_dims", "hidden layer widths, space or comma separated (may be empty)",
       [](C &c, const std::string &v) { c.hidden_dims = to_list<std::size_t>("hidden_dims", v); },
       [](const C &c) { return join_list(c.hidden_dims); }},
      {"activation", "relu | tanh",
       [](C &c, const std::string &v) {
         try {
           c.activation = activation_from_string(v);
         } catch (const SpecError &e) {
           throw ConfigError(e.what());
         }
       },
       [](const C &c) { return to_string(c.activation); }},
      {"epochs", "fine-tuning epochs",
       [](C &c, const std::string &v) { c.epochs = static_cast<int>(to_u64("epochs", v)); },
       [](const C &c) { return std::to_string(c.epochs); }},
      count("batch_size", "fine-tuning minibatch size", &C::batch_size),
      count("folds", "cross-validation folds (>= 2)", &C::folds),
      num("label_fraction", "fraction of each training fold used for labeled training",
          &C::label_fraction),
      num("auc_lr", "AUC path base learning rate", &C::auc_lr),
      {"auc_milestones", "epochs (0-indexed) at which the AUC learning rate decays",
       [](C &c, const std::string &v) { c.auc_milestones = to_list<int>("auc_milestones", v); },
       [](const C &c) { return join_list(c.auc_milestones); }},
      num("auc_decay_factor", "multiplicative decay at each milestone", &C::auc_decay_factor),
      num("dual_lr", "dual step size (0 = same as auc_lr)", &C::dual_lr),
      num("auc_weight_decay", "weight decay on model parameters, AUC path",
          &C::auc_weight_decay),
      num("margin", "AUC-margin m", &C::margin),
      num("prox_gamma", "proximal pull toward the epoch-start weights (0 = off)",
          &C::prox_gamma),
      num("ce_lr", "cross-entropy path base learning rate", &C::ce_lr),
      num("ce_momentum", "SGD momentum, CE path", &C::ce_momentum),
      num("ce_weight_decay", "SGD weight decay, CE path", &C::ce_weight_decay),
      num("trust_reward_exponent", "question-answer trust reward exponent",
          &C::trust_reward_exponent),
      num("trust_penalty_exponent", "question-answer trust penalty exponent",
          &C::trust_penalty_exponent),
      text("data_source", "synthetic | csv", &C::data_source),
      text("csv_path", "input CSV when data_source = csv", &C::csv_path),
      text("label_column", "label column name in the CSV", &C::label_column),
      {"synthetic_dim", "synthetic feature dimension",
       [](C &c, const std::string &v) { c.synthetic.dim = to_u64("synthetic_dim", v); },
       [](const C &c) { return std::to_string(c.synthetic.dim); }},
      {"synthetic_n_neg", "synthetic negatives (0 = derive from synthetic_scale)",
       [](C &c, const std::string &v) { c.synthetic.n_neg = to_u64("synthetic_n_neg", v); },
       [](const C &c) { return std::to_string(c.synthetic.n_neg); }},
      {"synthetic_n_pos", "synthetic positives (0 = derive from synthetic_scale)",
       [](C &c, const std::string &v) { c.synthetic.n_pos = to_u64("synthetic_n_pos", v); },
       [](const C &c) { return std::to_string(c.synthetic.n_pos); }},
      num("synthetic_scale", "multiplier on the 13794:2158 reference counts",
          &C::synthetic_scale),
      {"synthetic_separation", "distance between class means along the first axis",
       [](C &c, const std::string &v) {
         c.synthetic.mean_separation = to_double("synthetic_separation", v);
       },
       [](const C &c) { return fmt(c.synthetic.mean_separation); }},
      {"synthetic_noise", "per-coordinate noise standard deviation",
       [](C &c, const std::string &v) { c.synthetic.noise_std = to_double("synthetic_noise", v); },
       [](const C &c) { return fmt(c.synthetic.noise_std); }},
      count("test_neg", "held-out test negatives", &C::test_neg),
      count("test_pos", "held-out test positives", &C::test_pos),
      count("pretrain_steps", "momentum-contrast pretraining steps", &C::pretrain_steps),
      {"embed_dim", "encoder embedding width",
       [](C &c, const std::string &v) { c.moco.embed_dim = to_u64("embed_dim", v); },
       [](const C &c) { return std::to_string(c.moco.embed_dim); }},
      {"moco_queue_size", "negative-key queue length",
       [](C &c, const std::string &v) { c.moco.queue_size = to_u64("moco_queue_size", v); },
       [](const C &c) { return std::to_string(c.moco.queue_size); }},
      {"moco_batch_size", "pretraining batch size (must divide the queue)",
       [](C &c, const std::string &v) { c.moco.batch_size = to_u64("moco_batch_size", v); },
       [](const C &c) { return std::to_string(c.moco.batch_size); }},
      {"moco_key_momentum", "key-encoder momentum",
       [](C &c, const std::string &v) { c.moco.key_momentum = to_double("moco_key_momentum", v); },
       [](const C &c) { return fmt(c.moco.key_momentum); }},
      {"moco_temperature", "InfoNCE temperature",
       [](C &c, const std::string &v) { c.moco.temperature = to_double("moco_temperature", v); },
       [](const C &c) { return fmt(c.moco.temperature); }},
      {"moco_augmentation", "vector_noise_mask | horizontal_flip",
       [](C &c, const std::string &v) {
         try {
           c.moco.augmentation = augmentation_from_string(v);
         } catch (const UsageError &e) {
           throw ConfigError(e.what());
         }
       },
       [](const C &c) { return to_string(c.moco.augmentation); }},
      {"moco_noise_std", "augmentation noise standard deviation",
       [](C &c, const std::string &v) { c.moco.noise_std = to_double("moco_noise_std", v); },
       [](const C &c) { return fmt(c.moco.noise_std); }},
      {"moco_mask_prob", "augmentation per-coordinate drop probability",
       [](C &c, const std::string &v) { c.moco.mask_prob = to_double("moco_mask_prob", v); },
       [](const C &c) { return fmt(c.moco.mask_prob); }},
      {"pretrain_lr", "query-encoder SGD learning rate",
       [](C &c, const std::string &v) { c.moco.lr = to_double("pretrain_lr", v); },
       [](const C &c) { return fmt(c.moco.lr); }},
      count("seed", "master seed", &C::seed),
      text("output_dir", "directory receiving reports, ROC curves and checkpoints",
           &C::output_dir),
  };
  return keys;
}

inline const ConfigKey &find_config_key(std::string_view name) {
  for (const auto &k : config_keys())
    if (k.name == name)
      return k;
  throw ConfigError("unknown config key '" + std::string(name) + "'");
}

inline void set_config_value(ExperimentConfig &cfg, std::string_view key,
                             const std::string &value) {
  find_config_key(key).set(cfg, value);
}

//! Parses `key = value` lines. '#' starts a comment; blank lines are ignored.
inline void apply_config_text(ExperimentConfig &cfg, std::string_view text,
                              const std::string &origin = "config") {
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    auto line = raw;
    if (const auto hash = line.find('#'); hash != std::string_view::npos)
      line = line.substr(0, hash);
    line = trim(line);
    if (line.empty())
      continue;
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": expected 'key = value'");
    const auto key = trim(line.substr(0, eq));
    const std::string value(trim(line.substr(eq + 1)));
    try {
      set_config_value(cfg, key, value);
    } catch (const ConfigError &e) {
      throw ConfigError(origin + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
}

inline void load_config_file(ExperimentConfig &cfg, const std::string &path) {
  std::ifstream in(path);
  if (!in)
    throw ConfigError("cannot open config file '" + path + "'");
  std::string text((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  apply_config_text(cfg, text, path);
}

//! Every key with its current value, in registry order.
inline std::vector<std::pair<std::string, std::string>> config_echo(const ExperimentConfig &cfg) {
  std::vector<std::pair<std::string, std::string>> out;
  for (const auto &k : config_keys())
    out.emplace_back(k.name, k.get(cfg));
  return out;
}

//! Config echo in `key = value` form; feeding it back reproduces the config.
inline std::string config_to_text(const ExperimentConfig &cfg) {
  std::string s;
  for (const auto &[k, v] : config_echo(cfg))
    s += k + " = " + v + "\n";
  return s;
}

} // namespace aucmax
