// Acceptance suite: one test per criterion, each with its runtime budget.
// A listener prints a PASS/FAIL line per criterion once all have run.

#include <bit>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>
#include <string>
#include <vector>

#include <gtest/gtest.h>

#include "aucmax/aucmax.hpp"
#include "test_support.hpp"

using namespace aucmax;
using namespace aucmax::testing;
namespace fs = std::filesystem;

namespace {

const std::string data_dir = AUCMAX_TEST_DATA_DIR;

class Stopwatch {
public:
  double seconds() const {
    return std::chrono::duration<double>(std::chrono::steady_clock::now() - start_).count();
  }

private:
  std::chrono::steady_clock::time_point start_ = std::chrono::steady_clock::now();
};

fs::path scratch_dir(const std::string &name) {
  auto dir = fs::temp_directory_path() / "aucmax_acceptance" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

std::string slurp(const fs::path &p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

Matrix unit_rows(Rng &rng, std::size_t k, std::size_t d) {
  Matrix m(k, d);
  for (std::size_t i = 0; i < k; ++i) {
    const auto u = random_unit(rng, d);
    std::copy(u.begin(), u.end(), m.row(i).begin());
  }
  return m;
}

double infonce_oracle(const std::vector<double> &q, const std::vector<double> &k,
                      const Matrix &queue, double tau) {
  std::vector<double> logits{dot(std::span<const double>(q), std::span<const double>(k)) / tau};
  for (std::size_t j = 0; j < queue.rows; ++j)
    logits.push_back(dot(std::span<const double>(q), queue.row(j)) / tau);
  return lse_cross_entropy_target0(logits);
}

long double bce_ld(const std::vector<long double> &z, const std::vector<int> &y) {
  long double s = 0.0L;
  for (std::size_t i = 0; i < z.size(); ++i)
    s += std::log1p(std::exp(-std::abs(z[i]))) + std::max(z[i], 0.0L) - z[i] * y[i];
  return s / static_cast<long double>(z.size());
}

double auc_margin_direct(const std::vector<double> &h, const std::vector<int> &y, double a,
                         double b, double alpha, double m, double p) {
  double s = 0.0;
  for (std::size_t i = 0; i < h.size(); ++i) {
    const double pos = y[i] == 1, neg = y[i] == 0;
    s += (1 - p) * (h[i] - a) * (h[i] - a) * pos + p * (h[i] - b) * (h[i] - b) * neg +
         2 * alpha * (p * (1 - p) * m + p * h[i] * neg - (1 - p) * h[i] * pos) -
         p * (1 - p) * alpha * alpha;
  }
  return s / static_cast<double>(h.size());
}

// sum_i up_i * logit_i by the straight-line chain in extended precision,
// with parameter `which` (flattened order) shifted by `shift`.
long double weighted_logits_ld(const ModelParams &p, const Matrix &x,
                               const std::vector<double> &up, std::size_t which,
                               long double shift) {
  std::vector<std::vector<long double>> w, b;
  std::size_t k = 0;
  for (const auto &L : p.layers) {
    w.emplace_back(L.weight.begin(), L.weight.end());
    b.emplace_back(L.bias.begin(), L.bias.end());
  }
  // Flattened order is each layer's weights then its biases.
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    if (which < k + w[l].size()) {
      w[l][which - k] += shift;
      break;
    }
    k += w[l].size();
    if (which < k + b[l].size()) {
      b[l][which - k] += shift;
      break;
    }
    k += b[l].size();
  }
  long double total = 0.0L;
  for (std::size_t r = 0; r < x.rows; ++r) {
    std::vector<long double> v(x.row(r).begin(), x.row(r).end());
    for (std::size_t l = 0; l < p.layers.size(); ++l) {
      const auto &L = p.layers[l];
      std::vector<long double> y(L.out);
      for (std::size_t o = 0; o < L.out; ++o) {
        long double acc = b[l][o];
        for (std::size_t i = 0; i < L.in; ++i)
          acc += w[l][o * L.in + i] * v[i];
        if (l + 1 < p.layers.size())
          acc = p.spec.activation == Activation::relu ? std::max(acc, 0.0L) : std::tanh(acc);
        y[o] = acc;
      }
      v = std::move(y);
    }
    total += up[r] * v[0];
  }
  return total;
}

double mlp_central_diff_ld(const ModelParams &p, const Matrix &x, const std::vector<double> &up,
                           std::size_t which) {
  const long double h = 1e-6L;
  return static_cast<double>(
      (weighted_logits_ld(p, x, up, which, h) - weighted_logits_ld(p, x, up, which, -h)) /
      (2 * h));
}

} // namespace

// 1 -------------------------------------------------------------------------
TEST(Acceptance, C01_GradientIntegrity) {
  const Stopwatch sw;
  Rng rng(1001);

  int bce = 0;
  for (; bce < 100; ++bce) {
    const std::size_t n = 1 + rng.below(32);
    std::vector<double> z(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      z[i] = rng.gaussian(0.0, 4.0);
      y[i] = rng.bernoulli(0.5);
    }
    const auto g = bce_with_logits(z, y);
    for (std::size_t i = 0; i < n; ++i) {
      const long double h = 1e-6L;
      std::vector<long double> zp(z.begin(), z.end()), zm = zp;
      zp[i] += h;
      zm[i] -= h;
      const double fd = static_cast<double>((bce_ld(zp, y) - bce_ld(zm, y)) / (2 * h));
      ASSERT_LT(rel_err(g.d_inputs[i], fd), 1e-5) << "bce instance " << bce;
    }
  }

  int auc = 0;
  for (; auc < 100; ++auc) {
    const std::size_t n = 1 + rng.below(24);
    std::vector<double> h(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      h[i] = rng.uniform(0.05, 0.95);
      y[i] = rng.bernoulli(0.4);
    }
    const double p = rng.uniform(0.05, 0.95), m = rng.uniform(0.2, 2.0);
    const AucState st{rng.uniform(0, 1), rng.uniform(0, 1), rng.uniform(0, 2), m, p};
    const auto g = auc_margin_batch(h, y, st);
    std::vector<double> theta = h;
    theta.insert(theta.end(), {st.a, st.b, st.alpha});
    auto f = [&](const std::vector<double> &t) {
      const std::vector<double> hh(t.begin(), t.begin() + static_cast<std::ptrdiff_t>(n));
      return auc_margin_direct(hh, y, t[n], t[n + 1], t[n + 2], m, p);
    };
    for (std::size_t i = 0; i < n; ++i)
      ASSERT_LT(rel_err(g.d_inputs[i], central_diff(f, theta, i)), 1e-5);
    ASSERT_LT(rel_err(g.d_a, central_diff(f, theta, n)), 1e-5);
    ASSERT_LT(rel_err(g.d_b, central_diff(f, theta, n + 1)), 1e-5);
    ASSERT_LT(rel_err(g.d_alpha, central_diff(f, theta, n + 2)), 1e-5);
  }

  int nce = 0;
  for (; nce < 100; ++nce) {
    const std::size_t d = 2 + rng.below(16), K = 1 + rng.below(32);
    const auto q = random_unit(rng, d), k = random_unit(rng, d);
    const auto queue = unit_rows(rng, K, d);
    const double tau = rng.uniform(0.1, 1.0);
    const auto r = info_nce(q, k, queue, tau);
    auto f = [&](const std::vector<double> &qq) { return infonce_oracle(qq, k, queue, tau); };
    for (std::size_t c = 0; c < d; ++c)
      ASSERT_LT(rel_err(r.grad_query[c], central_diff(f, q, c)), 1e-5);
  }

  int mlp = 0;
  while (mlp < 100) {
    const std::size_t d = 1 + rng.below(12), h1 = 1 + rng.below(12), h2 = 1 + rng.below(8);
    const std::size_t n = 1 + rng.below(16);
    const auto act = rng.bernoulli(0.5) ? Activation::relu : Activation::tanh;
    auto p = init_params(ModelSpec{{d, h1, h2, 1}, act}, rng.next());
    p.for_each([&](double &v) { v += rng.gaussian(0.0, 0.05); });
    const auto x = random_matrix(rng, n, d);
    std::vector<double> up(n);
    for (double &u : up)
      u = rng.gaussian();
    auto fw = forward(p, x);
    if (act == Activation::relu && has_near_zero_preactivation(fw.trace, 1e-4))
      continue;
    const auto gflat = backward(p, fw.trace, up).flatten();
    const auto flat = p.flatten();
    for (std::size_t i = 0; i < flat.size(); ++i)
      ASSERT_LT(rel_err(gflat[i], mlp_central_diff_ld(p, x, up, i)), 1e-5) << "mlp param " << i;
    ++mlp;
  }

  EXPECT_GE(std::min({bce, auc, nce, mlp}), 100);
  EXPECT_LT(sw.seconds(), 60.0);
}

// 2 -------------------------------------------------------------------------
TEST(Acceptance, C02_AucOracleEquivalence) {
  const Stopwatch sw;
  Rng rng(1002);
  for (int inst = 0; inst < 1000; ++inst) {
    const std::size_t n = 2 + rng.below(199);
    std::vector<double> s(n);
    std::vector<int> y(n);
    // Coarse grid so ties are common, within and across classes.
    const double levels = static_cast<double>(1 + rng.below(20));
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::floor(rng.uniform() * levels) / levels;
      y[i] = rng.bernoulli(0.3);
    }
    y[0] = 1;
    y[1] = 0;
    ASSERT_NEAR(roc_auc(s, y), pairwise_auc(s, y), 1e-12) << "instance " << inst;
  }
  EXPECT_LT(sw.seconds(), 60.0);
}

// 3 -------------------------------------------------------------------------
TEST(Acceptance, C03_SaddlePointCorrectness) {
  Rng rng(1003);
  for (int inst = 0; inst < 100; ++inst) {
    const std::size_t n = 10 + rng.below(40);
    const std::size_t n_pos = std::max<std::size_t>(1, n / 10) + rng.below(n * 8 / 10);
    std::vector<double> h;
    std::vector<int> y;
    for (std::size_t i = 0; i < n; ++i) {
      y.push_back(i < n_pos ? 1 : 0);
      h.push_back(rng.uniform(0.01, 0.99));
    }
    const double p = static_cast<double>(n_pos) / static_cast<double>(n);
    const auto opt = inner_optima(h, y, p, 1.0);

    AucState st{0.0, 0.0, 0.0, 1.0, p};
    auto frozen = ModelParams::zeros(ModelSpec{{1, 1}});
    const auto zero = ModelParams::zeros(frozen.spec);
    PesgState ps;
    ps.primal_lr = ps.dual_lr = 0.05;
    for (int t = 0; t < 2000; ++t)
      pesg_step(frozen, st, zero, auc_margin_batch(h, y, st), ps);
    ASSERT_NEAR(st.a, opt.a, 1e-3) << "instance " << inst;
    ASSERT_NEAR(st.b, opt.b, 1e-3) << "instance " << inst;
    ASSERT_NEAR(st.alpha, opt.alpha, 1e-3) << "instance " << inst;

    const auto g = auc_margin_batch(h, y, AucState{opt.a, opt.b, opt.alpha, 1.0, p});
    ASSERT_LT(std::abs(g.d_a), 1e-12);
    ASSERT_LT(std::abs(g.d_b), 1e-12);
    ASSERT_LT(std::abs(g.d_alpha), 1e-12);
  }
}

// 4 -------------------------------------------------------------------------
TEST(Acceptance, C04_SeparableDataOptimality) {
  const Stopwatch sw;
  ExperimentConfig cfg;
  cfg.model = "linear";
  cfg.loss = LossKind::auc_max;
  cfg.synthetic.dim = 2;
  cfg.synthetic.mean_separation = 6.0;
  cfg.synthetic.noise_std = 1.0;
  cfg.synthetic_scale = 1.0;
  cfg.auc_lr = 0.1;
  cfg.auc_milestones = {15};
  cfg.auc_decay_factor = 0.1;
  cfg.epochs = 30;
  cfg.seed = 4;
  cfg.output_dir = "";
  const auto r = run_finetune(cfg);
  ASSERT_EQ(r.folds.size(), 5u);
  for (const auto &f : r.folds)
    EXPECT_GE(f.auc, 0.999) << "fold " << f.fold;
  EXPECT_LT(sw.seconds(), 60.0);
}

// 5 -------------------------------------------------------------------------
TEST(Acceptance, C05_ProtocolFidelity) {
  // Fold counts on a 13,794 / 2,158 label vector.
  std::vector<int> labels(13794, 0);
  labels.resize(13794 + 2158, 1);
  const auto fa = stratified_kfold(labels, 5, 7);
  for (std::size_t f = 0; f < 5; ++f) {
    std::size_t pos = 0;
    for (auto i : fa.members(f))
      pos += static_cast<std::size_t>(labels[i]);
    EXPECT_TRUE(pos == 431 || pos == 432) << "fold " << f << ": " << pos;
  }

  // F1 threshold equals the exhaustive-candidate maximizer.
  Rng rng(1005);
  for (int inst = 0; inst < 300; ++inst) {
    const std::size_t n = 2 + rng.below(80);
    std::vector<double> s(n);
    std::vector<int> y(n);
    for (std::size_t i = 0; i < n; ++i) {
      s[i] = std::round(rng.uniform() * 30) / 30;
      y[i] = rng.bernoulli(0.35);
    }
    y[0] = 1;
    y[1] = 0;
    double best = -1.0, best_t = 0.0;
    for (double t : f1_candidates(s)) {
      const double f1 = f1_by_counting(s, y, t);
      if (f1 > best) {
        best = f1;
        best_t = t;
      }
    }
    const auto got = best_f1_threshold(s, y);
    ASSERT_EQ(got.threshold, best_t);
    ASSERT_DOUBLE_EQ(got.f1, best);
  }

  // Saved fold model maximizes validation accuracy; test rows read only at
  // the end of each fold.
  for (auto loss : {LossKind::ce, LossKind::auc_max}) {
    ExperimentConfig cfg;
    cfg.loss = loss;
    cfg.synthetic.n_neg = 400;
    cfg.synthetic.n_pos = 80;
    cfg.test_neg = cfg.test_pos = 20;
    cfg.epochs = 8;
    cfg.auc_milestones = {4};
    cfg.seed = 55;
    cfg.output_dir = "";
    const auto data = prepare_data(cfg);
    const std::set<std::size_t> test(data.test_rows.begin(), data.test_rows.end());
    std::vector<std::string> log;
    std::size_t leaked = 0;
    RunHooks hooks;
    auto guard = [&](const char *what) {
      return [&, what](std::size_t fold, std::span<const std::size_t> rows) {
        log.push_back(std::string(what) + std::to_string(fold));
        for (auto r : rows)
          leaked += test.count(r);
      };
    };
    hooks.on_train_rows = guard("train");
    hooks.on_selection_rows = guard("select");
    hooks.on_test_rows = [&](std::size_t fold, std::span<const std::size_t>) {
      log.push_back("test" + std::to_string(fold));
    };
    const auto r = run_finetune(cfg, data, hooks);
    EXPECT_EQ(leaked, 0u) << to_string(loss);
    for (std::size_t f = 0; f < cfg.folds; ++f) {
      const auto tag = "test" + std::to_string(f);
      const auto t = std::find(log.begin(), log.end(), tag);
      ASSERT_NE(t, log.end());
      EXPECT_EQ(std::count(log.begin(), log.end(), tag), 1);
      EXPECT_EQ(std::find(t, log.end(), "train" + std::to_string(f)), log.end());
      EXPECT_EQ(std::find(t, log.end(), "select" + std::to_string(f)), log.end());

      const auto &fm = r.folds[f];
      for (double acc : fm.epoch_val_accuracy)
        EXPECT_GE(fm.best_val_accuracy, acc);
      const auto rows = data.fold_rows(f);
      const auto yv = take(std::span<const int>(data.table.labels), rows);
      const auto probs =
          sigmoid(predict_logits(r.models[f].params, take_rows(data.table.features, rows)));
      const auto choice = best_f1_threshold(probs, yv);
      EXPECT_EQ(confusion_at(probs, yv, choice.threshold).accuracy(), fm.best_val_accuracy);
    }
  }
}

// 6 -------------------------------------------------------------------------
TEST(Acceptance, C06_TrustUnitSuite) {
  const TrustConfig unit;
  EXPECT_EQ(qa_trust(1.0, 1, unit), 1.0);
  EXPECT_EQ(qa_trust(1.0, 0, unit), 0.0);
  EXPECT_EQ(qa_trust(0.0, 0, unit), 1.0);
  EXPECT_EQ(qa_trust(0.0, 1, unit), 0.0);

  Rng rng(1006);
  std::vector<double> probs;
  std::vector<int> labels;
  const TrustConfig cfg{rng.uniform(0.5, 3), rng.uniform(0.5, 3), 0.5};
  for (int i = 0; i < 1000; ++i) {
    const double p = rng.uniform();
    const int y = rng.bernoulli(0.3);
    // c_true is the probability assigned to the true class.
    const double c_true = y == 1 ? p : 1.0 - p;
    const bool correct = (p >= cfg.threshold) == (y == 1);
    const double expect =
        std::pow(c_true, correct ? cfg.reward_exponent : cfg.penalty_exponent);
    ASSERT_NEAR(qa_trust(p, y, cfg), expect, 1e-15);
    probs.push_back(p);
    labels.push_back(y);

    // Monotone in confidence on the true class while the prediction is fixed.
    const TrustConfig c2{rng.uniform(0.1, 4), rng.uniform(0.1, 4), rng.uniform(0.05, 0.95)};
    const double a = rng.uniform(c2.threshold, 1.0), b = rng.uniform(c2.threshold, 1.0);
    ASSERT_LE(qa_trust(std::min(a, b), 1, c2), qa_trust(std::max(a, b), 1, c2));
    ASSERT_GE(qa_trust(std::min(a, b), 0, c2), qa_trust(std::max(a, b), 0, c2));
    const double t = qa_trust(p, y, c2);
    ASSERT_GE(t, 0.0);
    ASSERT_LE(t, 1.0);
  }

  const auto r = trust_report(probs, labels, cfg);
  double s[2] = {0, 0}, n[2] = {0, 0};
  for (std::size_t i = 0; i < probs.size(); ++i) {
    s[labels[i]] += qa_trust(probs[i], labels[i], cfg);
    n[labels[i]] += 1;
  }
  EXPECT_DOUBLE_EQ(r.trust_pos, s[1] / n[1]);
  EXPECT_DOUBLE_EQ(r.trust_neg, s[0] / n[0]);
  EXPECT_DOUBLE_EQ(class_trust(probs, labels, cfg, 1), s[1] / n[1]);
  EXPECT_DOUBLE_EQ(class_trust(probs, labels, cfg, 0), s[0] / n[0]);
}

// 7 -------------------------------------------------------------------------
TEST(Acceptance, C07_AucMaxRaisesPositiveTrust) {
  const Stopwatch sw;
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ExperimentConfig cfg;
    cfg.synthetic.mean_separation = 2.0;
    cfg.synthetic.noise_std = 1.0;
    cfg.seed = seed;
    cfg.output_dir = "";
    const auto data = prepare_data(cfg);
    cfg.loss = LossKind::ce;
    const double ce = run_finetune(cfg, data).aggregate_of(&FoldMetrics::trust_pos).mean;
    cfg.loss = LossKind::auc_max;
    const double am = run_finetune(cfg, data).aggregate_of(&FoldMetrics::trust_pos).mean;
    std::printf("  seed %2llu  trust_pos auc_max %.4f  ce %.4f\n",
                static_cast<unsigned long long>(seed), am, ce);
    wins += am > ce;
  }
  std::printf("  auc_max wins %d/20\n", wins);
  EXPECT_GE(wins, 15);
  EXPECT_LT(sw.seconds(), 600.0);
}

// 8 -------------------------------------------------------------------------
// Unlabeled structure that contrastive pretraining can find: 32 dimensions,
// class means 4 apart along one axis. Augmentation noise on the scale of the
// within-class spread makes instance discrimination keep cluster identity
// rather than every coordinate.
TEST(Acceptance, C08_PretrainingHelpsWithFewLabels) {
  const Stopwatch sw;
  const auto dir = scratch_dir("pretrain");
  int wins = 0;
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    ExperimentConfig cfg;
    cfg.label_fraction = 0.05;
    cfg.synthetic.dim = 32;
    cfg.synthetic.mean_separation = 4.0;
    cfg.moco.noise_std = 1.5;
    cfg.moco.mask_prob = 0.0;
    cfg.moco.temperature = 0.2;
    cfg.seed = seed;
    cfg.output_dir = (dir / std::to_string(seed)).string();
    const auto data = prepare_data(cfg);
    const auto pre = run_pretrain(cfg, data);
    cfg.output_dir = "";
    cfg.init = InitKind::scratch;
    const double scratch = run_finetune(cfg, data).aggregate_of(&FoldMetrics::auc).mean;
    cfg.init = InitKind::pretrained;
    cfg.pretrained_checkpoint = pre.checkpoint_path;
    const double pretrained = run_finetune(cfg, data).aggregate_of(&FoldMetrics::auc).mean;
    std::printf("  seed %2llu  test AUC pretrained %.4f  scratch %.4f\n",
                static_cast<unsigned long long>(seed), pretrained, scratch);
    wins += pretrained > scratch;
  }
  std::printf("  pretrained wins %d/20\n", wins);
  EXPECT_GE(wins, 15);
  EXPECT_LT(sw.seconds(), 600.0);
}

// 9 -------------------------------------------------------------------------
TEST(Acceptance, C09_MocoMechanics) {
  Rng rng(1009);

  // Momentum update fixed point and copy.
  const auto q = init_encoder(ModelSpec{{5, 7, 3}}, 1);
  auto k = init_encoder(ModelSpec{{5, 7, 3}}, 2);
  const auto k0 = k;
  momentum_update(k, q, 1.0);
  EXPECT_EQ(k, k0);
  momentum_update(k, q, 0.0);
  EXPECT_EQ(k, q);

  // InfoNCE against an independent log-sum-exp.
  for (int inst = 0; inst < 200; ++inst) {
    const std::size_t d = 2 + rng.below(30), K = 1 + rng.below(64);
    const auto qv = random_unit(rng, d), kv = random_unit(rng, d);
    const auto queue = unit_rows(rng, K, d);
    const double tau = rng.uniform(0.05, 1.0);
    ASSERT_NEAR(info_nce(qv, kv, queue, tau).loss, infonce_oracle(qv, kv, queue, tau), 1e-12);
  }

  // Queue cardinality stays K and the loss falls on two-cluster data.
  MocoConfig cfg;
  cfg.embed_dim = 16;
  cfg.queue_size = 64;
  cfg.batch_size = 16;
  cfg.temperature = 0.2;
  cfg.key_momentum = 0.99;
  auto s = MocoState::init(ModelSpec{{4, 32, 16}}, cfg, 21);
  Rng stream(1109);
  auto opt = SgdState::for_params(s.query, cfg.lr, cfg.momentum, cfg.weight_decay);
  std::vector<double> losses;
  for (int step = 0; step < 200; ++step) {
    Matrix x(cfg.batch_size, 4);
    for (std::size_t i = 0; i < x.rows; ++i)
      for (std::size_t c = 0; c < 4; ++c)
        x(i, c) = (c == 0 ? (i % 2 ? 3.0 : -3.0) : 0.0) + stream.gaussian(0.0, 0.5);
    losses.push_back(moco_step(s, x, cfg, opt, stream));
    ASSERT_EQ(s.queue.rows, cfg.queue_size);
    for (std::size_t j = 0; j < s.queue.rows; ++j) {
      const auto row = s.queue.row(j);
      ASSERT_NEAR(std::sqrt(dot(row, row)), 1.0, 1e-9);
    }
  }
  double head = 0, tail = 0;
  for (int i = 0; i < 20; ++i) {
    head += losses[static_cast<std::size_t>(i)];
    tail += losses[losses.size() - 1 - static_cast<std::size_t>(i)];
  }
  EXPECT_LT(tail / 20, head / 20);
}

// 10 ------------------------------------------------------------------------
TEST(Acceptance, C10_DeterminismAndPersistence) {
  const auto dir = scratch_dir("determinism");
  ExperimentConfig cfg;
  cfg.synthetic.n_neg = 300;
  cfg.synthetic.n_pos = 60;
  cfg.test_neg = cfg.test_pos = 20;
  cfg.epochs = 6;
  cfg.auc_milestones = {3};
  cfg.seed = 10;
  cfg.output_dir = (dir / "run").string();
  run_finetune(cfg);
  const auto first = slurp(dir / "run" / "report.json");
  const auto first_folds = slurp(dir / "run" / "folds.csv");
  run_finetune(cfg);
  EXPECT_FALSE(first.empty());
  EXPECT_EQ(slurp(dir / "run" / "report.json"), first);
  EXPECT_EQ(slurp(dir / "run" / "folds.csv"), first_folds);

  Checkpoint ck;
  ck.params = init_params(ModelSpec{{6, 9, 4, 1}}, 3);
  ck.params.layers[0].weight[0] = 1e-310;
  ck.params.layers[1].bias[2] = -0.0;
  ck.params.layers[2].weight[1] = 0.1 + 0.2;
  ck.aux = AucState{0.3, 0.1 + 0.7, 1.0 / 3.0, 1.0, 2158.0 / 15952.0};
  ck.threshold = 0.42;
  ck.seed = 99;
  const auto path = (dir / "m.ckpt").string();
  save_checkpoint(ck, path);
  const auto back = load_checkpoint(path);
  EXPECT_EQ(back, ck);
  const auto a = ck.params.flatten(), b = back.params.flatten();
  ASSERT_EQ(a.size(), b.size());
  for (std::size_t i = 0; i < a.size(); ++i)
    ASSERT_EQ(std::bit_cast<std::uint64_t>(a[i]), std::bit_cast<std::uint64_t>(b[i]));

  struct Case {
    const char *file;
    std::size_t row, column;
  };
  for (const auto &c : {Case{"malformed_non_numeric.csv", 3, 2}, Case{"malformed_nan.csv", 4, 1},
                        Case{"malformed_inf.csv", 2, 2}, Case{"malformed_empty_cell.csv", 2, 2},
                        Case{"malformed_bad_label.csv", 3, 3}, Case{"malformed_ragged.csv", 3, 0},
                        Case{"malformed_missing_label.csv", 1, 0},
                        Case{"malformed_single_class.csv", 0, 0},
                        Case{"malformed_one_row.csv", 0, 0}}) {
    try {
      load_csv(data_dir + "/" + c.file, "label");
      ADD_FAILURE() << c.file << " was accepted";
    } catch (const IngestionError &e) {
      EXPECT_EQ(e.row(), c.row) << c.file << ": " << e.what();
      EXPECT_EQ(e.column(), c.column) << c.file << ": " << e.what();
    }
  }
}

namespace {

const char *criterion_title(const std::string &name) {
  static const std::vector<std::pair<std::string, const char *>> titles{
      {"C01", "gradient integrity"},
      {"C02", "AUC oracle equivalence"},
      {"C03", "saddle-point correctness"},
      {"C04", "separable-data optimality"},
      {"C05", "protocol fidelity"},
      {"C06", "trust unit suite"},
      {"C07", "AUC-max raises positive-class trust"},
      {"C08", "pretraining helps with 5% labels"},
      {"C09", "MoCo mechanics"},
      {"C10", "determinism and persistence"}};
  for (const auto &[k, v] : titles)
    if (name.rfind(k, 0) == 0)
      return v;
  return "?";
}

class CriterionSummary : public ::testing::EmptyTestEventListener {
public:
  void OnTestEnd(const ::testing::TestInfo &info) override {
    const std::string name = info.name();
    const auto *r = info.result();
    char line[160];
    std::snprintf(line, sizeof line, "%s criterion %d: %s (%.1f s)",
                  r->Passed() ? "PASS" : "FAIL", std::stoi(name.substr(1, 2)),
                  criterion_title(name), static_cast<double>(r->elapsed_time()) / 1000.0);
    lines_.emplace_back(line);
  }
  void OnTestProgramEnd(const ::testing::UnitTest &) override {
    std::printf("\n== acceptance ==\n");
    for (const auto &l : lines_)
      std::printf("%s\n", l.c_str());
    std::fflush(stdout);
  }

private:
  std::vector<std::string> lines_;
};

} // namespace

int main(int argc, char **argv) {
  ::testing::InitGoogleTest(&argc, argv);
  ::testing::UnitTest::GetInstance()->listeners().Append(new CriterionSummary);
  return RUN_ALL_TESTS();
}
