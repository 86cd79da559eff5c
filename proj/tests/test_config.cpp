#include <set>
#include <string>

#include <gtest/gtest.h>

#include "aucmax/config.hpp"

using namespace aucmax;

TEST(Config, DefaultsFollowTrainingRecipe) {
  const ExperimentConfig c;
  EXPECT_EQ(c.epochs, 30);
  EXPECT_EQ(c.folds, 5u);
  EXPECT_EQ(c.auc_lr, 0.1);
  EXPECT_EQ(c.auc_milestones, (std::vector<int>{15}));
  EXPECT_EQ(c.auc_decay_factor, 0.1);
  EXPECT_EQ(c.ce_lr, 1e-3);
  EXPECT_EQ(c.ce_momentum, 0.9);
  EXPECT_EQ(c.ce_weight_decay, 1e-4);
  EXPECT_EQ(c.moco.embed_dim, 128u);
  EXPECT_NO_THROW(c.validate());
  const auto s = c.synthetic_spec();
  EXPECT_EQ(s.n_neg, 1379u);
  EXPECT_EQ(s.n_pos, 215u);
}

TEST(Config, ModelShapes) {
  ExperimentConfig c;
  c.hidden_dims = {32, 16};
  c.moco.embed_dim = 8;
  EXPECT_EQ(c.encoder_spec(5).layer_dims, (std::vector<std::size_t>{5, 32, 16, 8}));
  EXPECT_EQ(c.scorer_spec(5).layer_dims, (std::vector<std::size_t>{5, 32, 16, 8, 1}));
  c.model = "linear";
  EXPECT_EQ(c.scorer_spec(5).layer_dims, (std::vector<std::size_t>{5, 1}));
}

TEST(Config, ParsesKeyValueTextWithComments) {
  ExperimentConfig c;
  apply_config_text(c, "# comment\n"
                       "loss = ce   # trailing\n"
                       "\n"
                       "hidden_dims = 8, 4\n"
                       "auc_milestones = 5 10\n"
                       "synthetic_separation = 3.5\n"
                       "moco_augmentation = horizontal_flip\n"
                       "seed = 12345678901234\n");
  EXPECT_EQ(c.loss, LossKind::ce);
  EXPECT_EQ(c.hidden_dims, (std::vector<std::size_t>{8, 4}));
  EXPECT_EQ(c.auc_milestones, (std::vector<int>{5, 10}));
  EXPECT_EQ(c.synthetic.mean_separation, 3.5);
  EXPECT_EQ(c.moco.augmentation, Augmentation::horizontal_flip);
  EXPECT_EQ(c.seed, 12345678901234u);
}

TEST(Config, EmptyHiddenDims) {
  ExperimentConfig c;
  apply_config_text(c, "hidden_dims =\n");
  EXPECT_TRUE(c.hidden_dims.empty());
}

TEST(Config, UnknownKeyCitesOriginAndLine) {
  ExperimentConfig c;
  try {
    apply_config_text(c, "loss = ce\nepohcs = 3\n", "exp.cfg");
    FAIL();
  } catch (const ConfigError &e) {
    const std::string msg = e.what();
    EXPECT_NE(msg.find("exp.cfg:2"), std::string::npos) << msg;
    EXPECT_NE(msg.find("epohcs"), std::string::npos) << msg;
  }
}

TEST(Config, BadValuesRejected) {
  ExperimentConfig c;
  EXPECT_THROW(apply_config_text(c, "loss = hinge"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "epochs = -1"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "auc_lr = fast"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "activation = gelu"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "moco_augmentation = crop"), ConfigError);
  EXPECT_THROW(apply_config_text(c, "just words"), ConfigError);
  EXPECT_THROW(load_config_file(c, "/nonexistent.cfg"), ConfigError);
}

TEST(Config, ValidateCatchesInconsistentSettings) {
  auto bad = [](auto mutate) {
    ExperimentConfig c;
    mutate(c);
    return c;
  };
  EXPECT_THROW(bad([](auto &c) { c.folds = 1; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto &c) { c.epochs = 0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto &c) { c.init = InitKind::pretrained; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto &c) { c.data_source = "csv"; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto &c) { c.label_fraction = 0.0; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto &c) { c.moco.queue_size = 100; }).validate(), ConfigError);
  EXPECT_THROW(bad([](auto &c) { c.model = "cnn"; }).validate(), ConfigError);
}

TEST(Config, TextRoundTripReproducesEcho) {
  ExperimentConfig c;
  apply_config_text(c, "loss = ce\nhidden_dims = 3 5\nmargin = 0.30000000000000004\n"
                       "output_dir = some/dir\nsynthetic_n_pos = 17\n");
  ExperimentConfig d;
  apply_config_text(d, config_to_text(c));
  EXPECT_EQ(config_echo(d), config_echo(c));
  EXPECT_EQ(d.margin, 0.30000000000000004);
}

TEST(Config, RegistryNamesUniqueAndDocumented) {
  std::set<std::string> names;
  for (const auto &k : config_keys()) {
    EXPECT_TRUE(names.insert(k.name).second) << k.name;
    EXPECT_FALSE(k.help.empty()) << k.name;
  }
  EXPECT_THROW(find_config_key("nope"), ConfigError);
}
