// Experiment runner: pretrain, finetune, eval, grid, report.

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <optional>
#include <sstream>
#include <string>

#include "CLI11.hpp"
#include "json.hpp"

#include "aucmax/aucmax.hpp"

namespace fs = std::filesystem;
using namespace aucmax;

namespace {

struct ConfigFlags {
  std::string config_file;
  std::map<std::string, std::string> values;
};

void add_config_flags(CLI::App *cmd, ConfigFlags &flags) {
  cmd->add_option("-c,--config", flags.config_file, "key = value config file");
  for (const auto &k : config_keys())
    cmd->add_option("--" + k.name, flags.values[k.name], k.help)->group("Config keys");
}

ExperimentConfig resolve_config(const CLI::App *cmd, const ConfigFlags &flags) {
  ExperimentConfig cfg;
  if (!flags.config_file.empty())
    load_config_file(cfg, flags.config_file);
  for (const auto &k : config_keys())
    if (cmd->count("--" + k.name) > 0)
      k.set(cfg, flags.values.at(k.name));
  cfg.validate();
  return cfg;
}

void print_summary(const RunResult &r) {
  std::cout << format_run_report(run_report_json(r));
}

nlohmann::json read_json(const fs::path &p) {
  std::ifstream in(p);
  if (!in)
    throw std::runtime_error("cannot open '" + p.string() + "'");
  return nlohmann::json::parse(in);
}

std::vector<std::size_t> eval_rows(const PreparedData &data, const std::string &split) {
  if (split == "test")
    return data.test_rows;
  if (split == "pool")
    return data.pool_rows;
  std::vector<std::size_t> all(data.table.size());
  for (std::size_t i = 0; i < all.size(); ++i)
    all[i] = i;
  return all;
}

} // namespace

int main(int argc, char **argv) {
  CLI::App app{"AUC-margin fine-tuning, momentum-contrast pretraining and trust evaluation"};
  app.require_subcommand(1);

  ConfigFlags pre_flags, ft_flags, ev_flags, grid_flags;
  auto *pretrain = app.add_subcommand("pretrain", "momentum-contrast encoder pretraining");
  add_config_flags(pretrain, pre_flags);
  auto *finetune = app.add_subcommand("finetune", "stratified k-fold fine-tuning and test evaluation");
  add_config_flags(finetune, ft_flags);
  auto *grid = app.add_subcommand("grid", "{ce, auc_max} x {scratch, pretrained} comparison");
  add_config_flags(grid, grid_flags);

  auto *eval = app.add_subcommand("eval", "evaluate a saved model on a dataset split");
  add_config_flags(eval, ev_flags);
  std::string checkpoint_path, split = "test", roc_out;
  std::optional<double> threshold;
  eval->add_option("--checkpoint", checkpoint_path, "model checkpoint")->required();
  eval->add_option("--threshold", threshold, "decision threshold (default: stored in checkpoint)");
  eval->add_option("--split", split, "test | pool | all")
      ->check(CLI::IsMember({"test", "pool", "all"}));
  eval->add_option("--roc-out", roc_out, "write the ROC curve CSV here");

  auto *report = app.add_subcommand("report", "print tables from a run or grid output directory");
  std::string report_dir;
  report->add_option("dir", report_dir, "output directory of finetune or grid")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    return app.exit(e);
  }

  try {
    if (pretrain->parsed()) {
      auto cfg = resolve_config(pretrain, pre_flags);
      if (cfg.output_dir.empty())
        throw ConfigError("pretrain needs output_dir");
      const auto res = run_pretrain(cfg);
      const std::size_t n = res.losses.size();
      if (n > 0)
        std::cout << "steps=" << n << " first_loss=" << res.losses.front()
                  << " last_loss=" << res.losses.back() << "\n";
      std::cout << res.checkpoint_path << "\n";
    } else if (finetune->parsed()) {
      const auto cfg = resolve_config(finetune, ft_flags);
      print_summary(run_finetune(cfg));
    } else if (grid->parsed()) {
      const auto cfg = resolve_config(grid, grid_flags);
      const auto g = run_grid(cfg);
      std::cout << format_grid_summary(grid_summary_json(g));
    } else if (eval->parsed()) {
      auto cfg = resolve_config(eval, ev_flags);
      const auto ck = load_checkpoint(checkpoint_path);
      const auto data = prepare_data(cfg);
      const auto rows = eval_rows(data, split);
      const auto ev = run_eval(ck, data.table, rows, threshold);
      nlohmann::ordered_json j;
      j["checkpoint"] = checkpoint_path;
      j["split"] = split;
      j["threshold"] = ev.threshold;
      j["auc"] = ev.auc;
      j["tp"] = ev.confusion.tp;
      j["fp"] = ev.confusion.fp;
      j["tn"] = ev.confusion.tn;
      j["fn"] = ev.confusion.fn;
      j["precision_neg"] = ev.confusion.precision_neg();
      j["precision_pos"] = ev.confusion.precision_pos();
      j["sensitivity_neg"] = ev.confusion.sensitivity_neg();
      j["sensitivity_pos"] = ev.confusion.sensitivity_pos();
      j["accuracy"] = ev.confusion.accuracy();
      j["trust_pos"] = ev.trust.trust_pos;
      j["trust_neg"] = ev.trust.trust_neg;
      std::cout << j.dump(2) << "\n";
      if (!roc_out.empty()) {
        std::ofstream out(roc_out);
        if (!out)
          throw std::runtime_error("cannot write '" + roc_out + "'");
        write_roc_csv(out, ev.roc);
      }
    } else if (report->parsed()) {
      const fs::path dir(report_dir);
      if (fs::exists(dir / "summary.json"))
        std::cout << format_grid_summary(read_json(dir / "summary.json"));
      else if (fs::exists(dir / "report.json"))
        std::cout << format_run_report(read_json(dir / "report.json"));
      else
        throw std::runtime_error("no summary.json or report.json in '" + dir.string() + "'");
    }
  } catch (const std::exception &e) {
    std::cerr << "aucmax: error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
