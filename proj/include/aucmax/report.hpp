#pragma once

#include <cstdio>
#include <string>

#include "json.hpp"

#include "aucmax/errors.hpp"

namespace aucmax {

namespace detail {

// "0.9295 ± 1.6%": mean to four places, std in percentage points.
inline std::string mean_pm(double mean, double std) {
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.4f ± %.1f%%", mean, 100.0 * std);
  return buf;
}

inline std::string pad(std::string s, std::size_t width) {
  // Count UTF-8 code points so the ± sign does not skew alignment.
  std::size_t cps = 0;
  for (unsigned char c : s)
    cps += (c & 0xC0) != 0x80;
  if (cps < width)
    s.append(width - cps, ' ');
  return s;
}

inline std::string grid_cell(const nlohmann::json &row, const std::string &metric) {
  const auto &m = row.at(metric);
  std::string s = mean_pm(m.at("mean").get<double>(), m.at("std").get<double>());
  if (m.at("best").get<bool>())
    s += " *";
  return s;
}

inline std::string grid_table(const nlohmann::json &summary, const std::string &title,
                              const std::vector<std::pair<std::string, std::string>> &cols) {
  std::string out = title + "\n";
  out += pad("Run", 24);
  for (const auto &[label, key] : cols)
    out += pad(label, 22);
  out += "\n";
  for (const auto &row : summary.at("runs")) {
    out += pad(row.at("run").get<std::string>(), 24);
    for (const auto &[label, key] : cols)
      out += pad(grid_cell(row, key), 22);
    out += "\n";
  }
  return out;
}

} // namespace detail

//! Precision, sensitivity, trust and AUC tables for a grid summary.
//! '*' marks the best value of each column across the four runs.
inline std::string format_grid_summary(const nlohmann::json &summary) {
  if (summary.value("schema", "") != "aucmax.grid_summary/1")
    throw UsageError("not a grid summary document");
  std::string out;
  out += detail::grid_table(summary, "Precision (test split)",
                            {{"Negative", "precision_neg"}, {"Positive", "precision_pos"}});
  out += "\n";
  out += detail::grid_table(summary, "Sensitivity (test split)",
                            {{"Negative", "sensitivity_neg"}, {"Positive", "sensitivity_pos"}});
  out += "\n";
  out += detail::grid_table(summary, "Trust (positive class)", {{"Trust", "trust_pos"}});
  out += "\n";
  out += detail::grid_table(summary, "ROC AUC", {{"AUC", "auc"}});
  return out;
}

//! Per-fold rows plus the mean ± std line for a single run report.
inline std::string format_run_report(const nlohmann::json &report) {
  if (report.value("schema", "") != "aucmax.run_report/1")
    throw UsageError("not a run report document");
  static const std::vector<std::string> cols = {
      "auc", "precision_neg", "precision_pos", "sensitivity_neg", "sensitivity_pos",
      "accuracy", "trust_pos", "trust_neg"};
  std::string out = "loss=" + report.at("loss").get<std::string>() +
                    " init=" + report.at("init").get<std::string>() +
                    " seed=" + std::to_string(report.at("seed").get<std::uint64_t>()) + "\n";
  out += detail::pad("fold", 8);
  for (const auto &c : cols)
    out += detail::pad(c, 17);
  out += "\n";
  char buf[32];
  for (const auto &f : report.at("folds")) {
    out += detail::pad(std::to_string(f.at("fold").get<std::size_t>()), 8);
    for (const auto &c : cols) {
      std::snprintf(buf, sizeof buf, "%.4f", f.at(c).get<double>());
      out += detail::pad(buf, 17);
    }
    out += "\n";
  }
  out += detail::pad("mean", 8);
  for (const auto &c : cols) {
    const auto &a = report.at("aggregate").at(c);
    out += detail::pad(detail::mean_pm(a.at("mean").get<double>(), a.at("std").get<double>()), 17);
  }
  out += "\n";
  for (const auto &n : report.at("notes"))
    out += "note: " + n.get<std::string>() + "\n";
  return out;
}

} // namespace aucmax
