#pragma once

#include <charconv>
#include <cmath>
#include <cstdint>
#include <fstream>
#include <optional>
#include <sstream>
#include <string>
#include <string_view>
#include <system_error>
#include <vector>

#include "aucmax/errors.hpp"
#include "aucmax/losses.hpp"
#include "aucmax/matrix.hpp"
#include "aucmax/model.hpp"
#include "aucmax/rng.hpp"

namespace aucmax {

//==============================================================================
// Text number formatting shared by CSV, checkpoints and reports.

//! Shortest decimal with 17 significant digits; parses back to the same bits.
inline std::string format_double(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof buf, v, std::chars_format::general, 17);
  return std::string(buf, res.ptr);
}

inline std::string_view trim(std::string_view s) {
  const auto ws = " \t\r\n";
  const auto b = s.find_first_not_of(ws);
  if (b == std::string_view::npos)
    return {};
  const auto e = s.find_last_not_of(ws);
  return s.substr(b, e - b + 1);
}

//! Strict full-string parse; nullopt on any leftover characters.
inline std::optional<double> parse_double(std::string_view s) {
  s = trim(s);
  if (s.empty())
    return std::nullopt;
  if (s.front() == '+')
    s.remove_prefix(1);
  double v = 0.0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (res.ec != std::errc{} || res.ptr != s.data() + s.size())
    return std::nullopt;
  return v;
}

inline std::optional<std::uint64_t> parse_u64(std::string_view s) {
  s = trim(s);
  std::uint64_t v = 0;
  auto res = std::from_chars(s.data(), s.data() + s.size(), v);
  if (s.empty() || res.ec != std::errc{} || res.ptr != s.data() + s.size())
    return std::nullopt;
  return v;
}

inline std::vector<std::string_view> split(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto pos = s.find(sep, start);
    out.push_back(s.substr(start, pos == std::string_view::npos ? pos : pos - start));
    if (pos == std::string_view::npos)
      break;
    start = pos + 1;
  }
  return out;
}

//==============================================================================
struct DatasetTable {
  Matrix features;
  std::vector<int> labels;
  std::string provenance;
  std::vector<std::string> feature_names;

  std::size_t size() const noexcept { return labels.size(); }
  std::size_t dim() const noexcept { return features.cols; }
  std::size_t count(int cls) const noexcept {
    std::size_t n = 0;
    for (int y : labels)
      n += static_cast<std::size_t>(y == cls);
    return n;
  }
};

//! Two isotropic Gaussian classes; positives are shifted by mean_separation
//! along the first axis. Default counts are the 13,794 : 2,158 imbalance at
//! one tenth scale.
struct SyntheticSpec {
  std::size_t dim = 2;
  std::size_t n_neg = 1379;
  std::size_t n_pos = 215;
  double mean_separation = 2.0;
  double noise_std = 1.0;
  std::uint64_t seed = 0;

  static constexpr std::size_t reference_neg = 13794;
  static constexpr std::size_t reference_pos = 2158;

  //! Reference class counts times `scale`, rounded down.
  void set_scale(double scale) {
    n_neg = static_cast<std::size_t>(std::floor(reference_neg * scale));
    n_pos = static_cast<std::size_t>(std::floor(reference_pos * scale));
  }

  void validate() const {
    if (dim == 0)
      throw UsageError("SyntheticSpec: dim must be >= 1");
    if (n_neg == 0 || n_pos == 0)
      throw UsageError("SyntheticSpec: class counts must be >= 1");
    if (!(mean_separation >= 0.0) || !(noise_std > 0.0))
      throw UsageError("SyntheticSpec: need mean_separation >= 0, noise_std > 0");
  }
};

//! Negatives first, then positives.
inline DatasetTable gen_gaussian_mixture(const SyntheticSpec &spec) {
  spec.validate();
  DatasetTable t;
  const std::size_t n = spec.n_neg + spec.n_pos;
  t.features = Matrix(n, spec.dim);
  t.labels.assign(n, 0);
  Rng rng(spec.seed);
  for (std::size_t i = 0; i < n; ++i) {
    const bool pos = i >= spec.n_neg;
    t.labels[i] = pos ? 1 : 0;
    for (std::size_t c = 0; c < spec.dim; ++c)
      t.features(i, c) = rng.gaussian() * spec.noise_std;
    if (pos)
      t.features(i, 0) += spec.mean_separation;
  }
  for (std::size_t c = 0; c < spec.dim; ++c)
    t.feature_names.push_back("x" + std::to_string(c));
  t.provenance = "synthetic:gaussian_mixture seed=" + std::to_string(spec.seed);
  return t;
}

//==============================================================================
//! Reads a comma-separated file with a header row. `label_column` names the
//! 0/1 label; every other column is a float64 feature. Errors cite 1-based
//! file rows (the header is row 1) and columns.
inline DatasetTable load_csv(const std::string &path, const std::string &label_column) {
  std::ifstream in(path);
  if (!in)
    throw IngestionError("cannot open '" + path + "'");
  std::string line;
  if (!std::getline(in, line))
    throw IngestionError(path + ": empty file, header row expected", 1, 0);
  const auto header = split(line, ',');
  std::size_t label_idx = header.size();
  DatasetTable t;
  for (std::size_t c = 0; c < header.size(); ++c) {
    const auto name = trim(header[c]);
    if (name == label_column)
      label_idx = c;
    else
      t.feature_names.emplace_back(name);
  }
  if (label_idx == header.size())
    throw IngestionError(path + ": label column '" + label_column + "' not found in header", 1, 0);

  std::vector<double> values;
  std::size_t row = 1, n = 0;
  while (std::getline(in, line)) {
    ++row;
    if (trim(line).empty())
      continue;
    const auto cells = split(line, ',');
    if (cells.size() != header.size())
      throw IngestionError(path + ": row " + std::to_string(row) + " has " +
                               std::to_string(cells.size()) + " fields, header has " +
                               std::to_string(header.size()),
                           row, 0);
    for (std::size_t c = 0; c < cells.size(); ++c) {
      const auto v = parse_double(cells[c]);
      const auto where = "row " + std::to_string(row) + ", column " + std::to_string(c + 1);
      if (!v)
        throw IngestionError(path + ": non-numeric value '" + std::string(trim(cells[c])) +
                                 "' at " + where,
                             row, c + 1);
      if (!std::isfinite(*v))
        throw IngestionError(path + ": non-finite value at " + where, row, c + 1);
      if (c == label_idx) {
        if (*v != 0.0 && *v != 1.0)
          throw IngestionError(path + ": label must be 0 or 1 at " + where, row, c + 1);
        t.labels.push_back(static_cast<int>(*v));
      } else {
        values.push_back(*v);
      }
    }
    ++n;
  }
  if (n < 2)
    throw IngestionError(path + ": need at least 2 data rows, found " + std::to_string(n));
  t.features.rows = n;
  t.features.cols = header.size() - 1;
  t.features.data = std::move(values);
  if (t.count(1) == 0 || t.count(0) == 0)
    throw IngestionError(path + ": only one class present in column '" + label_column + "'");
  t.provenance = "csv:" + path;
  return t;
}

//! Writes features then the label column; values use 17 significant digits.
inline void save_csv(const DatasetTable &t, const std::string &path,
                     const std::string &label_column = "label") {
  std::ofstream out(path);
  if (!out)
    throw IngestionError("cannot write '" + path + "'");
  for (std::size_t c = 0; c < t.dim(); ++c)
    out << (c < t.feature_names.size() ? t.feature_names[c] : "x" + std::to_string(c)) << ',';
  out << label_column << '\n';
  for (std::size_t i = 0; i < t.size(); ++i) {
    for (std::size_t c = 0; c < t.dim(); ++c)
      out << format_double(t.features(i, c)) << ',';
    out << t.labels[i] << '\n';
  }
  if (!out)
    throw IngestionError("write failed for '" + path + "'");
}

//==============================================================================
//! Persisted model plus whatever is needed to resume or evaluate it.
struct Checkpoint {
  static constexpr int current_version = 1;

  int schema_version = current_version;
  ModelParams params;
  std::optional<AucState> aux;
  std::optional<double> threshold;
  std::string provenance = "scratch";
  std::uint64_t seed = 0;

  friend bool operator==(const Checkpoint &, const Checkpoint &) = default;
};

inline std::string serialize_checkpoint(const Checkpoint &ck) {
  std::ostringstream os;
  auto join = [&](const std::vector<double> &v) {
    for (std::size_t i = 0; i < v.size(); ++i)
      os << (i ? " " : "") << format_double(v[i]);
  };
  os << "schema_version = " << ck.schema_version << '\n';
  os << "provenance = " << ck.provenance << '\n';
  os << "seed = " << ck.seed << '\n';
  os << "activation = " << to_string(ck.params.spec.activation) << '\n';
  os << "layer_dims =";
  for (auto d : ck.params.spec.layer_dims)
    os << ' ' << d;
  os << '\n';
  if (ck.threshold)
    os << "threshold = " << format_double(*ck.threshold) << '\n';
  if (ck.aux) {
    os << "aux = ";
    join({ck.aux->a, ck.aux->b, ck.aux->alpha, ck.aux->margin, ck.aux->prior});
    os << '\n';
  }
  for (std::size_t l = 0; l < ck.params.layers.size(); ++l) {
    os << "layer." << l << ".weight = ";
    join(ck.params.layers[l].weight);
    os << '\n' << "layer." << l << ".bias = ";
    join(ck.params.layers[l].bias);
    os << '\n';
  }
  os << "end\n";
  return os.str();
}

inline Checkpoint parse_checkpoint(std::string_view text, const std::string &origin = "checkpoint") {
  auto fail = [&](const std::string &msg) -> CheckpointError {
    return CheckpointError(origin + ": " + msg);
  };
  auto numbers = [&](std::string_view v, const std::string &key) {
    std::vector<double> out;
    std::istringstream is{std::string(v)};
    std::string tok;
    while (is >> tok) {
      auto d = parse_double(tok);
      if (!d || !std::isfinite(*d))
        throw fail("bad number '" + tok + "' in " + key);
      out.push_back(*d);
    }
    return out;
  };

  Checkpoint ck;
  bool have_version = false, ended = false, have_dims = false;
  std::vector<std::pair<std::string, std::string>> layer_entries;
  std::size_t line_no = 0;
  for (auto raw : split(text, '\n')) {
    ++line_no;
    const auto line = trim(raw);
    if (line.empty())
      continue;
    if (ended)
      throw fail("content after 'end' at line " + std::to_string(line_no));
    if (line == "end") {
      ended = true;
      continue;
    }
    const auto eq = line.find('=');
    if (eq == std::string_view::npos)
      throw fail("malformed line " + std::to_string(line_no));
    const std::string key(trim(line.substr(0, eq)));
    const std::string_view value = trim(line.substr(eq + 1));
    if (!have_version && key != "schema_version")
      throw fail("first entry must be schema_version");
    if (key == "schema_version") {
      const auto v = parse_u64(value);
      if (!v)
        throw fail("bad schema_version");
      if (*v != static_cast<std::uint64_t>(Checkpoint::current_version))
        throw fail("unsupported schema_version " + std::string(value) + " (expected " +
                   std::to_string(Checkpoint::current_version) + ")");
      ck.schema_version = static_cast<int>(*v);
      have_version = true;
    } else if (key == "provenance") {
      ck.provenance = std::string(value);
    } else if (key == "seed") {
      const auto v = parse_u64(value);
      if (!v)
        throw fail("bad seed");
      ck.seed = *v;
    } else if (key == "activation") {
      try {
        ck.params.spec.activation = activation_from_string(std::string(value));
      } catch (const SpecError &e) {
        throw fail(e.what());
      }
    } else if (key == "layer_dims") {
      for (double d : numbers(value, key)) {
        if (d < 1 || d != std::floor(d))
          throw fail("layer_dims must be positive integers");
        ck.params.spec.layer_dims.push_back(static_cast<std::size_t>(d));
      }
      have_dims = true;
    } else if (key == "threshold") {
      const auto v = numbers(value, key);
      if (v.size() != 1)
        throw fail("threshold takes one value");
      ck.threshold = v[0];
    } else if (key == "aux") {
      const auto v = numbers(value, key);
      if (v.size() != 5)
        throw fail("aux takes 5 values (a b alpha margin prior)");
      AucState s{v[0], v[1], v[2], v[3], v[4]};
      try {
        s.validate();
      } catch (const DomainError &e) {
        throw fail(std::string("invalid auxiliary state: ") + e.what());
      }
      ck.aux = s;
    } else if (key.starts_with("layer.")) {
      layer_entries.emplace_back(key, std::string(value));
    } else {
      throw fail("unknown key '" + key + "'");
    }
  }
  if (!have_version)
    throw fail("missing schema_version");
  if (!ended)
    throw fail("truncated (no 'end' marker)");
  if (!have_dims)
    throw fail("missing layer_dims");
  try {
    ck.params.spec.validate(false);
  } catch (const SpecError &e) {
    throw fail(e.what());
  }

  const ModelSpec spec = ck.params.spec;
  ck.params = ModelParams::zeros(spec);
  std::vector<int> seen(ck.params.layers.size() * 2, 0);
  for (const auto &[key, value] : layer_entries) {
    const auto parts = split(key, '.');
    const auto idx = parts.size() == 3 ? parse_u64(parts[1]) : std::nullopt;
    if (!idx || *idx >= ck.params.layers.size() ||
        (parts[2] != "weight" && parts[2] != "bias"))
      throw fail("unexpected key '" + key + "'");
    auto &layer = ck.params.layers[*idx];
    const bool is_bias = parts[2] == "bias";
    auto &dst = is_bias ? layer.bias : layer.weight;
    const auto v = numbers(value, key);
    if (v.size() != dst.size())
      throw fail(key + " has " + std::to_string(v.size()) + " values, shape needs " +
                 std::to_string(dst.size()));
    dst = v;
    seen[*idx * 2 + (is_bias ? 1 : 0)] += 1;
  }
  for (std::size_t i = 0; i < seen.size(); ++i)
    if (seen[i] != 1)
      throw fail("layer " + std::to_string(i / 2) + (i % 2 ? " bias" : " weight") +
                 (seen[i] ? " given more than once" : " missing"));
  return ck;
}

inline void save_checkpoint(const Checkpoint &ck, const std::string &path) {
  std::ofstream out(path, std::ios::binary);
  if (!out)
    throw CheckpointError("cannot write checkpoint '" + path + "'");
  out << serialize_checkpoint(ck);
  if (!out)
    throw CheckpointError("write failed for checkpoint '" + path + "'");
}

inline Checkpoint load_checkpoint(const std::string &path) {
  std::ifstream in(path, std::ios::binary);
  if (!in)
    throw CheckpointError("cannot open checkpoint '" + path + "'");
  std::ostringstream ss;
  ss << in.rdbuf();
  return parse_checkpoint(ss.str(), path);
}

} // namespace aucmax
