// Copyright 2026 The mia Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     https://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#include "data.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <limits>
#include <map>
#include <sstream>
#include <unordered_set>

#include "rng.hpp"
#include "util.hpp"

namespace mia {

const Instance* Dataset::find(std::int64_t id) const {
  auto it = std::lower_bound(instances.begin(), instances.end(), id,
                             [](const Instance& a, std::int64_t b) { return a.id < b; });
  if (it == instances.end() || it->id != id) return nullptr;
  return &*it;
}

std::vector<std::int64_t> Dataset::ids() const {
  std::vector<std::int64_t> out;
  out.reserve(instances.size());
  for (const auto& inst : instances) out.push_back(inst.id);
  return out;
}

Dataset Dataset::subset(const std::vector<std::int64_t>& keep_ids) const {
  Dataset out;
  out.num_classes = num_classes;
  out.instances.reserve(keep_ids.size());
  for (std::int64_t id : keep_ids) {
    const Instance* inst = find(id);
    if (!inst) throw std::invalid_argument("subset: id " + std::to_string(id) + " not in dataset");
    out.instances.push_back(*inst);
  }
  out.canonicalize();
  return out;
}

void Dataset::canonicalize() {
  std::sort(instances.begin(), instances.end(),
            [](const Instance& a, const Instance& b) { return a.id < b.id; });
  const std::size_t d = instances.empty() ? 0 : instances[0].features.size();
  for (std::size_t i = 0; i < instances.size(); ++i) {
    if (i > 0 && instances[i].id == instances[i - 1].id)
      throw std::invalid_argument("dataset: duplicate id " + std::to_string(instances[i].id));
    if (instances[i].features.size() != d)
      throw std::invalid_argument("dataset: inconsistent feature dimension at id " +
                                  std::to_string(instances[i].id));
    if (instances[i].label < 0 || instances[i].label >= num_classes)
      throw std::invalid_argument("dataset: label " + std::to_string(instances[i].label) +
                                  " out of range for " + std::to_string(num_classes) + " classes");
  }
}

Dataset gen_synthetic(const SyntheticConfig& config) {
  if (config.num_classes <= 0 || config.dim <= 0 || config.per_class_count <= 0)
    throw std::invalid_argument("gen_synthetic: counts must be positive");
  if (config.within_class_sigma < 0.0)
    throw std::invalid_argument("gen_synthetic: sigma must be >= 0");

  Rng mean_rng(hash_combine(config.seed, 0x6d65616eULL));  // "mean"
  std::vector<std::vector<double>> means(config.num_classes, std::vector<double>(config.dim));
  for (auto& mu : means)
    for (double& v : mu) v = mean_rng.next_normal();

  if (config.num_classes > 1 && config.class_separation > 0.0) {
    double min_dist = std::numeric_limits<double>::infinity();
    for (int a = 0; a < config.num_classes; ++a) {
      for (int b = a + 1; b < config.num_classes; ++b) {
        double ss = 0.0;
        for (int k = 0; k < config.dim; ++k) {
          double d = means[a][k] - means[b][k];
          ss += d * d;
        }
        min_dist = std::min(min_dist, std::sqrt(ss));
      }
    }
    if (min_dist <= 0.0) throw std::runtime_error("gen_synthetic: degenerate class means");
    const double scale = config.class_separation / min_dist;
    for (auto& mu : means)
      for (double& v : mu) v *= scale;
  }

  Dataset out;
  out.num_classes = config.num_classes;
  out.instances.reserve(static_cast<std::size_t>(config.num_classes) * config.per_class_count);
  Rng noise_rng(hash_combine(config.seed, 0x6e6f697365ULL));  // "noise"
  std::int64_t next_id = 0;
  for (int c = 0; c < config.num_classes; ++c) {
    for (int i = 0; i < config.per_class_count; ++i) {
      Instance inst;
      inst.id = next_id++;
      inst.label = c;
      inst.features.resize(config.dim);
      for (int k = 0; k < config.dim; ++k)
        inst.features[k] = means[c][k] + config.within_class_sigma * noise_rng.next_normal();
      out.instances.push_back(std::move(inst));
    }
  }
  out.canonicalize();
  return out;
}

namespace {

std::vector<std::string> split_line(const std::string& line) {
  std::vector<std::string> cells;
  std::size_t start = 0;
  for (;;) {
    std::size_t pos = line.find(',', start);
    if (pos == std::string::npos) {
      cells.push_back(line.substr(start));
      break;
    }
    cells.push_back(line.substr(start, pos - start));
    start = pos + 1;
  }
  if (!cells.empty() && !cells.back().empty() && cells.back().back() == '\r')
    cells.back().pop_back();
  return cells;
}

bool parse_double(const std::string& s, double& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && !s.empty();
}

bool parse_int64(const std::string& s, std::int64_t& out) {
  const char* first = s.data();
  const char* last = s.data() + s.size();
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && !s.empty();
}

}  // namespace

Dataset load_csv(const std::string& path, const std::string& label_column) {
  std::ifstream in(path);
  if (!in) throw IoError("load_csv: cannot open " + path);

  std::string header_line;
  if (!std::getline(in, header_line) || header_line.empty())
    throw FormatError("load_csv: empty file " + path);
  const std::vector<std::string> header = split_line(header_line);

  int label_idx = -1;
  int id_idx = -1;
  for (std::size_t i = 0; i < header.size(); ++i) {
    if (header[i] == label_column) label_idx = static_cast<int>(i);
    if (header[i] == "id") id_idx = static_cast<int>(i);
  }
  if (label_idx < 0)
    throw FormatError("load_csv: label column '" + label_column + "' not found in " + path);

  std::vector<int> feature_cols;
  for (std::size_t i = 0; i < header.size(); ++i)
    if (static_cast<int>(i) != label_idx && static_cast<int>(i) != id_idx)
      feature_cols.push_back(static_cast<int>(i));

  struct Row {
    std::int64_t id;
    std::vector<double> features;
    std::string label;
  };
  std::vector<Row> rows;
  std::string line;
  std::int64_t row_number = 0;  // data row index, 0-based
  while (std::getline(in, line)) {
    if (line.empty() || line == "\r") continue;
    const std::vector<std::string> cells = split_line(line);
    if (cells.size() != header.size())
      throw FormatError("load_csv: row " + std::to_string(row_number) + " has " +
                        std::to_string(cells.size()) + " cells, expected " +
                        std::to_string(header.size()));
    Row row;
    row.features.reserve(feature_cols.size());
    for (int c : feature_cols) {
      double v;
      if (!parse_double(cells[c], v))
        throw FormatError("load_csv: non-numeric value '" + cells[c] + "' at row " +
                          std::to_string(row_number) + ", column '" + header[c] + "'");
      row.features.push_back(v);
    }
    if (id_idx >= 0) {
      if (!parse_int64(cells[id_idx], row.id))
        throw FormatError("load_csv: non-integer id '" + cells[id_idx] + "' at row " +
                          std::to_string(row_number));
    } else {
      row.id = row_number;
    }
    row.label = cells[label_idx];
    rows.push_back(std::move(row));
    ++row_number;
  }
  if (rows.empty()) throw FormatError("load_csv: no data rows in " + path);

  // Dense label mapping. Numeric sort when every label parses as an integer,
  // so integer-labeled snapshots round-trip unchanged.
  std::vector<std::string> labels;
  labels.reserve(rows.size());
  for (const auto& r : rows) labels.push_back(r.label);
  std::sort(labels.begin(), labels.end());
  labels.erase(std::unique(labels.begin(), labels.end()), labels.end());
  bool all_int = true;
  std::vector<std::pair<std::int64_t, std::string>> numeric;
  for (const auto& l : labels) {
    std::int64_t v;
    if (!parse_int64(l, v)) {
      all_int = false;
      break;
    }
    numeric.emplace_back(v, l);
  }
  std::map<std::string, int> label_map;
  if (all_int) {
    std::sort(numeric.begin(), numeric.end());
    for (std::size_t i = 0; i < numeric.size(); ++i) label_map[numeric[i].second] = static_cast<int>(i);
  } else {
    for (std::size_t i = 0; i < labels.size(); ++i) label_map[labels[i]] = static_cast<int>(i);
  }

  Dataset out;
  out.num_classes = static_cast<int>(label_map.size());
  out.instances.reserve(rows.size());
  for (auto& r : rows) {
    Instance inst;
    inst.id = r.id;
    inst.features = std::move(r.features);
    inst.label = label_map.at(r.label);
    out.instances.push_back(std::move(inst));
  }
  out.canonicalize();
  return out;
}

void save_csv(const Dataset& dataset, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_csv: cannot open " + path + " for writing");
  out << "id";
  for (int k = 0; k < dataset.dim(); ++k) out << ",f" << k;
  out << ",label\n";
  out.precision(17);
  for (const auto& inst : dataset.instances) {
    out << inst.id;
    for (double v : inst.features) out << ',' << v;
    out << ',' << inst.label << '\n';
  }
  if (!out) throw IoError("save_csv: write failed for " + path);
}

std::vector<Dataset> split_disjoint(const Dataset& dataset,
                                    const std::vector<double>& fractions,
                                    std::uint64_t seed) {
  double total = 0.0;
  for (double f : fractions) {
    if (f <= 0.0) throw std::invalid_argument("split_disjoint: fractions must be positive");
    total += f;
  }
  if (total > 1.0 + 1e-12)
    throw std::invalid_argument("split_disjoint: fractions sum to " + std::to_string(total) +
                                " > 1");

  std::vector<std::int64_t> ids = dataset.ids();
  Rng rng(hash_combine(seed, 0x73706c6974ULL));  // "split"
  rng.shuffle(ids);

  const std::size_t n = ids.size();
  std::vector<Dataset> out;
  out.reserve(fractions.size());
  std::size_t cursor = 0;
  for (std::size_t i = 0; i < fractions.size(); ++i) {
    std::size_t want;
    if (i + 1 < fractions.size())
      want = static_cast<std::size_t>(std::floor(fractions[i] * static_cast<double>(n)));
    else
      want = static_cast<std::size_t>(std::llround(fractions[i] * static_cast<double>(n)));
    want = std::min(want, n - cursor);
    std::vector<std::int64_t> part(ids.begin() + cursor, ids.begin() + cursor + want);
    cursor += want;
    out.push_back(dataset.subset(part));
  }
  return out;
}

std::pair<Dataset, ScalerParams> standardize(const Dataset& dataset) {
  if (dataset.instances.empty()) throw std::invalid_argument("standardize: empty dataset");
  const int d = dataset.dim();
  const double n = static_cast<double>(dataset.size());

  ScalerParams params;
  params.mean.assign(d, 0.0);
  params.inv_std.assign(d, 0.0);
  for (const auto& inst : dataset.instances)
    for (int k = 0; k < d; ++k) params.mean[k] += inst.features[k];
  for (int k = 0; k < d; ++k) params.mean[k] /= n;
  std::vector<double> var(d, 0.0);
  for (const auto& inst : dataset.instances)
    for (int k = 0; k < d; ++k) {
      const double c = inst.features[k] - params.mean[k];
      var[k] += c * c;
    }
  for (int k = 0; k < d; ++k) {
    var[k] /= n;
    params.inv_std[k] = var[k] > 0.0 ? 1.0 / std::sqrt(var[k]) : 0.0;
  }
  return {apply_scaler(dataset, params), params};
}

Dataset apply_scaler(const Dataset& dataset, const ScalerParams& params) {
  if (static_cast<std::size_t>(dataset.dim()) != params.mean.size())
    throw std::invalid_argument("apply_scaler: dimension mismatch");
  Dataset out = dataset;
  for (auto& inst : out.instances)
    for (std::size_t k = 0; k < params.mean.size(); ++k)
      inst.features[k] = (inst.features[k] - params.mean[k]) * params.inv_std[k];
  return out;
}

}  // namespace mia
