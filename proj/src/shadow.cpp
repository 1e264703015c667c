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

#include "shadow.hpp"

#include <algorithm>
#include <cmath>
#include <cstring>
#include <fstream>
#include <unordered_map>

#include <json.hpp>

#include "binio.hpp"
#include "parallel.hpp"
#include "rng.hpp"
#include "util.hpp"

namespace mia {

namespace {

constexpr char kMatrixMagic[4] = {'M', 'I', 'A', '1'};
constexpr std::uint16_t kMatrixVersion = 1;

void check_sorted_unique(const std::vector<std::int64_t>& ids, const char* what) {
  for (std::size_t i = 1; i < ids.size(); ++i)
    if (ids[i] <= ids[i - 1])
      throw std::invalid_argument(std::string(what) + ": ids must be ascending and unique");
}

}  // namespace

int ShadowPlan::column_sum(std::size_t col) const {
  int sum = 0;
  for (int j = 0; j < n_models; ++j) sum += in_set(j, col) ? 1 : 0;
  return sum;
}

std::optional<std::size_t> ShadowPlan::column_of(std::int64_t id) const {
  auto it = std::lower_bound(pool_ids.begin(), pool_ids.end(), id);
  if (it == pool_ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - pool_ids.begin());
}

std::vector<std::int64_t> ShadowPlan::selected_ids(int model) const {
  std::vector<std::int64_t> out;
  for (std::size_t i = 0; i < pool_ids.size(); ++i)
    if (in_set(model, i)) out.push_back(pool_ids[i]);
  return out;
}

ShadowPlan make_conditional_plan(const std::vector<std::int64_t>& pool_ids, int n_models,
                                 const AnchorSets& anchors, std::uint64_t seed) {
  if (n_models < 2 || n_models % 2 != 0)
    throw std::invalid_argument("shadow plan: n_models must be even and >= 2");
  for (std::int64_t id : anchors.members)
    if (anchors.non_members.count(id))
      throw std::invalid_argument("shadow plan: anchor sets overlap at id " + std::to_string(id));

  ShadowPlan plan;
  plan.pool_ids = pool_ids;
  std::sort(plan.pool_ids.begin(), plan.pool_ids.end());
  check_sorted_unique(plan.pool_ids, "shadow plan");
  plan.n_models = n_models;
  plan.bits.assign(static_cast<std::size_t>(n_models) * plan.pool_ids.size(), 0);

  auto anchored = [&](std::int64_t id) {
    return anchors.members.count(id) || anchors.non_members.count(id);
  };
  for (std::int64_t id : anchors.members)
    if (!plan.column_of(id))
      throw std::invalid_argument("shadow plan: anchor id " + std::to_string(id) +
                                  " not in pool");
  for (std::int64_t id : anchors.non_members)
    if (!plan.column_of(id))
      throw std::invalid_argument("shadow plan: anchor id " + std::to_string(id) +
                                  " not in pool");

  const std::size_t pool = plan.pool_ids.size();
  std::vector<std::uint8_t> pattern(n_models);
  for (std::size_t i = 0; i < pool; ++i) {
    const std::int64_t id = plan.pool_ids[i];
    if (anchors.members.count(id)) {
      for (int j = 0; j < n_models; ++j) plan.bits[static_cast<std::size_t>(j) * pool + i] = 1;
      continue;
    }
    if (anchored(id)) continue;  // non-member anchor stays all-0
    // Balanced column: exactly half ones, shuffled per (seed, id).
    for (int j = 0; j < n_models; ++j) pattern[j] = j < n_models / 2 ? 1 : 0;
    Rng rng(hash_combine(seed, static_cast<std::uint64_t>(id), 0x636f6cULL));  // "col"
    rng.shuffle(pattern);
    for (int j = 0; j < n_models; ++j)
      plan.bits[static_cast<std::size_t>(j) * pool + i] = pattern[j];
  }
  return plan;
}

ShadowPlan make_plan(const std::vector<std::int64_t>& pool_ids, int n_models,
                     std::uint64_t seed) {
  return make_conditional_plan(pool_ids, n_models, AnchorSets{}, seed);
}

ShadowPlan make_weighted_plan(const std::vector<std::int64_t>& pool_ids, int n_models,
                              const std::vector<double>& inclusion_probs, std::uint64_t seed) {
  if (n_models < 1) throw std::invalid_argument("weighted plan: n_models must be >= 1");
  if (inclusion_probs.size() != pool_ids.size())
    throw std::invalid_argument("weighted plan: probability vector size mismatch");

  ShadowPlan plan;
  plan.pool_ids = pool_ids;
  std::sort(plan.pool_ids.begin(), plan.pool_ids.end());
  check_sorted_unique(plan.pool_ids, "weighted plan");

  // Probabilities follow their ids through the sort.
  std::unordered_map<std::int64_t, double> prob_by_id;
  prob_by_id.reserve(pool_ids.size());
  for (std::size_t i = 0; i < pool_ids.size(); ++i) {
    const double p = inclusion_probs[i];
    if (!(p >= 0.0 && p <= 1.0))
      throw std::invalid_argument("weighted plan: inclusion probability out of [0,1]");
    prob_by_id[pool_ids[i]] = p;
  }

  plan.n_models = n_models;
  const std::size_t pool = plan.pool_ids.size();
  plan.bits.assign(static_cast<std::size_t>(n_models) * pool, 0);
  for (std::size_t i = 0; i < pool; ++i) {
    const std::int64_t id = plan.pool_ids[i];
    const double p = prob_by_id[id];
    Rng rng(hash_combine(seed, static_cast<std::uint64_t>(id), 0x626572ULL));  // "ber"
    for (int j = 0; j < n_models; ++j)
      plan.bits[static_cast<std::size_t>(j) * pool + i] = rng.next_unit() < p ? 1 : 0;
  }
  return plan;
}

ShadowEnsemble train_shadows(const Dataset& pool, const ShadowPlan& plan,
                             const TrainConfig& config, int n_threads) {
  for (std::int64_t id : plan.pool_ids)
    if (!pool.find(id))
      throw std::invalid_argument("train_shadows: plan id " + std::to_string(id) +
                                  " not in pool dataset");

  ShadowEnsemble ensemble;
  ensemble.plan = plan;
  ensemble.models.resize(plan.n_models);
  parallel_for(static_cast<std::size_t>(plan.n_models), n_threads, [&](std::size_t j) {
    try {
      Dataset subset = pool.subset(plan.selected_ids(static_cast<int>(j)));
      TrainConfig model_config = config;
      model_config.seed = hash_combine(config.seed, static_cast<std::uint64_t>(j));
      ensemble.models[j] = train(subset, model_config);
    } catch (const std::exception& e) {
      throw std::runtime_error("shadow model " + std::to_string(j) + ": " + e.what());
    }
  });
  return ensemble;
}

std::optional<std::size_t> ScoreMatrix::column_of(std::int64_t id) const {
  auto it = std::lower_bound(instance_ids.begin(), instance_ids.end(), id);
  if (it == instance_ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - instance_ids.begin());
}

ScoreMatrix ScoreMatrix::without_row(int model) const {
  if (model < 0 || model >= n_models) throw std::invalid_argument("without_row: bad row");
  ScoreMatrix out;
  out.instance_ids = instance_ids;
  out.n_models = n_models - 1;
  out.n_aug = n_aug;
  out.aug_seed = aug_seed;
  const std::size_t row_values = instance_ids.size() * static_cast<std::size_t>(n_aug);
  out.values.reserve(row_values * out.n_models);
  out.membership.reserve(instance_ids.size() * out.n_models);
  for (int j = 0; j < n_models; ++j) {
    if (j == model) continue;
    out.values.insert(out.values.end(), values.begin() + j * row_values,
                      values.begin() + (j + 1) * row_values);
    out.membership.insert(out.membership.end(),
                          membership.begin() + static_cast<std::size_t>(j) * instance_ids.size(),
                          membership.begin() + static_cast<std::size_t>(j + 1) * instance_ids.size());
    if (!provenance.empty()) out.provenance.push_back(provenance[j]);
  }
  return out;
}

void ScoreMatrix::validate() const {
  check_sorted_unique(instance_ids, "score matrix");
  const std::size_t n = instance_ids.size();
  if (values.size() != static_cast<std::size_t>(n_models) * n * n_aug)
    throw FormatError("score matrix: value tensor shape mismatch");
  if (membership.size() != static_cast<std::size_t>(n_models) * n)
    throw FormatError("score matrix: membership bitmap shape mismatch");
  for (double v : values)
    if (!std::isfinite(v)) throw FormatError("score matrix: non-finite value");
}

ScoreMatrix score_matrix(const ShadowEnsemble& ensemble, const std::vector<Instance>& instances,
                         const AugmentConfig& aug, std::uint64_t aug_seed, int n_threads) {
  std::vector<Instance> sorted = instances;
  std::sort(sorted.begin(), sorted.end(),
            [](const Instance& a, const Instance& b) { return a.id < b.id; });

  ScoreMatrix matrix;
  matrix.n_models = static_cast<int>(ensemble.models.size());
  matrix.n_aug = aug.n_queries;
  matrix.aug_seed = aug_seed;
  matrix.instance_ids.reserve(sorted.size());
  for (const auto& inst : sorted) matrix.instance_ids.push_back(inst.id);
  check_sorted_unique(matrix.instance_ids, "score matrix");

  const std::size_t n = sorted.size();
  matrix.values.assign(static_cast<std::size_t>(matrix.n_models) * n * matrix.n_aug, 0.0);
  matrix.membership.assign(static_cast<std::size_t>(matrix.n_models) * n, 0);
  matrix.provenance.resize(matrix.n_models);
  for (int j = 0; j < matrix.n_models; ++j)
    matrix.provenance[j] = RowProvenance{0, static_cast<std::uint32_t>(j)};

  // Same views for every model (and for the target observation later).
  std::vector<std::vector<std::vector<double>>> views(n);
  for (std::size_t i = 0; i < n; ++i) views[i] = augment(sorted[i], aug, aug_seed);

  for (std::size_t i = 0; i < n; ++i) {
    if (auto col = ensemble.plan.column_of(sorted[i].id)) {
      for (int j = 0; j < matrix.n_models; ++j)
        matrix.membership[static_cast<std::size_t>(j) * n + i] =
            ensemble.plan.in_set(j, *col) ? 1 : 0;
    }
  }

  parallel_for(static_cast<std::size_t>(matrix.n_models), n_threads, [&](std::size_t j) {
    const Classifier& model = ensemble.models[j];
    for (std::size_t i = 0; i < n; ++i) {
      const int label = sorted[i].label;
      for (int a = 0; a < matrix.n_aug; ++a) {
        const std::vector<double> p = model.predict_proba(views[i][a]);
        if (label < 0 || label >= static_cast<int>(p.size()))
          throw std::invalid_argument("score_matrix: label out of range for model output");
        matrix.values[(j * n + i) * matrix.n_aug + a] = logit_scale(p[label]);
      }
    }
  });
  return matrix;
}

void save_matrix(const ScoreMatrix& matrix, const std::string& path,
                 const std::string& config_hash, int iteration) {
  matrix.validate();
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IoError("save_matrix: cannot open " + path);
  out.write(kMatrixMagic, 4);
  write_le<std::uint16_t>(out, kMatrixVersion);
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.n_models));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.n_instances()));
  write_le<std::uint32_t>(out, static_cast<std::uint32_t>(matrix.n_aug));
  write_le<std::uint64_t>(out, matrix.aug_seed);
  for (std::int64_t id : matrix.instance_ids) write_le<std::int64_t>(out, id);

  const std::size_t n = matrix.n_instances();
  const std::size_t row_bytes = (n + 7) / 8;
  std::vector<std::uint8_t> packed(row_bytes);
  for (int j = 0; j < matrix.n_models; ++j) {
    std::fill(packed.begin(), packed.end(), 0);
    for (std::size_t i = 0; i < n; ++i)
      if (matrix.member(j, i)) packed[i / 8] |= static_cast<std::uint8_t>(1u << (i % 8));
    out.write(reinterpret_cast<const char*>(packed.data()),
              static_cast<std::streamsize>(row_bytes));
  }
  for (double v : matrix.values) write_le<double>(out, v);
  if (!out) throw IoError("save_matrix: write failed for " + path);

  nlohmann::json sidecar;
  sidecar["config_hash"] = config_hash;
  sidecar["iteration"] = iteration;
  sidecar["n_models"] = matrix.n_models;
  sidecar["n_instances"] = matrix.n_instances();
  sidecar["n_aug"] = matrix.n_aug;
  sidecar["aug_seed"] = matrix.aug_seed;
  std::ofstream side(path + ".json");
  if (!side) throw IoError("save_matrix: cannot open sidecar for " + path);
  side << sidecar.dump(2) << '\n';
}

ScoreMatrix load_matrix(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("load_matrix: cannot open " + path);
  char magic[4];
  in.read(magic, 4);
  if (!in || std::memcmp(magic, kMatrixMagic, 4) != 0)
    throw FormatError("load_matrix: bad magic in " + path);
  const auto version = read_le<std::uint16_t>(in);
  if (version != kMatrixVersion)
    throw FormatError("load_matrix: unsupported version " + std::to_string(version));

  ScoreMatrix matrix;
  matrix.n_models = static_cast<int>(read_le<std::uint32_t>(in));
  const auto n = static_cast<std::size_t>(read_le<std::uint32_t>(in));
  matrix.n_aug = static_cast<int>(read_le<std::uint32_t>(in));
  matrix.aug_seed = read_le<std::uint64_t>(in);
  matrix.instance_ids.resize(n);
  for (auto& id : matrix.instance_ids) id = read_le<std::int64_t>(in);

  const std::size_t row_bytes = (n + 7) / 8;
  matrix.membership.assign(static_cast<std::size_t>(matrix.n_models) * n, 0);
  std::vector<char> packed(row_bytes);
  for (int j = 0; j < matrix.n_models; ++j) {
    in.read(packed.data(), static_cast<std::streamsize>(row_bytes));
    if (!in) throw FormatError("load_matrix: truncated bitmap in " + path);
    for (std::size_t i = 0; i < n; ++i)
      matrix.membership[static_cast<std::size_t>(j) * n + i] =
          (static_cast<std::uint8_t>(packed[i / 8]) >> (i % 8)) & 1u;
  }
  matrix.values.resize(static_cast<std::size_t>(matrix.n_models) * n * matrix.n_aug);
  for (double& v : matrix.values) v = read_le<double>(in);
  // Trailing bytes indicate a corrupt or mismatched file.
  char extra;
  in.read(&extra, 1);
  if (in.gcount() != 0) throw FormatError("load_matrix: trailing bytes in " + path);

  int iteration = 0;
  std::ifstream side(path + ".json");
  if (side) {
    try {
      nlohmann::json sidecar = nlohmann::json::parse(side);
      iteration = sidecar.value("iteration", 0);
    } catch (const nlohmann::json::exception&) {
      // Sidecar is advisory; a damaged one does not block loading.
    }
  }
  matrix.provenance.resize(matrix.n_models);
  for (int j = 0; j < matrix.n_models; ++j)
    matrix.provenance[j] =
        RowProvenance{static_cast<std::uint32_t>(iteration), static_cast<std::uint32_t>(j)};
  matrix.validate();
  return matrix;
}

ScoreMatrix concat_matrices(std::span<const ScoreMatrix> parts) {
  if (parts.empty()) throw std::invalid_argument("concat_matrices: no parts");
  ScoreMatrix out;
  out.instance_ids = parts[0].instance_ids;
  out.n_aug = parts[0].n_aug;
  out.aug_seed = parts[0].aug_seed;
  out.n_models = 0;
  for (const auto& part : parts) {
    if (part.instance_ids != out.instance_ids)
      throw std::invalid_argument("concat_matrices: instance ids differ");
    if (part.n_aug != out.n_aug || part.aug_seed != out.aug_seed)
      throw std::invalid_argument("concat_matrices: augmentation setup differs");
    out.n_models += part.n_models;
    out.values.insert(out.values.end(), part.values.begin(), part.values.end());
    out.membership.insert(out.membership.end(), part.membership.begin(), part.membership.end());
    for (int j = 0; j < part.n_models; ++j) {
      RowProvenance p = j < static_cast<int>(part.provenance.size())
                            ? part.provenance[j]
                            : RowProvenance{0, static_cast<std::uint32_t>(j)};
      out.provenance.push_back(p);
    }
  }
  return out;
}

}  // namespace mia
