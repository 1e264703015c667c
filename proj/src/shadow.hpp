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

#ifndef MIA_SHADOW_HPP_
#define MIA_SHADOW_HPP_

#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "data.hpp"
#include "model.hpp"

namespace mia {

// Anchor bookkeeping for the cascading attack: instances whose membership has
// been inferred with high confidence. The two sets are disjoint.
struct AnchorSets {
  std::set<std::int64_t> members;      // forced into every shadow training set
  std::set<std::int64_t> non_members;  // forced out of every shadow training set

  bool contains(std::int64_t id) const {
    return members.count(id) > 0 || non_members.count(id) > 0;
  }
  std::size_t total() const { return members.size() + non_members.size(); }
};

// Which pool instances each shadow model trains on. bit (j, i) = 1 iff pool
// instance i belongs to shadow dataset j.
struct ShadowPlan {
  std::vector<std::int64_t> pool_ids;  // ascending
  int n_models = 0;
  std::vector<std::uint8_t> bits;  // n_models x pool_ids.size(), row-major

  bool in_set(int model, std::size_t col) const {
    return bits[static_cast<std::size_t>(model) * pool_ids.size() + col] != 0;
  }
  int column_sum(std::size_t col) const;
  std::optional<std::size_t> column_of(std::int64_t id) const;
  std::vector<std::int64_t> selected_ids(int model) const;
};

// Half-in/half-out plan: every instance appears in exactly n_models/2 shadow
// training sets. Each column gets an independently shuffled balanced pattern
// keyed by (seed, instance id), so the plan does not depend on pool order.
ShadowPlan make_plan(const std::vector<std::int64_t>& pool_ids, int n_models, std::uint64_t seed);

// As make_plan, but anchor member columns are all-1 and anchor non-member
// columns all-0. With empty anchors this is identical to make_plan.
ShadowPlan make_conditional_plan(const std::vector<std::int64_t>& pool_ids, int n_models,
                                 const AnchorSets& anchors, std::uint64_t seed);

// Independent Bernoulli(inclusion_probs[i]) per bit; no column balance.
ShadowPlan make_weighted_plan(const std::vector<std::int64_t>& pool_ids, int n_models,
                              const std::vector<double>& inclusion_probs, std::uint64_t seed);

struct ShadowEnsemble {
  ShadowPlan plan;
  std::vector<Classifier> models;  // one per plan row
};

// Trains one classifier per plan row. Model j uses seed
// hash_combine(config.seed, j) so models differ; rows train in parallel but
// results are assembled in plan order.
ShadowEnsemble train_shadows(const Dataset& pool, const ShadowPlan& plan,
                             const TrainConfig& config, int n_threads = 0);

// Row provenance survives concatenation across cascade iterations.
struct RowProvenance {
  std::uint32_t iteration = 0;
  std::uint32_t model_index = 0;
};

// Scaled confidences of every model on every instance and augmented view,
// plus the membership bitmap. The substrate all attacks read.
struct ScoreMatrix {
  std::vector<std::int64_t> instance_ids;
  int n_models = 0;
  int n_aug = 1;
  std::uint64_t aug_seed = 0;
  std::vector<double> values;           // [model][instance][aug]
  std::vector<std::uint8_t> membership; // n_models x n_instances
  std::vector<RowProvenance> provenance;

  std::size_t n_instances() const { return instance_ids.size(); }
  double value(int model, std::size_t instance, int aug) const {
    return values[(static_cast<std::size_t>(model) * instance_ids.size() + instance) * n_aug + aug];
  }
  bool member(int model, std::size_t instance) const {
    return membership[static_cast<std::size_t>(model) * instance_ids.size() + instance] != 0;
  }
  std::optional<std::size_t> column_of(std::int64_t id) const;

  // Copy of this matrix without the given row; used for threshold selection.
  ScoreMatrix without_row(int model) const;

  void validate() const;  // finite values, shape consistency, unique ids
};

// values[j][i][a] = logit_scale(model_j(view_a(x_i))[y_i]). Views are keyed by
// (instance id, aug_seed) so every model sees the same augmented inputs.
// Membership is copied from the plan; instances outside the pool get all-0.
ScoreMatrix score_matrix(const ShadowEnsemble& ensemble, const std::vector<Instance>& instances,
                         const AugmentConfig& aug, std::uint64_t aug_seed, int n_threads = 0);

// Binary format (little-endian): magic "MIA1", u16 version=1, u32 n_models,
// u32 n_instances, u32 n_aug, u64 aug_seed, n_instances x i64 instance ids,
// membership packed per row (LSB-first, rows padded to a byte boundary), then
// float64 values row-major [model][instance][aug]. A JSON sidecar at
// <path>.json records provenance.
void save_matrix(const ScoreMatrix& matrix, const std::string& path,
                 const std::string& config_hash = "", int iteration = 0);
ScoreMatrix load_matrix(const std::string& path);

// Stacks rows; all parts must share instance ids, n_aug, and aug_seed.
ScoreMatrix concat_matrices(std::span<const ScoreMatrix> parts);

}  // namespace mia

#endif  // MIA_SHADOW_HPP_
