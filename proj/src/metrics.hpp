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

#ifndef MIA_METRICS_HPP_
#define MIA_METRICS_HPP_

#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "data.hpp"
#include "model.hpp"

namespace mia {

struct RocPoint {
  double fpr = 0.0;
  double tpr = 0.0;
  double threshold = 0.0;  // classify positive iff score >= threshold
};

// Threshold sweep from +inf downwards; fpr and tpr are non-decreasing along
// the curve and tied scores flip together.
struct RocCurve {
  std::vector<RocPoint> points;
  double auc() const;  // trapezoid; equals Mann-Whitney with 0.5 tie credit
};

RocCurve roc(std::span<const double> scores, std::span<const std::uint8_t> labels);

// TPR at the largest achieved FPR <= fpr_target (conservative step function,
// no interpolation).
double tpr_at_fpr(const RocCurve& curve, double fpr_target);

// max over thresholds of (TPR + TNR) / 2; never below 0.5.
double balanced_accuracy(std::span<const double> scores, std::span<const std::uint8_t> labels);

void save_roc_csv(const RocCurve& curve, const std::string& path);

// -------------------------------------------------------------------------
// The membership-inference security game.

enum class GameSetting { adaptive, non_adaptive };

struct GameConfig {
  GameSetting setting = GameSetting::adaptive;
  TrainConfig model;
  std::uint64_t seed = 0;
};

// Adaptive: the target trains on a random half of the pool and the query set
// is the whole pool, which the adversary also gets for shadow training.
// Non-adaptive: the pool splits into blocks [query-train, query-val,
// reference, shadow-pool] with fractions [0.2, 0.2, 0.2, 0.4]; the target
// trains on query-train, the query set is query-train + query-val, and the
// adversary side (shadow pool + reference) is disjoint from every query.
// Shadow models sampling half of the shadow pool then match the target's
// training-set size in both settings.
struct GameTranscript {
  GameSetting setting = GameSetting::adaptive;
  Classifier target;
  std::vector<std::int64_t> member_ids;     // the target's training set
  std::vector<std::int64_t> query_ids;      // ascending
  std::vector<std::uint8_t> ground_truth;   // aligned with query_ids
  std::vector<std::int64_t> shadow_pool_ids;
  std::vector<std::int64_t> reference_ids;  // population for pairwise attacks
  std::vector<std::size_t> block_sizes;
  std::uint64_t seed = 0;
};

GameTranscript play_game(const Dataset& pool, const GameConfig& config);

}  // namespace mia

#endif  // MIA_METRICS_HPP_
