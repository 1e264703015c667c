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

#include "metrics.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <numeric>

#include "rng.hpp"
#include "util.hpp"

namespace mia {

namespace {

void check_two_classes(std::span<const std::uint8_t> labels) {
  bool has_pos = false, has_neg = false;
  for (std::uint8_t l : labels) (l ? has_pos : has_neg) = true;
  if (!has_pos || !has_neg)
    throw std::invalid_argument("metrics: both classes must be present");
}

}  // namespace

RocCurve roc(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  if (scores.size() != labels.size())
    throw std::invalid_argument("roc: scores/labels size mismatch");
  check_two_classes(labels);

  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return scores[a] > scores[b];
  });

  double positives = 0.0, negatives = 0.0;
  for (std::uint8_t l : labels) (l ? positives : negatives) += 1.0;

  RocCurve curve;
  curve.points.push_back({0.0, 0.0, std::numeric_limits<double>::infinity()});
  std::size_t tp = 0, fp = 0;
  std::size_t i = 0;
  while (i < order.size()) {
    const double s = scores[order[i]];
    // All instances sharing a score flip together.
    while (i < order.size() && scores[order[i]] == s) {
      if (labels[order[i]]) ++tp;
      else ++fp;
      ++i;
    }
    curve.points.push_back({static_cast<double>(fp) / negatives,
                            static_cast<double>(tp) / positives, s});
  }
  return curve;
}

double RocCurve::auc() const {
  double area = 0.0;
  for (std::size_t i = 1; i < points.size(); ++i)
    area += (points[i].fpr - points[i - 1].fpr) * (points[i].tpr + points[i - 1].tpr) * 0.5;
  return area;
}

double tpr_at_fpr(const RocCurve& curve, double fpr_target) {
  if (fpr_target < 0.0 || fpr_target > 1.0)
    throw std::invalid_argument("tpr_at_fpr: target must be in [0,1]");
  double best = 0.0;
  for (const auto& p : curve.points)
    if (p.fpr <= fpr_target) best = std::max(best, p.tpr);
  return best;
}

double balanced_accuracy(std::span<const double> scores, std::span<const std::uint8_t> labels) {
  const RocCurve curve = roc(scores, labels);
  double best = 0.0;
  for (const auto& p : curve.points) best = std::max(best, (p.tpr + (1.0 - p.fpr)) / 2.0);
  return best;
}

void save_roc_csv(const RocCurve& curve, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_roc_csv: cannot open " + path);
  out << "threshold,fpr,tpr\n";
  out.precision(17);
  for (const auto& p : curve.points) out << p.threshold << ',' << p.fpr << ',' << p.tpr << '\n';
  if (!out) throw IoError("save_roc_csv: write failed for " + path);
}

GameTranscript play_game(const Dataset& pool, const GameConfig& config) {
  GameTranscript game;
  game.setting = config.setting;
  game.seed = config.seed;

  if (config.setting == GameSetting::adaptive) {
    if (pool.size() < 2) throw std::invalid_argument("play_game: pool too small");
    // Members = random half of the pool; everything is queryable and the
    // adversary reuses the full pool for shadow training.
    std::vector<std::int64_t> ids = pool.ids();
    Rng rng(hash_combine(config.seed, 0x67616d65ULL));  // "game"
    rng.shuffle(ids);
    const std::size_t half = ids.size() / 2;
    game.member_ids.assign(ids.begin(), ids.begin() + half);
    std::sort(game.member_ids.begin(), game.member_ids.end());
    game.query_ids = pool.ids();
    game.shadow_pool_ids = pool.ids();
    game.reference_ids = pool.ids();
    game.block_sizes = {half, ids.size() - half};
  } else {
    if (pool.size() < 10) throw std::invalid_argument("play_game: pool too small");
    const std::vector<Dataset> blocks =
        split_disjoint(pool, {0.2, 0.2, 0.2, 0.4}, hash_combine(config.seed, 0x67616d65ULL));
    const Dataset& query_train = blocks[0];
    const Dataset& query_val = blocks[1];
    const Dataset& reference = blocks[2];
    const Dataset& shadow_pool = blocks[3];

    game.member_ids = query_train.ids();
    game.query_ids = query_train.ids();
    for (std::int64_t id : query_val.ids()) game.query_ids.push_back(id);
    std::sort(game.query_ids.begin(), game.query_ids.end());
    game.shadow_pool_ids = shadow_pool.ids();
    game.reference_ids = reference.ids();
    game.block_sizes = {query_train.size(), query_val.size(), reference.size(),
                        shadow_pool.size()};
  }

  game.ground_truth.resize(game.query_ids.size());
  for (std::size_t i = 0; i < game.query_ids.size(); ++i)
    game.ground_truth[i] =
        std::binary_search(game.member_ids.begin(), game.member_ids.end(), game.query_ids[i])
            ? 1
            : 0;

  TrainConfig train_config = config.model;
  train_config.seed = hash_combine(config.seed, 0x746172676574ULL);  // "target"
  game.target = train(pool.subset(game.member_ids), train_config);
  return game;
}

}  // namespace mia
