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

#include <doctest.h>

#include <algorithm>
#include <cmath>
#include <set>

#include "data.hpp"
#include "metrics.hpp"
#include "rng.hpp"

using namespace mia;

namespace {

// O(n^2) threshold scan used as the exact oracle: classify positive iff
// score >= t for every candidate threshold (each unique score plus +inf).
struct BruteForce {
  double tpr_at(double fpr_target) const {
    double best = 0.0;
    for (std::size_t k = 0; k < fprs.size(); ++k)
      if (fprs[k] <= fpr_target) best = std::max(best, tprs[k]);
    return best;
  }
  double balanced_accuracy() const {
    double best = 0.0;
    for (std::size_t k = 0; k < fprs.size(); ++k)
      best = std::max(best, (tprs[k] + (1.0 - fprs[k])) / 2.0);
    return best;
  }
  std::vector<double> fprs, tprs;
};

BruteForce brute_force(const std::vector<double>& scores,
                       const std::vector<std::uint8_t>& labels) {
  double positives = 0.0, negatives = 0.0;
  for (std::uint8_t l : labels) (l ? positives : negatives) += 1.0;
  std::set<double> unique_scores(scores.begin(), scores.end());
  std::vector<double> thresholds(unique_scores.begin(), unique_scores.end());
  thresholds.push_back(std::numeric_limits<double>::infinity());
  BruteForce out;
  for (double t : thresholds) {
    std::size_t tp = 0, fp = 0;
    for (std::size_t i = 0; i < scores.size(); ++i) {
      if (scores[i] >= t) {
        if (labels[i]) ++tp;
        else ++fp;
      }
    }
    out.fprs.push_back(static_cast<double>(fp) / negatives);
    out.tprs.push_back(static_cast<double>(tp) / positives);
  }
  return out;
}

}  // namespace

TEST_CASE("roc handles separation, randomness, and ties") {
  SUBCASE("perfect separation gives AUC one through (0,1)") {
    const std::vector<double> scores = {5.0, 4.0, 3.0, 1.0, 0.5, 0.2};
    const std::vector<std::uint8_t> labels = {1, 1, 1, 0, 0, 0};
    const RocCurve curve = roc(scores, labels);
    CHECK(curve.auc() == 1.0);
    bool hits_corner = false;
    for (const auto& p : curve.points)
      if (p.fpr == 0.0 && p.tpr == 1.0) hits_corner = true;
    CHECK(hits_corner);
  }

  SUBCASE("independent scores give AUC near one half") {
    Rng rng(12);
    const int n = 20000;
    std::vector<double> scores(n);
    std::vector<std::uint8_t> labels(n);
    for (int i = 0; i < n; ++i) {
      scores[i] = rng.next_normal();
      labels[i] = rng.next_unit() < 0.5 ? 1 : 0;
    }
    CHECK(std::abs(roc(scores, labels).auc() - 0.5) < 0.02);
  }

  SUBCASE("tied scores flip together") {
    const std::vector<double> scores = {1.0, 1.0, 0.0, 0.0};
    const std::vector<std::uint8_t> labels = {1, 0, 1, 0};
    const RocCurve curve = roc(scores, labels);
    // Points: (0,0), (0.5,0.5), (1,1); AUC = 0.5 by the tie diagonal.
    REQUIRE(curve.points.size() == 3);
    CHECK(curve.points[1].fpr == 0.5);
    CHECK(curve.points[1].tpr == 0.5);
    CHECK(curve.auc() == doctest::Approx(0.5));
  }

  SUBCASE("single-class labels are rejected") {
    const std::vector<double> scores = {1.0, 2.0};
    const std::vector<std::uint8_t> ones = {1, 1};
    CHECK_THROWS_AS(roc(scores, ones), std::invalid_argument);
  }

  SUBCASE("fpr and tpr are non-decreasing along the curve") {
    Rng rng(4);
    std::vector<double> scores(500);
    std::vector<std::uint8_t> labels(500);
    for (int i = 0; i < 500; ++i) {
      scores[i] = std::round(rng.next_normal() * 3.0) / 3.0;  // force ties
      labels[i] = rng.next_unit() < 0.4 ? 1 : 0;
    }
    const RocCurve curve = roc(scores, labels);
    for (std::size_t k = 1; k < curve.points.size(); ++k) {
      CHECK(curve.points[k].fpr >= curve.points[k - 1].fpr);
      CHECK(curve.points[k].tpr >= curve.points[k - 1].tpr);
    }
    CHECK(curve.points.front().fpr == 0.0);
    CHECK(curve.points.back().fpr == 1.0);
    CHECK(curve.points.back().tpr == 1.0);
  }
}

TEST_CASE("tpr_at_fpr and balanced_accuracy match the brute-force scan exactly") {
  Rng rng(31);
  for (int trial = 0; trial < 20; ++trial) {
    const int n = 50 + static_cast<int>(rng.next_below(951));  // up to ~1000
    std::vector<double> scores(n);
    std::vector<std::uint8_t> labels(n);
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      // Mix continuous scores with deliberate ties.
      scores[i] = rng.next_unit() < 0.3 ? std::floor(rng.next_normal() * 2.0)
                                        : rng.next_normal();
      labels[i] = rng.next_unit() < 0.5 ? 1 : 0;
      (labels[i] ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    const BruteForce bf = brute_force(scores, labels);
    const RocCurve curve = roc(scores, labels);
    for (double target : {0.0, 1e-5, 1e-3, 0.01, 0.1, 0.5, 1.0})
      CHECK(tpr_at_fpr(curve, target) == bf.tpr_at(target));
    CHECK(balanced_accuracy(scores, labels) == bf.balanced_accuracy());
  }
}

TEST_CASE("tpr_at_fpr edge behavior") {
  // 10 positives scoring high, 1000 negatives; one negative outranks all.
  std::vector<double> scores;
  std::vector<std::uint8_t> labels;
  scores.push_back(100.0);
  labels.push_back(0);
  for (int i = 0; i < 10; ++i) {
    scores.push_back(50.0 - i);
    labels.push_back(1);
  }
  Rng rng(8);
  for (int i = 0; i < 999; ++i) {
    scores.push_back(rng.next_unit());
    labels.push_back(0);
  }
  const RocCurve curve = roc(scores, labels);
  // No true positive is reachable at zero false positives.
  CHECK(tpr_at_fpr(curve, 0.0) == 0.0);
  CHECK(tpr_at_fpr(curve, 1e-5) == 0.0);
  // Admitting exactly one false positive (fpr 0.001) exposes all members.
  CHECK(tpr_at_fpr(curve, 0.001) == 1.0);
  CHECK(tpr_at_fpr(curve, 1.0) == 1.0);
  // Monotone in the target.
  double prev = -1.0;
  for (double t = 0.0; t <= 1.0; t += 0.05) {
    const double v = tpr_at_fpr(curve, t);
    CHECK(v >= prev);
    prev = v;
  }
}

TEST_CASE("balanced accuracy bounds") {
  Rng rng(21);
  std::vector<double> scores(2000);
  std::vector<std::uint8_t> labels(2000);
  for (int i = 0; i < 2000; ++i) {
    scores[i] = rng.next_normal();
    labels[i] = i % 2 == 0;
  }
  const double bacc = balanced_accuracy(scores, labels);
  CHECK(bacc >= 0.5);
  CHECK(bacc < 0.55);

  const std::vector<double> sep = {3.0, 2.0, -1.0, -2.0};
  const std::vector<std::uint8_t> sep_labels = {1, 1, 0, 0};
  CHECK(balanced_accuracy(sep, sep_labels) == 1.0);
}

TEST_CASE("AUC is invariant under strictly increasing score transforms") {
  Rng rng(14);
  std::vector<double> scores(400);
  std::vector<std::uint8_t> labels(400);
  for (int i = 0; i < 400; ++i) {
    scores[i] = rng.next_normal();
    labels[i] = rng.next_unit() < 0.5 ? 1 : 0;
  }
  const double before = roc(scores, labels).auc();
  std::vector<double> transformed = scores;
  for (double& s : transformed) s = std::exp(0.5 * s) + 3.0;
  CHECK(roc(transformed, labels).auc() == before);
}

TEST_CASE("adaptive game splits the pool in half and queries everything") {
  SyntheticConfig syn;
  syn.num_classes = 2;
  syn.dim = 2;
  syn.per_class_count = 500;
  syn.class_separation = 4.0;
  syn.seed = 3;
  const Dataset pool = gen_synthetic(syn);  // 1000 instances

  GameConfig cfg;
  cfg.setting = GameSetting::adaptive;
  cfg.model.hidden_sizes = {};
  cfg.model.epochs = 1;
  cfg.seed = 5;
  const GameTranscript game = play_game(pool, cfg);
  CHECK(game.member_ids.size() == 500);
  CHECK(game.query_ids.size() == 1000);
  std::size_t members = 0;
  for (std::uint8_t m : game.ground_truth) members += m;
  CHECK(members == 500);
  // Ground truth reconstructs from the member list.
  for (std::size_t i = 0; i < game.query_ids.size(); ++i)
    CHECK(game.ground_truth[i] ==
          (std::binary_search(game.member_ids.begin(), game.member_ids.end(),
                              game.query_ids[i])
               ? 1
               : 0));
}

TEST_CASE("non-adaptive game separates queries from the adversary side") {
  SyntheticConfig syn;
  syn.num_classes = 2;
  syn.dim = 2;
  syn.per_class_count = 1750;
  syn.class_separation = 4.0;
  syn.seed = 6;
  const Dataset pool = gen_synthetic(syn);  // 3500 instances

  GameConfig cfg;
  cfg.setting = GameSetting::non_adaptive;
  cfg.model.hidden_sizes = {};
  cfg.model.epochs = 1;
  cfg.seed = 9;
  const GameTranscript game = play_game(pool, cfg);

  // Four blocks in ratio 1:1:1:2.
  REQUIRE(game.block_sizes.size() == 4);
  CHECK(game.block_sizes[0] == 700);
  CHECK(game.block_sizes[1] == 700);
  CHECK(game.block_sizes[2] == 700);
  CHECK(game.block_sizes[3] == 1400);

  // No query id leaks into the adversary side.
  std::set<std::int64_t> adversary(game.shadow_pool_ids.begin(), game.shadow_pool_ids.end());
  adversary.insert(game.reference_ids.begin(), game.reference_ids.end());
  for (std::int64_t id : game.query_ids) CHECK(adversary.count(id) == 0);

  // Query set is half members.
  std::size_t members = 0;
  for (std::uint8_t m : game.ground_truth) members += m;
  CHECK(members == game.query_ids.size() / 2);
}
