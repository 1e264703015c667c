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
#include <cstdio>
#include <numeric>

#include "attacks.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "rng.hpp"

using namespace mia;

namespace {

// Matrix built directly from per-(model, instance) scaled confidences.
ScoreMatrix manual_matrix(const std::vector<std::int64_t>& ids,
                          const std::vector<std::vector<double>>& rows,
                          const std::vector<std::vector<std::uint8_t>>& membership) {
  ScoreMatrix m;
  m.instance_ids = ids;
  m.n_models = static_cast<int>(rows.size());
  m.n_aug = 1;
  for (const auto& row : rows) m.values.insert(m.values.end(), row.begin(), row.end());
  for (const auto& row : membership) m.membership.insert(m.membership.end(), row.begin(), row.end());
  m.provenance.resize(m.n_models);
  return m;
}

TargetObservation manual_obs(const std::vector<std::int64_t>& ids,
                             const std::vector<double>& phi, const std::vector<double>& loss) {
  TargetObservation obs;
  obs.ids = ids;
  obs.n_aug = 1;
  obs.phi = phi;
  obs.loss = loss;
  obs.labels.assign(ids.size(), 0);
  return obs;
}

}  // namespace

TEST_CASE("attack_loss negates the loss") {
  const auto obs = manual_obs({0, 1}, {0.0, 0.0}, {0.1, 2.3});
  const AttackResult r = attack_loss(obs);
  CHECK(r.scores[0] == -0.1);
  CHECK(r.scores[1] == -2.3);

  const auto zero = manual_obs({0}, {0.0}, {0.0});
  CHECK(attack_loss(zero).scores[0] == 0.0);

  // A memorized member outranks a misclassified non-member.
  const auto pair = manual_obs({0, 1}, {0.0, 0.0}, {1e-9, 3.0});
  const AttackResult scores = attack_loss(pair);
  CHECK(scores.scores[0] > scores.scores[1]);
}

TEST_CASE("attack_entropy follows the modified-entropy formula") {
  SUBCASE("certain prediction reaches the maximal score") {
    TargetObservation obs = manual_obs({0}, {0.0}, {0.0});
    obs.softmax = {{1.0, 0.0}};
    const AttackResult r = attack_entropy(obs);
    CHECK(r.scores[0] == doctest::Approx(0.0).epsilon(1e-9));
  }

  SUBCASE("uniform two-class softmax gives Mentr = log 2") {
    TargetObservation obs = manual_obs({0}, {0.0}, {0.0});
    obs.softmax = {{0.5, 0.5}};
    const AttackResult r = attack_entropy(obs);
    // Hand evaluation: -(1-0.5) log 0.5 - 0.5 log(1-0.5) = log 2.
    CHECK(r.scores[0] == doctest::Approx(-std::log(2.0)).epsilon(1e-12));
  }

  SUBCASE("score decreases as the true-class probability drops") {
    double prev = 1.0;
    for (double p = 0.95; p > 0.05; p -= 0.05) {
      TargetObservation obs = manual_obs({0}, {0.0}, {0.0});
      const double rest = (1.0 - p) / 3.0;
      obs.softmax = {{p, rest, rest, rest}};
      const double score = attack_entropy(obs).scores[0];
      CHECK(score < prev);
      prev = score;
    }
  }

  SUBCASE("missing softmax is an error") {
    const auto obs = manual_obs({0}, {0.0}, {0.0});
    CHECK_THROWS_AS(attack_entropy(obs), std::invalid_argument);
  }
}

TEST_CASE("attack_calibration adjusts by the mean shadow OUT loss") {
  // Two shadow models, both OUT for the single instance. Stored logits are
  // chosen so the recovered losses are exact.
  const double want_loss_a = 2.5;
  const double want_loss_b = 1.5;
  const double phi_a = -std::log(std::expm1(want_loss_a));
  const double phi_b = -std::log(std::expm1(want_loss_b));
  const auto matrix = manual_matrix({7}, {{phi_a}, {phi_b}}, {{0}, {0}});
  const double mean_out = (loss_from_logit(phi_a) + loss_from_logit(phi_b)) / 2.0;

  SUBCASE("target loss equal to the shadow mean scores zero") {
    const auto obs = manual_obs({7}, {0.0}, {mean_out});
    CHECK(attack_calibration(obs, matrix).scores[0] == doctest::Approx(0.0));
  }

  SUBCASE("easy shadow instances push the score up") {
    const auto obs = manual_obs({7}, {0.0}, {0.1});
    CHECK(attack_calibration(obs, matrix).scores[0] ==
          doctest::Approx(mean_out - 0.1).epsilon(1e-12));
  }

  SUBCASE("zero OUT rows is a hard error") {
    const auto all_in = manual_matrix({7}, {{phi_a}, {phi_b}}, {{1}, {1}});
    const auto obs = manual_obs({7}, {0.0}, {1.0});
    CHECK_THROWS_AS(attack_calibration(obs, all_in), std::runtime_error);
  }

  SUBCASE("calibration reverses a raw-loss misranking") {
    // Instance A: easy member (target loss 0.5, typical OUT loss 2.0).
    // Instance B: intrinsically easy non-member (target loss 0.4, OUT 0.41).
    const double pa = -std::log(std::expm1(2.0));
    const double pb = -std::log(std::expm1(0.41));
    const auto m = manual_matrix({0, 1}, {{pa, pb}, {pa, pb}}, {{0, 0}, {0, 0}});
    const auto obs = manual_obs({0, 1}, {0.0, 0.0}, {0.5, 0.4});
    const AttackResult raw = attack_loss(obs);
    CHECK(raw.scores[1] > raw.scores[0]);  // LOSS misranks B over A
    const AttackResult cal = attack_calibration(obs, m);
    CHECK(cal.scores[0] > cal.scores[1]);  // calibration fixes the order
  }
}

TEST_CASE("attack_ratio counts OUT rows the target beats") {
  Rng rng(5);
  std::vector<std::vector<double>> rows;
  std::vector<std::vector<std::uint8_t>> bits;
  std::vector<double> shadow_losses;
  for (int j = 0; j < 64; ++j) {
    const double l = 0.5 + rng.next_unit() * 2.0;
    shadow_losses.push_back(l);
    rows.push_back({-std::log(std::expm1(l))});
    bits.push_back({0});
  }
  const auto matrix = manual_matrix({3}, rows, bits);

  SUBCASE("target below every shadow loss") {
    const auto obs = manual_obs({3}, {0.0}, {0.01});
    CHECK(attack_ratio(obs, matrix).scores[0] == 1.0);
  }

  SUBCASE("target above every shadow loss") {
    const auto obs = manual_obs({3}, {0.0}, {10.0});
    CHECK(attack_ratio(obs, matrix).scores[0] == 0.0);
  }

  SUBCASE("target at the empirical median") {
    std::vector<double> sorted = shadow_losses;
    std::sort(sorted.begin(), sorted.end());
    const double median = (sorted[31] + sorted[32]) / 2.0;
    const auto obs = manual_obs({3}, {0.0}, {median});
    const double score = attack_ratio(obs, matrix).scores[0];
    CHECK(std::abs(score - 0.5) <= 1.0 / 64.0);
  }
}

TEST_CASE("attack_ratio is invariant under monotone loss transforms") {
  Rng rng(17);
  std::vector<std::int64_t> ids = {0, 1, 2, 3, 4};
  std::vector<std::vector<double>> rows(8, std::vector<double>(5));
  std::vector<std::vector<std::uint8_t>> bits(8, std::vector<std::uint8_t>(5, 0));
  for (auto& row : rows)
    for (double& v : row) v = rng.next_normal();
  auto matrix = manual_matrix(ids, rows, bits);
  std::vector<double> losses(5);
  for (double& l : losses) l = 0.1 + rng.next_unit() * 3.0;
  auto obs = manual_obs(ids, std::vector<double>(5, 0.0), losses);
  const AttackResult before = attack_ratio(obs, matrix);
  for (double s : before.scores) {
    CHECK(s >= 0.0);
    CHECK(s <= 1.0);
  }

  // Apply f(l) = 2l + 0.1 l^2 (strictly increasing on l > 0) to both sides.
  auto f = [](double l) { return 2.0 * l + 0.1 * l * l; };
  ScoreMatrix transformed = matrix;
  for (double& phi : transformed.values) phi = -std::log(std::expm1(f(loss_from_logit(phi))));
  TargetObservation tobs = obs;
  for (double& l : tobs.loss) l = f(l);
  const AttackResult after = attack_ratio(tobs, transformed);
  CHECK(after.scores == before.scores);
}

TEST_CASE("fit_gauss estimates spherical moments per membership side") {
  SUBCASE("two IN samples give the population moments") {
    const auto matrix = manual_matrix({5}, {{1.0}, {3.0}, {0.0}, {0.0}},
                                      {{1}, {1}, {0}, {0}});
    const GaussFit fit = fit_gauss(matrix, 5);
    CHECK(fit.rows_in == 2);
    CHECK(fit.mean_in[0] == doctest::Approx(2.0));
    CHECK(fit.var_in == doctest::Approx(1.0));  // ((1-2)^2 + (3-2)^2) / 2
  }

  SUBCASE("identical samples hit the variance floor") {
    const auto matrix = manual_matrix({5}, {{2.0}, {2.0}, {2.0}, {2.0}},
                                      {{1}, {1}, {0}, {0}});
    const GaussFit fit = fit_gauss(matrix, 5);
    CHECK(fit.var_in == kVarFloor);
    CHECK(fit.var_out == kVarFloor);
  }

  SUBCASE("nine views give nine means and one pooled variance per side") {
    ScoreMatrix m;
    m.instance_ids = {0};
    m.n_models = 4;
    m.n_aug = 9;
    Rng rng(3);
    for (int j = 0; j < 4; ++j)
      for (int a = 0; a < 9; ++a) m.values.push_back(rng.next_normal());
    m.membership = {1, 1, 0, 0};
    const GaussFit fit = fit_gauss(m, 0);
    CHECK(fit.mean_in.size() == 9);
    CHECK(fit.mean_out.size() == 9);
    CHECK(fit.rows_in == 2);
    CHECK(fit.rows_out == 2);
  }

  SUBCASE("missing column is an error") {
    const auto matrix = manual_matrix({5}, {{1.0}}, {{1}});
    CHECK_THROWS_AS(fit_gauss(matrix, 6), std::invalid_argument);
  }
}

TEST_CASE("adaptive LiRA evaluates the two-sided log ratio") {
  // IN samples {1,3} -> N(2,1); OUT samples {-1,1} -> N(0,1).
  const auto matrix = manual_matrix({9}, {{1.0}, {3.0}, {-1.0}, {1.0}},
                                    {{1}, {1}, {0}, {0}});

  SUBCASE("midpoint observation scores zero") {
    const auto obs = manual_obs({9}, {1.0}, {0.0});
    CHECK(lira_adaptive(obs, matrix).scores[0] == doctest::Approx(0.0).epsilon(1e-12));
  }

  SUBCASE("observation at the IN mean scores the analytic log ratio") {
    const auto obs = manual_obs({9}, {2.0}, {0.0});
    // log N(2; 2,1) - log N(2; 0,1) = 0 - (-2) = 2.
    CHECK(lira_adaptive(obs, matrix).scores[0] == doctest::Approx(2.0).epsilon(1e-12));
  }

  SUBCASE("identical hypotheses score zero everywhere") {
    const auto same = manual_matrix({9}, {{1.0}, {3.0}, {1.0}, {3.0}},
                                    {{1}, {1}, {0}, {0}});
    Rng rng(8);
    for (int t = 0; t < 20; ++t) {
      const auto obs = manual_obs({9}, {rng.next_normal() * 3.0}, {0.0});
      CHECK(lira_adaptive(obs, same).scores[0] == doctest::Approx(0.0).epsilon(1e-12));
    }
  }

  SUBCASE("score is strictly increasing in the observation") {
    double prev = -1e300;
    for (double x = -4.0; x <= 4.0; x += 0.25) {
      const auto obs = manual_obs({9}, {x}, {0.0});
      const double s = lira_adaptive(obs, matrix).scores[0];
      CHECK(s > prev);
      prev = s;
    }
  }

  SUBCASE("missing IN rows direct the caller to the one-sided test") {
    const auto out_only = manual_matrix({9}, {{1.0}, {3.0}}, {{0}, {0}});
    const auto obs = manual_obs({9}, {0.0}, {0.0});
    CHECK_THROWS_WITH_AS(lira_adaptive(obs, out_only),
                         doctest::Contains("lira_nonadaptive"), std::runtime_error);
  }
}

TEST_CASE("non-adaptive LiRA is the OUT-tail probability") {
  const auto matrix = manual_matrix({4}, {{-1.0}, {1.0}}, {{0}, {0}});  // N(0,1)

  SUBCASE("observation at the OUT mean") {
    const auto obs = manual_obs({4}, {0.0}, {0.0});
    CHECK(lira_nonadaptive(obs, matrix).scores[0] == doctest::Approx(0.5).epsilon(1e-12));
  }

  SUBCASE("three sigma above the OUT mean") {
    const auto obs = manual_obs({4}, {3.0}, {0.0});
    const double expected = 0.5 * std::erfc(-3.0 / std::sqrt(2.0));  // Phi(3)
    CHECK(lira_nonadaptive(obs, matrix).scores[0] == doctest::Approx(expected).epsilon(1e-12));
    CHECK(lira_nonadaptive(obs, matrix).scores[0] == doctest::Approx(0.99865).epsilon(1e-4));
  }

  SUBCASE("monotone in the observation") {
    double prev = -1.0;
    for (double x = -5.0; x <= 5.0; x += 0.5) {
      const auto obs = manual_obs({4}, {x}, {0.0});
      const double s = lira_nonadaptive(obs, matrix).scores[0];
      CHECK(s > prev);
      prev = s;
    }
  }
}

TEST_CASE("rmia compares pairwise likelihood ratios against the population") {
  // Everyone behaves identically: all ratios tie, strict inequality never
  // holds, so every score is zero.
  SUBCASE("identical behavior scores zero at gamma=1") {
    const std::vector<std::int64_t> ids = {0, 1, 2, 3};
    const auto matrix = manual_matrix(ids, {std::vector<double>(4, 0.3),
                                            std::vector<double>(4, -0.2)},
                                      {std::vector<std::uint8_t>(4, 0),
                                       std::vector<std::uint8_t>(4, 0)});
    const auto obs = manual_obs(ids, std::vector<double>(4, 0.1),
                                std::vector<double>(4, 0.0));
    const AttackResult r = rmia(obs, obs, matrix, ids, 1.0);
    for (double s : r.scores) CHECK(s == 0.0);
  }

  SUBCASE("a standout query wins every comparison") {
    const std::vector<std::int64_t> ids = {0, 1, 2};
    const auto matrix = manual_matrix(ids, {std::vector<double>(3, 0.0),
                                            std::vector<double>(3, 0.0)},
                                      {std::vector<std::uint8_t>(3, 0),
                                       std::vector<std::uint8_t>(3, 0)});
    auto obs = manual_obs(ids, {10.0, 0.0, 0.0}, std::vector<double>(3, 0.0));
    const AttackResult r = rmia(obs, obs, matrix, ids, 1.0);
    CHECK(r.scores[0] == 1.0);
  }

  SUBCASE("gamma to infinity forces all scores to zero") {
    const std::vector<std::int64_t> ids = {0, 1};
    const auto matrix = manual_matrix(ids, {{0.5, -0.5}, {0.1, 0.2}},
                                      {{0, 0}, {0, 0}});
    const auto obs = manual_obs(ids, {2.0, -1.0}, {0.0, 0.0});
    const AttackResult r = rmia(obs, obs, matrix, ids, 1e18);
    for (double s : r.scores) CHECK(s == 0.0);
  }

  SUBCASE("empty population is rejected") {
    const auto matrix = manual_matrix({0}, {{0.0}}, {{0}});
    const auto obs = manual_obs({0}, {0.0}, {0.0});
    CHECK_THROWS_AS(rmia(obs, obs, matrix, std::vector<std::int64_t>{}, 1.0),
                    std::invalid_argument);
  }
}

TEST_CASE("fitted-parameter noise shrinks with the row count") {
  // IN and OUT drawn from the same distribution: the log ratio should hover
  // near zero, tighter as rows accumulate.
  auto mean_abs_score = [](int n_models, std::uint64_t seed) {
    Rng rng(seed);
    std::vector<std::vector<double>> rows(n_models, std::vector<double>(1));
    std::vector<std::vector<std::uint8_t>> bits(n_models, std::vector<std::uint8_t>(1));
    for (int j = 0; j < n_models; ++j) {
      rows[j][0] = rng.next_normal();
      bits[j][0] = j < n_models / 2 ? 1 : 0;
    }
    const auto matrix = manual_matrix({0}, rows, bits);
    double acc = 0.0;
    const int trials = 200;
    for (int t = 0; t < trials; ++t) {
      const auto obs = manual_obs({0}, {rng.next_normal()}, {0.0});
      acc += std::abs(lira_adaptive(obs, matrix).scores[0]);
    }
    return acc / trials;
  };
  const double small = mean_abs_score(16, 1);
  const double large = mean_abs_score(256, 1);
  CHECK(large < small);
  CHECK(large < 0.2);
}

TEST_CASE("adaptive LiRA reaches the closed-form AUC on synthetic Gaussians") {
  // Scores sampled from the generating model N(2,1) vs N(0,1); the optimal
  // detector's AUC is Phi(sqrt(2)). Desk-scale version of the known-AUC
  // oracle; the acceptance suite runs the full-size one.
  const int n_instances = 4000;
  const int n_models = 64;
  Rng rng(99);
  std::vector<std::int64_t> ids(n_instances);
  std::iota(ids.begin(), ids.end(), 0);
  ScoreMatrix matrix;
  matrix.instance_ids = ids;
  matrix.n_models = n_models;
  matrix.n_aug = 1;
  matrix.values.resize(static_cast<std::size_t>(n_models) * n_instances);
  matrix.membership.resize(static_cast<std::size_t>(n_models) * n_instances);
  for (std::size_t i = 0; i < static_cast<std::size_t>(n_instances); ++i) {
    std::vector<std::uint8_t> pattern(n_models);
    for (int j = 0; j < n_models; ++j) pattern[j] = j < n_models / 2;
    rng.shuffle(pattern);
    for (int j = 0; j < n_models; ++j) {
      matrix.membership[static_cast<std::size_t>(j) * n_instances + i] = pattern[j];
      matrix.values[static_cast<std::size_t>(j) * n_instances + i] =
          pattern[j] ? 2.0 + rng.next_normal() : rng.next_normal();
    }
  }
  TargetObservation obs;
  obs.ids = ids;
  obs.n_aug = 1;
  obs.labels.assign(n_instances, 0);
  obs.loss.assign(n_instances, 0.0);
  std::vector<std::uint8_t> truth(n_instances);
  for (int i = 0; i < n_instances; ++i) {
    truth[i] = rng.next_unit() < 0.5 ? 1 : 0;
    obs.phi.push_back(truth[i] ? 2.0 + rng.next_normal() : rng.next_normal());
  }
  const AttackResult r = lira_adaptive(obs, matrix);
  const double auc = roc(r.scores, truth).auc();
  const double expected = 0.5 * std::erfc(-std::sqrt(2.0) / std::sqrt(2.0));  // Phi(sqrt 2)
  CHECK(std::abs(auc - expected) < 0.02);
}

TEST_CASE("attack results persist as CSV") {
  AttackResult r;
  r.attack_name = "demo";
  r.instance_ids = {1, 2, 9};
  r.scores = {0.125, -3.5, 1e-17};
  r.ground_truth = {1, 0, -1};
  const std::string path = "/tmp/mia_attack_test.csv";
  save_attack_csv(r, path);
  const AttackResult loaded = load_attack_csv(path);
  CHECK(loaded.attack_name == "demo");
  CHECK(loaded.instance_ids == r.instance_ids);
  CHECK(loaded.scores == r.scores);  // 17 significant digits round-trip
  CHECK(loaded.ground_truth == r.ground_truth);
  std::remove(path.c_str());
}
