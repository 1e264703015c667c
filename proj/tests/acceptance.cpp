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
//
// Acceptance suite: one pass/fail line per criterion, nonzero exit on any
// failure. Criteria 6 and 7 run the desk-scale experiments and dominate the
// runtime; `acceptance --only 1,2,9` runs a subset.

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdio>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <numeric>
#include <set>
#include <string>
#include <vector>

#include "attacks.hpp"
#include "cmia.hpp"
#include "data.hpp"
#include "experiment.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "pmia.hpp"
#include "rng.hpp"
#include "shadow.hpp"
#include "theory.hpp"

using namespace mia;
namespace fs = std::filesystem;

namespace {

int g_failures = 0;

void report(int criterion, bool pass, const std::string& what, const std::string& detail) {
  std::printf("[%s] criterion %d: %s (%s)\n", pass ? "PASS" : "FAIL", criterion, what.c_str(),
              detail.c_str());
  std::fflush(stdout);
  if (!pass) ++g_failures;
}

double elapsed_seconds(const std::chrono::steady_clock::time_point& start) {
  return std::chrono::duration<double>(std::chrono::steady_clock::now() - start).count();
}

// ---------------------------------------------------------------------------

void criterion_1_gibbs_oracle() {
  const auto start = std::chrono::steady_clock::now();
  double worst_tv = 0.0;
  double worst_db = 0.0;
  for (int u = 0; u < 5; ++u) {
    const JointUniverse universe = JointUniverse::random(8, hash_combine(0xacc1, u));
    const PosteriorTable exact = enum_posterior(universe);
    GibbsConfig cfg;
    cfg.sweeps = 1000000;
    cfg.burn_in = 10000;
    cfg.seed = hash_combine(0xacc1, u, 99);
    const GibbsResult gibbs = gibbs_sample(universe, cfg);
    worst_tv = std::max(worst_tv, total_variation(gibbs.empirical, exact.probability));
    worst_db = std::max(worst_db, detailed_balance_max_violation(universe));
  }
  const double secs = elapsed_seconds(start);
  const bool pass = worst_tv < 0.02 && worst_db < 1e-12 && secs < 120.0;
  char detail[160];
  std::snprintf(detail, sizeof(detail), "max TV %.5f < 0.02, max DB violation %.2e < 1e-12, %.1fs < 120s",
                worst_tv, worst_db, secs);
  report(1, pass, "Gibbs sampler converges to the enumerated joint posterior", detail);
}

void criterion_2_odds_oracle() {
  int checks = 0;
  int mismatches = 0;
  double worst_rel = 0.0;
  for (int u = 0; u < 50; ++u) {
    const DiscreteOddsUniverse universe =
        DiscreteOddsUniverse::random(64, 16, 8, hash_combine(0xacc2, u));
    for (std::int64_t item : universe.item_pool()) {
      for (int e = 0; e < universe.alphabet(); ++e) {
        if (universe.observation_probability(e) <= 0.0) continue;
        const OddsTestResult r = odds_test(universe, item, e);
        if (r.decision != bayes_optimal_decision(universe, item, e)) ++mismatches;
        ++checks;
        if (!r.prior_membership_impossible && std::isfinite(r.lhs) &&
            std::isfinite(r.direct_posterior_ratio) && r.direct_posterior_ratio > 0.0) {
          const double via = r.lhs / r.rhs;
          worst_rel = std::max(worst_rel, std::abs(via - r.direct_posterior_ratio) /
                                              r.direct_posterior_ratio);
        }
      }
    }
  }
  const bool pass = mismatches == 0 && worst_rel < 1e-9 && checks > 1000;
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "%d checks, %d decision mismatches, max identity error %.2e < 1e-9", checks,
                mismatches, worst_rel);
  report(2, pass, "posterior odds test matches brute-force Bayes", detail);
}

void criterion_3_shadow_plans() {
  std::vector<std::int64_t> ids(2000);
  std::iota(ids.begin(), ids.end(), 0);
  bool pass = true;
  const ShadowPlan plan = make_plan(ids, 64, 0xacc3);
  for (std::size_t i = 0; i < ids.size(); ++i)
    if (plan.column_sum(i) != 32) pass = false;

  AnchorSets anchors;
  for (std::int64_t id = 0; id < 50; ++id) anchors.members.insert(id);
  for (std::int64_t id = 50; id < 100; ++id) anchors.non_members.insert(id);
  const ShadowPlan cond = make_conditional_plan(ids, 64, anchors, 0xacc3);
  for (std::size_t i = 0; i < ids.size(); ++i) {
    const std::int64_t id = cond.pool_ids[i];
    const int want = anchors.members.count(id) ? 64 : anchors.non_members.count(id) ? 0 : 32;
    if (cond.column_sum(i) != want) pass = false;
  }
  report(3, pass, "half-in/half-out and conditional plan invariants hold",
         "pool 2000, 64 models: balanced columns sum 32, anchors all-1/all-0");
}

void criterion_4_known_auc() {
  // LiRA-adaptive over a matrix drawn from the generating Gaussians
  // N(2,1) vs N(0,1); the ideal detector's AUC is Phi(sqrt(2)).
  const int n_instances = 100000;
  const int n_models = 128;
  Rng rng(0xacc4);
  ScoreMatrix matrix;
  matrix.instance_ids.resize(n_instances);
  std::iota(matrix.instance_ids.begin(), matrix.instance_ids.end(), 0);
  matrix.n_models = n_models;
  matrix.n_aug = 1;
  matrix.values.resize(static_cast<std::size_t>(n_models) * n_instances);
  matrix.membership.resize(static_cast<std::size_t>(n_models) * n_instances);
  std::vector<std::uint8_t> pattern(n_models);
  for (int i = 0; i < n_instances; ++i) {
    for (int j = 0; j < n_models; ++j) pattern[j] = j < n_models / 2;
    rng.shuffle(pattern);
    for (int j = 0; j < n_models; ++j) {
      matrix.membership[static_cast<std::size_t>(j) * n_instances + i] = pattern[j];
      matrix.values[static_cast<std::size_t>(j) * n_instances + i] =
          pattern[j] ? 2.0 + rng.next_normal() : rng.next_normal();
    }
  }
  TargetObservation obs;
  obs.ids = matrix.instance_ids;
  obs.n_aug = 1;
  obs.labels.assign(n_instances, 0);
  obs.loss.assign(n_instances, 0.0);
  std::vector<std::uint8_t> truth(n_instances);
  obs.phi.resize(n_instances);
  for (int i = 0; i < n_instances; ++i) {
    truth[i] = rng.next_unit() < 0.5 ? 1 : 0;
    obs.phi[i] = truth[i] ? 2.0 + rng.next_normal() : rng.next_normal();
  }
  const AttackResult scores = lira_adaptive(obs, matrix);
  const double auc = roc(scores.scores, truth).auc();
  const double target_auc = 0.5 * std::erfc(-1.0);  // Phi(sqrt(2))
  bool pass = std::abs(auc - target_auc) < 0.01;

  // Exact agreement of tpr_at_fpr and balanced_accuracy with an O(n^2)
  // threshold scan on n <= 1000.
  Rng brute_rng(0x4b);
  int exact_checks = 0;
  bool exact_ok = true;
  for (int trial = 0; trial < 5; ++trial) {
    const int n = 200 + static_cast<int>(brute_rng.next_below(801));
    std::vector<double> s(n);
    std::vector<std::uint8_t> l(n);
    bool has0 = false, has1 = false;
    for (int i = 0; i < n; ++i) {
      s[i] = brute_rng.next_unit() < 0.3 ? std::floor(brute_rng.next_normal() * 2.0)
                                         : brute_rng.next_normal();
      l[i] = brute_rng.next_unit() < 0.5 ? 1 : 0;
      (l[i] ? has1 : has0) = true;
    }
    if (!has0 || !has1) continue;
    double pos = 0.0, neg = 0.0;
    for (std::uint8_t v : l) (v ? pos : neg) += 1.0;
    std::set<double> uniq(s.begin(), s.end());
    std::vector<double> thresholds(uniq.begin(), uniq.end());
    thresholds.push_back(std::numeric_limits<double>::infinity());
    std::vector<double> fprs, tprs;
    for (double t : thresholds) {
      std::size_t tp = 0, fp = 0;
      for (int i = 0; i < n; ++i)
        if (s[i] >= t) (l[i] ? tp : fp) += 1;
      fprs.push_back(static_cast<double>(fp) / neg);
      tprs.push_back(static_cast<double>(tp) / pos);
    }
    const RocCurve curve = roc(s, l);
    for (double target : {0.0, 1e-5, 1e-3, 0.01, 0.1, 1.0}) {
      double brute = 0.0;
      for (std::size_t k = 0; k < fprs.size(); ++k)
        if (fprs[k] <= target) brute = std::max(brute, tprs[k]);
      if (tpr_at_fpr(curve, target) != brute) exact_ok = false;
      ++exact_checks;
    }
    double brute_bacc = 0.0;
    for (std::size_t k = 0; k < fprs.size(); ++k)
      brute_bacc = std::max(brute_bacc, (tprs[k] + (1.0 - fprs[k])) / 2.0);
    if (balanced_accuracy(s, l) != brute_bacc) exact_ok = false;
  }
  pass = pass && exact_ok && exact_checks >= 30;
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "AUC %.4f vs Phi(sqrt2)=%.4f (tol 0.01); %d brute-force threshold checks %s",
                auc, target_auc, exact_checks, exact_ok ? "exact" : "MISMATCH");
  report(4, pass, "known-AUC oracle and exact metric agreement", detail);
}

void criterion_5_pmia_reduction() {
  SyntheticConfig syn;
  syn.num_classes = 20;
  syn.dim = 32;
  syn.per_class_count = 50;
  syn.class_separation = 3.0;
  syn.within_class_sigma = 1.0;
  syn.seed = 1;
  const Dataset pool = gen_synthetic(syn);

  const ShadowPlan plan = make_plan(pool.ids(), 16, 0xacc5);
  TrainConfig cfg;
  cfg.hidden_sizes = {64};
  cfg.epochs = 30;
  cfg.seed = 3;
  const ShadowEnsemble ensemble = train_shadows(pool, plan, cfg, 0);
  AugmentConfig aug;
  aug.n_queries = 3;
  aug.noise_scale = 0.05;
  const ScoreMatrix matrix = score_matrix(ensemble, pool.instances, aug, 0x5eed, 0);

  const auto halves = split_disjoint(pool, {0.5, 0.5}, 9);
  TrainConfig target_cfg = cfg;
  target_cfg.seed = 8;
  const Classifier target = train(halves[0], target_cfg);
  const TargetObservation obs = observe(target, pool.instances, aug, 0x5eed);
  const AttackResult reference = lira_adaptive(obs, matrix);

  double worst_rel = 0.0;
  for (std::size_t i = 0; i < obs.size(); ++i) {
    ProxySet self;
    self.query_id = obs.ids[i];
    self.proxy_ids = {obs.ids[i]};
    const double proxied = pmia_score(obs.phi_of(i), matrix, self);
    const double rel = std::abs(proxied - reference.scores[i]) /
                       std::max(1.0, std::abs(reference.scores[i]));
    worst_rel = std::max(worst_rel, rel);
  }
  const bool pass = worst_rel <= 1e-12;
  char detail[120];
  std::snprintf(detail, sizeof(detail), "max relative deviation %.2e <= 1e-12 over %zu queries",
                worst_rel, obs.size());
  report(5, pass, "self-proxy reduces the proxy attack to adaptive LiRA", detail);
}

struct DeskScaleData {
  Dataset pool;
  TrainConfig model;
};

DeskScaleData desk_scale_data() {
  // Heavy class confusion plus partial memorization (train accuracy ~0.93)
  // mirrors the hardest published regime and is where distribution-based
  // attacks have room over the raw-loss baseline.
  DeskScaleData d;
  SyntheticConfig syn;
  syn.num_classes = 20;
  syn.dim = 32;
  syn.per_class_count = 500;  // 10k pool
  syn.class_separation = 1.8;
  syn.within_class_sigma = 1.0;
  syn.seed = 1;
  d.pool = gen_synthetic(syn);
  d.model.hidden_sizes = {64};
  d.model.epochs = 30;
  d.model.learning_rate = 0.05;
  d.model.momentum = 0.9;
  d.model.weight_decay = 0.0;
  d.model.batch_size = 64;
  return d;
}

double tpr_1e3(const std::vector<double>& scores, const std::vector<std::uint8_t>& truth) {
  return tpr_at_fpr(roc(scores, truth), 1e-3);
}

void criterion_6_cmia_direction(int n_threads) {
  const auto start = std::chrono::steady_clock::now();
  const DeskScaleData desk = desk_scale_data();

  int wins = 0;
  bool anchors_monotone = true;
  std::vector<std::string> per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GameConfig game_cfg;
    game_cfg.setting = GameSetting::adaptive;
    game_cfg.model = desk.model;
    game_cfg.seed = hash_combine(0xacc6, seed);
    const GameTranscript game = play_game(desk.pool, game_cfg);

    CascadeConfig cc;
    cc.max_iterations = 5;
    cc.min_new_anchors = default_min_new_anchors(game.query_ids.size());
    cc.fn_tolerance = 10;
    cc.n_models_per_iter = 64;
    cc.train = desk.model;
    cc.seed = hash_combine(0xacc6, seed, 7);
    cc.n_threads = n_threads;
    const CascadeTranscript transcript =
        cascade(make_lira_adaptive(), game.target, desk.pool, desk.pool, cc);

    const double base = tpr_1e3(transcript.first_iteration_result.scores, game.ground_truth);
    const double final_tpr = tpr_1e3(transcript.final_result.scores, game.ground_truth);
    if (final_tpr >= base) ++wins;

    std::size_t prev_total = 0;
    for (std::size_t k = 0; k < transcript.iterations.size(); ++k) {
      const std::size_t total = transcript.iterations[k].anchors.total();
      if (total < prev_total) anchors_monotone = false;
      // Strict growth is guaranteed before the stopping rule fires.
      if (k + 1 < transcript.iterations.size() && total <= prev_total)
        anchors_monotone = false;
      prev_total = total;
    }
    char line[120];
    std::snprintf(line, sizeof(line), "seed %llu: base %.4f -> cmia %.4f, %zu iters, %zu anchors",
                  static_cast<unsigned long long>(seed), base, final_tpr,
                  transcript.iterations.size(), prev_total);
    per_seed.push_back(line);
  }
  const double secs = elapsed_seconds(start);
  const bool pass = wins >= 4 && anchors_monotone && secs < 1800.0;
  for (const auto& line : per_seed) std::printf("    %s\n", line.c_str());
  char detail[160];
  std::snprintf(detail, sizeof(detail),
                "TPR@0.1%%FPR improved in %d/5 seeds (need >= 4), anchors monotone: %s, %.0fs < 1800s",
                wins, anchors_monotone ? "yes" : "NO", secs);
  report(6, pass, "cascading lifts adaptive LiRA at desk scale", detail);
}

void criterion_7_pmia_direction(int n_threads) {
  const auto start = std::chrono::steady_clock::now();
  const DeskScaleData desk = desk_scale_data();

  int wins_tpr = 0;
  int wins_bacc = 0;
  std::vector<std::string> per_seed;
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    GameConfig game_cfg;
    game_cfg.setting = GameSetting::non_adaptive;
    game_cfg.model = desk.model;
    game_cfg.seed = hash_combine(0xacc7, seed);
    const GameTranscript game = play_game(desk.pool, game_cfg);

    const Dataset adversary = desk.pool.subset(game.shadow_pool_ids);
    const Dataset queries = desk.pool.subset(game.query_ids);
    const ShadowPlan plan =
        make_plan(game.shadow_pool_ids, 64, hash_combine(0xacc7, seed, 1));
    TrainConfig shadow_cfg = desk.model;
    shadow_cfg.seed = hash_combine(0xacc7, seed, 2);
    const ShadowEnsemble ensemble = train_shadows(desk.pool, plan, shadow_cfg, n_threads);

    const std::uint64_t aug_seed = hash_combine(0xacc7, seed, 3);
    const AugmentConfig aug;
    std::vector<Instance> matrix_instances = adversary.instances;
    matrix_instances.insert(matrix_instances.end(), queries.instances.begin(),
                            queries.instances.end());
    const ScoreMatrix matrix =
        score_matrix(ensemble, matrix_instances, aug, aug_seed, n_threads);
    const TargetObservation obs = observe(game.target, queries.instances, aug, aug_seed);

    const AttackResult loss_result = attack_loss(obs);
    const AttackResult lira_result = lira_nonadaptive(obs, matrix);
    ProxyStrategy strategy;
    strategy.kind = ProxyKind::class_level;
    const AttackResult pmia_result = pmia_attack(game.target, ensemble, adversary,
                                                 queries.instances, strategy, aug, aug_seed,
                                                 n_threads);

    const double pmia_tpr = tpr_1e3(pmia_result.scores, game.ground_truth);
    const double lira_tpr = tpr_1e3(lira_result.scores, game.ground_truth);
    const double pmia_bacc = balanced_accuracy(pmia_result.scores, game.ground_truth);
    const double loss_bacc = balanced_accuracy(loss_result.scores, game.ground_truth);
    if (pmia_tpr >= lira_tpr) ++wins_tpr;
    if (pmia_bacc >= loss_bacc) ++wins_bacc;
    char line[160];
    std::snprintf(line, sizeof(line),
                  "seed %llu: TPR@0.1%% pmia %.4f vs lira %.4f; bacc pmia %.4f vs loss %.4f",
                  static_cast<unsigned long long>(seed), pmia_tpr, lira_tpr, pmia_bacc,
                  loss_bacc);
    per_seed.push_back(line);
  }
  const double secs = elapsed_seconds(start);
  const bool pass = wins_tpr >= 4 && wins_bacc >= 4;
  for (const auto& line : per_seed) std::printf("    %s\n", line.c_str());
  char detail[200];
  std::snprintf(detail, sizeof(detail),
                "PMIA >= one-sided LiRA on TPR@0.1%%FPR in %d/5, >= LOSS on balanced accuracy in %d/5 (need >= 4), %.0fs",
                wins_tpr, wins_bacc, secs);
  report(7, pass, "proxy attack beats non-adaptive baselines at desk scale", detail);
}

void criterion_8_determinism(int n_threads) {
  const std::string out_a = "/tmp/mia_acceptance_det_a";
  const std::string out_b = "/tmp/mia_acceptance_det_b";
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  nlohmann::json doc = {
      {"data",
       {{"synthetic",
         {{"num_classes", 5},
          {"dim", 8},
          {"per_class_count", 60},
          {"class_separation", 3.0},
          {"within_class_sigma", 1.0},
          {"seed", 11}}}}},
      {"game", {{"setting", "adaptive"}}},
      {"model",
       {{"hidden_sizes", {16}}, {"epochs", 10}, {"learning_rate", 0.05}, {"batch_size", 32}}},
      {"shadow", {{"n_models", 8}}},
      {"attacks", nlohmann::json::array({{{"name", "lira_adaptive"}}})},
      {"seeds", {1, 2}},
      {"output_dir", out_a},
      {"threads", n_threads},
  };
  const ExperimentConfig cfg_a = parse_experiment_config(doc);
  doc["output_dir"] = out_b;
  const ExperimentConfig cfg_b = parse_experiment_config(doc);

  const std::string report_a = run_experiment(cfg_a);
  const std::string report_b = run_experiment(cfg_b);

  auto read_bytes = [](const fs::path& p) {
    std::ifstream in(p, std::ios::binary);
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  bool pass = true;
  int files = 0;
  for (const char* seed : {"1", "2"}) {
    const fs::path rel = fs::path(seed) / "matrices" / "shadow_base.mia1";
    const std::string a = read_bytes(fs::path(report_a) / rel);
    const std::string b = read_bytes(fs::path(report_b) / rel);
    if (a.empty() || a != b) pass = false;
    ++files;
  }
  fs::remove_all(out_a);
  fs::remove_all(out_b);
  char detail[120];
  std::snprintf(detail, sizeof(detail), "%d score-matrix files byte-identical across reruns",
                files);
  report(8, pass, "experiment reruns reproduce score matrices byte-for-byte", detail);
}

void criterion_9_gradient_check() {
  Rng rng(0xacc9);
  double worst = 0.0;
  for (int problem = 0; problem < 20; ++problem) {
    const int dim = 2 + static_cast<int>(rng.next_below(5));
    const int classes = 2 + static_cast<int>(rng.next_below(4));
    Dataset batch;
    batch.num_classes = classes;
    const int n = 4 + static_cast<int>(rng.next_below(10));
    for (int i = 0; i < n; ++i) {
      Instance inst;
      inst.id = i;
      inst.label = static_cast<int>(rng.next_below(classes));
      for (int k = 0; k < dim; ++k) inst.features.push_back(rng.next_normal());
      batch.instances.push_back(inst);
    }
    batch.canonicalize();
    TrainConfig cfg;
    cfg.hidden_sizes = {};
    cfg.epochs = 1;
    cfg.seed = rng.next_u64();
    Classifier clf = train(batch, cfg);

    const std::vector<double> analytic = batch_gradient(clf, batch);
    std::vector<double> params = flatten_parameters(clf);
    const double h = 1e-6;
    for (std::size_t k = 0; k < params.size(); ++k) {
      std::vector<double> perturbed = params;
      perturbed[k] = params[k] + h;
      set_parameters(clf, perturbed);
      const double up = batch_loss(clf, batch);
      perturbed[k] = params[k] - h;
      set_parameters(clf, perturbed);
      const double down = batch_loss(clf, batch);
      const double numeric = (up - down) / (2.0 * h);
      const double scale = std::max({std::abs(analytic[k]), std::abs(numeric), 1e-4});
      worst = std::max(worst, std::abs(analytic[k] - numeric) / scale);
    }
    set_parameters(clf, params);
  }
  const bool pass = worst < 1e-5;
  char detail[120];
  std::snprintf(detail, sizeof(detail),
                "max relative gradient error %.2e < 1e-5 over 20 problems", worst);
  report(9, pass, "trainer gradients match central finite differences", detail);
}

}  // namespace

int main(int argc, char** argv) {
  std::set<int> only;
  int n_threads = 0;
  for (int i = 1; i < argc; ++i) {
    if (std::strcmp(argv[i], "--only") == 0 && i + 1 < argc) {
      std::string arg = argv[++i];
      std::size_t pos = 0;
      while (pos < arg.size()) {
        only.insert(std::atoi(arg.c_str() + pos));
        pos = arg.find(',', pos);
        if (pos == std::string::npos) break;
        ++pos;
      }
    } else if (std::strcmp(argv[i], "--threads") == 0 && i + 1 < argc) {
      n_threads = std::atoi(argv[++i]);
    }
  }
  auto want = [&](int c) { return only.empty() || only.count(c) > 0; };

  const auto start = std::chrono::steady_clock::now();
  if (want(1)) criterion_1_gibbs_oracle();
  if (want(2)) criterion_2_odds_oracle();
  if (want(3)) criterion_3_shadow_plans();
  if (want(4)) criterion_4_known_auc();
  if (want(5)) criterion_5_pmia_reduction();
  if (want(6)) criterion_6_cmia_direction(n_threads);
  if (want(7)) criterion_7_pmia_direction(n_threads);
  if (want(8)) criterion_8_determinism(n_threads);
  if (want(9)) criterion_9_gradient_check();

  std::printf("acceptance finished in %.0fs with %d failure(s)\n", elapsed_seconds(start),
              g_failures);
  return g_failures > 0 ? 1 : 0;
}
