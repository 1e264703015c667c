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

#include "cmia.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <limits>

#include <json.hpp>

#include "rng.hpp"
#include "util.hpp"

namespace mia {

namespace {

// Observation of a shadow model built from its own matrix row: scaled
// confidences come straight from the row, losses from view 0. No softmax
// vectors, so only shadow-based attacks and LOSS can consume it.
TargetObservation pseudo_observation(const ScoreMatrix& matrix, int row,
                                     const std::vector<std::size_t>& columns) {
  TargetObservation obs;
  obs.n_aug = matrix.n_aug;
  obs.aug_seed = matrix.aug_seed;
  obs.ids.reserve(columns.size());
  obs.phi.reserve(columns.size() * matrix.n_aug);
  obs.loss.reserve(columns.size());
  for (std::size_t i : columns) {
    obs.ids.push_back(matrix.instance_ids[i]);
    for (int a = 0; a < matrix.n_aug; ++a) obs.phi.push_back(matrix.value(row, i, a));
    obs.loss.push_back(loss_from_logit(matrix.value(row, i, 0)));
  }
  return obs;
}

std::vector<double> min_max_probs(const std::vector<std::int64_t>& pool_ids,
                                  const AttackResult& scores) {
  // Scores stretch to [0.05, 0.95]; pool instances without a score sit at 0.5.
  double lo = std::numeric_limits<double>::infinity();
  double hi = -std::numeric_limits<double>::infinity();
  for (double s : scores.scores) {
    lo = std::min(lo, s);
    hi = std::max(hi, s);
  }
  std::vector<double> probs(pool_ids.size(), 0.5);
  if (!(hi > lo)) return probs;
  for (std::size_t i = 0; i < pool_ids.size(); ++i) {
    auto idx = scores.index_of(pool_ids[i]);
    if (idx) probs[i] = 0.05 + 0.9 * (scores.scores[*idx] - lo) / (hi - lo);
  }
  return probs;
}

AttackResult restrict_to(const AttackResult& result, const std::vector<std::int64_t>& ids) {
  AttackResult out;
  out.attack_name = result.attack_name;
  out.config_hash = result.config_hash;
  out.instance_ids = ids;
  out.scores.reserve(ids.size());
  for (std::int64_t id : ids) {
    auto idx = result.index_of(id);
    if (!idx) throw std::runtime_error("cascade: score missing for id " + std::to_string(id));
    out.scores.push_back(result.scores[*idx]);
  }
  return out;
}

}  // namespace

int default_min_new_anchors(std::size_t query_size) {
  const double scaled = 30.0 * static_cast<double>(query_size) / 50000.0;
  return std::max(5, static_cast<int>(std::llround(scaled)));
}

Thresholds select_thresholds(const ShadowAttack& attack, const ScoreMatrix& iteration_matrix,
                             int fn_tolerance) {
  if (iteration_matrix.n_models < 2)
    throw std::invalid_argument("select_thresholds: need at least 2 models");
  if (fn_tolerance < 1) throw std::invalid_argument("select_thresholds: r must be >= 1");

  // Lowest-index model is the ground-truthed target; the rest are shadows.
  const int target_row = 0;
  const ScoreMatrix shadows = iteration_matrix.without_row(target_row);

  // Columns forced by anchors (all-in or all-out) carry no information about
  // the ground-truthed model and are skipped.
  std::vector<std::size_t> usable;
  for (std::size_t i = 0; i < iteration_matrix.n_instances(); ++i) {
    int sum = 0;
    for (int j = 0; j < iteration_matrix.n_models; ++j)
      sum += iteration_matrix.member(j, i) ? 1 : 0;
    if (sum > 0 && sum < iteration_matrix.n_models) usable.push_back(i);
  }
  if (usable.empty())
    throw std::runtime_error("select_thresholds: every column is anchor-forced");

  AttackResult scores;
  try {
    scores = attack.run(pseudo_observation(iteration_matrix, target_row, usable), shadows);
  } catch (const std::exception&) {
    // Two-sided attacks need both IN and OUT shadow rows per column, which
    // weighted or conditional plans cannot guarantee; calibrate thresholds on
    // the columns that have them.
    std::vector<std::size_t> strict;
    for (std::size_t i : usable) {
      int rows_in = 0;
      for (int j = 0; j < shadows.n_models; ++j) rows_in += shadows.member(j, i) ? 1 : 0;
      if (rows_in >= 2 && shadows.n_models - rows_in >= 2) strict.push_back(i);
    }
    if (strict.empty())
      throw std::runtime_error(
          "select_thresholds: no column has both IN and OUT shadow rows");
    usable = strict;
    scores = attack.run(pseudo_observation(iteration_matrix, target_row, usable), shadows);
  }

  std::vector<double> member_scores;
  double max_non_member = -std::numeric_limits<double>::infinity();
  bool any_non_member = false;
  for (std::size_t i = 0; i < scores.instance_ids.size(); ++i) {
    auto col = iteration_matrix.column_of(scores.instance_ids[i]);
    if (iteration_matrix.member(target_row, *col)) {
      member_scores.push_back(scores.scores[i]);
    } else {
      max_non_member = std::max(max_non_member, scores.scores[i]);
      any_non_member = true;
    }
  }

  Thresholds th;
  th.member_threshold =
      any_non_member ? max_non_member : std::numeric_limits<double>::infinity();
  if (member_scores.empty()) {
    th.raw_non_member_threshold = -std::numeric_limits<double>::infinity();
  } else {
    std::sort(member_scores.begin(), member_scores.end());
    const std::size_t r = static_cast<std::size_t>(fn_tolerance);
    th.raw_non_member_threshold =
        r <= member_scores.size() ? member_scores[r - 1] : member_scores.front();
  }
  th.guard_fired = th.raw_non_member_threshold > th.member_threshold;
  th.non_member_threshold = std::min(th.raw_non_member_threshold, th.member_threshold);
  return th;
}

AnchorSets identify_anchors(const AttackResult& scores, const Thresholds& thresholds,
                            const AnchorSets& previous) {
  AnchorSets next = previous;
  for (std::size_t i = 0; i < scores.instance_ids.size(); ++i) {
    const std::int64_t id = scores.instance_ids[i];
    if (next.contains(id)) continue;  // previous assignment wins
    const double s = scores.scores[i];
    if (s > thresholds.member_threshold)
      next.members.insert(id);
    else if (s < thresholds.non_member_threshold)
      next.non_members.insert(id);
  }
  return next;
}

namespace {

struct CascadeContext {
  const Dataset* pool = nullptr;
  std::vector<std::int64_t> pool_ids;
  std::vector<Instance> pool_instances;
  std::vector<std::int64_t> query_ids;
  TargetObservation target_obs;
  std::uint64_t aug_seed = 0;
};

CascadeContext make_context(const Classifier& target, const Dataset& pool, const Dataset& query,
                            const CascadeConfig& config) {
  CascadeContext ctx;
  ctx.pool = &pool;
  ctx.pool_ids = pool.ids();
  ctx.pool_instances = pool.instances;
  ctx.query_ids = query.ids();
  for (std::int64_t id : ctx.query_ids)
    if (!pool.find(id))
      throw std::invalid_argument("cascade: query id " + std::to_string(id) +
                                  " not in adversary pool (adaptive setting required)");
  ctx.aug_seed = hash_combine(config.seed, 0x617567ULL);  // "aug"
  // Scoring the target over the whole pool lets the base attack double as the
  // population for pairwise attacks.
  ctx.target_obs = observe(target, ctx.pool_instances, config.augment, ctx.aug_seed);
  return ctx;
}

ScoreMatrix build_iteration_matrix(const CascadeContext& ctx, const CascadeConfig& config,
                                   const ShadowPlan& plan, int iteration) {
  TrainConfig train_config = config.train;
  train_config.seed = hash_combine(config.seed, 0x747261696eULL, iteration);  // "train"
  const ShadowEnsemble ensemble = train_shadows(*ctx.pool, plan, train_config, config.n_threads);
  ScoreMatrix matrix =
      score_matrix(ensemble, ctx.pool_instances, config.augment, ctx.aug_seed, config.n_threads);
  for (auto& p : matrix.provenance) p.iteration = static_cast<std::uint32_t>(iteration);
  return matrix;
}

}  // namespace

CascadeTranscript cascade(const ShadowAttack& base_attack, const Classifier& target,
                          const Dataset& pool, const Dataset& query,
                          const CascadeConfig& config) {
  if (config.anchor_attack == AnchorAttackKind::loss)
    return cascade_loss_anchors(base_attack, target, pool, query, config);
  if (config.max_iterations < 1) throw std::invalid_argument("cascade: K must be >= 1");

  const CascadeContext ctx = make_context(target, pool, query, config);
  CascadeTranscript transcript;
  AnchorSets anchors;
  AttackResult query_scores;

  for (int k = 1; k <= config.max_iterations; ++k) {
    ShadowPlan plan;
    const std::uint64_t plan_seed = hash_combine(config.seed, 0x706c616eULL, k);  // "plan"
    if (config.sampling_mode == SamplingMode::gibbs_weighted && k > 1) {
      plan = make_weighted_plan(ctx.pool_ids, config.n_models_per_iter,
                                min_max_probs(ctx.pool_ids, query_scores), plan_seed);
    } else {
      plan = make_conditional_plan(ctx.pool_ids, config.n_models_per_iter, anchors, plan_seed);
    }

    const ScoreMatrix matrix = build_iteration_matrix(ctx, config, plan, k);
    transcript.matrices.push_back(matrix);

    // Anchored columns lack one side of the IN/OUT split in later ensembles,
    // so attacks always run over the union of all iterations so far.
    const ScoreMatrix pooled = concat_matrices(transcript.matrices);
    query_scores = restrict_to(base_attack.run(ctx.target_obs, pooled), ctx.query_ids);
    if (k == 1) {
      transcript.first_iteration_result = query_scores;
      transcript.first_iteration_result.attack_name = base_attack.name;
    }

    const Thresholds thresholds = select_thresholds(base_attack, matrix, config.fn_tolerance);
    const AnchorSets next = identify_anchors(query_scores, thresholds, anchors);

    IterationRecord record;
    record.iteration = k;
    record.thresholds = thresholds;
    record.anchors = next;
    record.query_scores = query_scores.scores;
    record.new_members = static_cast<int>(next.members.size() - anchors.members.size());
    record.new_non_members =
        static_cast<int>(next.non_members.size() - anchors.non_members.size());
    record.n_models = config.n_models_per_iter;
    transcript.iterations.push_back(record);
    anchors = next;

    if (record.new_members < config.min_new_anchors &&
        record.new_non_members < config.min_new_anchors) {
      transcript.stopped_early = k < config.max_iterations;
      break;
    }
  }

  const ScoreMatrix pooled = concat_matrices(transcript.matrices);
  transcript.final_result =
      restrict_to(base_attack.run(ctx.target_obs, pooled), ctx.query_ids);
  transcript.final_result.attack_name = "cmia(" + base_attack.name + ")";
  return transcript;
}

CascadeTranscript cascade_loss_anchors(const ShadowAttack& base_attack, const Classifier& target,
                                       const Dataset& pool, const Dataset& query,
                                       const CascadeConfig& config) {
  if (config.max_iterations < 1) throw std::invalid_argument("cascade: K must be >= 1");
  if (config.n_models_anchor_iter != 0 &&
      (config.n_models_anchor_iter < 2 || config.n_models_anchor_iter % 2 != 0))
    throw std::invalid_argument("cascade: anchor ensemble size must be 0 or even >= 2");

  const CascadeContext ctx = make_context(target, pool, query, config);
  CascadeTranscript transcript;
  AnchorSets anchors;

  // Target losses never change, so the anchor scores are fixed; thresholds
  // evolve with each (conditional) calibration ensemble.
  const ShadowAttack loss_attack = make_attack_loss();
  const AttackResult loss_scores = restrict_to(attack_loss(ctx.target_obs), ctx.query_ids);

  if (config.n_models_anchor_iter >= 2) {
    for (int k = 1; k <= config.max_iterations; ++k) {
      const std::uint64_t plan_seed = hash_combine(config.seed, 0x706c616eULL, k);
      ShadowPlan plan =
          make_conditional_plan(ctx.pool_ids, config.n_models_anchor_iter, anchors, plan_seed);
      const ScoreMatrix matrix = build_iteration_matrix(ctx, config, plan, k);
      const Thresholds thresholds = select_thresholds(loss_attack, matrix, config.fn_tolerance);
      const AnchorSets next = identify_anchors(loss_scores, thresholds, anchors);

      IterationRecord record;
      record.iteration = k;
      record.thresholds = thresholds;
      record.anchors = next;
      record.query_scores = loss_scores.scores;
      record.new_members = static_cast<int>(next.members.size() - anchors.members.size());
      record.new_non_members =
          static_cast<int>(next.non_members.size() - anchors.non_members.size());
      record.n_models = config.n_models_anchor_iter;
      transcript.iterations.push_back(record);
      transcript.matrices.push_back(matrix);
      anchors = next;

      if (record.new_members < config.min_new_anchors &&
          record.new_non_members < config.min_new_anchors) {
        transcript.stopped_early = k < config.max_iterations;
        break;
      }
    }
  }

  // Final ensemble conditioned on everything the loss anchoring found.
  const int final_iteration = static_cast<int>(transcript.iterations.size()) + 1;
  ShadowPlan final_plan =
      make_conditional_plan(ctx.pool_ids, config.n_models_per_iter, anchors,
                            hash_combine(config.seed, 0x66696e616cULL));  // "final"
  const ScoreMatrix final_matrix = build_iteration_matrix(ctx, config, final_plan, final_iteration);
  transcript.matrices.push_back(final_matrix);

  const ScoreMatrix pooled = concat_matrices(transcript.matrices);
  transcript.final_result =
      restrict_to(base_attack.run(ctx.target_obs, pooled), ctx.query_ids);
  transcript.final_result.attack_name = "cmia_loss(" + base_attack.name + ")";
  // Single-ensemble reference: with no anchors the final plan is
  // unconditioned and this is exactly the plain base attack. Once anchors are
  // forced, anchored columns lose one membership side in the final ensemble,
  // so no standalone reference exists and the pooled result stands in.
  if (anchors.total() == 0) {
    transcript.first_iteration_result =
        restrict_to(base_attack.run(ctx.target_obs, final_matrix), ctx.query_ids);
  } else {
    transcript.first_iteration_result = transcript.final_result;
  }
  transcript.first_iteration_result.attack_name = base_attack.name;
  return transcript;
}

void save_transcript(const CascadeTranscript& transcript, const std::string& directory,
                     const std::string& config_hash) {
  std::filesystem::create_directories(directory);
  nlohmann::json iterations = nlohmann::json::array();
  for (std::size_t k = 0; k < transcript.matrices.size(); ++k)
    save_matrix(transcript.matrices[k], directory + "/iteration_" + std::to_string(k + 1) + ".mia1",
                config_hash, static_cast<int>(k + 1));
  for (const auto& rec : transcript.iterations) {
    nlohmann::json it;
    it["iteration"] = rec.iteration;
    it["member_threshold"] = rec.thresholds.member_threshold;
    it["non_member_threshold"] = rec.thresholds.non_member_threshold;
    it["raw_non_member_threshold"] = rec.thresholds.raw_non_member_threshold;
    it["guard_fired"] = rec.thresholds.guard_fired;
    it["new_members"] = rec.new_members;
    it["new_non_members"] = rec.new_non_members;
    it["n_models"] = rec.n_models;
    it["member_anchors"] = std::vector<std::int64_t>(rec.anchors.members.begin(),
                                                     rec.anchors.members.end());
    it["non_member_anchors"] = std::vector<std::int64_t>(rec.anchors.non_members.begin(),
                                                         rec.anchors.non_members.end());
    iterations.push_back(it);
  }
  nlohmann::json doc;
  doc["config_hash"] = config_hash;
  doc["iterations"] = iterations;
  doc["stopped_early"] = transcript.stopped_early;
  std::ofstream out(directory + "/transcript.json");
  if (!out) throw IoError("save_transcript: cannot open " + directory + "/transcript.json");
  out << doc.dump(2) << '\n';
  save_attack_csv(transcript.final_result, directory + "/final.csv");
}

}  // namespace mia
