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
// Cascading membership inference: iteratively identify anchor instances with
// a base shadow attack, retrain shadow ensembles conditioned on the anchors,
// and run the final attack over the union of all shadow ensembles.

#ifndef MIA_CMIA_HPP_
#define MIA_CMIA_HPP_

#include <cstdint>
#include <string>
#include <vector>

#include "attacks.hpp"
#include "data.hpp"
#include "shadow.hpp"

namespace mia {

enum class AnchorAttackKind { base, loss };
enum class SamplingMode { conditional, gibbs_weighted };

struct CascadeConfig {
  int max_iterations = 10;        // K
  int min_new_anchors = 30;       // delta: stop when both sets grow by less
  int fn_tolerance = 10;          // r: tolerated false negatives per iteration
  int n_models_per_iter = 64;
  int n_models_anchor_iter = 2;   // loss-anchor variant; 0 = final ensemble only
  AnchorAttackKind anchor_attack = AnchorAttackKind::base;
  SamplingMode sampling_mode = SamplingMode::conditional;
  TrainConfig train;
  AugmentConfig augment;
  std::uint64_t seed = 0;
  int n_threads = 0;
};

// delta calibrated to the query-set size; the reference value of 30 assumes
// 50k queries.
int default_min_new_anchors(std::size_t query_size);

// Anchor admission thresholds. Scores above member_threshold become member
// anchors; scores below non_member_threshold become non-member anchors. The
// ordering guard clamps non_member_threshold to member_threshold so no score
// can qualify for both sets; raw_non_member_threshold keeps the unguarded
// order statistic for the transcript.
struct Thresholds {
  double member_threshold = 0.0;
  double non_member_threshold = 0.0;
  double raw_non_member_threshold = 0.0;
  bool guard_fired = false;
};

// Treats the lowest-index model of the ensemble as a ground-truthed target,
// runs the attack against it with the remaining rows as shadows, and sets
// member_threshold to the highest score among that model's non-members and
// (raw) non_member_threshold to the r-th lowest score among its members.
Thresholds select_thresholds(const ShadowAttack& attack, const ScoreMatrix& iteration_matrix,
                             int fn_tolerance);

// Grows the anchor sets. Instances already anchored are never reassigned.
AnchorSets identify_anchors(const AttackResult& scores, const Thresholds& thresholds,
                            const AnchorSets& previous);

struct IterationRecord {
  int iteration = 0;
  Thresholds thresholds;
  AnchorSets anchors;  // state after this iteration
  std::vector<double> query_scores;
  int new_members = 0;
  int new_non_members = 0;
  int n_models = 0;
};

struct CascadeTranscript {
  std::vector<IterationRecord> iterations;
  std::vector<ScoreMatrix> matrices;  // one per iteration (+ final ensemble in loss mode)
  AttackResult first_iteration_result;  // the plain base attack
  AttackResult final_result;
  bool stopped_early = false;
};

// Full cascade (Algorithm: conditional shadow training per iteration). The
// query set must be contained in the adversary pool (adaptive setting).
CascadeTranscript cascade(const ShadowAttack& base_attack, const Classifier& target,
                          const Dataset& pool, const Dataset& query, const CascadeConfig& config);

// Budget variant: anchors come from target LOSS scores, so iterations only
// train the (small) threshold-calibration ensembles; one full ensemble
// conditioned on the final anchors is trained for the base attack. With
// n_models_anchor_iter == 0 no intermediate ensembles are trained at all and
// the result degenerates to the plain base attack.
CascadeTranscript cascade_loss_anchors(const ShadowAttack& base_attack, const Classifier& target,
                                       const Dataset& pool, const Dataset& query,
                                       const CascadeConfig& config);

// Persists per-iteration matrices, thresholds/anchor sets as JSON, and the
// final attack CSV into a directory.
void save_transcript(const CascadeTranscript& transcript, const std::string& directory,
                     const std::string& config_hash);

}  // namespace mia

#endif  // MIA_CMIA_HPP_
