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
// Baseline membership-score functions. Every attack maps a target-model
// observation (and usually a shadow ScoreMatrix) to one real score per query
// instance, larger meaning "more likely member".

#ifndef MIA_ATTACKS_HPP_
#define MIA_ATTACKS_HPP_

#include <cstdint>
#include <functional>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "model.hpp"
#include "shadow.hpp"

namespace mia {

// What the adversary sees from the target model for a set of query instances:
// the softmax vector on the unaugmented input, the scaled confidence for each
// augmented view, and the cross-entropy loss.
struct TargetObservation {
  std::vector<std::int64_t> ids;  // ascending
  std::vector<int> labels;
  int n_aug = 1;
  std::uint64_t aug_seed = 0;
  std::vector<std::vector<double>> softmax;  // may be empty for pseudo-observations
  std::vector<double> phi;                   // [instance][aug]
  std::vector<double> loss;

  std::size_t size() const { return ids.size(); }
  std::optional<std::size_t> index_of(std::int64_t id) const;
  std::span<const double> phi_of(std::size_t index) const {
    return {phi.data() + index * n_aug, static_cast<std::size_t>(n_aug)};
  }
};

TargetObservation observe(const Classifier& target, const std::vector<Instance>& queries,
                          const AugmentConfig& aug, std::uint64_t aug_seed);

struct AttackResult {
  std::string attack_name;
  std::string config_hash;
  std::vector<std::int64_t> instance_ids;
  std::vector<double> scores;
  std::vector<std::int8_t> ground_truth;  // -1 unknown, else 0/1

  std::optional<std::size_t> index_of(std::int64_t id) const;
};

// CSV persistence: header instance_id,score,ground_truth,attack_name with
// ground_truth left blank when unknown.
void save_attack_csv(const AttackResult& result, const std::string& path);
AttackResult load_attack_csv(const std::string& path);

// Spherical Gaussian fits of the scaled confidences for one instance, split
// by shadow membership. Means are per augmented view; the variance is pooled
// across views (population convention, matching the reference estimators) and
// floored at kVarFloor.
struct GaussFit {
  std::vector<double> mean_in;
  std::vector<double> mean_out;
  double var_in = 0.0;
  double var_out = 0.0;
  int rows_in = 0;
  int rows_out = 0;
};

inline constexpr double kVarFloor = 1e-6;

GaussFit fit_gauss(const ScoreMatrix& matrix, std::int64_t instance_id);

// Shared by LiRA and the proxy attack: fit a spherical Gaussian over a pooled
// sample of n_aug-dimensional vectors (count = samples.size() / n_aug).
void fit_spherical(std::span<const double> samples, int n_aug, std::vector<double>& mean,
                   double& variance);

// Log density of an n_aug-dimensional spherical Gaussian at obs.
double log_normal_spherical(std::span<const double> obs, std::span<const double> mean,
                            double variance);

// score = -loss.
AttackResult attack_loss(const TargetObservation& obs);

// score = -Mentr where Mentr = -(1-p_y) log p_y - sum_{i != y} p_i log(1-p_i).
AttackResult attack_entropy(const TargetObservation& obs);

// score = mean shadow OUT loss - target loss. Shadow losses are recovered from
// the stored scaled confidences of view 0.
AttackResult attack_calibration(const TargetObservation& obs, const ScoreMatrix& matrix);

// Attack-R: fraction of OUT rows where the target loss is smaller.
AttackResult attack_ratio(const TargetObservation& obs, const ScoreMatrix& matrix);

// Two-sided likelihood-ratio test using per-instance IN/OUT Gaussians.
// Requires >= 2 IN and >= 2 OUT rows per query; a missing IN side is an error
// directing the caller to lira_nonadaptive.
AttackResult lira_adaptive(const TargetObservation& obs, const ScoreMatrix& matrix);

// One-sided test: mean over views of Phi((obs - mu_out) / sigma_out).
AttackResult lira_nonadaptive(const TargetObservation& obs, const ScoreMatrix& matrix);

// Pairwise likelihood-ratio attack. ratio(x) = p_target(x) / mean OUT shadow
// confidence; the score is the fraction of population instances z (self
// excluded) with ratio(x) / ratio(z) > gamma. population_obs must cover the
// population instances on the same target model.
AttackResult rmia(const TargetObservation& query_obs, const TargetObservation& population_obs,
                  const ScoreMatrix& matrix, std::span<const std::int64_t> population_ids,
                  double gamma = 1.0);

// Uniform interface used by the cascade and the experiment driver.
struct ShadowAttack {
  std::string name;
  std::function<AttackResult(const TargetObservation&, const ScoreMatrix&)> run;
};

ShadowAttack make_attack_loss();
ShadowAttack make_attack_calibration();
ShadowAttack make_attack_ratio();
ShadowAttack make_lira_adaptive();
ShadowAttack make_lira_nonadaptive();
// The observation doubles as the population (self-pairs excluded).
ShadowAttack make_rmia(double gamma);

}  // namespace mia

#endif  // MIA_ATTACKS_HPP_
