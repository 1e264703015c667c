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

#include "attacks.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>
#include <unordered_map>

#include "util.hpp"

namespace mia {

namespace {

constexpr double kHalfLog2Pi = 0.91893853320467274178;  // log(2*pi)/2

std::optional<std::size_t> find_sorted(const std::vector<std::int64_t>& ids, std::int64_t id) {
  auto it = std::lower_bound(ids.begin(), ids.end(), id);
  if (it == ids.end() || *it != id) return std::nullopt;
  return static_cast<std::size_t>(it - ids.begin());
}

// Standard normal CDF.
double normal_cdf(double z) { return 0.5 * std::erfc(-z / 1.4142135623730950488); }

std::size_t require_column(const ScoreMatrix& matrix, std::int64_t id) {
  auto col = matrix.column_of(id);
  if (!col)
    throw std::invalid_argument("attack: query instance " + std::to_string(id) +
                                " missing from score matrix");
  return *col;
}

}  // namespace

std::optional<std::size_t> TargetObservation::index_of(std::int64_t id) const {
  return find_sorted(ids, id);
}

std::optional<std::size_t> AttackResult::index_of(std::int64_t id) const {
  return find_sorted(instance_ids, id);
}

TargetObservation observe(const Classifier& target, const std::vector<Instance>& queries,
                          const AugmentConfig& aug, std::uint64_t aug_seed) {
  std::vector<Instance> sorted = queries;
  std::sort(sorted.begin(), sorted.end(),
            [](const Instance& a, const Instance& b) { return a.id < b.id; });

  TargetObservation obs;
  obs.n_aug = aug.n_queries;
  obs.aug_seed = aug_seed;
  obs.ids.reserve(sorted.size());
  obs.labels.reserve(sorted.size());
  obs.softmax.reserve(sorted.size());
  obs.phi.reserve(sorted.size() * aug.n_queries);
  obs.loss.reserve(sorted.size());
  for (const auto& inst : sorted) {
    obs.ids.push_back(inst.id);
    obs.labels.push_back(inst.label);
    std::vector<double> p = target.predict_proba(inst.features);
    obs.loss.push_back(-std::log(clamp_prob(p[inst.label])));
    const auto views = augment(inst, aug, aug_seed);
    for (const auto& view : views) {
      const std::vector<double> pv = target.predict_proba(view);
      obs.phi.push_back(logit_scale(pv[inst.label]));
    }
    obs.softmax.push_back(std::move(p));
  }
  return obs;
}

void save_attack_csv(const AttackResult& result, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw IoError("save_attack_csv: cannot open " + path);
  out << "instance_id,score,ground_truth,attack_name\n";
  out.precision(17);
  for (std::size_t i = 0; i < result.instance_ids.size(); ++i) {
    out << result.instance_ids[i] << ',' << result.scores[i] << ',';
    if (i < result.ground_truth.size() && result.ground_truth[i] >= 0)
      out << static_cast<int>(result.ground_truth[i]);
    out << ',' << result.attack_name << '\n';
  }
  if (!out) throw IoError("save_attack_csv: write failed for " + path);
}

AttackResult load_attack_csv(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IoError("load_attack_csv: cannot open " + path);
  std::string line;
  if (!std::getline(in, line)) throw FormatError("load_attack_csv: empty file " + path);

  AttackResult result;
  std::size_t row = 0;
  while (std::getline(in, line)) {
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string id_s, score_s, truth_s, name;
    std::getline(ss, id_s, ',');
    std::getline(ss, score_s, ',');
    std::getline(ss, truth_s, ',');
    std::getline(ss, name);
    std::int64_t id;
    double score;
    auto id_res = std::from_chars(id_s.data(), id_s.data() + id_s.size(), id);
    auto sc_res = std::from_chars(score_s.data(), score_s.data() + score_s.size(), score);
    if (id_res.ec != std::errc() || sc_res.ec != std::errc())
      throw FormatError("load_attack_csv: bad row " + std::to_string(row) + " in " + path);
    result.instance_ids.push_back(id);
    result.scores.push_back(score);
    result.ground_truth.push_back(truth_s.empty() ? -1 : (truth_s == "1" ? 1 : 0));
    if (result.attack_name.empty()) result.attack_name = name;
    ++row;
  }
  return result;
}

void fit_spherical(std::span<const double> samples, int n_aug, std::vector<double>& mean,
                   double& variance) {
  const std::size_t rows = samples.size() / static_cast<std::size_t>(n_aug);
  mean.assign(n_aug, 0.0);
  variance = kVarFloor;
  if (rows == 0) return;
  for (std::size_t r = 0; r < rows; ++r)
    for (int a = 0; a < n_aug; ++a) mean[a] += samples[r * n_aug + a];
  for (int a = 0; a < n_aug; ++a) mean[a] /= static_cast<double>(rows);
  double ss = 0.0;
  for (std::size_t r = 0; r < rows; ++r)
    for (int a = 0; a < n_aug; ++a) {
      const double d = samples[r * n_aug + a] - mean[a];
      ss += d * d;
    }
  variance = std::max(kVarFloor, ss / static_cast<double>(rows * n_aug));
}

GaussFit fit_gauss(const ScoreMatrix& matrix, std::int64_t instance_id) {
  const std::size_t col = require_column(matrix, instance_id);
  std::vector<double> in_samples, out_samples;
  for (int j = 0; j < matrix.n_models; ++j) {
    auto& dst = matrix.member(j, col) ? in_samples : out_samples;
    for (int a = 0; a < matrix.n_aug; ++a) dst.push_back(matrix.value(j, col, a));
  }
  GaussFit fit;
  fit.rows_in = static_cast<int>(in_samples.size()) / matrix.n_aug;
  fit.rows_out = static_cast<int>(out_samples.size()) / matrix.n_aug;
  fit_spherical(in_samples, matrix.n_aug, fit.mean_in, fit.var_in);
  fit_spherical(out_samples, matrix.n_aug, fit.mean_out, fit.var_out);
  return fit;
}

double log_normal_spherical(std::span<const double> obs, std::span<const double> mean,
                            double variance) {
  double ss = 0.0;
  for (std::size_t a = 0; a < obs.size(); ++a) {
    const double d = obs[a] - mean[a];
    ss += d * d;
  }
  const double n = static_cast<double>(obs.size());
  return -n * kHalfLog2Pi - 0.5 * n * std::log(variance) - ss / (2.0 * variance);
}

AttackResult attack_loss(const TargetObservation& obs) {
  AttackResult result;
  result.attack_name = "loss";
  result.instance_ids = obs.ids;
  result.scores.reserve(obs.size());
  for (double l : obs.loss) result.scores.push_back(-l);
  return result;
}

AttackResult attack_entropy(const TargetObservation& obs) {
  if (obs.softmax.size() != obs.size())
    throw std::invalid_argument("attack_entropy: softmax vectors unavailable");
  AttackResult result;
  result.attack_name = "entropy";
  result.instance_ids = obs.ids;
  result.scores.reserve(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const auto& p = obs.softmax[i];
    const int y = obs.labels[i];
    double mentr = -(1.0 - p[y]) * std::log(clamp_prob(p[y]));
    for (std::size_t c = 0; c < p.size(); ++c) {
      if (static_cast<int>(c) == y) continue;
      mentr -= p[c] * std::log(clamp_prob(1.0 - p[c]));
    }
    result.scores.push_back(-mentr);
  }
  return result;
}

AttackResult attack_calibration(const TargetObservation& obs, const ScoreMatrix& matrix) {
  AttackResult result;
  result.attack_name = "calibration";
  result.instance_ids = obs.ids;
  result.scores.reserve(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const std::size_t col = require_column(matrix, obs.ids[i]);
    double sum = 0.0;
    int count = 0;
    for (int j = 0; j < matrix.n_models; ++j) {
      if (matrix.member(j, col)) continue;
      sum += loss_from_logit(matrix.value(j, col, 0));
      ++count;
    }
    if (count == 0)
      throw std::runtime_error("attack_calibration: instance " + std::to_string(obs.ids[i]) +
                               " has no OUT rows; pool matrices across iterations first");
    result.scores.push_back(sum / count - obs.loss[i]);
  }
  return result;
}

AttackResult attack_ratio(const TargetObservation& obs, const ScoreMatrix& matrix) {
  AttackResult result;
  result.attack_name = "attack_r";
  result.instance_ids = obs.ids;
  result.scores.reserve(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const std::size_t col = require_column(matrix, obs.ids[i]);
    int below = 0;
    int count = 0;
    for (int j = 0; j < matrix.n_models; ++j) {
      if (matrix.member(j, col)) continue;
      if (obs.loss[i] < loss_from_logit(matrix.value(j, col, 0))) ++below;
      ++count;
    }
    if (count == 0)
      throw std::runtime_error("attack_ratio: instance " + std::to_string(obs.ids[i]) +
                               " has no OUT rows");
    result.scores.push_back(static_cast<double>(below) / static_cast<double>(count));
  }
  return result;
}

AttackResult lira_adaptive(const TargetObservation& obs, const ScoreMatrix& matrix) {
  if (obs.n_aug != matrix.n_aug)
    throw std::invalid_argument("lira_adaptive: augmentation count mismatch");
  AttackResult result;
  result.attack_name = "lira_adaptive";
  result.instance_ids = obs.ids;
  result.scores.reserve(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const GaussFit fit = fit_gauss(matrix, obs.ids[i]);
    if (fit.rows_in < 2)
      throw std::runtime_error("lira_adaptive: instance " + std::to_string(obs.ids[i]) +
                               " has " + std::to_string(fit.rows_in) +
                               " IN rows; use lira_nonadaptive");
    if (fit.rows_out < 2)
      throw std::runtime_error("lira_adaptive: instance " + std::to_string(obs.ids[i]) +
                               " has fewer than 2 OUT rows");
    const auto phi = obs.phi_of(i);
    result.scores.push_back(log_normal_spherical(phi, fit.mean_in, fit.var_in) -
                            log_normal_spherical(phi, fit.mean_out, fit.var_out));
  }
  return result;
}

AttackResult lira_nonadaptive(const TargetObservation& obs, const ScoreMatrix& matrix) {
  if (obs.n_aug != matrix.n_aug)
    throw std::invalid_argument("lira_nonadaptive: augmentation count mismatch");
  AttackResult result;
  result.attack_name = "lira_nonadaptive";
  result.instance_ids = obs.ids;
  result.scores.reserve(obs.size());
  for (std::size_t i = 0; i < obs.size(); ++i) {
    const GaussFit fit = fit_gauss(matrix, obs.ids[i]);
    if (fit.rows_out < 2)
      throw std::runtime_error("lira_nonadaptive: instance " + std::to_string(obs.ids[i]) +
                               " has fewer than 2 OUT rows");
    const auto phi = obs.phi_of(i);
    const double sd = std::sqrt(fit.var_out);
    double acc = 0.0;
    for (std::size_t a = 0; a < phi.size(); ++a)
      acc += normal_cdf((phi[a] - fit.mean_out[a]) / sd);
    result.scores.push_back(acc / static_cast<double>(phi.size()));
  }
  return result;
}

namespace {

// RMIA works on raw confidences; recover them from the stored view-0 logits
// so target and shadow values go through the same transform.
double rmia_ratio(const TargetObservation& obs, std::size_t index, const ScoreMatrix& matrix) {
  const std::size_t col = require_column(matrix, obs.ids[index]);
  double sum = 0.0;
  int count = 0;
  for (int j = 0; j < matrix.n_models; ++j) {
    if (matrix.member(j, col)) continue;
    sum += sigmoid(matrix.value(j, col, 0));
    ++count;
  }
  if (count == 0)
    throw std::runtime_error("rmia: instance " + std::to_string(obs.ids[index]) +
                             " has no OUT rows");
  const double target_conf = sigmoid(obs.phi[index * obs.n_aug]);
  return target_conf / std::max(sum / count, 1e-300);
}

}  // namespace

AttackResult rmia(const TargetObservation& query_obs, const TargetObservation& population_obs,
                  const ScoreMatrix& matrix, std::span<const std::int64_t> population_ids,
                  double gamma) {
  if (population_ids.empty()) throw std::invalid_argument("rmia: empty population");

  std::vector<double> pop_ratios;
  std::vector<std::int64_t> pop_ids;
  pop_ratios.reserve(population_ids.size());
  for (std::int64_t id : population_ids) {
    auto idx = population_obs.index_of(id);
    if (!idx)
      throw std::invalid_argument("rmia: population instance " + std::to_string(id) +
                                  " missing from observation");
    pop_ratios.push_back(rmia_ratio(population_obs, *idx, matrix));
    pop_ids.push_back(id);
  }

  AttackResult result;
  result.attack_name = "rmia";
  result.instance_ids = query_obs.ids;
  result.scores.reserve(query_obs.size());
  for (std::size_t i = 0; i < query_obs.size(); ++i) {
    const double rx = rmia_ratio(query_obs, i, matrix);
    int wins = 0;
    int total = 0;
    for (std::size_t z = 0; z < pop_ratios.size(); ++z) {
      if (pop_ids[z] == query_obs.ids[i]) continue;  // self-pairs excluded
      if (rx / pop_ratios[z] > gamma) ++wins;
      ++total;
    }
    result.scores.push_back(total > 0 ? static_cast<double>(wins) / total : 0.0);
  }
  return result;
}

ShadowAttack make_attack_loss() {
  return {"loss", [](const TargetObservation& obs, const ScoreMatrix&) {
            return attack_loss(obs);
          }};
}

ShadowAttack make_attack_calibration() {
  return {"calibration", attack_calibration};
}

ShadowAttack make_attack_ratio() {
  return {"attack_r", attack_ratio};
}

ShadowAttack make_lira_adaptive() {
  return {"lira_adaptive", lira_adaptive};
}

ShadowAttack make_lira_nonadaptive() {
  return {"lira_nonadaptive", lira_nonadaptive};
}

ShadowAttack make_rmia(double gamma) {
  return {"rmia", [gamma](const TargetObservation& obs, const ScoreMatrix& matrix) {
            return rmia(obs, obs, matrix, obs.ids, gamma);
          }};
}

}  // namespace mia
