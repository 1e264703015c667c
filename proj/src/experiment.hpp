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
// Config-driven orchestration: end-to-end experiment pipelines, artifact
// persistence, and oracle report emission.

#ifndef MIA_EXPERIMENT_HPP_
#define MIA_EXPERIMENT_HPP_

#include <cstdint>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include <json.hpp>

#include "cmia.hpp"
#include "data.hpp"
#include "metrics.hpp"
#include "model.hpp"
#include "pmia.hpp"

namespace mia {

struct AttackSpec {
  std::string name;  // loss | entropy | calibration | attack_r | lira_adaptive |
                     // lira_nonadaptive | rmia | cmia | cmia_loss | cmia_gibbs | pmia
  nlohmann::json params;
};

struct ExperimentConfig {
  // Data source: exactly one of synthetic / csv_path is set.
  std::optional<SyntheticConfig> synthetic;
  std::string csv_path;
  std::string csv_label_column;
  bool csv_standardize = true;

  GameSetting setting = GameSetting::adaptive;
  TrainConfig model;
  int n_shadow_models = 64;
  AugmentConfig augment;
  std::vector<AttackSpec> attacks;
  std::vector<std::uint64_t> seeds;
  std::string output_dir = "out";
  int n_threads = 0;

  std::string config_hash;  // FNV-1a of the canonical JSON
};

ExperimentConfig parse_experiment_config(const nlohmann::json& doc);
ExperimentConfig load_experiment_config(const std::string& path);

struct RunOverrides {
  std::string output_dir;            // empty: use config value
  std::optional<std::uint64_t> seed; // replaces the config seed list
  int n_threads = 0;                 // <= 0: config / env / hardware
};

// Runs every configured attack for every seed. Layout:
//   <output_dir>/<config-hash>/<seed>/{matrices/, attacks/, metrics.json}
//   <output_dir>/<config-hash>/summary.json
// Returns the report directory (<output_dir>/<config-hash>).
std::string run_experiment(const ExperimentConfig& config, const RunOverrides& overrides = {});
std::string run_experiment_file(const std::string& config_path,
                                const RunOverrides& overrides = {});

// Oracle suites: Gibbs-vs-enumeration, posterior-odds-vs-Bayes, and the
// corrupted-kernel negative control.
struct OracleConfig {
  // Gibbs-vs-enumeration suite.
  int gibbs_universes = 5;
  int gibbs_n = 8;
  long long gibbs_sweeps = 1000000;
  long long gibbs_burn_in = 10000;
  double gibbs_tv_tolerance = 0.02;
  double gibbs_db_tolerance = 1e-12;
  // Posterior-odds suite.
  int odds_universes = 50;
  int odds_max_datasets = 64;
  int odds_alphabet = 16;
  int odds_item_pool = 8;
  double odds_rel_tolerance = 1e-9;
  std::uint64_t seed = 20260101;
  bool negative_control = false;  // include the corrupted-kernel check (must fail)
};

OracleConfig parse_oracle_config(const nlohmann::json& doc);

struct OracleReport {
  bool pass = false;
  nlohmann::json details;
};

OracleReport run_oracles(const OracleConfig& config);
// Empty path runs the built-in defaults. The report is written as JSON when
// report_path is non-empty.
OracleReport run_oracles_file(const std::string& config_path, const std::string& report_path);

// Header and invariant checks for a persisted score matrix, as plain text.
std::string inspect_matrix_file(const std::string& path);

// Recomputes ROC-based metrics from a persisted attack CSV (requires ground
// truth). Optionally dumps the ROC curve as CSV.
nlohmann::json metrics_from_attack_csv(const std::string& csv_path,
                                       const std::string& roc_csv_path = "");

// FNV-1a over the canonical (sorted-key) JSON serialization.
std::string hash_json(const nlohmann::json& doc);

}  // namespace mia

#endif  // MIA_EXPERIMENT_HPP_
