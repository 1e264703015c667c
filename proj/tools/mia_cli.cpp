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
// Command-line front end. Talks to the toolkit exclusively through the C API.

#include <cstdint>
#include <iostream>
#include <string>
#include <vector>

#include <CLI11.hpp>

#include "mia/mia.h"

namespace {

int fail(mia_status status) {
  std::cerr << "error (" << status << "): " << mia_last_error() << '\n';
  return 1;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"membership-inference research toolkit"};
  app.require_subcommand(1);

  // run <config>
  std::string run_config;
  std::string run_out;
  std::int64_t run_seed = -1;
  int run_threads = 0;
  auto* run = app.add_subcommand("run", "run an experiment config");
  run->add_option("config", run_config, "experiment config (JSON)")->required();
  run->add_option("--out", run_out, "override the output directory");
  run->add_option("--seed", run_seed, "run a single seed instead of the config list");
  run->add_option("--threads", run_threads, "worker thread count (default: MIA_THREADS or all)");

  // oracles [config]
  std::string oracle_config;
  std::string oracle_report;
  auto* oracles = app.add_subcommand("oracles", "run the theory oracle suites");
  oracles->add_option("config", oracle_config, "oracle config (JSON); omit for defaults");
  oracles->add_option("--report", oracle_report, "write the JSON report here");

  // inspect <matrix-file>
  std::string inspect_path;
  auto* inspect = app.add_subcommand("inspect", "print a score-matrix header and checks");
  inspect->add_option("matrix", inspect_path, "score-matrix file (.mia1)")->required();

  // metrics <attack-csv>
  std::string metrics_csv;
  std::string metrics_out = "-";
  std::string metrics_roc;
  auto* metrics = app.add_subcommand("metrics", "recompute ROC metrics from an attack CSV");
  metrics->add_option("csv", metrics_csv, "attack result CSV")->required();
  metrics->add_option("--out", metrics_out, "metrics JSON path ('-' for stdout)");
  metrics->add_option("--roc", metrics_roc, "also dump the ROC curve as CSV");

  CLI11_PARSE(app, argc, argv);

  if (run->parsed()) {
    mia_run_options options{};
    options.output_dir = run_out.empty() ? nullptr : run_out.c_str();
    options.seed_override = run_seed;
    options.n_threads = run_threads;
    char report_dir[4096] = {0};
    const mia_status status =
        mia_run_experiment(run_config.c_str(), &options, report_dir, sizeof(report_dir));
    if (status != MIA_OK) return fail(status);
    std::cout << "report: " << report_dir << '\n';
    return 0;
  }

  if (oracles->parsed()) {
    const mia_status status = mia_run_oracles(
        oracle_config.empty() ? nullptr : oracle_config.c_str(),
        oracle_report.empty() ? nullptr : oracle_report.c_str());
    if (status == MIA_ERR_ORACLE_FAILED) {
      std::cerr << "oracle checks FAILED";
      if (!oracle_report.empty()) std::cerr << " (report: " << oracle_report << ")";
      std::cerr << '\n';
      return 2;
    }
    if (status != MIA_OK) return fail(status);
    std::cout << "oracle checks passed";
    if (!oracle_report.empty()) std::cout << " (report: " << oracle_report << ")";
    std::cout << '\n';
    return 0;
  }

  if (inspect->parsed()) {
    std::vector<char> buf(1 << 16);
    const mia_status status = mia_matrix_report(inspect_path.c_str(), buf.data(), buf.size());
    if (status != MIA_OK) return fail(status);
    std::cout << buf.data();
    return 0;
  }

  if (metrics->parsed()) {
    const mia_status status =
        mia_metrics_from_csv(metrics_csv.c_str(), metrics_out.c_str(),
                             metrics_roc.empty() ? nullptr : metrics_roc.c_str());
    if (status != MIA_OK) return fail(status);
    return 0;
  }

  return 0;
}
