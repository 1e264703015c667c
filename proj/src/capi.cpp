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

#include "mia/mia.h"

#include <cstring>
#include <fstream>
#include <iostream>
#include <new>
#include <string>

#include "experiment.hpp"
#include "shadow.hpp"
#include "util.hpp"

namespace {

thread_local std::string g_last_error;

void set_error(const std::string& message) { g_last_error = message; }

mia_status classify_exception() {
  try {
    throw;
  } catch (const mia::ConfigError& e) {
    set_error(e.what());
    return MIA_ERR_CONFIG;
  } catch (const mia::FormatError& e) {
    set_error(e.what());
    return MIA_ERR_FORMAT;
  } catch (const mia::IoError& e) {
    set_error(e.what());
    return MIA_ERR_IO;
  } catch (const std::invalid_argument& e) {
    set_error(e.what());
    return MIA_ERR_INVALID_ARGUMENT;
  } catch (const std::exception& e) {
    set_error(e.what());
    return MIA_ERR_INTERNAL;
  } catch (...) {
    set_error("unknown error");
    return MIA_ERR_INTERNAL;
  }
}

void copy_out(const std::string& s, char* buf, size_t buf_len) {
  if (!buf || buf_len == 0) return;
  const size_t n = std::min(s.size(), buf_len - 1);
  std::memcpy(buf, s.data(), n);
  buf[n] = '\0';
}

}  // namespace

struct mia_matrix {
  mia::ScoreMatrix matrix;
};

extern "C" {

const char* mia_version(void) { return "1.0.0"; }

const char* mia_last_error(void) { return g_last_error.c_str(); }

mia_status mia_run_experiment(const char* config_path, const mia_run_options* options,
                              char* report_dir, size_t report_dir_len) {
  if (!config_path) {
    set_error("config_path is NULL");
    return MIA_ERR_INVALID_ARGUMENT;
  }
  try {
    mia::RunOverrides overrides;
    if (options) {
      if (options->output_dir) overrides.output_dir = options->output_dir;
      if (options->seed_override >= 0)
        overrides.seed = static_cast<std::uint64_t>(options->seed_override);
      overrides.n_threads = options->n_threads;
    }
    const std::string dir = mia::run_experiment_file(config_path, overrides);
    copy_out(dir, report_dir, report_dir_len);
    return MIA_OK;
  } catch (...) {
    return classify_exception();
  }
}

mia_status mia_run_oracles(const char* config_path, const char* report_path) {
  try {
    const mia::OracleReport report = mia::run_oracles_file(
        config_path ? config_path : "", report_path ? report_path : "");
    if (!report.pass) {
      set_error("oracle checks failed; see report for details");
      return MIA_ERR_ORACLE_FAILED;
    }
    return MIA_OK;
  } catch (...) {
    return classify_exception();
  }
}

mia_status mia_matrix_open(const char* path, mia_matrix** out_handle) {
  if (!path || !out_handle) {
    set_error("path or out_handle is NULL");
    return MIA_ERR_INVALID_ARGUMENT;
  }
  *out_handle = nullptr;
  try {
    auto* handle = new mia_matrix{mia::load_matrix(path)};
    *out_handle = handle;
    return MIA_OK;
  } catch (...) {
    return classify_exception();
  }
}

void mia_matrix_close(mia_matrix* handle) { delete handle; }

mia_status mia_matrix_get_info(const mia_matrix* handle, mia_matrix_info* out_info) {
  if (!handle || !out_info) {
    set_error("handle or out_info is NULL");
    return MIA_ERR_INVALID_ARGUMENT;
  }
  out_info->n_models = static_cast<uint32_t>(handle->matrix.n_models);
  out_info->n_instances = static_cast<uint32_t>(handle->matrix.n_instances());
  out_info->n_aug = static_cast<uint32_t>(handle->matrix.n_aug);
  out_info->aug_seed = handle->matrix.aug_seed;
  return MIA_OK;
}

mia_status mia_matrix_validate(const mia_matrix* handle) {
  if (!handle) {
    set_error("handle is NULL");
    return MIA_ERR_INVALID_ARGUMENT;
  }
  try {
    handle->matrix.validate();
    return MIA_OK;
  } catch (...) {
    return classify_exception();
  }
}

double mia_matrix_value(const mia_matrix* handle, uint32_t model, uint32_t instance,
                        uint32_t aug) {
  if (!handle || model >= static_cast<uint32_t>(handle->matrix.n_models) ||
      instance >= handle->matrix.n_instances() ||
      aug >= static_cast<uint32_t>(handle->matrix.n_aug))
    return 0.0;
  return handle->matrix.value(static_cast<int>(model), instance, static_cast<int>(aug));
}

int mia_matrix_membership(const mia_matrix* handle, uint32_t model, uint32_t instance) {
  if (!handle || model >= static_cast<uint32_t>(handle->matrix.n_models) ||
      instance >= handle->matrix.n_instances())
    return -1;
  return handle->matrix.member(static_cast<int>(model), instance) ? 1 : 0;
}

int64_t mia_matrix_instance_id(const mia_matrix* handle, uint32_t instance) {
  if (!handle || instance >= handle->matrix.n_instances()) return -1;
  return handle->matrix.instance_ids[instance];
}

mia_status mia_matrix_report(const char* path, char* buf, size_t buf_len) {
  if (!path) {
    set_error("path is NULL");
    return MIA_ERR_INVALID_ARGUMENT;
  }
  try {
    copy_out(mia::inspect_matrix_file(path), buf, buf_len);
    return MIA_OK;
  } catch (...) {
    return classify_exception();
  }
}

mia_status mia_metrics_from_csv(const char* attack_csv_path, const char* json_out,
                                const char* roc_csv_out) {
  if (!attack_csv_path) {
    set_error("attack_csv_path is NULL");
    return MIA_ERR_INVALID_ARGUMENT;
  }
  try {
    const nlohmann::json metrics = mia::metrics_from_attack_csv(
        attack_csv_path, roc_csv_out ? roc_csv_out : "");
    const std::string text = metrics.dump(2) + "\n";
    if (!json_out || std::string(json_out) == "-") {
      std::cout << text;
    } else {
      std::ofstream out(json_out);
      if (!out) throw mia::IoError(std::string("cannot write ") + json_out);
      out << text;
    }
    return MIA_OK;
  } catch (...) {
    return classify_exception();
  }
}

}  // extern "C"
