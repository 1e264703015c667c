/* Copyright 2026 The mia Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *     https://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the membership-inference toolkit. All entry points return a
 * mia_status; on failure mia_last_error() holds a thread-local message from
 * the failing call. Handles are opaque and freed with their _close function.
 */

#ifndef MIA_MIA_H_
#define MIA_MIA_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define MIA_API __declspec(dllexport)
#else
#define MIA_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum mia_status {
  MIA_OK = 0,
  MIA_ERR_INVALID_ARGUMENT = 1,
  MIA_ERR_IO = 2,
  MIA_ERR_FORMAT = 3,
  MIA_ERR_CONFIG = 4,
  MIA_ERR_ORACLE_FAILED = 5, /* an oracle check failed beyond tolerance */
  MIA_ERR_INTERNAL = 6
} mia_status;

MIA_API const char* mia_version(void);

/* Message from the most recent failing call on this thread; never NULL. */
MIA_API const char* mia_last_error(void);

/* ---- experiment pipeline ---- */

typedef struct mia_run_options {
  const char* output_dir; /* NULL: use the config value */
  int64_t seed_override;  /* < 0: use the config seed list */
  int n_threads;          /* <= 0: config value / MIA_THREADS / hardware */
} mia_run_options;

/* Runs every configured attack for every seed; artifacts land under
 * <output_dir>/<config-hash>/. report_dir (optional) receives the report
 * directory path, NUL-terminated and truncated to report_dir_len. */
MIA_API mia_status mia_run_experiment(const char* config_path, const mia_run_options* options,
                                      char* report_dir, size_t report_dir_len);

/* Runs the theory oracle suites. config_path NULL or empty selects built-in
 * defaults; report_path (optional) receives a JSON report. Returns
 * MIA_ERR_ORACLE_FAILED when any check exceeds its tolerance. */
MIA_API mia_status mia_run_oracles(const char* config_path, const char* report_path);

/* ---- score-matrix inspection ---- */

typedef struct mia_matrix mia_matrix; /* opaque */

typedef struct mia_matrix_info {
  uint32_t n_models;
  uint32_t n_instances;
  uint32_t n_aug;
  uint64_t aug_seed;
} mia_matrix_info;

MIA_API mia_status mia_matrix_open(const char* path, mia_matrix** out_handle);
MIA_API void mia_matrix_close(mia_matrix* handle);
MIA_API mia_status mia_matrix_get_info(const mia_matrix* handle, mia_matrix_info* out_info);

/* Invariant checks: finite values, consistent shapes, unique sorted ids. */
MIA_API mia_status mia_matrix_validate(const mia_matrix* handle);

/* Element access; out-of-range indices return 0 / -1. */
MIA_API double mia_matrix_value(const mia_matrix* handle, uint32_t model, uint32_t instance,
                                uint32_t aug);
MIA_API int mia_matrix_membership(const mia_matrix* handle, uint32_t model, uint32_t instance);
MIA_API int64_t mia_matrix_instance_id(const mia_matrix* handle, uint32_t instance);

/* Plain-text header + invariant report, written into buf (NUL-terminated,
 * truncated to buf_len). */
MIA_API mia_status mia_matrix_report(const char* path, char* buf, size_t buf_len);

/* ---- metrics ---- */

/* Recomputes ROC metrics from a persisted attack CSV (ground truth required).
 * json_out: output path, or "-" / NULL for stdout. roc_csv_out: optional
 * path for the (threshold, fpr, tpr) dump. */
MIA_API mia_status mia_metrics_from_csv(const char* attack_csv_path, const char* json_out,
                                        const char* roc_csv_out);

#ifdef __cplusplus
}
#endif

#endif /* MIA_MIA_H_ */
