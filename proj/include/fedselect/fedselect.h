// Copyright 2026 The fedselect Authors
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef FEDSELECT_FEDSELECT_H
#define FEDSELECT_FEDSELECT_H

#include <stddef.h>

#if defined(_WIN32)
#if defined(FEDSELECT_BUILDING)
#define FS_API __declspec(dllexport)
#else
#define FS_API __declspec(dllimport)
#endif
#else
#define FS_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Every fallible call returns a status; on failure fs_last_error() holds a
 * message for the calling thread until its next failing call. */
typedef enum fs_status {
  FS_OK = 0,
  FS_ERR_INVALID_ARGUMENT = 1,
  FS_ERR_SCHEMA = 2,
  FS_ERR_PARSE = 3,
  FS_ERR_IO = 4,
  FS_ERR_DEGENERATE = 5,
  FS_ERR_MISMATCH = 6,
  FS_ERR_BUDGET = 7,
  FS_ERR_CONFIG = 8,
  FS_ERR_INTERNAL = 9
} fs_status;

typedef enum fs_command {
  FS_CMD_CALIBRATE = 0,
  FS_CMD_RELEASE,
  FS_CMD_SEARCH,
  FS_CMD_TRAIN,
  FS_CMD_AUDIT,
  FS_CMD_VALIDATE,
  FS_CMD_WEIGHTS
} fs_command;

typedef struct fs_config fs_config;
typedef struct fs_pool fs_pool;

FS_API const char* fs_version(void);
FS_API const char* fs_last_error(void);
FS_API const char* fs_status_name(fs_status status);
/* 0 selects the hardware concurrency. */
FS_API void fs_set_threads(unsigned threads);
/* Releases strings returned through char** out-parameters. */
FS_API void fs_string_free(char* s);

/* Configuration ---------------------------------------------------------- */

FS_API fs_status fs_config_load(const char* path, fs_config** out);
FS_API fs_status fs_config_from_json(const char* json_text, fs_config** out);
/* Sets a dotted key such as "privacy.epsilon1". The value is parsed as JSON
 * when possible and taken as a string otherwise. */
FS_API fs_status fs_config_set(fs_config* config, const char* key_path, const char* value);
FS_API fs_status fs_config_validate(const fs_config* config);
FS_API fs_status fs_config_to_json(const fs_config* config, char** out_json);
FS_API void fs_config_free(fs_config* config);

/* Commands --------------------------------------------------------------- */

FS_API fs_status fs_command_from_name(const char* name, fs_command* out);
/* Runs a command. out_dir may be NULL to skip writing a run directory;
 * report_json may be NULL when the report is not wanted. */
FS_API fs_status fs_run(fs_command command, const fs_config* config, const char* out_dir,
                        char** report_json);

/* Numerics --------------------------------------------------------------- */

FS_API fs_status fs_query_count(size_t feature_count, size_t* out);
FS_API fs_status fs_calibrate_sigma(double epsilon, double delta, size_t query_count,
                                    double* sigma, double* optimal_order);
FS_API fs_status fs_verify_epsilon(double sigma, size_t query_count, double delta,
                                   double* epsilon);
/* Plug-in mutual information in bits of a row-major count grid. */
FS_API fs_status fs_mi_from_counts(const double* cells, size_t rows, size_t cols, double* out);

/* Released bundles ------------------------------------------------------- */

/* Loads the bundles written by the release command. */
FS_API fs_status fs_pool_load(const char* bundles_dir, fs_pool** out);
FS_API size_t fs_pool_size(const fs_pool* pool);
/* Borrowed pointer, valid until fs_pool_free. NULL when out of range. */
FS_API const char* fs_pool_client_id(const fs_pool* pool, size_t index);
FS_API fs_status fs_pool_pfl(const fs_pool* pool, const char* const* client_ids, size_t count,
                             double alpha, double beta, double gamma, double lambda, double* out);
FS_API void fs_pool_free(fs_pool* pool);

#ifdef __cplusplus
}
#endif

#endif /* FEDSELECT_FEDSELECT_H */
