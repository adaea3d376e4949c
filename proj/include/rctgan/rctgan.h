/*
 * Copyright 2026 The rctgan Authors
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the relational synthesizer. Every function returning
 * rctgan_status leaves a message for rctgan_last_error() on failure. Strings
 * returned through char** are owned by the caller and released with
 * rctgan_string_free. */

#ifndef RCTGAN_RCTGAN_H_
#define RCTGAN_RCTGAN_H_

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define RCTGAN_API __declspec(dllexport)
#else
#define RCTGAN_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef struct rctgan_schema rctgan_schema;
typedef struct rctgan_database rctgan_database;
typedef struct rctgan_model rctgan_model;

typedef enum rctgan_status {
  RCTGAN_OK = 0,
  RCTGAN_INVALID_ARGUMENT = 1,
  RCTGAN_UNKNOWN_REFERENCE = 2,
  RCTGAN_CYCLIC_SCHEMA = 3,
  RCTGAN_DUPLICATE_NAME = 4,
  RCTGAN_UNKNOWN_TABLE = 5,
  RCTGAN_MISSING_FILE = 6,
  RCTGAN_HEADER_MISMATCH = 7,
  RCTGAN_PARSE_ERROR = 8,
  RCTGAN_IO_ERROR = 9,
  RCTGAN_DANGLING_FOREIGN_KEY = 10,
  RCTGAN_INTEGRITY_VIOLATION = 11,
  RCTGAN_WIDTH_MISMATCH = 12,
  RCTGAN_MISSING_ANCESTOR_ROW = 13,
  RCTGAN_DEGENERATE_COLUMN = 14,
  RCTGAN_DIMENSION_MISMATCH = 15,
  RCTGAN_GRAPH_NOT_RECORDED = 16,
  RCTGAN_UNSUPPORTED_LAYER = 17,
  RCTGAN_EMPTY_TABLE = 18,
  RCTGAN_NON_FINITE_LOSS = 19,
  RCTGAN_SINGLE_CLASS = 20,
  RCTGAN_CORRUPT_FILE = 21,
  RCTGAN_VERSION_MISMATCH = 22,
  RCTGAN_INTERNAL_ERROR = 100
} rctgan_status;

/* Called once per finished training epoch with one JSON object. */
typedef void (*rctgan_log_fn)(const char* json_line, void* user);

RCTGAN_API const char* rctgan_version(void);
/* Message of the last failure on the calling thread, "" if none. */
RCTGAN_API const char* rctgan_last_error(void);
RCTGAN_API const char* rctgan_status_name(rctgan_status status);
RCTGAN_API void rctgan_string_free(char* text);

RCTGAN_API rctgan_status rctgan_schema_from_json(const char* json, rctgan_schema** out);
RCTGAN_API rctgan_status rctgan_schema_from_file(const char* path, rctgan_schema** out);
/* JSON array of table names, parents first. */
RCTGAN_API rctgan_status rctgan_schema_topological_order(const rctgan_schema* schema,
                                                         char** json_out);
RCTGAN_API void rctgan_schema_free(rctgan_schema* schema);

RCTGAN_API rctgan_status rctgan_database_load(const rctgan_schema* schema, const char* directory,
                                              rctgan_database** out);
RCTGAN_API rctgan_status rctgan_database_write(const rctgan_database* database,
                                               const char* directory);
/* JSON array of {"table","column","row","value"}; empty when consistent. */
RCTGAN_API rctgan_status rctgan_database_check_integrity(const rctgan_database* database,
                                                         char** json_out);
RCTGAN_API rctgan_status rctgan_database_row_count(const rctgan_database* database,
                                                   const char* table, size_t* out);
RCTGAN_API void rctgan_database_free(rctgan_database* database);

/* config_json may be NULL for defaults; keys follow the training config
 * field names and unknown keys are rejected. threads caps parallel table
 * training (values below 1 mean 1). log may be NULL. */
RCTGAN_API rctgan_status rctgan_model_fit(const rctgan_database* database, const char* config_json,
                                          uint64_t seed, int threads, rctgan_log_fn log,
                                          void* user, rctgan_model** out);
RCTGAN_API rctgan_status rctgan_model_save(const rctgan_model* model, const char* path);
RCTGAN_API rctgan_status rctgan_model_load(const char* path, rctgan_model** out);
/* Metadata JSON of the schema stored in the model. */
RCTGAN_API rctgan_status rctgan_model_schema_json(const rctgan_model* model, char** json_out);
RCTGAN_API rctgan_status rctgan_model_sample(const rctgan_model* model, double scale,
                                             uint64_t seed, rctgan_database** out);
RCTGAN_API void rctgan_model_free(rctgan_model* model);

/* Detection report as JSON; text_out (optional) receives an aligned table. */
RCTGAN_API rctgan_status rctgan_evaluate(const rctgan_database* real,
                                         const rctgan_database* synthetic, int folds,
                                         uint64_t seed, char** report_json, char** text_out);

#ifdef __cplusplus
}
#endif

#endif /* RCTGAN_RCTGAN_H_ */
