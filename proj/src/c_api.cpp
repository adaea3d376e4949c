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

#include "rctgan/rctgan.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "json.hpp"
#include "rctgan/dataset.hpp"
#include "rctgan/detection.hpp"
#include "rctgan/error.hpp"
#include "rctgan/schema.hpp"
#include "rctgan/synthesizer.hpp"

struct rctgan_schema {
  std::shared_ptr<const rctgan::RelationalSchema> schema;
};

struct rctgan_database {
  rctgan::Database database;
};

struct rctgan_model {
  rctgan::DatabaseModel model;
};

namespace {

thread_local std::string last_error;

char* copy_string(const std::string& text) {
  char* out = static_cast<char*>(std::malloc(text.size() + 1));
  if (!out) throw std::bad_alloc();
  std::memcpy(out, text.c_str(), text.size() + 1);
  return out;
}

template <typename Fn>
rctgan_status guarded(Fn&& fn) {
  last_error.clear();
  try {
    fn();
    return RCTGAN_OK;
  } catch (const rctgan::Error& e) {
    last_error = e.what();
    return static_cast<rctgan_status>(static_cast<int>(e.code()));
  } catch (const std::exception& e) {
    last_error = e.what();
    return RCTGAN_INTERNAL_ERROR;
  } catch (...) {
    last_error = "unknown failure";
    return RCTGAN_INTERNAL_ERROR;
  }
}

void require(bool ok, const char* what) {
  if (!ok) rctgan::fail(rctgan::ErrorCode::kInvalidArgument, what);
}

}  // namespace

extern "C" {

const char* rctgan_version(void) { return "1.0.0"; }

const char* rctgan_last_error(void) { return last_error.c_str(); }

const char* rctgan_status_name(rctgan_status status) {
  if (status == RCTGAN_OK) return "Ok";
  if (status == RCTGAN_INTERNAL_ERROR) return "InternalError";
  if (status >= RCTGAN_INVALID_ARGUMENT && status <= RCTGAN_VERSION_MISMATCH) {
    return rctgan::error_code_name(static_cast<rctgan::ErrorCode>(status));
  }
  return "Unknown";
}

void rctgan_string_free(char* text) { std::free(text); }

rctgan_status rctgan_schema_from_json(const char* json, rctgan_schema** out) {
  return guarded([&] {
    require(json && out, "schema json and output handle are required");
    *out = nullptr;
    auto schema = std::make_shared<const rctgan::RelationalSchema>(
        rctgan::RelationalSchema::from_json(json));
    *out = new rctgan_schema{std::move(schema)};
  });
}

rctgan_status rctgan_schema_from_file(const char* path, rctgan_schema** out) {
  return guarded([&] {
    require(path && out, "schema path and output handle are required");
    *out = nullptr;
    auto schema = std::make_shared<const rctgan::RelationalSchema>(
        rctgan::RelationalSchema::from_file(path));
    *out = new rctgan_schema{std::move(schema)};
  });
}

rctgan_status rctgan_schema_topological_order(const rctgan_schema* schema, char** json_out) {
  return guarded([&] {
    require(schema && json_out, "schema and output are required");
    *json_out = copy_string(nlohmann::json(schema->schema->topological_order()).dump());
  });
}

void rctgan_schema_free(rctgan_schema* schema) { delete schema; }

rctgan_status rctgan_database_load(const rctgan_schema* schema, const char* directory,
                                   rctgan_database** out) {
  return guarded([&] {
    require(schema && directory && out, "schema, directory and output handle are required");
    *out = nullptr;
    *out = new rctgan_database{rctgan::load_database(schema->schema, directory)};
  });
}

rctgan_status rctgan_database_write(const rctgan_database* database, const char* directory) {
  return guarded([&] {
    require(database && directory, "database and directory are required");
    rctgan::write_database(database->database, directory);
  });
}

rctgan_status rctgan_database_check_integrity(const rctgan_database* database, char** json_out) {
  return guarded([&] {
    require(database && json_out, "database and output are required");
    nlohmann::json j = nlohmann::json::array();
    for (const auto& v : rctgan::check_referential_integrity(database->database)) {
      j.push_back({{"table", v.child_table}, {"column", v.column}, {"row", v.row}, {"value", v.value}});
    }
    *json_out = copy_string(j.dump());
  });
}

rctgan_status rctgan_database_row_count(const rctgan_database* database, const char* table,
                                        size_t* out) {
  return guarded([&] {
    require(database && table && out, "database, table and output are required");
    *out = database->database.table(table).row_count();
  });
}

void rctgan_database_free(rctgan_database* database) { delete database; }

rctgan_status rctgan_model_fit(const rctgan_database* database, const char* config_json,
                               uint64_t seed, int threads, rctgan_log_fn log, void* user,
                               rctgan_model** out) {
  return guarded([&] {
    require(database && out, "database and output handle are required");
    *out = nullptr;
    rctgan::TrainConfig config;
    if (config_json) {
      nlohmann::json j;
      try {
        j = nlohmann::json::parse(config_json);
      } catch (const nlohmann::json::exception& e) {
        rctgan::fail(rctgan::ErrorCode::kInvalidArgument,
                     std::string("config is not valid JSON: ") + e.what());
      }
      config = rctgan::TrainConfig::from_json(j);
    }
    rctgan::FitOptions options;
    options.threads = threads < 1 ? 1 : threads;
    if (log) {
      options.on_epoch = [log, user](const rctgan::EpochLog& entry) {
        log(entry.to_json_line().c_str(), user);
      };
    }
    *out = new rctgan_model{rctgan::fit_database(database->database, config, seed, options)};
  });
}

rctgan_status rctgan_model_save(const rctgan_model* model, const char* path) {
  return guarded([&] {
    require(model && path, "model and path are required");
    rctgan::save_model(model->model, path);
  });
}

rctgan_status rctgan_model_load(const char* path, rctgan_model** out) {
  return guarded([&] {
    require(path && out, "path and output handle are required");
    *out = nullptr;
    *out = new rctgan_model{rctgan::load_model(path)};
  });
}

rctgan_status rctgan_model_schema_json(const rctgan_model* model, char** json_out) {
  return guarded([&] {
    require(model && json_out, "model and output are required");
    *json_out = copy_string(model->model.schema->to_json());
  });
}

rctgan_status rctgan_model_sample(const rctgan_model* model, double scale, uint64_t seed,
                                  rctgan_database** out) {
  return guarded([&] {
    require(model && out, "model and output handle are required");
    *out = nullptr;
    *out = new rctgan_database{rctgan::sample_database(model->model, scale, seed)};
  });
}

void rctgan_model_free(rctgan_model* model) { delete model; }

rctgan_status rctgan_evaluate(const rctgan_database* real, const rctgan_database* synthetic,
                              int folds, uint64_t seed, char** report_json, char** text_out) {
  return guarded([&] {
    require(real && synthetic && report_json, "databases and report output are required");
    rctgan::DetectionOptions options;
    options.folds = folds;
    options.seed = seed;
    const auto report = rctgan::evaluate(real->database, synthetic->database, options);
    std::string json = report.to_json().dump(2);
    json.push_back('\n');
    *report_json = copy_string(json);
    if (text_out) *text_out = copy_string(report.to_text());
  });
}

}  // extern "C"
