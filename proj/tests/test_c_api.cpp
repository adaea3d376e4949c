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

#include <filesystem>
#include <fstream>
#include <random>
#include <string>
#include <vector>

#include "doctest.h"
#include "json.hpp"
#include "rctgan/rctgan.h"

namespace fs = std::filesystem;

namespace {

const std::string kData = RCTGAN_TEST_DATA "/store_sales";
const char* kTinyConfig =
    R"({"epochs": 2, "batch_size": 10, "pac": 2, "z_dim": 4,
        "generator_hidden": [8], "critic_hidden": [8]})";

struct Scratch {
  fs::path path;
  Scratch() {
    path = fs::temp_directory_path() / ("rctgan_capi_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~Scratch() {
    std::error_code ec;
    fs::remove_all(path, ec);
  }
};

std::string take(char* text) {
  std::string out(text);
  rctgan_string_free(text);
  return out;
}

std::string read_file(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

}  // namespace

TEST_CASE("schema handles") {
  rctgan_schema* schema = nullptr;
  REQUIRE(rctgan_schema_from_file((kData + "/metadata.json").c_str(), &schema) == RCTGAN_OK);
  char* order = nullptr;
  REQUIRE(rctgan_schema_topological_order(schema, &order) == RCTGAN_OK);
  CHECK(take(order) == R"(["store","sales"])");
  rctgan_schema_free(schema);

  rctgan_schema* bad = nullptr;
  const char* cyclic = R"({"tables": {
    "a": {"primary_key": "id", "columns": {"id": "id", "b": "id"},
          "foreign_keys": [{"column": "b", "references": {"table": "b", "column": "id"}}]},
    "b": {"primary_key": "id", "columns": {"id": "id", "a": "id"},
          "foreign_keys": [{"column": "a", "references": {"table": "a", "column": "id"}}]}}})";
  CHECK(rctgan_schema_from_json(cyclic, &bad) == RCTGAN_CYCLIC_SCHEMA);
  CHECK(bad == nullptr);
  CHECK(std::string(rctgan_last_error()).find("cycle") != std::string::npos);
  CHECK(std::string(rctgan_status_name(RCTGAN_CYCLIC_SCHEMA)) == "CyclicSchema");
  CHECK(rctgan_schema_from_file("/nonexistent/metadata.json", &bad) == RCTGAN_MISSING_FILE);
  CHECK(rctgan_schema_from_json(nullptr, &bad) == RCTGAN_INVALID_ARGUMENT);
}

TEST_CASE("fit, sample, save, load and evaluate") {
  Scratch scratch;
  rctgan_schema* schema = nullptr;
  REQUIRE(rctgan_schema_from_file((kData + "/metadata.json").c_str(), &schema) == RCTGAN_OK);
  rctgan_database* real = nullptr;
  REQUIRE(rctgan_database_load(schema, kData.c_str(), &real) == RCTGAN_OK);
  char* violations = nullptr;
  REQUIRE(rctgan_database_check_integrity(real, &violations) == RCTGAN_OK);
  CHECK(take(violations) == "[]");

  std::vector<std::string> lines;
  auto on_log = [](const char* line, void* user) {
    static_cast<std::vector<std::string>*>(user)->push_back(line);
  };
  rctgan_model* model = nullptr;
  REQUIRE(rctgan_model_fit(real, kTinyConfig, 5, 1, on_log, &lines, &model) == RCTGAN_OK);
  CHECK(lines.size() == 4);  // two tables, two epochs each
  auto first = nlohmann::json::parse(lines.front());
  CHECK(first.contains("critic_loss"));

  const auto model_path = (scratch.path / "model.bin").string();
  REQUIRE(rctgan_model_save(model, model_path.c_str()) == RCTGAN_OK);
  CHECK(read_file(model_path).substr(0, 4) == "RCTG");
  rctgan_model* loaded = nullptr;
  REQUIRE(rctgan_model_load(model_path.c_str(), &loaded) == RCTGAN_OK);

  rctgan_database* a = nullptr;
  rctgan_database* b = nullptr;
  REQUIRE(rctgan_model_sample(model, 2.0, 3, &a) == RCTGAN_OK);
  REQUIRE(rctgan_model_sample(loaded, 2.0, 3, &b) == RCTGAN_OK);
  size_t rows = 0;
  REQUIRE(rctgan_database_row_count(a, "store", &rows) == RCTGAN_OK);
  CHECK(rows == 4);
  CHECK(rctgan_database_row_count(a, "nope", &rows) == RCTGAN_UNKNOWN_TABLE);
  REQUIRE(rctgan_database_write(a, (scratch.path / "a").string().c_str()) == RCTGAN_OK);
  REQUIRE(rctgan_database_write(b, (scratch.path / "b").string().c_str()) == RCTGAN_OK);
  for (const char* f : {"store.csv", "sales.csv"}) {
    CHECK(read_file(scratch.path / "a" / f) == read_file(scratch.path / "b" / f));
  }
  REQUIRE(rctgan_database_check_integrity(a, &violations) == RCTGAN_OK);
  CHECK(take(violations) == "[]");

  char* schema_json = nullptr;
  REQUIRE(rctgan_model_schema_json(loaded, &schema_json) == RCTGAN_OK);
  CHECK(take(schema_json).find("sales") != std::string::npos);

  char* report = nullptr;
  char* text = nullptr;
  CHECK(rctgan_evaluate(real, real, 1, 0, &report, nullptr) == RCTGAN_INVALID_ARGUMENT);
  CHECK(rctgan_model_sample(model, 0.0, 3, &b) == RCTGAN_INVALID_ARGUMENT);
  CHECK(b == nullptr);

  rctgan_database* big = nullptr;
  REQUIRE(rctgan_model_sample(model, 3.0, 1, &big) == RCTGAN_OK);
  CHECK(rctgan_evaluate(big, big, 2, 0, &report, &text) == RCTGAN_OK);
  auto j = nlohmann::json::parse(take(report));
  CHECK(j.at("tables").size() == 2);
  CHECK(j.at("relationships").size() == 1);
  CHECK(take(text).find("avg_ld") != std::string::npos);

  const auto corrupt = (scratch.path / "corrupt.bin").string();
  std::ofstream(corrupt) << "RCTG";
  rctgan_model* bad = nullptr;
  CHECK(rctgan_model_load(corrupt.c_str(), &bad) == RCTGAN_CORRUPT_FILE);
  CHECK(bad == nullptr);
  CHECK(rctgan_model_fit(real, R"({"epoch": 3})", 1, 1, nullptr, nullptr, &bad) ==
        RCTGAN_INVALID_ARGUMENT);
  CHECK(std::string(rctgan_last_error()).find("epoch") != std::string::npos);
  CHECK(rctgan_model_fit(real, "{", 1, 1, nullptr, nullptr, &bad) == RCTGAN_INVALID_ARGUMENT);

  rctgan_database_free(big);
  rctgan_database_free(a);
  rctgan_database_free(b);
  rctgan_model_free(loaded);
  rctgan_model_free(model);
  rctgan_database_free(real);
  rctgan_schema_free(schema);
}
