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

#include <cmath>
#include <fstream>
#include <random>
#include <set>

#include "doctest.h"
#include "rctgan/dataset.hpp"
#include "rctgan/error.hpp"
#include "test_util.hpp"

using namespace rctgan;
using rctgan::testing::TempDir;
using rctgan::testing::error_of;

namespace {

const std::string kFixture = std::string(RCTGAN_TEST_DATA) + "/store_sales";

void write_file(const std::filesystem::path& p, const std::string& text) {
  std::ofstream(p, std::ios::binary) << text;
}


}  // namespace

TEST_CASE("fixture directory loads with typed values") {
  auto schema = std::make_shared<const RelationalSchema>(
      RelationalSchema::from_file(kFixture + "/metadata.json"));
  auto db = load_database(schema, kFixture);
  CHECK(db.table("store").row_count() == 2);
  CHECK(db.table("sales").row_count() == 3);
  CHECK(std::isnan(db.table("store").column("size").numbers[1]));
  CHECK(db.table("sales").column("day").numbers[0] == 1420070400.0);
  CHECK(db.table("sales").column("day").numbers[1] == 1420070400.0 + 86400 + 37800);
  CHECK(std::isnan(db.table("sales").column("units").numbers[1]));
  CHECK(check_referential_integrity(db).empty());
}

TEST_CASE("header-only CSV gives an empty table") {
  TempDir dir;
  auto schema = testing::schema_from(testing::kStoreSalesMetadata);
  write_file(dir / "store.csv", "id,c\n");
  write_file(dir / "sales.csv", "sid,store_id,v\n");
  auto db = load_database(schema, dir.str());
  CHECK(db.table("store").row_count() == 0);
  CHECK(db.table("sales").row_count() == 0);
}

TEST_CASE("load errors name the offending input") {
  TempDir dir;
  auto schema = testing::schema_from(testing::kStoreSalesMetadata);
  write_file(dir / "store.csv", "id,c\n1,A\n");
  auto missing = error_of([&] { load_database(schema, dir.str()); });
  CHECK(missing.code() == ErrorCode::kMissingFile);
  CHECK(std::string(missing.what()).find("sales.csv") != std::string::npos);

  write_file(dir / "sales.csv", "sid,store_id,v\n1,1,abc\n");
  auto parse = error_of([&] { load_database(schema, dir.str()); });
  CHECK(parse.code() == ErrorCode::kParseError);
  const std::string msg = parse.what();
  CHECK(msg.find("'v'") != std::string::npos);
  CHECK(msg.find("abc") != std::string::npos);
  CHECK(msg.find("row 1") != std::string::npos);

  write_file(dir / "sales.csv", "sid,v,store_id\n");
  CHECK(error_of([&] { load_database(schema, dir.str()); }).code() ==
        ErrorCode::kHeaderMismatch);
  write_file(dir / "sales.csv", "sid,store_id,v\n1,1\n");
  CHECK(error_of([&] { load_database(schema, dir.str()); }).code() ==
        ErrorCode::kParseError);
}

TEST_CASE("integrity violations are reported per row") {
  auto db = testing::store_sales_db();
  CHECK(check_referential_integrity(db).empty());
  db.table("sales").column("store_id").labels[2] = "99";
  auto v = check_referential_integrity(db);
  REQUIRE(v.size() == 1);
  CHECK(v[0] == IntegrityViolation{"sales", "store_id", 2, "99"});
}

TEST_CASE("integrity checker finds exactly the corrupted rows") {
  std::mt19937_64 rng(11);
  for (int trial = 0; trial < 5; ++trial) {
    auto db = testing::store_sales_db();
    Table store = make_empty_table(db.schema().table("store"));
    for (int i = 1; i <= 10; ++i) {
      store.column("id").labels.push_back(std::to_string(i));
      store.column("c").labels.push_back(i % 2 ? "A" : "B");
    }
    db.set_table(store);
    Table sales = make_empty_table(db.schema().table("sales"));
    for (int i = 0; i < 1000; ++i) {
      sales.column("sid").labels.push_back(std::to_string(i + 1));
      sales.column("store_id").labels.push_back(std::to_string(1 + rng() % 10));
      sales.column("v").numbers.push_back(1.0);
    }
    std::set<std::size_t> corrupted;
    while (corrupted.size() < 5) corrupted.insert(rng() % 1000);
    for (auto r : corrupted) {
      sales.column("store_id").labels[r] = "x" + std::to_string(r);
    }
    db.set_table(sales);
    auto v = check_referential_integrity(db);
    std::set<std::size_t> found;
    for (const auto& x : v) found.insert(x.row);
    CHECK(v.size() == 5);
    CHECK(found == corrupted);
  }
}

TEST_CASE("write then load is the identity on typed values") {
  auto schema = std::make_shared<const RelationalSchema>(
      RelationalSchema::from_file(kFixture + "/metadata.json"));
  std::mt19937_64 rng(3);
  std::normal_distribution<double> normal(0.0, 1e3);
  const std::vector<std::string> labels{"A", "with,comma", "say \"hi\"", "", "multi\nline"};
  for (int trial = 0; trial < 10; ++trial) {
    Database db(schema);
    Table store = make_empty_table(schema->table("store"));
    Table sales = make_empty_table(schema->table("sales"));
    const int n = 1 + static_cast<int>(rng() % 50);
    for (int i = 0; i < n; ++i) {
      store.column("id").labels.push_back("s" + std::to_string(i));
      store.column("c").labels.push_back(labels[rng() % labels.size()]);
      store.column("size").numbers.push_back(rng() % 7 == 0 ? std::nan("") : normal(rng));
      sales.column("sid").labels.push_back(std::to_string(i));
      sales.column("store_id").labels.push_back("s" + std::to_string(rng() % n));
      sales.column("v").numbers.push_back(normal(rng) * 1e-7);
      sales.column("day").numbers.push_back(
          static_cast<double>(static_cast<long long>(rng() % 4000000000ULL) - 1000000000LL));
      sales.column("units").numbers.push_back(static_cast<double>(rng() % 100));
    }
    db.set_table(store);
    db.set_table(sales);
    TempDir dir;
    write_database(db, dir.str());
    CHECK(load_database(schema, dir.str()) == db);
  }
}

TEST_CASE("datetime parsing and formatting") {
  CHECK(parse_datetime("1970-01-01") == 0.0);
  CHECK(parse_datetime("1969-12-31 23:59:59") == -1.0);
  CHECK(parse_datetime("2000-02-29T12:00:00Z") == 951825600.0);
  CHECK(parse_datetime("12.5") == 12.5);
  CHECK(format_datetime(951825600.0) == "2000-02-29 12:00:00");
  CHECK(format_datetime(-1.0) == "1969-12-31 23:59:59");
  CHECK_THROWS_AS(parse_datetime("2000-13-01"), std::invalid_argument);
  CHECK_THROWS_AS(parse_datetime("yesterday"), std::invalid_argument);
}

TEST_CASE("denormalize joins parent features and drops keys") {
  auto db = testing::store_sales_db();
  auto flat = denormalize(db, "sales");
  REQUIRE(flat.columns.size() == 2);
  CHECK(flat.columns[0].name == "v");
  CHECK(flat.columns[1].name == "store__c");
  CHECK(flat.columns[0].numbers == std::vector<double>{10, 20, 30});
  CHECK(flat.columns[1].labels == std::vector<std::string>{"A", "A", "B"});
  CHECK(flat.row_count() == db.table("sales").row_count());

  auto empty = testing::store_sales_db();
  Table no_sales = make_empty_table(empty.schema().table("sales"));
  empty.set_table(no_sales);
  auto header_only = denormalize(empty, "sales");
  CHECK(header_only.row_count() == 0);
  CHECK(header_only.columns.size() == 2);

  db.table("sales").column("store_id").labels[1] = "99";
  CHECK(error_of([&] { denormalize(db, "sales"); }).code() ==
        ErrorCode::kDanglingForeignKey);
}
