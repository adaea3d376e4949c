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

#pragma once

#include <cstddef>
#include <map>
#include <memory>
#include <string>
#include <string_view>
#include <vector>

#include "rctgan/schema.hpp"

namespace rctgan {

// Typed column. Id and categorical columns use `labels`; continuous kinds use
// `numbers`, where NaN marks a missing value. Datetimes are stored as seconds
// since the Unix epoch.
struct Column {
  std::string name;
  ColumnKind kind = ColumnKind::kNumerical;
  std::vector<double> numbers;
  std::vector<std::string> labels;

  std::size_t size() const {
    return is_continuous(kind) ? numbers.size() : labels.size();
  }
  bool operator==(const Column& other) const;
};

struct Table {
  std::string name;
  std::vector<Column> columns;

  std::size_t row_count() const {
    return columns.empty() ? 0 : columns.front().size();
  }
  const Column& column(std::string_view column_name) const;
  Column& column(std::string_view column_name);
  bool operator==(const Table&) const = default;
};

// Builds an empty table with the columns of `spec`.
Table make_empty_table(const TableSpec& spec);

class Database {
 public:
  explicit Database(std::shared_ptr<const RelationalSchema> schema);

  const RelationalSchema& schema() const { return *schema_; }
  std::shared_ptr<const RelationalSchema> schema_ptr() const { return schema_; }

  const Table& table(std::string_view name) const;
  Table& table(std::string_view name);
  // Replaces a table after checking it against its TableSpec.
  void set_table(Table table);

  bool operator==(const Database& other) const;

 private:
  std::shared_ptr<const RelationalSchema> schema_;
  std::map<std::string, Table, std::less<>> tables_;
};

struct IntegrityViolation {
  std::string child_table;
  std::string column;
  std::size_t row;
  std::string value;

  bool operator==(const IntegrityViolation&) const = default;
};

Database load_database(std::shared_ptr<const RelationalSchema> schema,
                       const std::string& directory);
void write_database(const Database& database, const std::string& directory);

// Empty iff every foreign-key value appears in the referenced primary key.
std::vector<IntegrityViolation> check_referential_integrity(
    const Database& database);

// Joins each child row with the feature columns of its ancestors (depth 1 =
// direct parents) and drops every id column. Ancestor columns are prefixed
// with AncestorPath::prefix. Throws kDanglingForeignKey.
Table denormalize(const Database& database, std::string_view child,
                  int max_depth = 1);

// CSV helpers shared with the CLI report writer.
std::vector<std::vector<std::string>> parse_csv(std::string_view text);
std::string format_csv_field(std::string_view field);
std::string format_number(double value);
double parse_datetime(std::string_view text);
std::string format_datetime(double seconds);

}  // namespace rctgan
