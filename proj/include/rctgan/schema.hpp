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

#include <map>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace rctgan {

enum class ColumnKind { kId, kCategorical, kNumerical, kInteger, kDatetime };

std::string_view column_kind_name(ColumnKind kind);
ColumnKind parse_column_kind(std::string_view text);

// Continuous columns are modeled with a mixture encoder; ids are never
// modeled.
inline bool is_continuous(ColumnKind kind) {
  return kind == ColumnKind::kNumerical || kind == ColumnKind::kInteger ||
         kind == ColumnKind::kDatetime;
}

struct ColumnSpec {
  std::string name;
  ColumnKind kind;
};

struct ForeignKey {
  std::string child_table;
  std::string child_column;
  std::string parent_table;
  std::string parent_column;
};

struct TableSpec {
  std::string name;
  std::vector<ColumnSpec> columns;
  std::optional<std::string> primary_key;

  std::optional<std::size_t> column_index(std::string_view column) const;
  // Indices of all non-id columns, in declaration order.
  std::vector<std::size_t> feature_columns() const;
};

struct AncestorEntry {
  std::string table;
  int depth;

  bool operator==(const AncestorEntry&) const = default;
};

// A chain of foreign-key hops from a table up to one of its ancestors.
// hops[0] is declared on the starting table; hops.back().parent_table is the
// ancestor reached.
struct AncestorPath {
  std::vector<ForeignKey> hops;

  const std::string& table() const { return hops.back().parent_table; }
  int depth() const { return static_cast<int>(hops.size()); }
  // Column-name prefix used when the ancestor's columns are joined onto the
  // starting table, e.g. "store__" or "store__region__". A hop whose parent
  // is referenced by several foreign keys of the same table is written as
  // "<parent>.<column>__".
  std::string prefix;
};

class RelationalSchema {
 public:
  // Builds and validates. Throws Error with kUnknownReference, kCyclicSchema or
  // kDuplicateName.
  RelationalSchema(std::vector<TableSpec> tables,
                   std::vector<ForeignKey> relationships);

  static RelationalSchema from_json(std::string_view text);
  static RelationalSchema from_file(const std::string& path);
  std::string to_json() const;

  const std::vector<TableSpec>& tables() const { return tables_; }
  const std::vector<ForeignKey>& relationships() const {
    return relationships_;
  }
  const TableSpec& table(std::string_view name) const;
  bool has_table(std::string_view name) const;

  // Foreign keys declared on `child`, in declaration order.
  std::vector<ForeignKey> foreign_keys_of(std::string_view child) const;
  // Relationships whose parent is `parent`.
  std::vector<ForeignKey> children_of(std::string_view parent) const;
  // Distinct parent table names, sorted.
  std::vector<std::string> parents(std::string_view child) const;

  // Parents strictly before children; ties broken lexicographically.
  const std::vector<std::string>& topological_order() const { return order_; }

  // Breadth-first over reverse FK edges. Each (table, depth) pair appears
  // once, ordered by (depth, name).
  std::vector<AncestorEntry> ancestors(std::string_view table,
                                       int max_depth) const;

  // One path per foreign key at depth 1 (sorted by parent name, then column);
  // one path per distinct deeper ancestor, reached through the first
  // qualifying lower-depth path. Order matches ancestors().
  std::vector<AncestorPath> ancestor_paths(std::string_view table,
                                           int max_depth) const;

 private:
  void validate();

  std::vector<TableSpec> tables_;
  std::vector<ForeignKey> relationships_;
  std::map<std::string, std::size_t, std::less<>> index_;
  std::vector<std::string> order_;
};

}  // namespace rctgan
