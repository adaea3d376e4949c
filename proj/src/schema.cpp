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

#include "rctgan/schema.hpp"

#include <algorithm>
#include <fstream>
#include <queue>
#include <set>
#include <sstream>

#include "json.hpp"
#include "rctgan/error.hpp"

namespace rctgan {

namespace {

using OrderedJson = nlohmann::ordered_json;

}  // namespace

const char* error_code_name(ErrorCode code) {
  switch (code) {
    case ErrorCode::kInvalidArgument: return "InvalidArgument";
    case ErrorCode::kUnknownReference: return "UnknownReference";
    case ErrorCode::kCyclicSchema: return "CyclicSchema";
    case ErrorCode::kDuplicateName: return "DuplicateName";
    case ErrorCode::kUnknownTable: return "UnknownTable";
    case ErrorCode::kMissingFile: return "MissingFile";
    case ErrorCode::kHeaderMismatch: return "HeaderMismatch";
    case ErrorCode::kParseError: return "ParseError";
    case ErrorCode::kIoError: return "IoError";
    case ErrorCode::kDanglingForeignKey: return "DanglingForeignKey";
    case ErrorCode::kIntegrityViolation: return "IntegrityViolation";
    case ErrorCode::kWidthMismatch: return "WidthMismatch";
    case ErrorCode::kMissingAncestorRow: return "MissingAncestorRow";
    case ErrorCode::kDegenerateColumn: return "DegenerateColumn";
    case ErrorCode::kDimensionMismatch: return "DimensionMismatch";
    case ErrorCode::kGraphNotRecorded: return "GraphNotRecorded";
    case ErrorCode::kUnsupportedLayer: return "UnsupportedLayer";
    case ErrorCode::kEmptyTable: return "EmptyTable";
    case ErrorCode::kNonFiniteLoss: return "NonFiniteLoss";
    case ErrorCode::kSingleClass: return "SingleClass";
    case ErrorCode::kCorruptFile: return "CorruptFile";
    case ErrorCode::kVersionMismatch: return "VersionMismatch";
  }
  return "Unknown";
}

std::string_view column_kind_name(ColumnKind kind) {
  switch (kind) {
    case ColumnKind::kId: return "id";
    case ColumnKind::kCategorical: return "categorical";
    case ColumnKind::kNumerical: return "numerical";
    case ColumnKind::kInteger: return "integer";
    case ColumnKind::kDatetime: return "datetime";
  }
  return "id";
}

ColumnKind parse_column_kind(std::string_view text) {
  if (text == "id") return ColumnKind::kId;
  if (text == "categorical") return ColumnKind::kCategorical;
  if (text == "numerical") return ColumnKind::kNumerical;
  if (text == "integer") return ColumnKind::kInteger;
  if (text == "datetime") return ColumnKind::kDatetime;
  fail(ErrorCode::kInvalidArgument,
       "unknown column kind '" + std::string(text) + "'");
}

std::optional<std::size_t> TableSpec::column_index(
    std::string_view column) const {
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].name == column) return i;
  }
  return std::nullopt;
}

std::vector<std::size_t> TableSpec::feature_columns() const {
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < columns.size(); ++i) {
    if (columns[i].kind != ColumnKind::kId) out.push_back(i);
  }
  return out;
}

RelationalSchema::RelationalSchema(std::vector<TableSpec> tables,
                                   std::vector<ForeignKey> relationships)
    : tables_(std::move(tables)), relationships_(std::move(relationships)) {
  validate();
}

void RelationalSchema::validate() {
  index_.clear();
  for (std::size_t i = 0; i < tables_.size(); ++i) {
    const auto& t = tables_[i];
    if (t.name.empty()) {
      fail(ErrorCode::kInvalidArgument, "table name must not be empty");
    }
    if (!index_.emplace(t.name, i).second) {
      fail(ErrorCode::kDuplicateName, "duplicate table '" + t.name + "'");
    }
    std::set<std::string> seen;
    for (const auto& c : t.columns) {
      if (!seen.insert(c.name).second) {
        fail(ErrorCode::kDuplicateName,
             "duplicate column '" + c.name + "' in table '" + t.name + "'");
      }
    }
    if (t.primary_key) {
      auto pk = t.column_index(*t.primary_key);
      if (!pk) {
        fail(ErrorCode::kUnknownReference, "primary key '" + *t.primary_key +
                                               "' is not a column of table '" +
                                               t.name + "'");
      }
      if (t.columns[*pk].kind != ColumnKind::kId) {
        fail(ErrorCode::kInvalidArgument, "primary key '" + t.name + "." +
                                              *t.primary_key +
                                              "' must have kind id");
      }
    }
  }

  std::set<std::pair<std::string, std::string>> fk_columns;
  for (const auto& fk : relationships_) {
    const std::string where = fk.child_table + "." + fk.child_column;
    auto child = index_.find(fk.child_table);
    if (child == index_.end()) {
      fail(ErrorCode::kUnknownReference,
           "foreign key on unknown table '" + fk.child_table + "'");
    }
    auto col = tables_[child->second].column_index(fk.child_column);
    if (!col) {
      fail(ErrorCode::kUnknownReference,
           "foreign key column '" + where + "' does not exist");
    }
    if (tables_[child->second].columns[*col].kind != ColumnKind::kId) {
      fail(ErrorCode::kInvalidArgument,
           "foreign key column '" + where + "' must have kind id");
    }
    if (!fk_columns.emplace(fk.child_table, fk.child_column).second) {
      fail(ErrorCode::kDuplicateName,
           "column '" + where + "' carries more than one foreign key");
    }
    auto parent = index_.find(fk.parent_table);
    if (parent == index_.end()) {
      fail(ErrorCode::kUnknownReference, "foreign key '" + where +
                                             "' references unknown table '" +
                                             fk.parent_table + "'");
    }
    const auto& pt = tables_[parent->second];
    if (!pt.primary_key || *pt.primary_key != fk.parent_column) {
      fail(ErrorCode::kUnknownReference,
           "foreign key '" + where + "' references '" + fk.parent_table + "." +
               fk.parent_column + "', which is not the primary key");
    }
  }

  // Kahn's algorithm with a sorted ready set gives the lexicographic
  // tie-break.
  std::map<std::string, int> indegree;
  for (const auto& t : tables_) indegree[t.name] = 0;
  std::set<std::pair<std::string, std::string>> edges;
  for (const auto& fk : relationships_) {
    if (fk.parent_table == fk.child_table) {
      fail(ErrorCode::kCyclicSchema, "cycle: table '" + fk.child_table +
                                         "' references itself through '" +
                                         fk.child_column + "'");
    }
    if (edges.emplace(fk.parent_table, fk.child_table).second) {
      ++indegree[fk.child_table];
    }
  }
  std::set<std::string> ready;
  for (const auto& [name, deg] : indegree) {
    if (deg == 0) ready.insert(name);
  }
  order_.clear();
  while (!ready.empty()) {
    std::string next = *ready.begin();
    ready.erase(ready.begin());
    order_.push_back(next);
    for (const auto& [from, to] : edges) {
      if (from == next && --indegree[to] == 0) ready.insert(to);
    }
  }
  if (order_.size() != tables_.size()) {
    std::string members;
    for (const auto& [name, deg] : indegree) {
      if (deg > 0) members += (members.empty() ? "" : ", ") + name;
    }
    fail(ErrorCode::kCyclicSchema,
         "cycle in foreign-key graph among tables: " + members);
  }
}

RelationalSchema RelationalSchema::from_json(std::string_view text) {
  OrderedJson doc;
  try {
    doc = OrderedJson::parse(text);
  } catch (const std::exception& e) {
    fail(ErrorCode::kParseError, std::string("metadata is not valid JSON: ") +
                                     e.what());
  }
  if (!doc.is_object() || !doc.contains("tables") ||
      !doc["tables"].is_object()) {
    fail(ErrorCode::kParseError, "metadata must be an object with 'tables'");
  }
  std::vector<TableSpec> tables;
  std::vector<ForeignKey> fks;
  try {
    for (const auto& [name, body] : doc["tables"].items()) {
      TableSpec spec;
      spec.name = name;
      if (body.contains("primary_key") && !body["primary_key"].is_null()) {
        spec.primary_key = body["primary_key"].get<std::string>();
      }
      if (!body.contains("columns") || !body["columns"].is_object()) {
        fail(ErrorCode::kParseError,
             "table '" + name + "' must declare a 'columns' object");
      }
      for (const auto& [col, kind] : body["columns"].items()) {
        spec.columns.push_back({col, parse_column_kind(kind.get<std::string>())});
      }
      if (body.contains("foreign_keys")) {
        for (const auto& fk : body["foreign_keys"]) {
          fks.push_back({name, fk.at("column").get<std::string>(),
                         fk.at("references").at("table").get<std::string>(),
                         fk.at("references").at("column").get<std::string>()});
        }
      }
      tables.push_back(std::move(spec));
    }
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kParseError, std::string("malformed metadata: ") + e.what());
  }
  return RelationalSchema(std::move(tables), std::move(fks));
}

RelationalSchema RelationalSchema::from_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingFile, "cannot open metadata file '" + path + "'");
  std::stringstream buf;
  buf << in.rdbuf();
  return from_json(buf.str());
}

std::string RelationalSchema::to_json() const {
  OrderedJson doc;
  doc["tables"] = OrderedJson::object();
  for (const auto& t : tables_) {
    OrderedJson body;
    body["primary_key"] =
        t.primary_key ? OrderedJson(*t.primary_key) : OrderedJson(nullptr);
    body["columns"] = OrderedJson::object();
    for (const auto& c : t.columns) {
      body["columns"][c.name] = std::string(column_kind_name(c.kind));
    }
    body["foreign_keys"] = OrderedJson::array();
    for (const auto& fk : foreign_keys_of(t.name)) {
      body["foreign_keys"].push_back(
          {{"column", fk.child_column},
           {"references",
            {{"table", fk.parent_table}, {"column", fk.parent_column}}}});
    }
    doc["tables"][t.name] = std::move(body);
  }
  return doc.dump();
}

const TableSpec& RelationalSchema::table(std::string_view name) const {
  auto it = index_.find(name);
  if (it == index_.end()) {
    fail(ErrorCode::kUnknownTable, "unknown table '" + std::string(name) + "'");
  }
  return tables_[it->second];
}

bool RelationalSchema::has_table(std::string_view name) const {
  return index_.find(name) != index_.end();
}

std::vector<ForeignKey> RelationalSchema::foreign_keys_of(
    std::string_view child) const {
  std::vector<ForeignKey> out;
  for (const auto& fk : relationships_) {
    if (fk.child_table == child) out.push_back(fk);
  }
  return out;
}

std::vector<ForeignKey> RelationalSchema::children_of(
    std::string_view parent) const {
  std::vector<ForeignKey> out;
  for (const auto& fk : relationships_) {
    if (fk.parent_table == parent) out.push_back(fk);
  }
  return out;
}

std::vector<std::string> RelationalSchema::parents(
    std::string_view child) const {
  std::set<std::string> names;
  for (const auto& fk : relationships_) {
    if (fk.child_table == child) names.insert(fk.parent_table);
  }
  return {names.begin(), names.end()};
}

std::vector<AncestorEntry> RelationalSchema::ancestors(std::string_view table,
                                                       int max_depth) const {
  if (!has_table(table)) {
    fail(ErrorCode::kUnknownTable, "unknown table '" + std::string(table) + "'");
  }
  if (max_depth < 1) {
    fail(ErrorCode::kInvalidArgument, "max_depth must be at least 1");
  }
  std::vector<AncestorEntry> out;
  std::set<std::string> frontier{std::string(table)};
  for (int depth = 1; depth <= max_depth && !frontier.empty(); ++depth) {
    std::set<std::string> next;
    for (const auto& t : frontier) {
      for (const auto& p : parents(t)) next.insert(p);
    }
    for (const auto& p : next) out.push_back({p, depth});
    frontier = std::move(next);
  }
  return out;
}

std::vector<AncestorPath> RelationalSchema::ancestor_paths(
    std::string_view table, int max_depth) const {
  if (!has_table(table)) {
    fail(ErrorCode::kUnknownTable, "unknown table '" + std::string(table) + "'");
  }
  if (max_depth < 1) {
    fail(ErrorCode::kInvalidArgument, "max_depth must be at least 1");
  }
  auto by_parent = [](const ForeignKey& a, const ForeignKey& b) {
    return std::tie(a.parent_table, a.child_column) <
           std::tie(b.parent_table, b.child_column);
  };
  auto hop_label = [this](const ForeignKey& fk) {
    int same_parent = 0;
    for (const auto& other : foreign_keys_of(fk.child_table)) {
      if (other.parent_table == fk.parent_table) ++same_parent;
    }
    return same_parent > 1 ? fk.parent_table + "." + fk.child_column + "__"
                           : fk.parent_table + "__";
  };
  std::vector<AncestorPath> out;
  std::vector<AncestorPath> level;
  auto direct = foreign_keys_of(table);
  std::sort(direct.begin(), direct.end(), by_parent);
  for (const auto& fk : direct) level.push_back({{fk}, hop_label(fk)});
  out = level;
  for (int depth = 2; depth <= max_depth && !level.empty(); ++depth) {
    std::map<std::string, AncestorPath> first;
    for (const auto& path : level) {
      auto hops = foreign_keys_of(path.table());
      std::sort(hops.begin(), hops.end(), by_parent);
      for (const auto& fk : hops) {
        if (first.count(fk.parent_table)) continue;
        AncestorPath extended = path;
        extended.hops.push_back(fk);
        extended.prefix += hop_label(fk);
        first.emplace(fk.parent_table, std::move(extended));
      }
    }
    level.clear();
    for (auto& [name, path] : first) level.push_back(std::move(path));
    out.insert(out.end(), level.begin(), level.end());
  }
  return out;
}

}  // namespace rctgan
