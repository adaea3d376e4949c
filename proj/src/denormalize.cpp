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

#include <unordered_map>

#include "rctgan/dataset.hpp"
#include "rctgan/error.hpp"

namespace rctgan {

namespace {

using KeyIndex = std::unordered_map<std::string, std::size_t>;

const KeyIndex& key_index(const Database& db, const std::string& table,
                          std::unordered_map<std::string, KeyIndex>& cache) {
  auto it = cache.find(table);
  if (it != cache.end()) return it->second;
  const auto& spec = db.schema().table(table);
  KeyIndex index;
  if (spec.primary_key) {
    const auto& keys = db.table(table).column(*spec.primary_key).labels;
    for (std::size_t i = 0; i < keys.size(); ++i) index.emplace(keys[i], i);
  }
  return cache.emplace(table, std::move(index)).first->second;
}

}  // namespace

Table denormalize(const Database& database, std::string_view child,
                  int max_depth) {
  const auto& schema = database.schema();
  const auto& child_spec = schema.table(child);
  const auto& child_table = database.table(child);
  const auto paths = schema.ancestor_paths(child, max_depth);
  const std::size_t rows = child_table.row_count();

  std::unordered_map<std::string, KeyIndex> cache;
  // resolved[p][r] = row index of path p's ancestor for child row r.
  std::vector<std::vector<std::size_t>> resolved(paths.size());
  for (std::size_t p = 0; p < paths.size(); ++p) {
    resolved[p].resize(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t row = r;
      for (const auto& hop : paths[p].hops) {
        const auto& value =
            database.table(hop.child_table).column(hop.child_column).labels[row];
        const auto& index = key_index(database, hop.parent_table, cache);
        auto found = index.find(value);
        if (found == index.end()) {
          fail(ErrorCode::kDanglingForeignKey,
               "'" + hop.child_table + "." + hop.child_column + "' value '" +
                   value + "' has no matching row in '" + hop.parent_table +
                   "'");
        }
        row = found->second;
      }
      resolved[p][r] = row;
    }
  }

  Table flat;
  flat.name = std::string(child);
  for (auto c : child_spec.feature_columns()) {
    flat.columns.push_back(child_table.columns[c]);
  }
  for (std::size_t p = 0; p < paths.size(); ++p) {
    const auto& spec = schema.table(paths[p].table());
    const auto& source = database.table(spec.name);
    for (auto c : spec.feature_columns()) {
      const auto& from = source.columns[c];
      Column col;
      col.name = paths[p].prefix + from.name;
      col.kind = from.kind;
      for (std::size_t r = 0; r < rows; ++r) {
        if (is_continuous(col.kind)) {
          col.numbers.push_back(from.numbers[resolved[p][r]]);
        } else {
          col.labels.push_back(from.labels[resolved[p][r]]);
        }
      }
      flat.columns.push_back(std::move(col));
    }
  }
  return flat;
}

}  // namespace rctgan
