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

#include "rctgan/dataset.hpp"

#include <charconv>
#include <cmath>
#include <cstdint>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <unordered_set>

#include "rctgan/error.hpp"

namespace rctgan {

namespace {

bool same_number(double a, double b) {
  if (std::isnan(a) && std::isnan(b)) return true;
  return std::memcmp(&a, &b, sizeof(double)) == 0;
}

std::int64_t days_from_civil(std::int64_t y, unsigned m, unsigned d) {
  y -= m <= 2;
  const std::int64_t era = (y >= 0 ? y : y - 399) / 400;
  const unsigned yoe = static_cast<unsigned>(y - era * 400);
  const unsigned doy = (153 * (m + (m > 2 ? -3 : 9)) + 2) / 5 + d - 1;
  const unsigned doe = yoe * 365 + yoe / 4 - yoe / 100 + doy;
  return era * 146097 + static_cast<std::int64_t>(doe) - 719468;
}

void civil_from_days(std::int64_t z, std::int64_t& y, unsigned& m,
                     unsigned& d) {
  z += 719468;
  const std::int64_t era = (z >= 0 ? z : z - 146096) / 146097;
  const unsigned doe = static_cast<unsigned>(z - era * 146097);
  const unsigned yoe = (doe - doe / 1460 + doe / 36524 - doe / 146096) / 365;
  y = static_cast<std::int64_t>(yoe) + era * 400;
  const unsigned doy = doe - (365 * yoe + yoe / 4 - yoe / 100);
  const unsigned mp = (5 * doy + 2) / 153;
  d = doy - (153 * mp + 2) / 5 + 1;
  m = mp < 10 ? mp + 3 : mp - 9;
  y += m <= 2;
}

bool parse_double(std::string_view text, double& out) {
  if (text.empty()) return false;
  const char* first = text.data();
  const char* last = text.data() + text.size();
  if (*first == '+') ++first;
  auto [ptr, ec] = std::from_chars(first, last, out);
  return ec == std::errc() && ptr == last && std::isfinite(out);
}

[[noreturn]] void cell_error(const std::string& table, std::size_t row,
                             const std::string& column, std::string_view text,
                             const std::string& why) {
  fail(ErrorCode::kParseError, "table '" + table + "', row " +
                                   std::to_string(row + 1) + ", column '" +
                                   column + "': cannot parse '" +
                                   std::string(text) + "' (" + why + ")");
}

void check_table_shape(const TableSpec& spec, const Table& table) {
  if (table.columns.size() != spec.columns.size()) {
    fail(ErrorCode::kHeaderMismatch,
         "table '" + spec.name + "' has " +
             std::to_string(table.columns.size()) + " columns, expected " +
             std::to_string(spec.columns.size()));
  }
  const std::size_t rows = table.row_count();
  for (std::size_t i = 0; i < spec.columns.size(); ++i) {
    const auto& col = table.columns[i];
    if (col.name != spec.columns[i].name || col.kind != spec.columns[i].kind) {
      fail(ErrorCode::kHeaderMismatch,
           "table '" + spec.name + "' column " + std::to_string(i) + " is '" +
               col.name + "', expected '" + spec.columns[i].name + "'");
    }
    if (col.size() != rows) {
      fail(ErrorCode::kInvalidArgument,
           "table '" + spec.name + "' has ragged column '" + col.name + "'");
    }
  }
}

}  // namespace

bool Column::operator==(const Column& other) const {
  if (name != other.name || kind != other.kind || labels != other.labels ||
      numbers.size() != other.numbers.size()) {
    return false;
  }
  for (std::size_t i = 0; i < numbers.size(); ++i) {
    if (!same_number(numbers[i], other.numbers[i])) return false;
  }
  return true;
}

const Column& Table::column(std::string_view column_name) const {
  for (const auto& c : columns) {
    if (c.name == column_name) return c;
  }
  fail(ErrorCode::kUnknownReference, "table '" + name + "' has no column '" +
                                         std::string(column_name) + "'");
}

Column& Table::column(std::string_view column_name) {
  return const_cast<Column&>(std::as_const(*this).column(column_name));
}

Table make_empty_table(const TableSpec& spec) {
  Table t;
  t.name = spec.name;
  for (const auto& c : spec.columns) {
    Column col;
    col.name = c.name;
    col.kind = c.kind;
    t.columns.push_back(std::move(col));
  }
  return t;
}

Database::Database(std::shared_ptr<const RelationalSchema> schema)
    : schema_(std::move(schema)) {
  for (const auto& spec : schema_->tables()) {
    tables_.emplace(spec.name, make_empty_table(spec));
  }
}

const Table& Database::table(std::string_view name) const {
  auto it = tables_.find(name);
  if (it == tables_.end()) {
    fail(ErrorCode::kUnknownTable, "unknown table '" + std::string(name) + "'");
  }
  return it->second;
}

Table& Database::table(std::string_view name) {
  return const_cast<Table&>(std::as_const(*this).table(name));
}

void Database::set_table(Table table) {
  const auto& spec = schema_->table(table.name);
  check_table_shape(spec, table);
  tables_[spec.name] = std::move(table);
}

bool Database::operator==(const Database& other) const {
  return schema_->to_json() == other.schema_->to_json() &&
         tables_ == other.tables_;
}

std::vector<std::vector<std::string>> parse_csv(std::string_view text) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string field;
  bool in_quotes = false;
  bool field_started = false;
  std::size_t line = 1;
  auto end_field = [&] {
    row.push_back(std::move(field));
    field.clear();
    field_started = false;
  };
  auto end_row = [&] {
    end_field();
    rows.push_back(std::move(row));
    row.clear();
  };
  for (std::size_t i = 0; i < text.size(); ++i) {
    const char ch = text[i];
    if (in_quotes) {
      if (ch == '"') {
        if (i + 1 < text.size() && text[i + 1] == '"') {
          field.push_back('"');
          ++i;
        } else {
          in_quotes = false;
        }
      } else {
        if (ch == '\n') ++line;
        field.push_back(ch);
      }
      continue;
    }
    switch (ch) {
      case '"':
        if (!field.empty()) {
          fail(ErrorCode::kParseError,
               "line " + std::to_string(line) + ": stray quote inside field");
        }
        in_quotes = true;
        field_started = true;
        break;
      case ',':
        end_field();
        field_started = true;
        break;
      case '\r':
        if (i + 1 < text.size() && text[i + 1] == '\n') break;
        field.push_back(ch);
        break;
      case '\n':
        end_row();
        ++line;
        break;
      default:
        field.push_back(ch);
        field_started = true;
    }
  }
  if (in_quotes) {
    fail(ErrorCode::kParseError, "unterminated quoted field at end of input");
  }
  if (field_started || !field.empty() || !row.empty()) end_row();
  return rows;
}

std::string format_csv_field(std::string_view field) {
  if (field.find_first_of(",\"\n\r") == std::string_view::npos) {
    return std::string(field);
  }
  std::string out = "\"";
  for (char ch : field) {
    if (ch == '"') out.push_back('"');
    out.push_back(ch);
  }
  out.push_back('"');
  return out;
}

std::string format_number(double value) {
  if (std::isnan(value)) return "";
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

double parse_datetime(std::string_view text) {
  double numeric = 0.0;
  if (parse_double(text, numeric)) return numeric;
  auto digits = [&](std::size_t pos, std::size_t n, int& out) {
    if (pos + n > text.size()) return false;
    out = 0;
    for (std::size_t i = pos; i < pos + n; ++i) {
      if (text[i] < '0' || text[i] > '9') return false;
      out = out * 10 + (text[i] - '0');
    }
    return true;
  };
  int y, mo, d, h = 0, mi = 0, s = 0;
  double frac = 0.0;
  if (!digits(0, 4, y) || text.size() < 10 || text[4] != '-' ||
      !digits(5, 2, mo) || text[7] != '-' || !digits(8, 2, d) || mo < 1 ||
      mo > 12 || d < 1 || d > 31) {
    throw std::invalid_argument("not a date");
  }
  std::size_t pos = 10;
  if (pos < text.size() && (text[pos] == ' ' || text[pos] == 'T')) {
    if (!digits(pos + 1, 2, h) || pos + 3 >= text.size() ||
        text[pos + 3] != ':' || !digits(pos + 4, 2, mi) || h > 23 || mi > 59) {
      throw std::invalid_argument("bad time of day");
    }
    pos += 6;
    if (pos < text.size() && text[pos] == ':') {
      if (!digits(pos + 1, 2, s) || s > 60) {
        throw std::invalid_argument("bad seconds");
      }
      pos += 3;
      if (pos < text.size() && text[pos] == '.') {
        std::size_t end = pos + 1;
        while (end < text.size() && text[end] >= '0' && text[end] <= '9') ++end;
        if (!parse_double(std::string("0") + std::string(text.substr(pos, end - pos)),
                          frac)) {
          throw std::invalid_argument("bad fraction");
        }
        pos = end;
      }
    }
  }
  if (pos < text.size() && text[pos] == 'Z') ++pos;
  if (pos != text.size()) throw std::invalid_argument("trailing characters");
  const auto days = days_from_civil(y, static_cast<unsigned>(mo),
                                    static_cast<unsigned>(d));
  return static_cast<double>(days * 86400 + h * 3600 + mi * 60 + s) + frac;
}

std::string format_datetime(double seconds) {
  if (std::isnan(seconds)) return "";
  // Non-integral instants keep full precision as raw epoch seconds.
  if (seconds != std::floor(seconds) || std::fabs(seconds) > 1e14) {
    return format_number(seconds);
  }
  const auto total = static_cast<std::int64_t>(seconds);
  std::int64_t days = total / 86400;
  std::int64_t rem = total % 86400;
  if (rem < 0) {
    rem += 86400;
    --days;
  }
  std::int64_t y;
  unsigned m, d;
  civil_from_days(days, y, m, d);
  char buf[64];
  std::snprintf(buf, sizeof(buf), "%04lld-%02u-%02u %02lld:%02lld:%02lld",
                static_cast<long long>(y), m, d,
                static_cast<long long>(rem / 3600),
                static_cast<long long>((rem / 60) % 60),
                static_cast<long long>(rem % 60));
  return buf;
}

Database load_database(std::shared_ptr<const RelationalSchema> schema,
                       const std::string& directory) {
  namespace fs = std::filesystem;
  Database db(schema);
  for (const auto& spec : schema->tables()) {
    const fs::path path = fs::path(directory) / (spec.name + ".csv");
    std::ifstream in(path, std::ios::binary);
    if (!in) {
      fail(ErrorCode::kMissingFile,
           "missing table file '" + path.string() + "'");
    }
    std::stringstream buf;
    buf << in.rdbuf();
    std::vector<std::vector<std::string>> rows;
    try {
      rows = parse_csv(buf.str());
    } catch (const Error& e) {
      fail(ErrorCode::kParseError, path.string() + ": " + e.what());
    }
    if (rows.empty()) {
      fail(ErrorCode::kHeaderMismatch, path.string() + ": missing header row");
    }
    const auto& header = rows.front();
    std::vector<std::string> expected;
    for (const auto& c : spec.columns) expected.push_back(c.name);
    if (header != expected) {
      std::string want, got;
      for (const auto& h : expected) want += (want.empty() ? "" : ",") + h;
      for (const auto& h : header) got += (got.empty() ? "" : ",") + h;
      fail(ErrorCode::kHeaderMismatch, path.string() + ": header '" + got +
                                           "' does not match schema '" + want +
                                           "'");
    }
    Table table = make_empty_table(spec);
    for (std::size_t r = 1; r < rows.size(); ++r) {
      const auto& row = rows[r];
      if (row.size() != spec.columns.size()) {
        fail(ErrorCode::kParseError,
             path.string() + ": row " + std::to_string(r) + " has " +
                 std::to_string(row.size()) + " fields, expected " +
                 std::to_string(spec.columns.size()));
      }
      for (std::size_t c = 0; c < row.size(); ++c) {
        auto& col = table.columns[c];
        const std::string& cell = row[c];
        switch (col.kind) {
          case ColumnKind::kId:
            if (cell.empty()) {
              cell_error(spec.name, r - 1, col.name, cell, "empty id");
            }
            col.labels.push_back(cell);
            break;
          case ColumnKind::kCategorical:
            col.labels.push_back(cell);
            break;
          case ColumnKind::kNumerical:
          case ColumnKind::kInteger: {
            double v = std::nan("");
            if (!cell.empty()) {
              if (!parse_double(cell, v)) {
                cell_error(spec.name, r - 1, col.name, cell, "not a number");
              }
              if (col.kind == ColumnKind::kInteger && v != std::floor(v)) {
                cell_error(spec.name, r - 1, col.name, cell, "not an integer");
              }
            }
            col.numbers.push_back(v);
            break;
          }
          case ColumnKind::kDatetime: {
            double v = std::nan("");
            if (!cell.empty()) {
              try {
                v = parse_datetime(cell);
              } catch (const std::invalid_argument& e) {
                cell_error(spec.name, r - 1, col.name, cell, e.what());
              }
            }
            col.numbers.push_back(v);
            break;
          }
        }
      }
    }
    db.set_table(std::move(table));
  }
  return db;
}

void write_database(const Database& database, const std::string& directory) {
  namespace fs = std::filesystem;
  std::error_code ec;
  fs::create_directories(directory, ec);
  if (ec) {
    fail(ErrorCode::kIoError,
         "cannot create directory '" + directory + "': " + ec.message());
  }
  for (const auto& spec : database.schema().tables()) {
    const auto& table = database.table(spec.name);
    std::string out;
    for (std::size_t c = 0; c < table.columns.size(); ++c) {
      if (c) out.push_back(',');
      out += format_csv_field(table.columns[c].name);
    }
    out.push_back('\n');
    const std::size_t rows = table.row_count();
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t c = 0; c < table.columns.size(); ++c) {
        if (c) out.push_back(',');
        const auto& col = table.columns[c];
        if (col.kind == ColumnKind::kDatetime) {
          out += format_datetime(col.numbers[r]);
        } else if (is_continuous(col.kind)) {
          out += format_number(col.numbers[r]);
        } else {
          out += format_csv_field(col.labels[r]);
        }
      }
      out.push_back('\n');
    }
    const fs::path path = fs::path(directory) / (spec.name + ".csv");
    std::ofstream file(path, std::ios::binary | std::ios::trunc);
    file << out;
    if (!file) fail(ErrorCode::kIoError, "cannot write '" + path.string() + "'");
  }
}

std::vector<IntegrityViolation> check_referential_integrity(
    const Database& database) {
  std::vector<IntegrityViolation> out;
  for (const auto& fk : database.schema().relationships()) {
    const auto& parent = database.table(fk.parent_table).column(fk.parent_column);
    std::unordered_set<std::string> keys(parent.labels.begin(),
                                         parent.labels.end());
    const auto& child = database.table(fk.child_table).column(fk.child_column);
    for (std::size_t r = 0; r < child.labels.size(); ++r) {
      if (!keys.count(child.labels[r])) {
        out.push_back({fk.child_table, fk.child_column, r, child.labels[r]});
      }
    }
  }
  return out;
}

}  // namespace rctgan
