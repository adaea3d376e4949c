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

#include "rctgan/synthesizer.hpp"

#include <atomic>
#include <cmath>
#include <fstream>
#include <iterator>
#include <mutex>
#include <thread>
#include <unordered_map>

#include "rctgan/error.hpp"

namespace rctgan {

namespace {

constexpr char kMagic[4] = {'R', 'C', 'T', 'G'};

// splitmix64 finalizer; gives independent per-table streams from one seed.
std::uint64_t mix(std::uint64_t x) {
  x += 0x9e3779b97f4a7c15ULL;
  x = (x ^ (x >> 30)) * 0xbf58476d1ce4e5b9ULL;
  x = (x ^ (x >> 27)) * 0x94d049bb133111ebULL;
  return x ^ (x >> 31);
}

std::uint64_t stream_seed(std::uint64_t seed, std::size_t index, std::uint64_t salt) {
  return mix(mix(seed ^ salt) + index);
}

int effective_depth(const TrainConfig& config) {
  return config.condition_on_ancestors ? config.max_depth : 0;
}

std::size_t relationship_index(const RelationalSchema& schema, const ForeignKey& fk) {
  const auto& rels = schema.relationships();
  for (std::size_t i = 0; i < rels.size(); ++i) {
    if (rels[i].child_table == fk.child_table && rels[i].child_column == fk.child_column) return i;
  }
  fail(ErrorCode::kUnknownReference, "relationship " + fk.child_table + "." + fk.child_column +
                                         " is not in the schema");
}

std::string number_label(std::size_t i) { return std::to_string(i + 1); }

}  // namespace

CardinalityModel CardinalityModel::fit(const std::vector<std::size_t>& counts) {
  CardinalityModel m;
  if (counts.empty()) {
    m.histogram_[0] = 1.0;
    return m;
  }
  std::map<std::size_t, std::size_t> tally;
  for (auto c : counts) ++tally[c];
  for (const auto& [k, n] : tally) {
    m.histogram_[k] = static_cast<double>(n) / static_cast<double>(counts.size());
  }
  return m;
}

double CardinalityModel::mean() const {
  double total = 0.0;
  for (const auto& [k, p] : histogram_) total += static_cast<double>(k) * p;
  return total;
}

std::size_t CardinalityModel::sample(nn::Rng& rng) const {
  std::vector<std::size_t> support;
  std::vector<double> weights;
  for (const auto& [k, p] : histogram_) {
    support.push_back(k);
    weights.push_back(p);
  }
  std::discrete_distribution<std::size_t> pick(weights.begin(), weights.end());
  return support[pick(rng)];
}

nlohmann::json CardinalityModel::to_json() const {
  nlohmann::json j = nlohmann::json::array();
  for (const auto& [k, p] : histogram_) j.push_back({k, p});
  return j;
}

CardinalityModel CardinalityModel::from_json(const nlohmann::json& j) {
  CardinalityModel m;
  for (const auto& entry : j) {
    m.histogram_[entry.at(0).get<std::size_t>()] = entry.at(1).get<double>();
  }
  if (m.histogram_.empty()) fail(ErrorCode::kCorruptFile, "empty cardinality histogram");
  return m;
}

const TableGan& DatabaseModel::table(const std::string& name) const {
  auto it = tables.find(name);
  if (it == tables.end()) fail(ErrorCode::kUnknownTable, "model has no table '" + name + "'");
  return it->second;
}

DatabaseModel fit_database(const Database& database, const TrainConfig& config,
                           std::uint64_t seed, const FitOptions& options) {
  config.validate();
  const auto violations = check_referential_integrity(database);
  if (!violations.empty()) {
    const auto& v = violations.front();
    fail(ErrorCode::kIntegrityViolation,
         std::to_string(violations.size()) + " referential-integrity violation(s); first: table '" +
             v.child_table + "', column '" + v.column + "', row " + std::to_string(v.row + 1) +
             ", value '" + v.value + "'");
  }
  const auto& schema = database.schema();
  DatabaseModel model;
  model.schema = database.schema_ptr();
  model.config = config;
  model.seed = seed;
  const auto& order = schema.topological_order();

  // Encoders first: conditions need every ancestor's encoder.
  std::map<std::string, TableEncoder> encoders;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& name = order[i];
    model.row_counts[name] = database.table(name).row_count();
    encoders[name] = TableEncoder::fit(schema.table(name), database.table(name), config.max_modes,
                                       stream_seed(seed, i, 1));
  }
  const EncoderLookup lookup = [&](const std::string& t) -> const TableEncoder& {
    return encoders.at(t);
  };

  struct Job {
    std::string name;
    std::unique_ptr<TableGan> gan;
    Matrix encoded;
    Matrix conditions;
  };
  std::vector<Job> jobs;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& name = order[i];
    const Table& table = database.table(name);
    auto layout = make_condition_layout(schema, name, effective_depth(config), lookup);
    Job job;
    job.name = name;
    nn::Rng rng(stream_seed(seed, i, 2));
    job.encoded = encoders.at(name).encode(table, ModeSelection::kSample, rng);
    job.conditions = build_conditions(layout, database, table, lookup);
    job.gan = std::make_unique<TableGan>(encoders.at(name), std::move(layout), config,
                                         stream_seed(seed, i, 3));
    jobs.push_back(std::move(job));
  }

  std::mutex log_mutex;
  const EpochCallback on_epoch = [&](const EpochLog& log) {
    if (!options.on_epoch) return;
    std::lock_guard<std::mutex> lock(log_mutex);
    options.on_epoch(log);
  };
  const std::size_t workers =
      std::min<std::size_t>(jobs.size(), static_cast<std::size_t>(std::max(1, options.threads)));
  if (workers <= 1) {
    for (auto& job : jobs) job.gan->fit(job.encoded, job.conditions, on_epoch);
  } else {
    std::atomic<std::size_t> next{0};
    std::vector<std::exception_ptr> errors(jobs.size());
    std::vector<std::thread> pool;
    for (std::size_t w = 0; w < workers; ++w) {
      pool.emplace_back([&] {
        for (std::size_t j = next++; j < jobs.size(); j = next++) {
          try {
            jobs[j].gan->fit(jobs[j].encoded, jobs[j].conditions, on_epoch);
          } catch (...) {
            errors[j] = std::current_exception();
          }
        }
      });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
      if (e) std::rethrow_exception(e);
    }
  }
  for (auto& job : jobs) model.tables.emplace(job.name, std::move(*job.gan));

  for (const auto& fk : schema.relationships()) {
    const Table& parent = database.table(fk.parent_table);
    const Table& child = database.table(fk.child_table);
    std::unordered_map<std::string, std::size_t> counts;
    for (const auto& key : parent.column(fk.parent_column).labels) counts[key] = 0;
    for (const auto& key : child.column(fk.child_column).labels) ++counts[key];
    std::vector<std::size_t> per_parent;
    for (const auto& key : parent.column(fk.parent_column).labels) per_parent.push_back(counts[key]);
    model.cardinality.push_back(CardinalityModel::fit(per_parent));
  }
  for (const auto& spec : schema.tables()) {
    const auto fks = schema.foreign_keys_of(spec.name);
    if (fks.size() < 2) continue;
    PairingModel pairing{fks.front(), {fks.begin() + 1, fks.end()}};
    model.pairing.emplace(spec.name, std::move(pairing));
  }
  return model;
}

Database sample_database(const DatabaseModel& model, double scale, std::uint64_t seed,
                         const std::function<void(const std::string&)>& on_table) {
  if (!(scale > 0.0) || !std::isfinite(scale)) {
    fail(ErrorCode::kInvalidArgument, "scale must be a positive finite number");
  }
  const auto& schema = *model.schema;
  Database out(model.schema);
  const EncoderLookup lookup = [&](const std::string& t) -> const TableEncoder& {
    return model.table(t).encoder();
  };
  const auto& order = schema.topological_order();
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& name = order[i];
    if (on_table) on_table(name);
    const TableSpec& spec = schema.table(name);
    const TableGan& gan = model.table(name);
    nn::Rng rng(stream_seed(seed, i, 4));
    const auto fks = schema.foreign_keys_of(name);

    // Row skeleton: foreign keys first, features afterwards.
    std::size_t rows = 0;
    std::map<std::string, std::vector<std::string>> keys;
    if (fks.empty()) {
      rows = static_cast<std::size_t>(
          std::llround(scale * static_cast<double>(model.row_counts.at(name))));
    } else {
      const ForeignKey& driver = fks.front();
      const auto& cardinality = model.cardinality.at(relationship_index(schema, driver));
      const auto& parent_keys = out.table(driver.parent_table).column(driver.parent_column).labels;
      auto& column = keys[driver.child_column];
      for (const auto& key : parent_keys) {
        const std::size_t n = cardinality.sample(rng);
        column.insert(column.end(), n, key);
      }
      rows = column.size();
      for (std::size_t f = 1; f < fks.size(); ++f) {
        const auto& parent_keys_f = out.table(fks[f].parent_table).column(fks[f].parent_column).labels;
        auto& col = keys[fks[f].child_column];
        if (parent_keys_f.empty()) {
          // No parent rows to point at, so this child cannot have rows either.
          rows = 0;
          break;
        }
        std::uniform_int_distribution<std::size_t> pick(0, parent_keys_f.size() - 1);
        col.resize(rows);
        for (auto& k : col) k = parent_keys_f[pick(rng)];
      }
    }

    Table table = make_empty_table(spec);
    for (auto& col : table.columns) {
      if (col.kind != ColumnKind::kId) continue;
      auto it = keys.find(col.name);
      if (it != keys.end()) {
        col.labels = it->second;
        col.labels.resize(rows);
      } else {
        col.labels.resize(rows);
        for (std::size_t r = 0; r < rows; ++r) col.labels[r] = number_label(r);
      }
    }
    // Feature columns need the right length before conditions are resolved.
    for (auto& col : table.columns) {
      if (col.kind == ColumnKind::kId) continue;
      if (col.kind == ColumnKind::kCategorical) {
        col.labels.assign(rows, "");
      } else {
        col.numbers.assign(rows, 0.0);
      }
    }
    const Matrix conditions = build_conditions(gan.condition_layout(), out, table, lookup);
    gan.encoder().decode(gan.sample_encoded(conditions, stream_seed(seed, i, 5)), table);
    out.set_table(std::move(table));
  }
  return out;
}

std::vector<std::uint8_t> serialize_model(const DatabaseModel& model) {
  nlohmann::json tables = nlohmann::json::object();
  for (const auto& [name, gan] : model.tables) tables[name] = gan.to_json();
  nlohmann::json cardinality = nlohmann::json::array();
  for (const auto& c : model.cardinality) cardinality.push_back(c.to_json());
  const nlohmann::json payload{{"schema", model.schema->to_json()},
                               {"config", model.config.to_json()},
                               {"seed", model.seed},
                               {"row_counts", model.row_counts},
                               {"tables", tables},
                               {"cardinality", cardinality}};
  std::vector<std::uint8_t> bytes(kMagic, kMagic + 4);
  for (int b = 0; b < 4; ++b) {
    bytes.push_back(static_cast<std::uint8_t>((DatabaseModel::kFormatVersion >> (8 * b)) & 0xff));
  }
  const auto body = nlohmann::json::to_cbor(payload);
  bytes.insert(bytes.end(), body.begin(), body.end());
  return bytes;
}

DatabaseModel deserialize_model(const std::vector<std::uint8_t>& bytes) {
  if (bytes.size() < 8 || !std::equal(kMagic, kMagic + 4, bytes.begin())) {
    fail(ErrorCode::kCorruptFile, "not an rctgan model file (bad magic bytes)");
  }
  std::uint32_t version = 0;
  for (int b = 0; b < 4; ++b) version |= static_cast<std::uint32_t>(bytes[4 + b]) << (8 * b);
  if (version != DatabaseModel::kFormatVersion) {
    fail(ErrorCode::kVersionMismatch, "model format version " + std::to_string(version) +
                                          " is not supported (expected " +
                                          std::to_string(DatabaseModel::kFormatVersion) + ")");
  }
  try {
    const auto payload = nlohmann::json::from_cbor(bytes.begin() + 8, bytes.end());
    DatabaseModel model;
    model.schema = std::make_shared<const RelationalSchema>(
        RelationalSchema::from_json(payload.at("schema").get<std::string>()));
    model.config = TrainConfig::from_json(payload.at("config"));
    model.seed = payload.at("seed").get<std::uint64_t>();
    model.row_counts = payload.at("row_counts").get<std::map<std::string, std::size_t>>();
    for (const auto& spec : model.schema->tables()) {
      model.tables.emplace(spec.name,
                           TableGan::from_json(payload.at("tables").at(spec.name), spec));
      if (!model.row_counts.count(spec.name)) {
        fail(ErrorCode::kCorruptFile, "missing row count for table '" + spec.name + "'");
      }
    }
    for (const auto& c : payload.at("cardinality")) {
      model.cardinality.push_back(CardinalityModel::from_json(c));
    }
    if (model.cardinality.size() != model.schema->relationships().size()) {
      fail(ErrorCode::kCorruptFile, "cardinality models do not match the relationships");
    }
    for (const auto& spec : model.schema->tables()) {
      const auto fks = model.schema->foreign_keys_of(spec.name);
      if (fks.size() < 2) continue;
      model.pairing.emplace(spec.name, PairingModel{fks.front(), {fks.begin() + 1, fks.end()}});
    }
    return model;
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kCorruptFile, std::string("model payload is unreadable: ") + e.what());
  } catch (const Error& e) {
    if (e.code() == ErrorCode::kCorruptFile) throw;
    fail(ErrorCode::kCorruptFile, std::string("model payload is invalid: ") + e.what());
  }
}

void save_model(const DatabaseModel& model, const std::string& path) {
  const auto bytes = serialize_model(model);
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) fail(ErrorCode::kIoError, "cannot open '" + path + "' for writing");
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  if (!out) fail(ErrorCode::kIoError, "failed writing '" + path + "'");
}

DatabaseModel load_model(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) fail(ErrorCode::kMissingFile, "cannot open model file '" + path + "'");
  const std::vector<std::uint8_t> bytes((std::istreambuf_iterator<char>(in)),
                                        std::istreambuf_iterator<char>());
  return deserialize_model(bytes);
}

}  // namespace rctgan
