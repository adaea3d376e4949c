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

#include <cstdint>
#include <functional>
#include <map>
#include <memory>
#include <string>
#include <vector>

#include "rctgan/dataset.hpp"
#include "rctgan/schema.hpp"
#include "rctgan/table_gan.hpp"

namespace rctgan {

// Empirical distribution of the number of child rows per parent row.
class CardinalityModel {
 public:
  CardinalityModel() = default;
  // One entry per parent row; zero counts are kept.
  static CardinalityModel fit(const std::vector<std::size_t>& counts);

  const std::map<std::size_t, double>& histogram() const { return histogram_; }
  double mean() const;
  std::size_t sample(nn::Rng& rng) const;

  nlohmann::json to_json() const;
  static CardinalityModel from_json(const nlohmann::json& j);

 private:
  std::map<std::size_t, double> histogram_;
};

// How the foreign keys of a table with several parents are filled when
// sampling: child counts follow the driver relationship, every other foreign
// key points at a uniformly drawn synthetic row of its parent.
struct PairingModel {
  ForeignKey driver;
  std::vector<ForeignKey> others;
};

struct DatabaseModel {
  static constexpr std::uint32_t kFormatVersion = 1;

  std::shared_ptr<const RelationalSchema> schema;
  TrainConfig config;
  std::uint64_t seed = 0;
  std::map<std::string, std::size_t> row_counts;
  std::map<std::string, TableGan> tables;
  // Aligned with schema->relationships().
  std::vector<CardinalityModel> cardinality;
  std::map<std::string, PairingModel> pairing;

  const TableGan& table(const std::string& name) const;
};

struct FitOptions {
  EpochCallback on_epoch;  // called under a lock when tables train in parallel
  int threads = 1;
};

// Throws kIntegrityViolation before training when the data has dangling
// foreign keys, plus anything fit_table raises.
DatabaseModel fit_database(const Database& database, const TrainConfig& config,
                           std::uint64_t seed, const FitOptions& options = {});

// Tables are generated in topological order; `on_table` fires once per
// table just before it is generated. Throws kInvalidArgument unless
// scale > 0.
Database sample_database(const DatabaseModel& model, double scale,
                         std::uint64_t seed,
                         const std::function<void(const std::string&)>& on_table = {});

// File layout: "RCTG", format version as 4 little-endian bytes, CBOR payload.
void save_model(const DatabaseModel& model, const std::string& path);
// Throws kMissingFile, kCorruptFile or kVersionMismatch.
DatabaseModel load_model(const std::string& path);

std::vector<std::uint8_t> serialize_model(const DatabaseModel& model);
DatabaseModel deserialize_model(const std::vector<std::uint8_t>& bytes);

}  // namespace rctgan
