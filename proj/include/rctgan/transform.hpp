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
#include <random>
#include <span>
#include <string>
#include <variant>
#include <vector>

#include "json.hpp"
#include "rctgan/autodiff.hpp"
#include "rctgan/dataset.hpp"
#include "rctgan/mlp.hpp"
#include "rctgan/schema.hpp"

namespace rctgan {

using nn::Index;
using nn::Matrix;

// Continuous values are written as alpha = (x - mean) / (kScale * stddev) of
// the selected mixture mode, clipped to [-1, 1], followed by a one-hot mode
// indicator.
inline constexpr double kScale = 4.0;
inline constexpr double kPruneWeight = 0.005;
inline constexpr const char* kMissingCategory = "__missing__";

enum class ModeSelection {
  kSample,      // mode drawn with probability ~ weight * density
  kMostLikely,  // argmax responsibility, no randomness
};

struct MixtureComponent {
  double weight;
  double mean;
  double stddev;
};

class ContinuousEncoder {
 public:
  // EM-fitted Gaussian mixture with k-means++ initialization; the component
  // count in [1, max_modes] is chosen by BIC, then components lighter than
  // kPruneWeight are dropped. A constant column yields one degenerate mode.
  // Requires at least two finite values.
  static ContinuousEncoder fit(std::span<const double> values, int max_modes,
                               std::uint64_t seed);
  // Single-mode encoder used when a column has too few values to fit.
  static ContinuousEncoder degenerate(double value);

  const std::vector<MixtureComponent>& components() const { return modes_; }
  bool is_degenerate() const { return degenerate_; }
  // Replaces missing values before encoding (the fitted column mean).
  double fill_value() const { return fill_; }
  Index width() const { return 1 + static_cast<Index>(modes_.size()); }

  void encode(double value, ModeSelection selection, nn::Rng& rng,
              std::span<double> out) const;
  // Picks the argmax mode (lowest index on ties) and inverts the alpha.
  double decode(std::span<const double> in) const;

  nlohmann::json to_json() const;
  static ContinuousEncoder from_json(const nlohmann::json& j);

 private:
  std::vector<MixtureComponent> modes_;
  double fill_ = 0.0;
  bool degenerate_ = false;
};

class DiscreteEncoder {
 public:
  // Categories sorted lexicographically; empty strings count as the
  // dedicated missing category.
  static DiscreteEncoder fit(std::span<const std::string> values);

  const std::vector<std::string>& categories() const { return categories_; }
  const std::vector<double>& frequencies() const { return frequencies_; }
  Index width() const { return static_cast<Index>(categories_.size()); }
  std::size_t index_of(const std::string& value) const;

  void encode(const std::string& value, std::span<double> out) const;
  // Argmax, lowest index on ties. Returns "" for the missing category.
  std::string decode(std::span<const double> in) const;
  std::string decode_index(std::size_t index) const;

  nlohmann::json to_json() const;
  static DiscreteEncoder from_json(const nlohmann::json& j);

 private:
  std::vector<std::string> categories_;
  std::vector<double> frequencies_;
};

enum class SpanKind { kContinuous, kDiscrete };

struct ColumnSpan {
  std::size_t column;  // index into the TableSpec columns
  std::string name;
  ColumnKind kind;
  Index offset;
  Index width;
  SpanKind span_kind;
};

struct RowLayout {
  std::vector<ColumnSpan> spans;
  Index width = 0;
};

// Encoders for every feature column of one table plus the layout they induce.
class TableEncoder {
 public:
  TableEncoder() = default;
  static TableEncoder fit(const TableSpec& spec, const Table& table,
                          int max_modes, std::uint64_t seed);

  const RowLayout& layout() const { return layout_; }
  const std::string& table_name() const { return table_; }
  Index width() const { return layout_.width; }

  // rows x width matrix.
  Matrix encode(const Table& table, ModeSelection selection,
                nn::Rng& rng) const;
  std::vector<double> encode_row(const Table& table, std::size_t row,
                                 ModeSelection selection, nn::Rng& rng) const;
  // Fills the feature columns of `into` (which must have the TableSpec
  // columns) from encoded rows; id columns are left untouched. Throws
  // kWidthMismatch.
  void decode(const Matrix& encoded, Table& into) const;

  // Generator output activations matching the layout: tanh on alphas,
  // softmax on every one-hot span.
  std::vector<nn::ActivationSpan> activation_spans() const;
  // Spans of the discrete (categorical) columns, for the training condition.
  std::vector<const ColumnSpan*> discrete_spans() const;
  const DiscreteEncoder& discrete(std::size_t span_index) const;
  const ContinuousEncoder& continuous(std::size_t span_index) const;

  nlohmann::json to_json() const;
  static TableEncoder from_json(const nlohmann::json& j,
                                const TableSpec& spec);

 private:
  void build_layout(const TableSpec& spec);

  std::string table_;
  std::vector<std::variant<ContinuousEncoder, DiscreteEncoder>> encoders_;
  RowLayout layout_;
};

struct ConditionSlot {
  AncestorPath path;
  Index offset;
  Index width;
};

struct ConditionLayout {
  std::vector<ConditionSlot> slots;
  Index width = 0;
};

using EncoderLookup =
    std::function<const TableEncoder&(const std::string& table)>;

ConditionLayout make_condition_layout(const RelationalSchema& schema,
                                      const std::string& table, int max_depth,
                                      const EncoderLookup& encoders);

// Concatenates one encoded ancestor row per slot. Throws
// kMissingAncestorRow when a slot has no row and kWidthMismatch when a row
// has the wrong width.
std::vector<double> build_condition(
    const ConditionLayout& layout,
    const std::vector<std::vector<double>>& slot_rows);

// For each slot, the ancestor row index reached from each row of `child`
// (a table shaped like the layout's table, not necessarily stored in `db`).
std::vector<std::vector<std::size_t>> resolve_ancestor_rows(
    const Database& db, const Table& child, const ConditionLayout& layout);

// Condition matrix (child rows x layout width). Ancestor rows are encoded
// with ModeSelection::kMostLikely.
Matrix build_conditions(const ConditionLayout& layout, const Database& db,
                        const Table& child, const EncoderLookup& encoders);

nlohmann::json to_json(const AncestorPath& path);
AncestorPath ancestor_path_from_json(const nlohmann::json& j);

}  // namespace rctgan
