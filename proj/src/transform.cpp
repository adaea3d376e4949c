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

#include "rctgan/transform.hpp"

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <set>
#include <unordered_map>

#include "rctgan/error.hpp"

namespace rctgan {

namespace {

constexpr double kLogSqrt2Pi = 0.91893853320467274178;

double log_normal(double x, double mean, double stddev) {
  const double z = (x - mean) / stddev;
  return -0.5 * z * z - std::log(stddev) - kLogSqrt2Pi;
}

struct EmResult {
  std::vector<MixtureComponent> components;
  double log_likelihood = -std::numeric_limits<double>::infinity();
};

EmResult run_em(const std::vector<double>& x, int k, double var_floor,
                std::uint64_t seed) {
  const std::size_t n = x.size();
  nn::Rng rng(seed);

  // k-means++ seeding.
  std::vector<double> centers;
  centers.push_back(x[std::uniform_int_distribution<std::size_t>(0, n - 1)(rng)]);
  std::vector<double> d2(n);
  while (static_cast<int>(centers.size()) < k) {
    double total = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double best = std::numeric_limits<double>::infinity();
      for (double c : centers) best = std::min(best, (x[i] - c) * (x[i] - c));
      d2[i] = best;
      total += best;
    }
    if (total <= 0.0) break;
    double pick = std::uniform_real_distribution<double>(0.0, total)(rng);
    std::size_t chosen = n - 1;
    for (std::size_t i = 0; i < n; ++i) {
      pick -= d2[i];
      if (pick <= 0.0 && d2[i] > 0.0) {
        chosen = i;
        break;
      }
    }
    centers.push_back(x[chosen]);
  }
  k = static_cast<int>(centers.size());

  std::vector<double> resp(n * static_cast<std::size_t>(k), 0.0);
  for (std::size_t i = 0; i < n; ++i) {
    int best = 0;
    for (int j = 1; j < k; ++j) {
      if (std::fabs(x[i] - centers[j]) < std::fabs(x[i] - centers[best])) best = j;
    }
    resp[i * k + best] = 1.0;
  }

  std::vector<MixtureComponent> comp(k);
  auto m_step = [&] {
    for (int j = 0; j < k; ++j) {
      double nk = 0.0, sx = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        nk += resp[i * k + j];
        sx += resp[i * k + j] * x[i];
      }
      if (nk < 1e-12) {
        comp[j] = {0.0, centers[j], std::sqrt(var_floor)};
        continue;
      }
      const double mu = sx / nk;
      double sv = 0.0;
      for (std::size_t i = 0; i < n; ++i) {
        sv += resp[i * k + j] * (x[i] - mu) * (x[i] - mu);
      }
      comp[j] = {nk / static_cast<double>(n), mu,
                 std::sqrt(std::max(sv / nk, var_floor))};
    }
  };

  m_step();
  EmResult result;
  double previous = -std::numeric_limits<double>::infinity();
  std::vector<double> logp(k);
  for (int iter = 0; iter < 100; ++iter) {
    double ll = 0.0;
    for (std::size_t i = 0; i < n; ++i) {
      double mx = -std::numeric_limits<double>::infinity();
      for (int j = 0; j < k; ++j) {
        logp[j] = comp[j].weight > 0.0
                      ? std::log(comp[j].weight) +
                            log_normal(x[i], comp[j].mean, comp[j].stddev)
                      : -std::numeric_limits<double>::infinity();
        mx = std::max(mx, logp[j]);
      }
      double s = 0.0;
      for (int j = 0; j < k; ++j) s += std::exp(logp[j] - mx);
      const double lse = mx + std::log(s);
      ll += lse;
      for (int j = 0; j < k; ++j) resp[i * k + j] = std::exp(logp[j] - lse);
    }
    result.components = comp;
    result.log_likelihood = ll;
    if (std::fabs(ll - previous) / static_cast<double>(n) < 1e-6) break;
    previous = ll;
    m_step();
  }
  return result;
}

}  // namespace

ContinuousEncoder ContinuousEncoder::degenerate(double value) {
  ContinuousEncoder enc;
  enc.degenerate_ = true;
  enc.fill_ = value;
  enc.modes_ = {{1.0, value, std::max(std::fabs(value), 1.0) * 1e-6}};
  return enc;
}

ContinuousEncoder ContinuousEncoder::fit(std::span<const double> values,
                                         int max_modes, std::uint64_t seed) {
  if (max_modes < 1) {
    fail(ErrorCode::kInvalidArgument, "max_modes must be at least 1");
  }
  std::vector<double> x;
  for (double v : values) {
    if (std::isfinite(v)) x.push_back(v);
  }
  if (x.size() < 2) {
    fail(ErrorCode::kInvalidArgument,
         "mixture fit needs at least two finite values");
  }
  const double n = static_cast<double>(x.size());
  const double mu = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double var = 0.0;
  for (double v : x) var += (v - mu) * (v - mu);
  var /= n;
  const auto [lo, hi] = std::minmax_element(x.begin(), x.end());
  if (*hi - *lo <= 1e-12 * std::max(std::fabs(mu), 1.0)) {
    return degenerate(mu);
  }

  const std::set<double> distinct(x.begin(), x.end());
  const int k_max = std::min<int>(max_modes, static_cast<int>(distinct.size()));
  const double var_floor = std::max(1e-6 * var, 1e-300);

  EmResult best;
  double best_bic = std::numeric_limits<double>::infinity();
  for (int k = 1; k <= k_max; ++k) {
    EmResult r = run_em(x, k, var_floor, seed + static_cast<std::uint64_t>(k));
    const double params = 3.0 * static_cast<double>(r.components.size()) - 1.0;
    const double bic = -2.0 * r.log_likelihood + params * std::log(n);
    if (bic < best_bic) {
      best_bic = bic;
      best = std::move(r);
    }
  }

  ContinuousEncoder enc;
  enc.fill_ = mu;
  for (const auto& c : best.components) {
    if (c.weight >= kPruneWeight) enc.modes_.push_back(c);
  }
  if (enc.modes_.empty()) enc.modes_.push_back({1.0, mu, std::sqrt(var)});
  double total = 0.0;
  for (const auto& c : enc.modes_) total += c.weight;
  for (auto& c : enc.modes_) c.weight /= total;
  std::sort(enc.modes_.begin(), enc.modes_.end(),
            [](const auto& a, const auto& b) { return a.mean < b.mean; });
  return enc;
}

void ContinuousEncoder::encode(double value, ModeSelection selection,
                               nn::Rng& rng, std::span<double> out) const {
  if (static_cast<Index>(out.size()) != width()) {
    fail(ErrorCode::kWidthMismatch, "continuous span width mismatch");
  }
  const double x = std::isfinite(value) ? value : fill_;
  const std::size_t k = modes_.size();
  std::vector<double> logp(k);
  double mx = -std::numeric_limits<double>::infinity();
  for (std::size_t j = 0; j < k; ++j) {
    logp[j] = std::log(modes_[j].weight) +
              log_normal(x, modes_[j].mean, modes_[j].stddev);
    mx = std::max(mx, logp[j]);
  }
  std::size_t mode = 0;
  if (!std::isfinite(mx)) {
    // Every density underflowed: fall back to the closest mode.
    for (std::size_t j = 1; j < k; ++j) {
      if (std::fabs(x - modes_[j].mean) / modes_[j].stddev <
          std::fabs(x - modes_[mode].mean) / modes_[mode].stddev) {
        mode = j;
      }
    }
  } else if (selection == ModeSelection::kMostLikely || k == 1) {
    mode = static_cast<std::size_t>(
        std::max_element(logp.begin(), logp.end()) - logp.begin());
  } else {
    std::vector<double> p(k);
    for (std::size_t j = 0; j < k; ++j) p[j] = std::exp(logp[j] - mx);
    std::discrete_distribution<std::size_t> pick(p.begin(), p.end());
    mode = pick(rng);
  }
  const auto& c = modes_[mode];
  out[0] = std::clamp((x - c.mean) / (kScale * c.stddev), -1.0, 1.0);
  std::fill(out.begin() + 1, out.end(), 0.0);
  out[1 + mode] = 1.0;
}

double ContinuousEncoder::decode(std::span<const double> in) const {
  if (static_cast<Index>(in.size()) != width()) {
    fail(ErrorCode::kWidthMismatch, "continuous span width mismatch");
  }
  const auto mode = static_cast<std::size_t>(
      std::max_element(in.begin() + 1, in.end()) - (in.begin() + 1));
  const auto& c = modes_[mode];
  if (degenerate_) return c.mean;
  const double alpha = std::clamp(in[0], -1.0, 1.0);
  return alpha * kScale * c.stddev + c.mean;
}

nlohmann::json ContinuousEncoder::to_json() const {
  nlohmann::json modes = nlohmann::json::array();
  for (const auto& c : modes_) modes.push_back({c.weight, c.mean, c.stddev});
  return {{"type", "continuous"},
          {"modes", modes},
          {"fill", fill_},
          {"degenerate", degenerate_}};
}

ContinuousEncoder ContinuousEncoder::from_json(const nlohmann::json& j) {
  ContinuousEncoder enc;
  for (const auto& m : j.at("modes")) {
    enc.modes_.push_back(
        {m.at(0).get<double>(), m.at(1).get<double>(), m.at(2).get<double>()});
  }
  enc.fill_ = j.at("fill").get<double>();
  enc.degenerate_ = j.at("degenerate").get<bool>();
  if (enc.modes_.empty()) {
    fail(ErrorCode::kCorruptFile, "continuous encoder without modes");
  }
  return enc;
}

DiscreteEncoder DiscreteEncoder::fit(std::span<const std::string> values) {
  std::map<std::string, std::size_t> counts;
  for (const auto& v : values) ++counts[v.empty() ? kMissingCategory : v];
  DiscreteEncoder enc;
  for (const auto& [cat, count] : counts) {
    enc.categories_.push_back(cat);
    enc.frequencies_.push_back(static_cast<double>(count) /
                               static_cast<double>(values.size()));
  }
  if (enc.categories_.empty()) {
    enc.categories_.push_back(kMissingCategory);
    enc.frequencies_.push_back(1.0);
  }
  return enc;
}

std::size_t DiscreteEncoder::index_of(const std::string& value) const {
  const std::string& key = value.empty() ? std::string(kMissingCategory) : value;
  auto it = std::lower_bound(categories_.begin(), categories_.end(), key);
  if (it == categories_.end() || *it != key) {
    fail(ErrorCode::kInvalidArgument, "category '" + value + "' was not seen when fitting");
  }
  return static_cast<std::size_t>(it - categories_.begin());
}

void DiscreteEncoder::encode(const std::string& value,
                             std::span<double> out) const {
  if (static_cast<Index>(out.size()) != width()) {
    fail(ErrorCode::kWidthMismatch, "categorical span width mismatch");
  }
  std::fill(out.begin(), out.end(), 0.0);
  out[index_of(value)] = 1.0;
}

std::string DiscreteEncoder::decode(std::span<const double> in) const {
  if (static_cast<Index>(in.size()) != width()) {
    fail(ErrorCode::kWidthMismatch, "categorical span width mismatch");
  }
  return decode_index(static_cast<std::size_t>(
      std::max_element(in.begin(), in.end()) - in.begin()));
}

std::string DiscreteEncoder::decode_index(std::size_t index) const {
  const auto& cat = categories_.at(index);
  return cat == kMissingCategory ? std::string() : cat;
}

nlohmann::json DiscreteEncoder::to_json() const {
  return {{"type", "discrete"},
          {"categories", categories_},
          {"frequencies", frequencies_}};
}

DiscreteEncoder DiscreteEncoder::from_json(const nlohmann::json& j) {
  DiscreteEncoder enc;
  enc.categories_ = j.at("categories").get<std::vector<std::string>>();
  enc.frequencies_ = j.at("frequencies").get<std::vector<double>>();
  if (enc.categories_.empty() ||
      enc.categories_.size() != enc.frequencies_.size()) {
    fail(ErrorCode::kCorruptFile, "malformed categorical encoder");
  }
  return enc;
}

TableEncoder TableEncoder::fit(const TableSpec& spec, const Table& table,
                               int max_modes, std::uint64_t seed) {
  TableEncoder enc;
  enc.table_ = spec.name;
  for (auto c : spec.feature_columns()) {
    const auto& col = table.columns.at(c);
    if (is_continuous(col.kind)) {
      std::size_t finite = 0;
      double total = 0.0;
      for (double v : col.numbers) {
        if (std::isfinite(v)) {
          ++finite;
          total += v;
        }
      }
      if (finite >= 2) {
        enc.encoders_.emplace_back(
            ContinuousEncoder::fit(col.numbers, max_modes, seed + c));
      } else {
        enc.encoders_.emplace_back(ContinuousEncoder::degenerate(
            finite ? total / static_cast<double>(finite) : 0.0));
      }
    } else {
      enc.encoders_.emplace_back(DiscreteEncoder::fit(col.labels));
    }
  }
  enc.build_layout(spec);
  return enc;
}

void TableEncoder::build_layout(const TableSpec& spec) {
  layout_ = {};
  const auto features = spec.feature_columns();
  if (features.size() != encoders_.size()) {
    fail(ErrorCode::kCorruptFile, "encoder count does not match table '" +
                                      spec.name + "'");
  }
  Index offset = 0;
  for (std::size_t i = 0; i < features.size(); ++i) {
    const auto& col = spec.columns[features[i]];
    const bool cont = std::holds_alternative<ContinuousEncoder>(encoders_[i]);
    if (cont != is_continuous(col.kind)) {
      fail(ErrorCode::kCorruptFile,
           "encoder kind does not match column '" + col.name + "'");
    }
    const Index width =
        cont ? std::get<ContinuousEncoder>(encoders_[i]).width()
             : std::get<DiscreteEncoder>(encoders_[i]).width();
    layout_.spans.push_back({features[i], col.name, col.kind, offset, width,
                             cont ? SpanKind::kContinuous : SpanKind::kDiscrete});
    offset += width;
  }
  layout_.width = offset;
}

std::vector<double> TableEncoder::encode_row(const Table& table,
                                             std::size_t row,
                                             ModeSelection selection,
                                             nn::Rng& rng) const {
  std::vector<double> out(static_cast<std::size_t>(layout_.width));
  for (std::size_t i = 0; i < layout_.spans.size(); ++i) {
    const auto& span = layout_.spans[i];
    const auto& col = table.columns.at(span.column);
    std::span<double> dest(out.data() + span.offset,
                           static_cast<std::size_t>(span.width));
    if (span.span_kind == SpanKind::kContinuous) {
      std::get<ContinuousEncoder>(encoders_[i])
          .encode(col.numbers.at(row), selection, rng, dest);
    } else {
      std::get<DiscreteEncoder>(encoders_[i]).encode(col.labels.at(row), dest);
    }
  }
  return out;
}

Matrix TableEncoder::encode(const Table& table, ModeSelection selection,
                            nn::Rng& rng) const {
  const std::size_t rows = table.row_count();
  Matrix out(static_cast<Index>(rows), layout_.width);
  for (std::size_t r = 0; r < rows; ++r) {
    const auto row = encode_row(table, r, selection, rng);
    for (Index c = 0; c < layout_.width; ++c) out(static_cast<Index>(r), c) = row[c];
  }
  return out;
}

void TableEncoder::decode(const Matrix& encoded, Table& into) const {
  if (encoded.cols() != layout_.width) {
    fail(ErrorCode::kWidthMismatch,
         "table '" + table_ + "' rows have width " + std::to_string(encoded.cols()) +
             ", layout expects " + std::to_string(layout_.width));
  }
  const auto rows = static_cast<std::size_t>(encoded.rows());
  for (std::size_t i = 0; i < layout_.spans.size(); ++i) {
    const auto& span = layout_.spans[i];
    auto& col = into.columns.at(span.column);
    col.numbers.clear();
    col.labels.clear();
    for (std::size_t r = 0; r < rows; ++r) {
      std::span<const double> src(encoded.row(static_cast<Index>(r)).data() + span.offset,
                                  static_cast<std::size_t>(span.width));
      if (span.span_kind == SpanKind::kContinuous) {
        double v = std::get<ContinuousEncoder>(encoders_[i]).decode(src);
        if (span.kind == ColumnKind::kInteger ||
            span.kind == ColumnKind::kDatetime) {
          v = std::round(v);
        }
        col.numbers.push_back(v);
      } else {
        col.labels.push_back(std::get<DiscreteEncoder>(encoders_[i]).decode(src));
      }
    }
  }
}

std::vector<nn::ActivationSpan> TableEncoder::activation_spans() const {
  std::vector<nn::ActivationSpan> out;
  for (const auto& span : layout_.spans) {
    if (span.span_kind == SpanKind::kContinuous) {
      out.push_back({span.offset, 1, nn::SpanActivation::kTanh});
      out.push_back({span.offset + 1, span.width - 1, nn::SpanActivation::kSoftmax});
    } else {
      out.push_back({span.offset, span.width, nn::SpanActivation::kSoftmax});
    }
  }
  return out;
}

std::vector<const ColumnSpan*> TableEncoder::discrete_spans() const {
  std::vector<const ColumnSpan*> out;
  for (const auto& span : layout_.spans) {
    if (span.span_kind == SpanKind::kDiscrete) out.push_back(&span);
  }
  return out;
}

const DiscreteEncoder& TableEncoder::discrete(std::size_t span_index) const {
  return std::get<DiscreteEncoder>(encoders_.at(span_index));
}

const ContinuousEncoder& TableEncoder::continuous(std::size_t span_index) const {
  return std::get<ContinuousEncoder>(encoders_.at(span_index));
}

nlohmann::json TableEncoder::to_json() const {
  nlohmann::json encs = nlohmann::json::array();
  for (const auto& e : encoders_) {
    encs.push_back(std::visit([](const auto& x) { return x.to_json(); }, e));
  }
  return {{"table", table_}, {"encoders", encs}};
}

TableEncoder TableEncoder::from_json(const nlohmann::json& j,
                                     const TableSpec& spec) {
  TableEncoder enc;
  enc.table_ = j.at("table").get<std::string>();
  for (const auto& e : j.at("encoders")) {
    if (e.at("type") == "continuous") {
      enc.encoders_.emplace_back(ContinuousEncoder::from_json(e));
    } else {
      enc.encoders_.emplace_back(DiscreteEncoder::from_json(e));
    }
  }
  if (enc.table_ != spec.name) {
    fail(ErrorCode::kCorruptFile, "encoder belongs to table '" + enc.table_ + "'");
  }
  enc.build_layout(spec);
  return enc;
}

ConditionLayout make_condition_layout(const RelationalSchema& schema,
                                      const std::string& table, int max_depth,
                                      const EncoderLookup& encoders) {
  ConditionLayout layout;
  if (max_depth < 1) return layout;
  for (auto& path : schema.ancestor_paths(table, max_depth)) {
    const Index width = encoders(path.table()).width();
    layout.slots.push_back({std::move(path), layout.width, width});
    layout.width += width;
  }
  return layout;
}

std::vector<double> build_condition(
    const ConditionLayout& layout,
    const std::vector<std::vector<double>>& slot_rows) {
  if (slot_rows.size() < layout.slots.size()) {
    const auto& missing = layout.slots[slot_rows.size()];
    fail(ErrorCode::kMissingAncestorRow,
         "no row supplied for ancestor '" + missing.path.table() + "'");
  }
  if (slot_rows.size() > layout.slots.size()) {
    fail(ErrorCode::kWidthMismatch, "more ancestor rows than condition slots");
  }
  std::vector<double> out;
  out.reserve(static_cast<std::size_t>(layout.width));
  for (std::size_t s = 0; s < layout.slots.size(); ++s) {
    if (static_cast<Index>(slot_rows[s].size()) != layout.slots[s].width) {
      fail(ErrorCode::kWidthMismatch,
           "ancestor '" + layout.slots[s].path.table() + "' row has width " +
               std::to_string(slot_rows[s].size()) + ", expected " +
               std::to_string(layout.slots[s].width));
    }
    out.insert(out.end(), slot_rows[s].begin(), slot_rows[s].end());
  }
  return out;
}

std::vector<std::vector<std::size_t>> resolve_ancestor_rows(
    const Database& db, const Table& child, const ConditionLayout& layout) {
  std::map<std::string, std::unordered_map<std::string, std::size_t>> keys;
  auto key_index = [&](const std::string& table)
      -> const std::unordered_map<std::string, std::size_t>& {
    auto it = keys.find(table);
    if (it != keys.end()) return it->second;
    std::unordered_map<std::string, std::size_t> index;
    const auto& spec = db.schema().table(table);
    if (spec.primary_key) {
      const auto& pk = db.table(table).column(*spec.primary_key).labels;
      for (std::size_t i = 0; i < pk.size(); ++i) index.emplace(pk[i], i);
    }
    return keys.emplace(table, std::move(index)).first->second;
  };
  const std::size_t rows = child.row_count();
  std::vector<std::vector<std::size_t>> out;
  for (const auto& slot : layout.slots) {
    std::vector<std::size_t> resolved(rows);
    for (std::size_t r = 0; r < rows; ++r) {
      std::size_t row = r;
      const Table* current = &child;
      for (const auto& hop : slot.path.hops) {
        const auto& value = current->column(hop.child_column).labels.at(row);
        const auto& index = key_index(hop.parent_table);
        auto found = index.find(value);
        if (found == index.end()) {
          fail(ErrorCode::kMissingAncestorRow,
               "'" + hop.child_table + "." + hop.child_column + "' value '" +
                   value + "' has no row in '" + hop.parent_table + "'");
        }
        row = found->second;
        current = &db.table(hop.parent_table);
      }
      resolved[r] = row;
    }
    out.push_back(std::move(resolved));
  }
  return out;
}

Matrix build_conditions(const ConditionLayout& layout, const Database& db,
                        const Table& child, const EncoderLookup& encoders) {
  const auto rows = static_cast<Index>(child.row_count());
  Matrix out(rows, layout.width);
  if (layout.slots.empty()) return out;
  const auto resolved = resolve_ancestor_rows(db, child, layout);
  std::map<std::string, Matrix> encoded;
  nn::Rng unused;
  for (std::size_t s = 0; s < layout.slots.size(); ++s) {
    const auto& slot = layout.slots[s];
    const std::string& name = slot.path.table();
    auto it = encoded.find(name);
    if (it == encoded.end()) {
      it = encoded
               .emplace(name, encoders(name).encode(db.table(name),
                                                    ModeSelection::kMostLikely,
                                                    unused))
               .first;
    }
    if (it->second.cols() != slot.width) {
      fail(ErrorCode::kWidthMismatch,
           "encoder for '" + name + "' does not match its condition slot");
    }
    for (Index r = 0; r < rows; ++r) {
      out.row(r).segment(slot.offset, slot.width) =
          it->second.row(static_cast<Index>(resolved[s][static_cast<std::size_t>(r)]));
    }
  }
  return out;
}

nlohmann::json to_json(const AncestorPath& path) {
  nlohmann::json hops = nlohmann::json::array();
  for (const auto& h : path.hops) {
    hops.push_back({h.child_table, h.child_column, h.parent_table, h.parent_column});
  }
  return {{"hops", hops}, {"prefix", path.prefix}};
}

AncestorPath ancestor_path_from_json(const nlohmann::json& j) {
  AncestorPath path;
  for (const auto& h : j.at("hops")) {
    path.hops.push_back({h.at(0).get<std::string>(), h.at(1).get<std::string>(),
                         h.at(2).get<std::string>(), h.at(3).get<std::string>()});
  }
  path.prefix = j.at("prefix").get<std::string>();
  if (path.hops.empty()) fail(ErrorCode::kCorruptFile, "empty ancestor path");
  return path;
}

}  // namespace rctgan
