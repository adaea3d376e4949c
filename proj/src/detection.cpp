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

#include "rctgan/detection.hpp"

#include <algorithm>
#include <cmath>
#include <iomanip>
#include <numeric>
#include <random>
#include <set>
#include <sstream>

#include "rctgan/error.hpp"

namespace rctgan {

namespace {

struct FeatureColumn {
  std::size_t column;
  bool categorical;
  std::vector<std::string> categories;  // categorical only
  bool other = false;                   // categorical: add an "other" indicator
  double fill = 0.0;                    // continuous: value used for missing cells
  bool missing = false;                 // continuous: add a missing indicator
  int group = 0;                        // 0 child, 1 ancestor
};

struct FeatureLayout {
  std::vector<FeatureColumn> columns;
  std::vector<int> groups;  // per output feature
};

FeatureLayout plan_features(const Table& real, const Table& synth, std::size_t child_columns,
                            std::size_t max_categories) {
  FeatureLayout layout;
  for (std::size_t c = 0; c < real.columns.size(); ++c) {
    const Column& r = real.columns[c];
    const Column& s = synth.columns[c];
    if (r.kind == ColumnKind::kId) continue;
    FeatureColumn f;
    f.column = c;
    f.group = c < child_columns ? 0 : 1;
    f.categorical = r.kind == ColumnKind::kCategorical;
    std::size_t width = 0;
    if (f.categorical) {
      std::map<std::string, std::size_t> counts;
      for (const auto& v : r.labels) ++counts[v];
      std::vector<std::pair<std::string, std::size_t>> ranked(counts.begin(), counts.end());
      std::stable_sort(ranked.begin(), ranked.end(),
                       [](const auto& a, const auto& b) { return a.second > b.second; });
      if (ranked.size() > max_categories) {
        ranked.resize(max_categories);
        f.other = true;
      }
      for (const auto& [name, n] : ranked) f.categories.push_back(name);
      std::sort(f.categories.begin(), f.categories.end());
      const std::set<std::string> known(f.categories.begin(), f.categories.end());
      for (const auto& v : s.labels) {
        if (!known.count(v)) f.other = true;
      }
      width = f.categories.size() + (f.other ? 1 : 0);
    } else {
      double total = 0.0;
      std::size_t n = 0;
      for (const Column* col : {&r, &s}) {
        for (double v : col->numbers) {
          if (std::isnan(v)) {
            f.missing = true;
          } else {
            total += v;
            ++n;
          }
        }
      }
      f.fill = n ? total / static_cast<double>(n) : 0.0;
      width = 1 + (f.missing ? 1 : 0);
    }
    layout.groups.insert(layout.groups.end(), width, f.group);
    layout.columns.push_back(std::move(f));
  }
  return layout;
}

Matrix raw_features(const Table& table, const FeatureLayout& layout) {
  const auto rows = static_cast<Index>(table.row_count());
  Matrix x = Matrix::Zero(rows, static_cast<Index>(layout.groups.size()));
  Index at = 0;
  for (const auto& f : layout.columns) {
    const Column& col = table.columns[f.column];
    if (f.categorical) {
      for (Index r = 0; r < rows; ++r) {
        const auto& v = col.labels[static_cast<std::size_t>(r)];
        auto it = std::lower_bound(f.categories.begin(), f.categories.end(), v);
        if (it != f.categories.end() && *it == v) {
          x(r, at + (it - f.categories.begin())) = 1.0;
        } else if (f.other) {
          x(r, at + static_cast<Index>(f.categories.size())) = 1.0;
        }
      }
      at += static_cast<Index>(f.categories.size()) + (f.other ? 1 : 0);
    } else {
      for (Index r = 0; r < rows; ++r) {
        const double v = col.numbers[static_cast<std::size_t>(r)];
        const bool nan = std::isnan(v);
        x(r, at) = nan ? f.fill : v;
        if (f.missing) x(r, at + 1) = nan ? 1.0 : 0.0;
      }
      at += 1 + (f.missing ? 1 : 0);
    }
  }
  return x;
}

// Standardizes `train` and `test` in place with statistics of `train`.
// Constant columns become zero.
void standardize(Matrix& train, Matrix& test) {
  for (Index c = 0; c < train.cols(); ++c) {
    const double mean = train.col(c).mean();
    const double var = (train.col(c).array() - mean).square().mean();
    const double sd = std::sqrt(var);
    if (sd < 1e-12) {
      train.col(c).setZero();
      test.col(c).setZero();
    } else {
      train.col(c) = (train.col(c).array() - mean) / sd;
      test.col(c) = (test.col(c).array() - mean) / sd;
    }
  }
}

Matrix interactions(const Matrix& x, const std::vector<int>& groups) {
  std::vector<Index> child, ancestor;
  for (std::size_t i = 0; i < groups.size(); ++i) {
    (groups[i] == 0 ? child : ancestor).push_back(static_cast<Index>(i));
  }
  Matrix out(x.rows(), static_cast<Index>(child.size() * ancestor.size()));
  Index at = 0;
  for (Index a : child) {
    for (Index b : ancestor) out.col(at++) = x.col(a).cwiseProduct(x.col(b));
  }
  return out;
}

Matrix gather(const Matrix& x, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Index>(rows.size()), x.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Index>(i)) = x.row(static_cast<Index>(rows[i]));
  }
  return out;
}

Matrix hstack(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows(), a.cols() + b.cols());
  out << a, b;
  return out;
}

void check_both_classes(std::span<const int> labels) {
  bool pos = false, neg = false;
  for (int l : labels) (l ? pos : neg) = true;
  if (!pos || !neg) fail(ErrorCode::kSingleClass, "both classes must be present");
}

DetectionResult detect(const Table& real, const Table& synth, std::size_t child_columns,
                       bool with_interactions, const DetectionOptions& options) {
  if (options.folds < 2) fail(ErrorCode::kInvalidArgument, "folds must be at least 2");
  if (real.columns.size() != synth.columns.size()) {
    fail(ErrorCode::kInvalidArgument, "real and synthetic tables have different columns");
  }
  for (std::size_t c = 0; c < real.columns.size(); ++c) {
    if (real.columns[c].name != synth.columns[c].name ||
        real.columns[c].kind != synth.columns[c].kind) {
      fail(ErrorCode::kInvalidArgument, "column '" + real.columns[c].name +
                                            "' differs between real and synthetic tables");
    }
  }
  DetectionResult result;
  result.n_real = real.row_count();
  result.n_synth = synth.row_count();
  if (result.n_real == 0 || result.n_synth == 0) {
    fail(ErrorCode::kSingleClass, "table '" + real.name + "' has no " +
                                      (result.n_real == 0 ? "real" : "synthetic") +
                                      " rows to classify");
  }
  const FeatureLayout layout =
      plan_features(real, synth, child_columns, options.max_categories);
  const Matrix xr = raw_features(real, layout);
  const Matrix xs = raw_features(synth, layout);

  // Balance classes by subsampling the larger one, then stratify.
  std::mt19937_64 rng(options.seed);
  const std::size_t n = std::min(result.n_real, result.n_synth);
  if (n < static_cast<std::size_t>(options.folds)) {
    fail(ErrorCode::kInvalidArgument, "table '" + real.name + "' needs at least " +
                                          std::to_string(options.folds) + " rows per class");
  }
  auto pick = [&](std::size_t total) {
    std::vector<std::size_t> idx(total);
    std::iota(idx.begin(), idx.end(), 0);
    std::shuffle(idx.begin(), idx.end(), rng);
    idx.resize(n);
    return idx;
  };
  const Matrix real_rows = gather(xr, pick(result.n_real));
  const Matrix synth_rows = gather(xs, pick(result.n_synth));
  Matrix x(2 * static_cast<Index>(n), xr.cols());
  x << real_rows, synth_rows;
  std::vector<int> labels(2 * n, 0);
  std::fill(labels.begin() + static_cast<std::ptrdiff_t>(n), labels.end(), 1);

  std::vector<int> fold(2 * n);
  for (std::size_t cls = 0; cls < 2; ++cls) {
    std::vector<std::size_t> order(n);
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), rng);
    for (std::size_t i = 0; i < n; ++i) {
      fold[cls * n + order[i]] = static_cast<int>(i % static_cast<std::size_t>(options.folds));
    }
  }

  double auc_total = 0.0;
  for (int k = 0; k < options.folds; ++k) {
    std::vector<std::size_t> train_rows, test_rows;
    std::vector<int> train_labels, test_labels;
    for (std::size_t i = 0; i < 2 * n; ++i) {
      if (fold[i] == k) {
        test_rows.push_back(i);
        test_labels.push_back(labels[i]);
      } else {
        train_rows.push_back(i);
        train_labels.push_back(labels[i]);
      }
    }
    Matrix train = gather(x, train_rows);
    Matrix test = gather(x, test_rows);
    standardize(train, test);
    if (with_interactions) {
      Matrix train_pairs = interactions(train, layout.groups);
      Matrix test_pairs = interactions(test, layout.groups);
      standardize(train_pairs, test_pairs);
      train = hstack(train, train_pairs);
      test = hstack(test, test_pairs);
    }
    const LogisticModel model = train_logistic(train, train_labels);
    const Vector scores = model.decision(test);
    auc_total += roc_auc(std::span<const double>(scores.data(), static_cast<std::size_t>(scores.size())),
                         test_labels);
  }
  result.auc = auc_total / options.folds;
  result.score = detection_score(result.auc);
  return result;
}

std::uint64_t table_seed(std::uint64_t seed, std::size_t index, std::uint64_t salt) {
  std::seed_seq seq{static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32),
                    static_cast<std::uint32_t>(index), static_cast<std::uint32_t>(salt)};
  std::uint32_t words[2];
  seq.generate(words, words + 2);
  return (static_cast<std::uint64_t>(words[0]) << 32) | words[1];
}

}  // namespace

Vector LogisticModel::decision(const Matrix& features) const {
  if (features.cols() != weights.size()) {
    fail(ErrorCode::kDimensionMismatch, "feature width does not match the model");
  }
  return (features * weights).array() + intercept;
}

LogisticModel train_logistic(const Matrix& features, std::span<const int> labels, double l2,
                             int epochs) {
  const Index n = features.rows();
  const Index p = features.cols();
  if (static_cast<std::size_t>(n) != labels.size()) {
    fail(ErrorCode::kDimensionMismatch, "one label per row is required");
  }
  check_both_classes(labels);
  Vector y(n);
  for (Index i = 0; i < n; ++i) y(i) = labels[static_cast<std::size_t>(i)] ? 1.0 : 0.0;

  // Lipschitz constant of the gradient: largest eigenvalue of [X 1]'[X 1]
  // over 4n, estimated by power iteration, plus the ridge term.
  Vector v = Vector::Ones(p + 1);
  double eig = 1.0;
  for (int it = 0; it < 50; ++it) {
    const Vector xv = features * v.head(p) + Vector::Constant(n, v(p));
    Vector next(p + 1);
    next.head(p) = features.transpose() * xv;
    next(p) = xv.sum();
    eig = next.norm() / std::max(v.norm(), 1e-300);
    if (eig < 1e-300) break;
    v = next / next.norm();
  }
  const double lipschitz = 1.1 * eig / (4.0 * static_cast<double>(n)) + l2;
  const double step = 1.0 / lipschitz;

  // Nesterov-accelerated gradient descent.
  Vector w = Vector::Zero(p), w_prev = w;
  double b = 0.0, b_prev = 0.0;
  for (int epoch = 1; epoch <= epochs; ++epoch) {
    const double momentum = (epoch - 1.0) / (epoch + 2.0);
    const Vector w_look = w + momentum * (w - w_prev);
    const double b_look = b + momentum * (b - b_prev);
    const Vector z = (features * w_look).array() + b_look;
    const Vector residual = (1.0 / (1.0 + (-z.array()).exp())).matrix() - y;
    const Vector gw = features.transpose() * residual / static_cast<double>(n) + l2 * w_look;
    const double gb = residual.mean();
    w_prev = w;
    b_prev = b;
    w = w_look - step * gw;
    b = b_look - step * gb;
  }
  return {w, b};
}

double roc_auc(std::span<const double> scores, std::span<const int> labels) {
  if (scores.size() != labels.size()) {
    fail(ErrorCode::kDimensionMismatch, "one label per score is required");
  }
  check_both_classes(labels);
  std::vector<std::size_t> order(scores.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return scores[a] < scores[b]; });
  // Mann-Whitney: average ranks over ties.
  double rank_sum = 0.0;
  double positives = 0.0;
  for (std::size_t i = 0; i < order.size();) {
    std::size_t j = i;
    while (j < order.size() && scores[order[j]] == scores[order[i]]) ++j;
    const double rank = 0.5 * static_cast<double>(i + 1 + j);
    for (std::size_t k = i; k < j; ++k) {
      if (labels[order[k]]) {
        rank_sum += rank;
        positives += 1.0;
      }
    }
    i = j;
  }
  const double negatives = static_cast<double>(scores.size()) - positives;
  return (rank_sum - positives * (positives + 1.0) / 2.0) / (positives * negatives);
}

double detection_score(double auc) { return 1.0 - (2.0 * std::max(0.5, auc) - 1.0); }

DetectionResult ld_score(const Table& real, const Table& synth, const DetectionOptions& options) {
  return detect(real, synth, real.columns.size(), false, options);
}

DetectionResult pc_ld_score(const Database& real, const Database& synth, const std::string& child,
                            const DetectionOptions& options, int max_depth) {
  const Table flat_real = denormalize(real, child, max_depth);
  const Table flat_synth = denormalize(synth, child, max_depth);
  const std::size_t child_columns = real.schema().table(child).feature_columns().size();
  return detect(flat_real, flat_synth, child_columns, true, options);
}

nlohmann::json DetectionReport::to_json() const {
  nlohmann::json tables_json = nlohmann::json::object();
  for (const auto& [name, r] : tables) {
    tables_json[name] = {{"ld", r.score}, {"auc", r.auc}, {"n_real", r.n_real}, {"n_synth", r.n_synth}};
  }
  nlohmann::json rels = nlohmann::json::array();
  for (const auto& r : relationships) {
    rels.push_back({{"child", r.child}, {"pc_ld", r.result.score}, {"auc", r.result.auc}});
  }
  nlohmann::json j{{"tables", tables_json}, {"relationships", rels}, {"avg_ld", avg_ld},
                   {"avg_pc_ld", avg_pc_ld}, {"folds", folds}, {"seed", seed}};
  if (relationships.empty()) j["avg_pc_ld"] = nullptr;
  return j;
}

std::string DetectionReport::to_text() const {
  std::size_t name_width = 12;
  for (const auto& [name, r] : tables) name_width = std::max(name_width, name.size() + 2);
  std::ostringstream out;
  out << std::fixed << std::setprecision(4) << std::left;
  out << std::setw(static_cast<int>(name_width)) << "table" << std::right << std::setw(10)
      << "n_real" << std::setw(10) << "n_synth" << std::setw(10) << "auc" << std::setw(10) << "ld"
      << "\n";
  for (const auto& [name, r] : tables) {
    out << std::left << std::setw(static_cast<int>(name_width)) << name << std::right
        << std::setw(10) << r.n_real << std::setw(10) << r.n_synth << std::setw(10) << r.auc
        << std::setw(10) << r.score << "\n";
  }
  if (!relationships.empty()) {
    out << "\n"
        << std::left << std::setw(static_cast<int>(name_width)) << "child" << std::right
        << std::setw(10) << "n_real" << std::setw(10) << "n_synth" << std::setw(10) << "auc"
        << std::setw(10) << "pc_ld" << "\n";
    for (const auto& r : relationships) {
      out << std::left << std::setw(static_cast<int>(name_width)) << r.child << std::right
          << std::setw(10) << r.result.n_real << std::setw(10) << r.result.n_synth << std::setw(10)
          << r.result.auc << std::setw(10) << r.result.score << "\n";
    }
  }
  out << "\navg_ld    " << avg_ld << "\n";
  if (!relationships.empty()) out << "avg_pc_ld " << avg_pc_ld << "\n";
  return out.str();
}

DetectionReport evaluate(const Database& real, const Database& synth,
                         const DetectionOptions& options) {
  if (real.schema().to_json() != synth.schema().to_json()) {
    fail(ErrorCode::kInvalidArgument, "real and synthetic databases use different schemas");
  }
  DetectionReport report;
  report.folds = options.folds;
  report.seed = options.seed;
  const auto& order = real.schema().topological_order();
  double ld_total = 0.0, pc_total = 0.0;
  for (std::size_t i = 0; i < order.size(); ++i) {
    const auto& name = order[i];
    DetectionOptions local = options;
    local.seed = table_seed(options.seed, i, 1);
    const auto r = ld_score(real.table(name), synth.table(name), local);
    report.tables[name] = r;
    ld_total += r.score;
    if (!real.schema().foreign_keys_of(name).empty()) {
      local.seed = table_seed(options.seed, i, 2);
      report.relationships.push_back({name, pc_ld_score(real, synth, name, local)});
      pc_total += report.relationships.back().result.score;
    }
  }
  report.avg_ld = order.empty() ? 0.0 : ld_total / static_cast<double>(order.size());
  report.avg_pc_ld = report.relationships.empty()
                         ? 0.0
                         : pc_total / static_cast<double>(report.relationships.size());
  return report;
}

}  // namespace rctgan
