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
#include <map>
#include <span>
#include <string>
#include <vector>

#include "json.hpp"
#include "rctgan/autodiff.hpp"
#include "rctgan/dataset.hpp"

namespace rctgan {

using nn::Index;
using nn::Matrix;
using Vector = Eigen::VectorXd;

struct LogisticModel {
  Vector weights;
  double intercept = 0.0;

  // Decision values x.w + b, one per row.
  Vector decision(const Matrix& features) const;
};

// Full-batch gradient descent on the mean logistic loss plus
// 0.5 * l2 * |w|^2 (intercept unpenalized). Labels are 0/1. Throws
// kSingleClass unless both classes are present.
LogisticModel train_logistic(const Matrix& features, std::span<const int> labels,
                             double l2 = 1e-4, int epochs = 300);

// P(score+ > score-) + P(score+ == score-) / 2. Throws kSingleClass.
double roc_auc(std::span<const double> scores, std::span<const int> labels);

// 1 - (2 * max(0.5, auc) - 1).
double detection_score(double auc);

struct DetectionResult {
  double score = 0.0;
  double auc = 0.0;
  std::size_t n_real = 0;
  std::size_t n_synth = 0;
};

struct DetectionOptions {
  int folds = 3;
  std::uint64_t seed = 0;
  // Categories beyond the most frequent ones share one "other" indicator.
  std::size_t max_categories = 30;
};

// Logistic detection on two tables with the same columns. Id columns are
// ignored. Throws kSingleClass when either side is empty and
// kInvalidArgument on a bad fold count or mismatched columns.
DetectionResult ld_score(const Table& real, const Table& synth,
                         const DetectionOptions& options = {});

// Detection on the depth-1 denormalization of `child`. Besides the flat
// columns, the detector sees products of every child feature with every
// parent feature.
DetectionResult pc_ld_score(const Database& real, const Database& synth,
                            const std::string& child, const DetectionOptions& options = {},
                            int max_depth = 1);

struct RelationshipScore {
  std::string child;
  DetectionResult result;
};

struct DetectionReport {
  std::map<std::string, DetectionResult> tables;
  std::vector<RelationshipScore> relationships;
  double avg_ld = 0.0;
  double avg_pc_ld = 0.0;
  int folds = 3;
  std::uint64_t seed = 0;

  nlohmann::json to_json() const;
  // Aligned plain-text table.
  std::string to_text() const;
};

// One LD per table and one P-C LD per table that has parents.
DetectionReport evaluate(const Database& real, const Database& synth,
                         const DetectionOptions& options = {});

}  // namespace rctgan
