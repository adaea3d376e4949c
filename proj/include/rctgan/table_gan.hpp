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
#include <memory>
#include <string>
#include <vector>

#include "json.hpp"
#include "rctgan/mlp.hpp"
#include "rctgan/transform.hpp"

namespace rctgan {

struct TrainConfig {
  int epochs = 300;
  int batch_size = 500;
  int z_dim = 128;
  int pac = 10;
  // Gradient-penalty weight. Zero switches the critic to weight clipping.
  double gradient_penalty = 10.0;
  double clip_value = 0.01;
  // Dropout between critic layers; only valid with weight clipping.
  double critic_dropout = 0.0;
  int critic_steps = 1;
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  std::vector<int> generator_hidden{256, 256};
  std::vector<int> critic_hidden{256, 256};
  // 1 conditions on parents, 2 also on grandparents.
  int max_depth = 1;
  // Ablation switch: false forces the ancestor condition width to zero.
  bool condition_on_ancestors = true;
  int max_modes = 10;

  // Throws kInvalidArgument naming the offending field.
  void validate() const;
  nlohmann::json to_json() const;
  // Rejects unknown keys; absent keys keep their defaults.
  static TrainConfig from_json(const nlohmann::json& j, TrainConfig base);
  static TrainConfig from_json(const nlohmann::json& j);
};

struct EpochLog {
  std::string table;
  int epoch;
  double critic_loss;
  double gen_loss;
  double penalty;

  // One JSON object, no trailing newline.
  std::string to_json_line() const;
};

using EpochCallback = std::function<void(const EpochLog&)>;

// One row-conditional GAN. The generator maps (noise, ancestor condition,
// discrete condition) to an encoded row; the critic scores pac-grouped
// (row, ancestor condition, discrete condition) tuples.
class TableGan {
 public:
  TableGan(TableEncoder encoder, ConditionLayout condition, TrainConfig config,
           std::uint64_t seed);

  // `encoded` is rows x layout width; `conditions` is rows x condition width
  // (zero columns for roots). Throws kEmptyTable, kWidthMismatch or
  // kNonFiniteLoss.
  void fit(const Matrix& encoded, const Matrix& conditions,
           const EpochCallback& on_epoch = {});

  // One generated encoded row per condition row, generator in eval mode.
  Matrix sample_encoded(const Matrix& conditions, std::uint64_t seed) const;
  // Decoded feature columns for `per_condition` rows per condition row, in
  // condition order. Id columns hold empty labels.
  Table sample_rows(const TableSpec& spec, const Matrix& conditions,
                    std::size_t per_condition, std::uint64_t seed) const;

  // Critic objective pieces on already-assembled critic inputs
  // (rows x (width + c + v)); exposed for tests.
  nn::Var critic_loss(const Matrix& real, const Matrix& fake) const;
  nn::Var gradient_penalty(const Matrix& real, const Matrix& fake,
                           nn::Rng& rng) const;

  const TableEncoder& encoder() const { return encoder_; }
  const ConditionLayout& condition_layout() const { return condition_; }
  const TrainConfig& config() const { return config_; }
  const std::vector<EpochLog>& history() const { return history_; }
  Index condition_width() const { return condition_.width; }
  Index discrete_width() const { return discrete_width_; }
  Index generator_input_dim() const;
  Index critic_input_dim() const;
  const nn::Mlp* generator() const { return generator_.get(); }
  const nn::Mlp* critic() const { return critic_.get(); }
  // Replace the critic (tests use a hand-built linear critic).
  void set_critic(std::unique_ptr<nn::Mlp> critic) { critic_ = std::move(critic); }

  nlohmann::json to_json() const;
  static TableGan from_json(const nlohmann::json& j, const TableSpec& spec);

 private:
  struct DiscreteColumn {
    Index row_offset;   // span offset inside the encoded row
    Index cond_offset;  // offset inside the discrete condition vector
    Index width;
    std::vector<double> log_weights;  // training category weights
    std::vector<double> frequencies;  // sampling category weights
  };
  struct ConditionBatch {
    std::vector<std::size_t> rows;      // real rows matching the condition
    std::vector<int> column;            // chosen discrete column per row, -1 none
    std::vector<Index> category;
    Matrix discrete;                    // rows x discrete width
  };

  void build_networks();
  ConditionBatch sample_training_condition(
      std::size_t n, const std::vector<std::vector<std::vector<std::size_t>>>& by_category,
      std::size_t total_rows, nn::Rng& rng) const;
  Matrix sample_discrete_condition(std::size_t n, nn::Rng& rng) const;
  nn::Var critic_score(const nn::Var& input) const;
  nn::Var generator_input(const Matrix& z, const Matrix& conditions,
                          const Matrix& discrete) const;

  TableEncoder encoder_;
  ConditionLayout condition_;
  TrainConfig config_;
  std::uint64_t seed_;
  std::vector<DiscreteColumn> discrete_;
  Index discrete_width_ = 0;
  std::vector<nn::ActivationSpan> activations_;
  std::unique_ptr<nn::Mlp> generator_;
  std::unique_ptr<nn::Mlp> critic_;
  std::vector<EpochLog> history_;
};

nlohmann::json matrix_to_json(const Matrix& m);
Matrix matrix_from_json(const nlohmann::json& j);

}  // namespace rctgan
