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

#include <Eigen/Dense>
#include <functional>
#include <memory>
#include <vector>

namespace rctgan::nn {

using Matrix =
    Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Index = Eigen::Index;

class Var;

// One recorded operation. Backward closures are themselves written in terms
// of Var operations, so a gradient computed with create_graph = true is again
// differentiable (needed for the critic's gradient penalty).
struct Node {
  Matrix value;
  bool requires_grad = false;
  std::vector<Var> inputs;
  std::function<std::vector<Var>(const Var& grad_output)> backward;
};

class Var {
 public:
  Var() = default;

  static Var constant(Matrix value);
  // Leaf that gradients are taken with respect to.
  static Var leaf(Matrix value);
  static Var scalar(double value);

  bool defined() const { return node_ != nullptr; }
  const Matrix& value() const { return node_->value; }
  // Only for in-place optimizer updates of leaves.
  Matrix& mutable_value() { return node_->value; }
  Index rows() const { return node_->value.rows(); }
  Index cols() const { return node_->value.cols(); }
  double item() const;
  bool requires_grad() const { return node_ && node_->requires_grad; }
  Node* node() const { return node_.get(); }

  // Records a new node. The node only keeps its inputs and backward closure
  // when recording is enabled and some input requires a gradient.
  static Var record(Matrix value, std::vector<Var> inputs,
                    std::function<std::vector<Var>(const Var&)> backward);

 private:
  std::shared_ptr<Node> node_;
};

// Disables graph recording on this thread while alive.
class NoGradGuard {
 public:
  NoGradGuard();
  ~NoGradGuard();
  NoGradGuard(const NoGradGuard&) = delete;
  NoGradGuard& operator=(const NoGradGuard&) = delete;

 private:
  bool previous_;
};

// Re-enables recording inside a NoGradGuard scope (input gradients must be
// recorded even when the caller only wants values).
class EnableGradGuard {
 public:
  EnableGradGuard();
  ~EnableGradGuard();
  EnableGradGuard(const EnableGradGuard&) = delete;
  EnableGradGuard& operator=(const EnableGradGuard&) = delete;

 private:
  bool previous_;
};

bool grad_enabled();

Var matmul(const Var& a, const Var& b);
Var transpose(const Var& a);
Var operator+(const Var& a, const Var& b);
Var operator-(const Var& a, const Var& b);
Var operator-(const Var& a);
// Elementwise product.
Var operator*(const Var& a, const Var& b);
Var scale(const Var& a, double factor);
Var add_scalar(const Var& a, double offset);

// 1 x n -> rows x n
Var broadcast_rows(const Var& row, Index rows);
// m x 1 -> m x cols
Var broadcast_cols(const Var& column, Index cols);
// Column sums, m x n -> 1 x n.
Var sum_over_rows(const Var& a);
// Row sums, m x n -> m x 1.
Var sum_over_cols(const Var& a);
Var sum(const Var& a);
Var mean(const Var& a);

Var pow(const Var& a, double exponent);
Var exp(const Var& a);
Var log(const Var& a);
Var tanh(const Var& a);
Var leaky_relu(const Var& a, double slope);
Var relu(const Var& a);
// Row-wise over all columns.
Var softmax(const Var& a);
Var log_softmax(const Var& a);

Var slice_cols(const Var& a, Index offset, Index width);
Var pad_cols(const Var& a, Index offset, Index total_cols);
Var concat_cols(const std::vector<Var>& parts);
// Row-major reinterpretation.
Var reshape(const Var& a, Index rows, Index cols);

// Gradients of sum(output) with respect to each of `wrt`. Inputs that the
// output does not depend on get a zero matrix. Throws kGraphNotRecorded when
// the output carries no graph.
std::vector<Var> grad(const Var& output, const std::vector<Var>& wrt,
                      bool create_graph = false);

}  // namespace rctgan::nn
