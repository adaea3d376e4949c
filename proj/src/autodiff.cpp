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

#include "rctgan/autodiff.hpp"

#include <algorithm>
#include <cmath>
#include <string>
#include <unordered_map>
#include <unordered_set>

#include "rctgan/error.hpp"

namespace rctgan::nn {

namespace {

thread_local bool g_grad_enabled = true;

std::string shape(const Var& v) {
  return std::to_string(v.rows()) + "x" + std::to_string(v.cols());
}

void require_same_shape(const Var& a, const Var& b, const char* op) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    fail(ErrorCode::kDimensionMismatch, std::string(op) + ": shapes " +
                                            shape(a) + " and " + shape(b) +
                                            " differ");
  }
}

Var maybe(const Var& input, const std::function<Var()>& make) {
  return input.requires_grad() ? make() : Var();
}

}  // namespace

bool grad_enabled() { return g_grad_enabled; }

NoGradGuard::NoGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = false;
}

NoGradGuard::~NoGradGuard() { g_grad_enabled = previous_; }

EnableGradGuard::EnableGradGuard() : previous_(g_grad_enabled) {
  g_grad_enabled = true;
}

EnableGradGuard::~EnableGradGuard() { g_grad_enabled = previous_; }

Var Var::constant(Matrix value) {
  Var v;
  v.node_ = std::make_shared<Node>();
  v.node_->value = std::move(value);
  return v;
}

Var Var::leaf(Matrix value) {
  Var v = constant(std::move(value));
  v.node_->requires_grad = true;
  return v;
}

Var Var::scalar(double value) {
  Matrix m(1, 1);
  m(0, 0) = value;
  return constant(std::move(m));
}

double Var::item() const {
  if (rows() != 1 || cols() != 1) {
    fail(ErrorCode::kDimensionMismatch, "item() on a " + shape(*this) + " value");
  }
  return node_->value(0, 0);
}

Var Var::record(Matrix value, std::vector<Var> inputs,
                std::function<std::vector<Var>(const Var&)> backward) {
  Var out = constant(std::move(value));
  if (!g_grad_enabled) return out;
  const bool any = std::any_of(inputs.begin(), inputs.end(),
                               [](const Var& v) { return v.requires_grad(); });
  if (!any) return out;
  out.node_->requires_grad = true;
  out.node_->inputs = std::move(inputs);
  out.node_->backward = std::move(backward);
  return out;
}

Var matmul(const Var& a, const Var& b) {
  if (a.cols() != b.rows()) {
    fail(ErrorCode::kDimensionMismatch,
         "matmul: " + shape(a) + " times " + shape(b));
  }
  Matrix value = a.value() * b.value();
  return Var::record(std::move(value), {a, b}, [a, b](const Var& g) {
    return std::vector<Var>{
        maybe(a, [&] { return matmul(g, transpose(b)); }),
        maybe(b, [&] { return matmul(transpose(a), g); })};
  });
}

Var transpose(const Var& a) {
  Matrix value = a.value().transpose();
  return Var::record(std::move(value), {a}, [](const Var& g) {
    return std::vector<Var>{transpose(g)};
  });
}

Var operator+(const Var& a, const Var& b) {
  require_same_shape(a, b, "add");
  Matrix value = a.value() + b.value();
  return Var::record(std::move(value), {a, b}, [](const Var& g) {
    return std::vector<Var>{g, g};
  });
}

Var operator-(const Var& a, const Var& b) {
  require_same_shape(a, b, "sub");
  Matrix value = a.value() - b.value();
  return Var::record(std::move(value), {a, b}, [b](const Var& g) {
    return std::vector<Var>{g, maybe(b, [&] { return -g; })};
  });
}

Var operator-(const Var& a) { return scale(a, -1.0); }

Var operator*(const Var& a, const Var& b) {
  require_same_shape(a, b, "mul");
  Matrix value = a.value().cwiseProduct(b.value());
  return Var::record(std::move(value), {a, b}, [a, b](const Var& g) {
    return std::vector<Var>{maybe(a, [&] { return g * b; }),
                            maybe(b, [&] { return g * a; })};
  });
}

Var scale(const Var& a, double factor) {
  Matrix value = a.value() * factor;
  return Var::record(std::move(value), {a}, [factor](const Var& g) {
    return std::vector<Var>{scale(g, factor)};
  });
}

Var add_scalar(const Var& a, double offset) {
  Matrix value = a.value().array() + offset;
  return Var::record(std::move(value), {a}, [](const Var& g) {
    return std::vector<Var>{g};
  });
}

Var broadcast_rows(const Var& row, Index rows) {
  if (row.rows() != 1) {
    fail(ErrorCode::kDimensionMismatch,
         "broadcast_rows expects a single row, got " + shape(row));
  }
  Matrix value = row.value().replicate(rows, 1);
  return Var::record(std::move(value), {row}, [](const Var& g) {
    return std::vector<Var>{sum_over_rows(g)};
  });
}

Var broadcast_cols(const Var& column, Index cols) {
  if (column.cols() != 1) {
    fail(ErrorCode::kDimensionMismatch,
         "broadcast_cols expects a single column, got " + shape(column));
  }
  Matrix value = column.value().replicate(1, cols);
  return Var::record(std::move(value), {column}, [](const Var& g) {
    return std::vector<Var>{sum_over_cols(g)};
  });
}

Var sum_over_rows(const Var& a) {
  Matrix value = a.value().colwise().sum();
  const Index rows = a.rows();
  return Var::record(std::move(value), {a}, [rows](const Var& g) {
    return std::vector<Var>{broadcast_rows(g, rows)};
  });
}

Var sum_over_cols(const Var& a) {
  Matrix value = a.value().rowwise().sum();
  const Index cols = a.cols();
  return Var::record(std::move(value), {a}, [cols](const Var& g) {
    return std::vector<Var>{broadcast_cols(g, cols)};
  });
}

Var sum(const Var& a) {
  Matrix value(1, 1);
  value(0, 0) = a.value().sum();
  const Index rows = a.rows();
  const Index cols = a.cols();
  return Var::record(std::move(value), {a}, [rows, cols](const Var& g) {
    return std::vector<Var>{broadcast_rows(broadcast_cols(g, cols), rows)};
  });
}

Var mean(const Var& a) {
  const double n = static_cast<double>(a.rows() * a.cols());
  return scale(sum(a), n > 0 ? 1.0 / n : 0.0);
}

Var pow(const Var& a, double exponent) {
  Matrix value = a.value().array().pow(exponent);
  return Var::record(std::move(value), {a}, [a, exponent](const Var& g) {
    if (exponent == 1.0) return std::vector<Var>{g};
    return std::vector<Var>{g * scale(pow(a, exponent - 1.0), exponent)};
  });
}

Var exp(const Var& a) {
  Matrix value = a.value().array().exp();
  return Var::record(std::move(value), {a}, [a](const Var& g) {
    return std::vector<Var>{g * exp(a)};
  });
}

Var log(const Var& a) {
  Matrix value = a.value().array().log();
  return Var::record(std::move(value), {a}, [a](const Var& g) {
    return std::vector<Var>{g * pow(a, -1.0)};
  });
}

Var tanh(const Var& a) {
  Matrix value = a.value().array().tanh();
  return Var::record(std::move(value), {a}, [a](const Var& g) {
    const Var y = tanh(a);
    return std::vector<Var>{g * add_scalar(-(y * y), 1.0)};
  });
}

Var leaky_relu(const Var& a, double slope) {
  Matrix mask = (a.value().array() > 0.0).select(Matrix::Ones(a.rows(), a.cols()),
                                                 slope);
  Matrix value = a.value().cwiseProduct(mask);
  // The derivative is piecewise constant, so the backward pass multiplies by
  // a constant mask and contributes nothing to second derivatives.
  return Var::record(std::move(value), {a},
                     [mask = Var::constant(std::move(mask))](const Var& g) {
                       return std::vector<Var>{g * mask};
                     });
}

Var relu(const Var& a) { return leaky_relu(a, 0.0); }

Var softmax(const Var& a) {
  Matrix shifted = a.value().colwise() - a.value().rowwise().maxCoeff();
  Matrix e = shifted.array().exp();
  Matrix value = e.array().colwise() / e.rowwise().sum().array();
  return Var::record(std::move(value), {a}, [a](const Var& g) {
    const Var y = softmax(a);
    const Var dot = broadcast_cols(sum_over_cols(g * y), a.cols());
    return std::vector<Var>{y * (g - dot)};
  });
}

Var log_softmax(const Var& a) {
  Eigen::VectorXd max = a.value().rowwise().maxCoeff();
  Matrix shifted = a.value().colwise() - max;
  Eigen::VectorXd lse = shifted.array().exp().rowwise().sum().log();
  Matrix value = shifted.colwise() - lse;
  return Var::record(std::move(value), {a}, [a](const Var& g) {
    const Var total = broadcast_cols(sum_over_cols(g), a.cols());
    return std::vector<Var>{g - softmax(a) * total};
  });
}

Var slice_cols(const Var& a, Index offset, Index width) {
  if (offset < 0 || width < 0 || offset + width > a.cols()) {
    fail(ErrorCode::kDimensionMismatch,
         "slice_cols [" + std::to_string(offset) + ", " +
             std::to_string(offset + width) + ") outside " + shape(a));
  }
  Matrix value = a.value().middleCols(offset, width);
  const Index total = a.cols();
  return Var::record(std::move(value), {a}, [offset, total](const Var& g) {
    return std::vector<Var>{pad_cols(g, offset, total)};
  });
}

Var pad_cols(const Var& a, Index offset, Index total_cols) {
  if (offset < 0 || offset + a.cols() > total_cols) {
    fail(ErrorCode::kDimensionMismatch, "pad_cols target too narrow");
  }
  Matrix value = Matrix::Zero(a.rows(), total_cols);
  value.middleCols(offset, a.cols()) = a.value();
  const Index width = a.cols();
  return Var::record(std::move(value), {a}, [offset, width](const Var& g) {
    return std::vector<Var>{slice_cols(g, offset, width)};
  });
}

Var concat_cols(const std::vector<Var>& parts) {
  if (parts.empty()) {
    fail(ErrorCode::kDimensionMismatch, "concat_cols of nothing");
  }
  const Index rows = parts.front().rows();
  Index total = 0;
  for (const auto& p : parts) {
    if (p.rows() != rows) {
      fail(ErrorCode::kDimensionMismatch,
           "concat_cols: row counts " + std::to_string(rows) + " and " +
               std::to_string(p.rows()) + " differ");
    }
    total += p.cols();
  }
  Matrix value(rows, total);
  std::vector<Index> offsets;
  Index at = 0;
  for (const auto& p : parts) {
    offsets.push_back(at);
    value.middleCols(at, p.cols()) = p.value();
    at += p.cols();
  }
  return Var::record(std::move(value), parts, [parts, offsets](const Var& g) {
    std::vector<Var> out;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      out.push_back(maybe(parts[i], [&] {
        return slice_cols(g, offsets[i], parts[i].cols());
      }));
    }
    return out;
  });
}

Var reshape(const Var& a, Index rows, Index cols) {
  if (rows * cols != a.rows() * a.cols()) {
    fail(ErrorCode::kDimensionMismatch, "reshape " + shape(a) + " to " +
                                            std::to_string(rows) + "x" +
                                            std::to_string(cols));
  }
  Matrix value = Eigen::Map<const Matrix>(a.value().data(), rows, cols);
  const Index r = a.rows();
  const Index c = a.cols();
  return Var::record(std::move(value), {a}, [r, c](const Var& g) {
    return std::vector<Var>{reshape(g, r, c)};
  });
}

std::vector<Var> grad(const Var& output, const std::vector<Var>& wrt,
                      bool create_graph) {
  if (!output.requires_grad()) {
    fail(ErrorCode::kGraphNotRecorded,
         "output was not produced by a recorded computation");
  }
  // Reverse topological order by iterative post-order DFS.
  std::vector<Node*> order;
  std::unordered_set<Node*> visited;
  std::vector<std::pair<Node*, std::size_t>> stack{{output.node(), 0}};
  visited.insert(output.node());
  while (!stack.empty()) {
    auto& [node, next] = stack.back();
    if (next < node->inputs.size()) {
      Node* child = node->inputs[next++].node();
      if (child && child->requires_grad && visited.insert(child).second) {
        stack.emplace_back(child, 0);
      }
    } else {
      order.push_back(node);
      stack.pop_back();
    }
  }

  std::unordered_map<Node*, Var> grads;
  grads[output.node()] =
      Var::constant(Matrix::Ones(output.rows(), output.cols()));
  {
    std::unique_ptr<NoGradGuard> guard;
    if (!create_graph) guard = std::make_unique<NoGradGuard>();
    for (auto it = order.rbegin(); it != order.rend(); ++it) {
      Node* node = *it;
      if (!node->backward) continue;
      auto found = grads.find(node);
      if (found == grads.end()) continue;
      const Var g = found->second;
      const auto input_grads = node->backward(g);
      for (std::size_t i = 0; i < node->inputs.size(); ++i) {
        const Var& input = node->inputs[i];
        if (!input.requires_grad() || !input_grads[i].defined()) continue;
        auto slot = grads.find(input.node());
        if (slot == grads.end()) {
          grads.emplace(input.node(), input_grads[i]);
        } else {
          slot->second = slot->second + input_grads[i];
        }
      }
    }
  }

  std::vector<Var> out;
  out.reserve(wrt.size());
  for (const auto& w : wrt) {
    auto found = grads.find(w.node());
    out.push_back(found == grads.end()
                      ? Var::constant(Matrix::Zero(w.rows(), w.cols()))
                      : found->second);
  }
  return out;
}

}  // namespace rctgan::nn
