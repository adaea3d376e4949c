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

#include "rctgan/mlp.hpp"

#include <cmath>

#include "rctgan/error.hpp"

namespace rctgan::nn {

Var apply_span_activations(const Var& logits,
                           const std::vector<ActivationSpan>& spans) {
  if (spans.empty()) return logits;
  std::vector<Var> parts;
  parts.reserve(spans.size());
  Index expected = 0;
  for (const auto& span : spans) {
    if (span.offset != expected) {
      fail(ErrorCode::kDimensionMismatch, "activation spans are not contiguous");
    }
    Var part = slice_cols(logits, span.offset, span.width);
    switch (span.activation) {
      case SpanActivation::kIdentity: break;
      case SpanActivation::kTanh: part = tanh(part); break;
      case SpanActivation::kSoftmax: part = softmax(part); break;
    }
    parts.push_back(std::move(part));
    expected += span.width;
  }
  if (expected != logits.cols()) {
    fail(ErrorCode::kDimensionMismatch, "activation spans do not cover output");
  }
  return concat_cols(parts);
}

Affine::Affine(Index in, Index out, Rng& rng) {
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> dist(-bound, bound);
  Matrix w(in, out);
  for (Index i = 0; i < w.size(); ++i) w.data()[i] = dist(rng);
  Matrix b(1, out);
  for (Index i = 0; i < b.size(); ++i) b.data()[i] = dist(rng);
  weight_ = Var::leaf(std::move(w));
  bias_ = Var::leaf(std::move(b));
}

Affine::Affine(Matrix weight, Matrix bias)
    : weight_(Var::leaf(std::move(weight))), bias_(Var::leaf(std::move(bias))) {}

Var Affine::forward(const Var& input, Mode, Rng&) {
  if (input.cols() != weight_.rows()) {
    fail(ErrorCode::kDimensionMismatch,
         "affine layer expects " + std::to_string(weight_.rows()) +
             " inputs, got " + std::to_string(input.cols()));
  }
  return matmul(input, weight_) + broadcast_rows(bias_, input.rows());
}

void Affine::collect(const std::string& prefix,
                     std::vector<NamedParameter>& params) {
  params.push_back({prefix + "weight", weight_});
  params.push_back({prefix + "bias", bias_});
}

BatchNorm::BatchNorm(Index dim, double momentum, double eps)
    : gamma_(Var::leaf(Matrix::Ones(1, dim))),
      beta_(Var::leaf(Matrix::Zero(1, dim))),
      running_mean_(Matrix::Zero(1, dim)),
      running_var_(Matrix::Ones(1, dim)),
      momentum_(momentum),
      eps_(eps) {}

Var BatchNorm::forward(const Var& input, Mode mode, Rng&) {
  const Index n = input.rows();
  Var centered;
  Var inv_std;
  if (mode == Mode::kTrain && n > 1) {
    const Var mu = scale(sum_over_rows(input), 1.0 / static_cast<double>(n));
    centered = input - broadcast_rows(mu, n);
    const Var var =
        scale(sum_over_rows(centered * centered), 1.0 / static_cast<double>(n));
    inv_std = pow(add_scalar(var, eps_), -0.5);
    const double unbias = static_cast<double>(n) / static_cast<double>(n - 1);
    running_mean_ = (1.0 - momentum_) * running_mean_ + momentum_ * mu.value();
    running_var_ =
        (1.0 - momentum_) * running_var_ + momentum_ * unbias * var.value();
  } else {
    centered = input - broadcast_rows(Var::constant(running_mean_), n);
    inv_std = Var::constant(
        (running_var_.array() + eps_).rsqrt().matrix());
  }
  const Var normalized = centered * broadcast_rows(inv_std, n);
  return normalized * broadcast_rows(gamma_, n) + broadcast_rows(beta_, n);
}

void BatchNorm::collect(const std::string& prefix,
                        std::vector<NamedParameter>& params) {
  params.push_back({prefix + "gamma", gamma_});
  params.push_back({prefix + "beta", beta_});
}

void BatchNorm::collect_buffers(const std::string& prefix,
                                std::map<std::string, Matrix*>& buffers) {
  buffers[prefix + "running_mean"] = &running_mean_;
  buffers[prefix + "running_var"] = &running_var_;
}

Var Dropout::forward(const Var& input, Mode mode, Rng& rng) {
  if (mode == Mode::kEval || p_ <= 0.0) return input;
  std::bernoulli_distribution keep(1.0 - p_);
  Matrix mask(input.rows(), input.cols());
  for (Index i = 0; i < mask.size(); ++i) {
    mask.data()[i] = keep(rng) ? 1.0 / (1.0 - p_) : 0.0;
  }
  return input * Var::constant(std::move(mask));
}

Residual::Residual(Index in, Index out, Rng& rng)
    : out_(out), affine_(in, out, rng), norm_(out) {}

Var Residual::forward(const Var& input, Mode mode, Rng& rng) {
  const Var h = relu(norm_.forward(affine_.forward(input, mode, rng), mode, rng));
  return concat_cols({h, input});
}

void Residual::collect(const std::string& prefix,
                       std::vector<NamedParameter>& params) {
  affine_.collect(prefix + "fc.", params);
  norm_.collect(prefix + "bn.", params);
}

void Residual::collect_buffers(const std::string& prefix,
                               std::map<std::string, Matrix*>& buffers) {
  norm_.collect_buffers(prefix + "bn.", buffers);
}

Mlp& Mlp::add(std::unique_ptr<Layer> layer) {
  output_dim_ = layer->output_dim(output_dim_);
  layers_.push_back(std::move(layer));
  return *this;
}

Var Mlp::forward(const Var& input, Mode mode, Rng& rng) const {
  if (input.cols() != input_dim_) {
    fail(ErrorCode::kDimensionMismatch,
         "network expects " + std::to_string(input_dim_) + " input columns, got " +
             std::to_string(input.cols()));
  }
  Var x = input;
  for (const auto& layer : layers_) x = layer->forward(x, mode, rng);
  return x;
}

Var Mlp::input_gradient(const Var& input) const {
  for (const auto& layer : layers_) {
    if (!layer->penalty_safe()) {
      fail(ErrorCode::kUnsupportedLayer,
           "layer '" + layer->kind() +
               "' is not supported inside a gradient-penalized critic");
    }
  }
  EnableGradGuard recording;
  const Var x = input.requires_grad() ? input : Var::leaf(input.value());
  Rng unused;
  const Var out = forward(x, Mode::kEval, unused);
  return grad(sum(out), {x}, /*create_graph=*/true).front();
}

std::vector<NamedParameter> Mlp::parameters() const {
  std::vector<NamedParameter> out;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect(std::to_string(i) + ".", out);
  }
  return out;
}

std::map<std::string, Matrix> Mlp::state() const {
  std::map<std::string, Matrix> out;
  for (const auto& p : parameters()) out[p.name] = p.value.value();
  std::map<std::string, Matrix*> buffers;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect_buffers(std::to_string(i) + ".", buffers);
  }
  for (const auto& [name, ptr] : buffers) out[name] = *ptr;
  return out;
}

void Mlp::load_state(const std::map<std::string, Matrix>& state) {
  auto assign = [&](const std::string& name, Matrix& target) {
    auto it = state.find(name);
    if (it == state.end()) {
      fail(ErrorCode::kCorruptFile, "network state lacks '" + name + "'");
    }
    if (it->second.rows() != target.rows() || it->second.cols() != target.cols()) {
      fail(ErrorCode::kCorruptFile, "network state '" + name + "' has wrong shape");
    }
    target = it->second;
  };
  for (auto& p : parameters()) assign(p.name, p.value.mutable_value());
  std::map<std::string, Matrix*> buffers;
  for (std::size_t i = 0; i < layers_.size(); ++i) {
    layers_[i]->collect_buffers(std::to_string(i) + ".", buffers);
  }
  for (auto& [name, ptr] : buffers) assign(name, *ptr);
}

Adam::Adam(std::vector<NamedParameter> params, AdamOptions options)
    : params_(std::move(params)), options_(options) {
  for (const auto& p : params_) {
    m_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
    v_.push_back(Matrix::Zero(p.value.rows(), p.value.cols()));
  }
}

void Adam::step(const std::vector<Matrix>& grads) {
  if (grads.size() != params_.size()) {
    fail(ErrorCode::kDimensionMismatch, "Adam received " +
                                            std::to_string(grads.size()) +
                                            " gradients for " +
                                            std::to_string(params_.size()) +
                                            " parameters");
  }
  ++t_;
  const double b1 = options_.beta1;
  const double b2 = options_.beta2;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(t_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    const Matrix& g = grads[i];
    m_[i] = b1 * m_[i] + (1.0 - b1) * g;
    v_[i] = b2 * v_[i] + (1.0 - b2) * g.cwiseProduct(g);
    auto update = (m_[i].array() / c1) /
                  ((v_[i].array() / c2).sqrt() + options_.epsilon);
    params_[i].value.mutable_value().array() -= options_.learning_rate * update;
  }
}

}  // namespace rctgan::nn
