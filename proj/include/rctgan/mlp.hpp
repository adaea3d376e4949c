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

#include <map>
#include <memory>
#include <random>
#include <string>
#include <vector>

#include "rctgan/autodiff.hpp"

namespace rctgan::nn {

enum class Mode { kTrain, kEval };

using Rng = std::mt19937_64;

struct NamedParameter {
  std::string name;
  Var value;
};

enum class SpanActivation { kIdentity, kTanh, kSoftmax };

// A column range of a layer output and the activation applied to it.
struct ActivationSpan {
  Index offset;
  Index width;
  SpanActivation activation;
};

// Applies each span's activation; the spans must tile [0, cols).
Var apply_span_activations(const Var& logits,
                           const std::vector<ActivationSpan>& spans);

class Layer {
 public:
  virtual ~Layer() = default;
  virtual Var forward(const Var& input, Mode mode, Rng& rng) = 0;
  virtual Index output_dim(Index input_dim) const = 0;
  virtual std::string kind() const = 0;
  // Affine and leaky-relu layers keep the input gradient piecewise constant
  // in the input, which the gradient-penalty double pass relies on.
  virtual bool penalty_safe() const { return false; }
  virtual void collect(const std::string& /*prefix*/,
                       std::vector<NamedParameter>& /*params*/) {}
  // Non-trainable state (batch-norm running statistics).
  virtual void collect_buffers(const std::string& /*prefix*/,
                               std::map<std::string, Matrix*>& /*buffers*/) {}
};

class Affine : public Layer {
 public:
  // Kaiming-uniform initialization with bound 1/sqrt(fan_in).
  Affine(Index in, Index out, Rng& rng);
  Affine(Matrix weight, Matrix bias);
  Var forward(const Var& input, Mode mode, Rng& rng) override;
  Index output_dim(Index) const override { return weight_.cols(); }
  std::string kind() const override { return "affine"; }
  bool penalty_safe() const override { return true; }
  void collect(const std::string& prefix,
               std::vector<NamedParameter>& params) override;

  Var& weight() { return weight_; }
  Var& bias() { return bias_; }

 private:
  Var weight_;
  Var bias_;
};

class LeakyRelu : public Layer {
 public:
  explicit LeakyRelu(double slope = 0.2) : slope_(slope) {}
  Var forward(const Var& input, Mode, Rng&) override {
    return leaky_relu(input, slope_);
  }
  Index output_dim(Index in) const override { return in; }
  std::string kind() const override { return "leaky_relu"; }
  bool penalty_safe() const override { return true; }

 private:
  double slope_;
};

class Relu : public Layer {
 public:
  Var forward(const Var& input, Mode, Rng&) override { return relu(input); }
  Index output_dim(Index in) const override { return in; }
  std::string kind() const override { return "relu"; }
  bool penalty_safe() const override { return true; }
};

class Tanh : public Layer {
 public:
  Var forward(const Var& input, Mode, Rng&) override { return tanh(input); }
  Index output_dim(Index in) const override { return in; }
  std::string kind() const override { return "tanh"; }
};

class BatchNorm : public Layer {
 public:
  explicit BatchNorm(Index dim, double momentum = 0.1, double eps = 1e-5);
  Var forward(const Var& input, Mode mode, Rng& rng) override;
  Index output_dim(Index in) const override { return in; }
  std::string kind() const override { return "batch_norm"; }
  void collect(const std::string& prefix,
               std::vector<NamedParameter>& params) override;
  void collect_buffers(const std::string& prefix,
                       std::map<std::string, Matrix*>& buffers) override;

 private:
  Var gamma_;
  Var beta_;
  Matrix running_mean_;
  Matrix running_var_;
  double momentum_;
  double eps_;
};

class Dropout : public Layer {
 public:
  explicit Dropout(double p) : p_(p) {}
  Var forward(const Var& input, Mode mode, Rng& rng) override;
  Index output_dim(Index in) const override { return in; }
  std::string kind() const override { return "dropout"; }

 private:
  double p_;
};

class SpanSoftmax : public Layer {
 public:
  explicit SpanSoftmax(std::vector<ActivationSpan> spans)
      : spans_(std::move(spans)) {}
  Var forward(const Var& input, Mode, Rng&) override {
    return apply_span_activations(input, spans_);
  }
  Index output_dim(Index in) const override { return in; }
  std::string kind() const override { return "span_softmax"; }

 private:
  std::vector<ActivationSpan> spans_;
};

// relu(batch_norm(affine(x))) concatenated with x; output width in + out.
class Residual : public Layer {
 public:
  Residual(Index in, Index out, Rng& rng);
  Var forward(const Var& input, Mode mode, Rng& rng) override;
  Index output_dim(Index in) const override { return in + out_; }
  std::string kind() const override { return "residual"; }
  void collect(const std::string& prefix,
               std::vector<NamedParameter>& params) override;
  void collect_buffers(const std::string& prefix,
                       std::map<std::string, Matrix*>& buffers) override;

 private:
  Index out_;
  Affine affine_;
  BatchNorm norm_;
};

class Mlp {
 public:
  explicit Mlp(Index input_dim) : input_dim_(input_dim), output_dim_(input_dim) {}

  Mlp& add(std::unique_ptr<Layer> layer);
  template <typename L, typename... Args>
  Mlp& emplace(Args&&... args) {
    return add(std::make_unique<L>(std::forward<Args>(args)...));
  }

  Index input_dim() const { return input_dim_; }
  Index output_dim() const { return output_dim_; }
  std::size_t layer_count() const { return layers_.size(); }

  Var forward(const Var& input, Mode mode, Rng& rng) const;

  // Gradient of sum(forward(input)) with respect to the input, kept
  // differentiable with respect to the parameters. Only affine and
  // (leaky-)relu layers are accepted; anything else raises
  // kUnsupportedLayer.
  Var input_gradient(const Var& input) const;

  std::vector<NamedParameter> parameters() const;
  // Parameters and buffers by name, for serialization.
  std::map<std::string, Matrix> state() const;
  void load_state(const std::map<std::string, Matrix>& state);

 private:
  Index input_dim_;
  Index output_dim_;
  std::vector<std::unique_ptr<Layer>> layers_;
};

struct AdamOptions {
  double learning_rate = 2e-4;
  double beta1 = 0.5;
  double beta2 = 0.9;
  double epsilon = 1e-8;
};

class Adam {
 public:
  Adam(std::vector<NamedParameter> params, AdamOptions options);

  // grads[i] pairs with the i-th parameter given at construction.
  void step(const std::vector<Matrix>& grads);
  long steps() const { return t_; }

 private:
  std::vector<NamedParameter> params_;
  AdamOptions options_;
  std::vector<Matrix> m_;
  std::vector<Matrix> v_;
  long t_ = 0;
};

}  // namespace rctgan::nn
