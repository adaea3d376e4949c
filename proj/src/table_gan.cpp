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

#include "rctgan/table_gan.hpp"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "rctgan/error.hpp"

namespace rctgan {

using nn::Mode;
using nn::Var;

namespace {

void require(bool ok, const std::string& field, const std::string& rule) {
  if (!ok) fail(ErrorCode::kInvalidArgument, "config '" + field + "' " + rule);
}

Matrix gather_rows(const Matrix& m, const std::vector<std::size_t>& rows) {
  Matrix out(static_cast<Index>(rows.size()), m.cols());
  for (std::size_t i = 0; i < rows.size(); ++i) {
    out.row(static_cast<Index>(i)) = m.row(static_cast<Index>(rows[i]));
  }
  return out;
}

Matrix normal_matrix(Index rows, Index cols, nn::Rng& rng) {
  std::normal_distribution<double> normal(0.0, 1.0);
  Matrix m(rows, cols);
  for (Index i = 0; i < m.size(); ++i) m.data()[i] = normal(rng);
  return m;
}

// Concatenates only the non-empty parts.
Matrix hconcat(const std::vector<const Matrix*>& parts, Index rows) {
  Index cols = 0;
  for (const auto* p : parts) cols += p->cols();
  Matrix out(rows, cols);
  Index at = 0;
  for (const auto* p : parts) {
    if (p->cols() == 0) continue;
    out.middleCols(at, p->cols()) = *p;
    at += p->cols();
  }
  return out;
}

bool finite(double v) { return std::isfinite(v); }

}  // namespace

void TrainConfig::validate() const {
  require(epochs >= 1, "epochs", "must be at least 1");
  require(pac >= 1, "pac", "must be at least 1");
  require(batch_size >= 1, "batch_size", "must be positive");
  require(batch_size % pac == 0, "batch_size", "must be a multiple of pac");
  require(z_dim >= 1, "z_dim", "must be positive");
  require(gradient_penalty >= 0.0, "gradient_penalty", "must be non-negative");
  require(clip_value > 0.0, "clip_value", "must be positive");
  require(critic_dropout >= 0.0 && critic_dropout < 1.0, "critic_dropout",
          "must lie in [0, 1)");
  require(critic_dropout == 0.0 || gradient_penalty == 0.0, "critic_dropout",
          "requires gradient_penalty 0 (weight clipping)");
  require(critic_steps >= 1, "critic_steps", "must be at least 1");
  require(learning_rate > 0.0, "learning_rate", "must be positive");
  require(beta1 >= 0.0 && beta1 < 1.0, "beta1", "must lie in [0, 1)");
  require(beta2 >= 0.0 && beta2 < 1.0, "beta2", "must lie in [0, 1)");
  for (int h : generator_hidden) require(h >= 1, "generator_hidden", "sizes must be positive");
  for (int h : critic_hidden) require(h >= 1, "critic_hidden", "sizes must be positive");
  require(max_depth == 1 || max_depth == 2, "max_depth", "must be 1 or 2");
  require(max_modes >= 1, "max_modes", "must be at least 1");
}

nlohmann::json TrainConfig::to_json() const {
  return {{"epochs", epochs},
          {"batch_size", batch_size},
          {"z_dim", z_dim},
          {"pac", pac},
          {"gradient_penalty", gradient_penalty},
          {"clip_value", clip_value},
          {"critic_dropout", critic_dropout},
          {"critic_steps", critic_steps},
          {"learning_rate", learning_rate},
          {"beta1", beta1},
          {"beta2", beta2},
          {"generator_hidden", generator_hidden},
          {"critic_hidden", critic_hidden},
          {"max_depth", max_depth},
          {"condition_on_ancestors", condition_on_ancestors},
          {"max_modes", max_modes}};
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j, TrainConfig base) {
  if (!j.is_object()) fail(ErrorCode::kInvalidArgument, "config must be a JSON object");
  static const std::set<std::string> known = [] {
    std::set<std::string> keys;
    const nlohmann::json defaults = TrainConfig().to_json();
    for (const auto& [k, v] : defaults.items()) keys.insert(k);
    return keys;
  }();
  for (const auto& [key, value] : j.items()) {
    if (!known.count(key)) {
      fail(ErrorCode::kInvalidArgument, "unknown config key '" + key + "'");
    }
  }
  try {
    auto get = [&](const char* key, auto& field) {
      if (j.contains(key)) j.at(key).get_to(field);
    };
    get("epochs", base.epochs);
    get("batch_size", base.batch_size);
    get("z_dim", base.z_dim);
    get("pac", base.pac);
    get("gradient_penalty", base.gradient_penalty);
    get("clip_value", base.clip_value);
    get("critic_dropout", base.critic_dropout);
    get("critic_steps", base.critic_steps);
    get("learning_rate", base.learning_rate);
    get("beta1", base.beta1);
    get("beta2", base.beta2);
    get("generator_hidden", base.generator_hidden);
    get("critic_hidden", base.critic_hidden);
    get("max_depth", base.max_depth);
    get("condition_on_ancestors", base.condition_on_ancestors);
    get("max_modes", base.max_modes);
  } catch (const nlohmann::json::exception& e) {
    fail(ErrorCode::kInvalidArgument, std::string("config value has wrong type: ") + e.what());
  }
  return base;
}

TrainConfig TrainConfig::from_json(const nlohmann::json& j) {
  return from_json(j, TrainConfig());
}

std::string EpochLog::to_json_line() const {
  nlohmann::json j{{"table", table},
                   {"epoch", epoch},
                   {"critic_loss", critic_loss},
                   {"gen_loss", gen_loss},
                   {"penalty", penalty}};
  return j.dump();
}

TableGan::TableGan(TableEncoder encoder, ConditionLayout condition,
                   TrainConfig config, std::uint64_t seed)
    : encoder_(std::move(encoder)),
      condition_(std::move(condition)),
      config_(std::move(config)),
      seed_(seed) {
  config_.validate();
  for (std::size_t s = 0; s < encoder_.layout().spans.size(); ++s) {
    const auto& span = encoder_.layout().spans[s];
    if (span.span_kind != SpanKind::kDiscrete) continue;
    const auto& enc = encoder_.discrete(s);
    DiscreteColumn col{span.offset, discrete_width_, span.width, {}, enc.frequencies()};
    discrete_.push_back(std::move(col));
    discrete_width_ += span.width;
  }
  activations_ = encoder_.activation_spans();
  build_networks();
}

Index TableGan::generator_input_dim() const {
  return config_.z_dim + condition_.width + discrete_width_;
}

Index TableGan::critic_input_dim() const {
  return (encoder_.width() + condition_.width + discrete_width_) * config_.pac;
}

void TableGan::build_networks() {
  if (encoder_.width() == 0) return;  // nothing to model
  nn::Rng init(seed_ ^ 0x9e3779b97f4a7c15ULL);
  generator_ = std::make_unique<nn::Mlp>(generator_input_dim());
  Index dim = generator_input_dim();
  for (int h : config_.generator_hidden) {
    generator_->emplace<nn::Residual>(dim, h, init);
    dim += h;
  }
  generator_->emplace<nn::Affine>(dim, encoder_.width(), init);

  critic_ = std::make_unique<nn::Mlp>(critic_input_dim());
  dim = critic_input_dim();
  for (int h : config_.critic_hidden) {
    critic_->emplace<nn::Affine>(dim, h, init);
    critic_->emplace<nn::LeakyRelu>(0.2);
    if (config_.critic_dropout > 0.0) {
      critic_->emplace<nn::Dropout>(config_.critic_dropout);
    }
    dim = h;
  }
  critic_->emplace<nn::Affine>(dim, 1, init);
}

Var TableGan::critic_score(const Var& input) const {
  const Index groups = input.rows() / config_.pac;
  nn::Rng unused;
  return critic_->forward(reshape(input, groups, input.cols() * config_.pac),
                          Mode::kEval, unused);
}

Var TableGan::critic_loss(const Matrix& real, const Matrix& fake) const {
  if (real.rows() != fake.rows() || real.cols() != fake.cols()) {
    fail(ErrorCode::kDimensionMismatch, "real and fake critic batches differ in shape");
  }
  return mean(critic_score(Var::constant(fake))) - mean(critic_score(Var::constant(real)));
}

Var TableGan::gradient_penalty(const Matrix& real, const Matrix& fake,
                               nn::Rng& rng) const {
  if (real.rows() != fake.rows() || real.cols() != fake.cols()) {
    fail(ErrorCode::kDimensionMismatch, "real and fake critic batches differ in shape");
  }
  const Index groups = real.rows() / config_.pac;
  const Index width = real.cols() * config_.pac;
  const Eigen::Map<const Matrix> r(real.data(), groups, width);
  const Eigen::Map<const Matrix> f(fake.data(), groups, width);
  std::uniform_real_distribution<double> unit(0.0, 1.0);
  Matrix mixed(groups, width);
  for (Index g = 0; g < groups; ++g) {
    const double eps = unit(rng);
    mixed.row(g) = eps * r.row(g) + (1.0 - eps) * f.row(g);
  }
  const Var grad_x = critic_->input_gradient(Var::leaf(std::move(mixed)));
  const Var norm = pow(add_scalar(sum_over_cols(grad_x * grad_x), 1e-12), 0.5);
  const Var gap = add_scalar(norm, -1.0);
  return mean(gap * gap);
}

TableGan::ConditionBatch TableGan::sample_training_condition(
    std::size_t n,
    const std::vector<std::vector<std::vector<std::size_t>>>& by_category,
    std::size_t total_rows, nn::Rng& rng) const {
  ConditionBatch batch;
  batch.rows.resize(n);
  batch.column.assign(n, -1);
  batch.category.assign(n, 0);
  batch.discrete = Matrix::Zero(static_cast<Index>(n), discrete_width_);
  if (discrete_.empty()) {
    std::uniform_int_distribution<std::size_t> any(0, total_rows - 1);
    for (auto& r : batch.rows) r = any(rng);
    return batch;
  }
  std::uniform_int_distribution<std::size_t> pick_column(0, discrete_.size() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const std::size_t s = pick_column(rng);
    const auto& col = discrete_[s];
    std::discrete_distribution<Index> pick_cat(col.log_weights.begin(), col.log_weights.end());
    const Index k = pick_cat(rng);
    const auto& candidates = by_category[s][static_cast<std::size_t>(k)];
    std::uniform_int_distribution<std::size_t> pick_row(0, candidates.size() - 1);
    batch.rows[i] = candidates[pick_row(rng)];
    batch.column[i] = static_cast<int>(s);
    batch.category[i] = k;
    batch.discrete(static_cast<Index>(i), col.cond_offset + k) = 1.0;
  }
  return batch;
}

Matrix TableGan::sample_discrete_condition(std::size_t n, nn::Rng& rng) const {
  Matrix out = Matrix::Zero(static_cast<Index>(n), discrete_width_);
  if (discrete_.empty()) return out;
  std::uniform_int_distribution<std::size_t> pick_column(0, discrete_.size() - 1);
  for (std::size_t i = 0; i < n; ++i) {
    const auto& col = discrete_[pick_column(rng)];
    std::discrete_distribution<Index> pick_cat(col.frequencies.begin(), col.frequencies.end());
    out(static_cast<Index>(i), col.cond_offset + pick_cat(rng)) = 1.0;
  }
  return out;
}

Var TableGan::generator_input(const Matrix& z, const Matrix& conditions,
                              const Matrix& discrete) const {
  return Var::constant(hconcat({&z, &conditions, &discrete}, z.rows()));
}

void TableGan::fit(const Matrix& encoded, const Matrix& conditions,
                   const EpochCallback& on_epoch) {
  const std::string& name = encoder_.table_name();
  if (encoded.rows() == 0) {
    fail(ErrorCode::kEmptyTable, "table '" + name + "' has no rows to train on");
  }
  if (encoded.cols() != encoder_.width()) {
    fail(ErrorCode::kWidthMismatch, "table '" + name + "' encoded width does not match its layout");
  }
  if (conditions.rows() != encoded.rows() || conditions.cols() != condition_.width) {
    fail(ErrorCode::kWidthMismatch,
         "table '" + name + "' condition matrix must be " + std::to_string(encoded.rows()) + "x" +
             std::to_string(condition_.width));
  }
  history_.clear();
  if (!generator_) return;

  const auto total_rows = static_cast<std::size_t>(encoded.rows());
  // Rows per category of each discrete column, from the one-hot spans.
  std::vector<std::vector<std::vector<std::size_t>>> by_category(discrete_.size());
  for (std::size_t s = 0; s < discrete_.size(); ++s) {
    auto& col = discrete_[s];
    by_category[s].resize(static_cast<std::size_t>(col.width));
    for (std::size_t r = 0; r < total_rows; ++r) {
      Index k;
      encoded.row(static_cast<Index>(r)).segment(col.row_offset, col.width).maxCoeff(&k);
      by_category[s][static_cast<std::size_t>(k)].push_back(r);
    }
    col.log_weights.clear();
    for (const auto& rows : by_category[s]) {
      col.log_weights.push_back(std::log(static_cast<double>(rows.size()) + 1.0));
    }
  }

  nn::Rng rng(seed_);
  const nn::AdamOptions adam{config_.learning_rate, config_.beta1, config_.beta2, 1e-8};
  auto gen_params = generator_->parameters();
  auto critic_params = critic_->parameters();
  nn::Adam gen_opt(gen_params, adam);
  nn::Adam critic_opt(critic_params, adam);
  std::vector<Var> gen_vars, critic_vars;
  for (const auto& p : gen_params) gen_vars.push_back(p.value);
  for (const auto& p : critic_params) critic_vars.push_back(p.value);

  const auto n = static_cast<std::size_t>(config_.batch_size);
  const Index rows = static_cast<Index>(n);
  const int steps = std::max<int>(1, static_cast<int>(total_rows / n));
  const bool penalized = config_.gradient_penalty > 0.0;

  auto grouped = [&](const Var& x) {
    return reshape(x, rows / config_.pac, x.cols() * config_.pac);
  };
  auto fake_rows = [&](const ConditionBatch& batch, const Matrix& cond) {
    const Matrix z = normal_matrix(rows, config_.z_dim, rng);
    const Var logits =
        generator_->forward(generator_input(z, cond, batch.discrete), Mode::kTrain, rng);
    return std::make_pair(logits, nn::apply_span_activations(logits, activations_));
  };

  for (int epoch = 0; epoch < config_.epochs; ++epoch) {
    double critic_sum = 0.0, gen_sum = 0.0, penalty_sum = 0.0;
    for (int step = 0; step < steps; ++step) {
      for (int c = 0; c < config_.critic_steps; ++c) {
        const auto batch = sample_training_condition(n, by_category, total_rows, rng);
        const Matrix cond = gather_rows(conditions, batch.rows);
        const Matrix real = gather_rows(encoded, batch.rows);
        Matrix fake;
        {
          nn::NoGradGuard no_grad;
          fake = fake_rows(batch, cond).second.value();
        }
        const Matrix real_in = hconcat({&real, &cond, &batch.discrete}, rows);
        const Matrix fake_in = hconcat({&fake, &cond, &batch.discrete}, rows);
        const Var score_real = critic_->forward(grouped(Var::constant(real_in)), Mode::kTrain, rng);
        const Var score_fake = critic_->forward(grouped(Var::constant(fake_in)), Mode::kTrain, rng);
        Var loss = mean(score_fake) - mean(score_real);
        double penalty_value = 0.0;
        if (penalized) {
          const Var gp = gradient_penalty(real_in, fake_in, rng);
          penalty_value = gp.value()(0, 0);
          loss = loss + scale(gp, config_.gradient_penalty);
        }
        const double value = loss.value()(0, 0);
        if (!finite(value)) {
          fail(ErrorCode::kNonFiniteLoss, "table '" + name + "' critic loss became non-finite at epoch " +
                                              std::to_string(epoch));
        }
        const auto grads = nn::grad(loss, critic_vars);
        std::vector<Matrix> g;
        for (const auto& v : grads) g.push_back(v.value());
        critic_opt.step(g);
        if (!penalized) {
          for (auto& p : critic_vars) {
            p.mutable_value() = p.value().cwiseMax(-config_.clip_value).cwiseMin(config_.clip_value);
          }
        }
        critic_sum += value - config_.gradient_penalty * penalty_value;
        penalty_sum += penalty_value;
      }

      const auto batch = sample_training_condition(n, by_category, total_rows, rng);
      const Matrix cond = gather_rows(conditions, batch.rows);
      const auto [logits, fake] = fake_rows(batch, cond);
      const Matrix* parts[] = {&cond, &batch.discrete};
      std::vector<Var> critic_in{fake};
      for (const auto* p : parts) {
        if (p->cols() > 0) critic_in.push_back(Var::constant(*p));
      }
      const Var score = critic_->forward(grouped(concat_cols(critic_in)), Mode::kTrain, rng);
      Var loss = -mean(score);
      if (!discrete_.empty()) {
        // Cross-entropy between each row's conditioned span and its category.
        Var ce;
        for (std::size_t s = 0; s < discrete_.size(); ++s) {
          const auto& col = discrete_[s];
          Matrix mask = Matrix::Zero(rows, col.width);
          bool any = false;
          for (std::size_t i = 0; i < n; ++i) {
            if (batch.column[i] == static_cast<int>(s)) {
              mask(static_cast<Index>(i), batch.category[i]) = 1.0;
              any = true;
            }
          }
          if (!any) continue;
          const Var term = sum(nn::log_softmax(slice_cols(logits, col.row_offset, col.width)) *
                               Var::constant(std::move(mask)));
          ce = ce.defined() ? ce + term : term;
        }
        if (ce.defined()) loss = loss - scale(ce, 1.0 / static_cast<double>(n));
      }
      const double value = loss.value()(0, 0);
      if (!finite(value)) {
        fail(ErrorCode::kNonFiniteLoss, "table '" + name + "' generator loss became non-finite at epoch " +
                                            std::to_string(epoch));
      }
      const auto grads = nn::grad(loss, gen_vars);
      std::vector<Matrix> g;
      for (const auto& v : grads) g.push_back(v.value());
      gen_opt.step(g);
      gen_sum += value;
    }
    const double critic_updates = static_cast<double>(steps * config_.critic_steps);
    EpochLog log{name, epoch, critic_sum / critic_updates, gen_sum / steps,
                 penalty_sum / critic_updates};
    history_.push_back(log);
    if (on_epoch) on_epoch(log);
  }
}

Matrix TableGan::sample_encoded(const Matrix& conditions, std::uint64_t seed) const {
  if (conditions.cols() != condition_.width) {
    fail(ErrorCode::kWidthMismatch, "table '" + encoder_.table_name() + "' expects condition width " +
                                        std::to_string(condition_.width) + ", got " +
                                        std::to_string(conditions.cols()));
  }
  const Index total = conditions.rows();
  Matrix out(total, encoder_.width());
  if (total == 0 || !generator_) return out;
  nn::NoGradGuard no_grad;
  nn::Rng rng(seed);
  const Index chunk = config_.batch_size;
  for (Index start = 0; start < total; start += chunk) {
    const Index m = std::min(chunk, total - start);
    const Matrix z = normal_matrix(m, config_.z_dim, rng);
    const Matrix cond = conditions.middleRows(start, m);
    const Matrix discrete = sample_discrete_condition(static_cast<std::size_t>(m), rng);
    const Var logits = generator_->forward(generator_input(z, cond, discrete), Mode::kEval, rng);
    out.middleRows(start, m) = nn::apply_span_activations(logits, activations_).value();
  }
  return out;
}

Table TableGan::sample_rows(const TableSpec& spec, const Matrix& conditions,
                            std::size_t per_condition, std::uint64_t seed) const {
  if (conditions.cols() != condition_.width) {
    fail(ErrorCode::kWidthMismatch, "table '" + spec.name + "' expects condition width " +
                                        std::to_string(condition_.width));
  }
  Matrix repeated(conditions.rows() * static_cast<Index>(per_condition), conditions.cols());
  for (Index r = 0; r < conditions.rows(); ++r) {
    for (std::size_t k = 0; k < per_condition; ++k) {
      repeated.row(r * static_cast<Index>(per_condition) + static_cast<Index>(k)) = conditions.row(r);
    }
  }
  Table out = make_empty_table(spec);
  for (auto& col : out.columns) {
    if (col.kind == ColumnKind::kId) col.labels.assign(static_cast<std::size_t>(repeated.rows()), "");
  }
  encoder_.decode(sample_encoded(repeated, seed), out);
  return out;
}

nlohmann::json matrix_to_json(const Matrix& m) {
  return {{"rows", m.rows()},
          {"cols", m.cols()},
          {"data", std::vector<double>(m.data(), m.data() + m.size())}};
}

Matrix matrix_from_json(const nlohmann::json& j) {
  const auto rows = j.at("rows").get<Index>();
  const auto cols = j.at("cols").get<Index>();
  const auto data = j.at("data").get<std::vector<double>>();
  if (rows < 0 || cols < 0 || static_cast<Index>(data.size()) != rows * cols) {
    fail(ErrorCode::kCorruptFile, "matrix payload has inconsistent shape");
  }
  Matrix m(rows, cols);
  std::copy(data.begin(), data.end(), m.data());
  return m;
}

nlohmann::json TableGan::to_json() const {
  nlohmann::json slots = nlohmann::json::array();
  for (const auto& s : condition_.slots) {
    slots.push_back({{"path", rctgan::to_json(s.path)}, {"offset", s.offset}, {"width", s.width}});
  }
  auto state_json = [](const nn::Mlp* mlp) {
    nlohmann::json j = nlohmann::json::object();
    if (mlp) {
      for (const auto& [k, v] : mlp->state()) j[k] = matrix_to_json(v);
    }
    return j;
  };
  nlohmann::json history = nlohmann::json::array();
  for (const auto& h : history_) {
    history.push_back({h.epoch, h.critic_loss, h.gen_loss, h.penalty});
  }
  std::vector<std::vector<double>> log_weights;
  for (const auto& d : discrete_) log_weights.push_back(d.log_weights);
  return {{"config", config_.to_json()},
          {"seed", seed_},
          {"encoder", encoder_.to_json()},
          {"condition", {{"slots", slots}, {"width", condition_.width}}},
          {"log_weights", log_weights},
          {"generator", state_json(generator_.get())},
          {"critic", state_json(critic_.get())},
          {"history", history}};
}

TableGan TableGan::from_json(const nlohmann::json& j, const TableSpec& spec) {
  ConditionLayout layout;
  for (const auto& s : j.at("condition").at("slots")) {
    layout.slots.push_back({ancestor_path_from_json(s.at("path")), s.at("offset").get<Index>(),
                            s.at("width").get<Index>()});
  }
  layout.width = j.at("condition").at("width").get<Index>();
  TableGan gan(TableEncoder::from_json(j.at("encoder"), spec),
               std::move(layout), TrainConfig::from_json(j.at("config")),
               j.at("seed").get<std::uint64_t>());
  const auto log_weights = j.at("log_weights").get<std::vector<std::vector<double>>>();
  if (log_weights.size() != gan.discrete_.size()) {
    fail(ErrorCode::kCorruptFile, "table '" + spec.name + "' discrete metadata mismatch");
  }
  for (std::size_t s = 0; s < log_weights.size(); ++s) gan.discrete_[s].log_weights = log_weights[s];
  auto load = [](nn::Mlp* mlp, const nlohmann::json& state) {
    if (!mlp) return;
    std::map<std::string, Matrix> m;
    for (const auto& [k, v] : state.items()) m[k] = matrix_from_json(v);
    mlp->load_state(m);
  };
  load(gan.generator_.get(), j.at("generator"));
  load(gan.critic_.get(), j.at("critic"));
  for (const auto& h : j.at("history")) {
    gan.history_.push_back({spec.name, h.at(0).get<int>(), h.at(1).get<double>(),
                            h.at(2).get<double>(), h.at(3).get<double>()});
  }
  return gan;
}

}  // namespace rctgan
