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

#include <cmath>
#include <set>

#include "rctgan/table_gan.hpp"
#include "test_util.hpp"

using namespace rctgan;
using namespace rctgan::testing;

namespace {

TrainConfig tiny_config() {
  TrainConfig c;
  c.epochs = 3;
  c.batch_size = 10;
  c.pac = 2;
  c.z_dim = 4;
  c.generator_hidden = {8};
  c.critic_hidden = {8};
  return c;
}

struct Fixture {
  Database db = store_sales_db();
  std::map<std::string, TableEncoder> encoders;
  EncoderLookup lookup = [this](const std::string& t) -> const TableEncoder& {
    return encoders.at(t);
  };

  Fixture() {
    for (const auto& name : db.schema().topological_order()) {
      encoders[name] = TableEncoder::fit(db.schema().table(name), db.table(name), 10, 1);
    }
  }

  TableGan gan(const std::string& table, int depth, TrainConfig config = tiny_config(),
               std::uint64_t seed = 7) {
    return TableGan(encoders.at(table),
                    make_condition_layout(db.schema(), table, depth, lookup), config, seed);
  }

  Matrix encoded(const std::string& table) {
    nn::Rng rng(3);
    return encoders.at(table).encode(db.table(table), ModeSelection::kSample, rng);
  }

  Matrix conditions(const std::string& table, const TableGan& g) {
    return build_conditions(g.condition_layout(), db, db.table(table), lookup);
  }
};

// Critic with one affine layer: score = x . w over the pac-grouped input.
std::unique_ptr<nn::Mlp> linear_critic(const Matrix& w) {
  auto mlp = std::make_unique<nn::Mlp>(w.rows());
  mlp->emplace<nn::Affine>(w, Matrix::Zero(1, 1));
  return mlp;
}

}  // namespace

TEST_CASE("root table has an empty ancestor condition") {
  Fixture f;
  auto gan = f.gan("store", 1);
  CHECK(gan.condition_width() == 0);
  CHECK(gan.discrete_width() == 2);
  CHECK(gan.generator_input_dim() == 4 + 0 + 2);
  CHECK(gan.critic_input_dim() == 2 * (f.encoders.at("store").width() + 2));
}

TEST_CASE("child input widths include ancestor and discrete conditions") {
  Fixture f;
  auto gan = f.gan("sales", 1);
  const Index parent = f.encoders.at("store").width();
  CHECK(gan.condition_width() == parent);
  CHECK(gan.discrete_width() == 0);
  CHECK(gan.generator_input_dim() == 4 + parent);
  CHECK(gan.critic_input_dim() == 2 * (f.encoders.at("sales").width() + parent));
}

TEST_CASE("ablation layout has zero condition width") {
  Fixture f;
  auto gan = f.gan("sales", 0);
  CHECK(gan.condition_width() == 0);
}

TEST_CASE("training without discrete columns runs and logs every epoch") {
  Fixture f;
  auto gan = f.gan("sales", 1);
  std::vector<EpochLog> seen;
  gan.fit(f.encoded("sales"), f.conditions("sales", gan),
          [&](const EpochLog& log) { seen.push_back(log); });
  REQUIRE(seen.size() == 3);
  for (int e = 0; e < 3; ++e) {
    CHECK(seen[e].epoch == e);
    CHECK(seen[e].table == "sales");
    CHECK(std::isfinite(seen[e].critic_loss));
    CHECK(std::isfinite(seen[e].gen_loss));
    CHECK(seen[e].penalty >= 0.0);
  }
  CHECK(gan.history().size() == 3);
  auto line = nlohmann::json::parse(seen[0].to_json_line());
  CHECK(line.size() == 5);
  CHECK(line.at("table") == "sales");
}

TEST_CASE("fit is bit-reproducible for a fixed seed") {
  Fixture f;
  auto a = f.gan("store", 1);
  auto b = f.gan("store", 1);
  const Matrix enc = f.encoded("store");
  const Matrix cond(enc.rows(), 0);
  a.fit(enc, cond);
  b.fit(enc, cond);
  CHECK(a.generator()->state() == b.generator()->state());
  CHECK(a.critic()->state() == b.critic()->state());
  CHECK(a.sample_encoded(Matrix(5, 0), 11) == b.sample_encoded(Matrix(5, 0), 11));
}

TEST_CASE("sampling") {
  Fixture f;
  auto gan = f.gan("sales", 1);
  const auto& spec = f.db.schema().table("sales");
  const Matrix cond = f.conditions("sales", gan);

  SUBCASE("zero rows gives an empty table") {
    Table t = gan.sample_rows(spec, cond.topRows(0), 3, 1);
    CHECK(t.row_count() == 0);
    CHECK(t.columns.size() == spec.columns.size());
  }
  SUBCASE("same seed gives identical output") {
    CHECK(gan.sample_rows(spec, cond, 2, 5) == gan.sample_rows(spec, cond, 2, 5));
    CHECK(gan.sample_encoded(cond, 5) != gan.sample_encoded(cond, 6));
  }
  SUBCASE("untrained generator emits valid rows") {
    Table t = gan.sample_rows(spec, cond, 4, 9);
    CHECK(t.row_count() == 12);
    for (double v : t.column("v").numbers) CHECK(std::isfinite(v));
  }
  SUBCASE("width mismatch is rejected") {
    CHECK(code_of([&] { (void)gan.sample_encoded(Matrix(2, cond.cols() + 1), 1); }) ==
          ErrorCode::kWidthMismatch);
  }
}

TEST_CASE("untrained root generator emits known categories") {
  Fixture f;
  auto gan = f.gan("store", 1);
  Table t = gan.sample_rows(f.db.schema().table("store"), Matrix(50, 0), 1, 2);
  for (const auto& label : t.column("c").labels) {
    CHECK((label == "A" || label == "B"));
  }
}

TEST_CASE("empty table and mismatched conditions are rejected") {
  Fixture f;
  auto gan = f.gan("sales", 1);
  const Matrix enc = f.encoded("sales");
  CHECK(code_of([&] { gan.fit(enc.topRows(0), Matrix(0, gan.condition_width())); }) ==
        ErrorCode::kEmptyTable);
  CHECK(code_of([&] { gan.fit(enc, Matrix(enc.rows(), 0)); }) == ErrorCode::kWidthMismatch);
}

TEST_CASE("linear critic loss and penalty match closed forms") {
  Fixture f;
  auto gan = f.gan("store", 1);
  const Index dim = gan.critic_input_dim();
  const Index row_width = dim / 2;
  nn::Rng rng(4);
  std::normal_distribution<double> normal;
  Matrix w(dim, 1);
  for (Index i = 0; i < dim; ++i) w(i, 0) = normal(rng);
  Matrix real(6, row_width), fake(6, row_width);
  for (Index i = 0; i < real.size(); ++i) {
    real.data()[i] = normal(rng);
    fake.data()[i] = normal(rng);
  }

  SUBCASE("identical batches give zero loss") {
    gan.set_critic(linear_critic(w));
    CHECK(gan.critic_loss(real, real).item() == doctest::Approx(0.0).epsilon(1e-12));
  }
  SUBCASE("loss is the mean score difference") {
    gan.set_critic(linear_critic(w));
    const Eigen::Map<const Matrix> r(real.data(), 3, dim), fk(fake.data(), 3, dim);
    const double expected = (fk * w).mean() - (r * w).mean();
    CHECK(gan.critic_loss(real, fake).item() == doctest::Approx(expected).epsilon(1e-12));
  }
  SUBCASE("penalty is (|w| - 1)^2") {
    gan.set_critic(linear_critic(w));
    const double n = w.norm();
    CHECK(gan.gradient_penalty(real, fake, rng).item() ==
          doctest::Approx((n - 1) * (n - 1)).epsilon(1e-9));
  }
  SUBCASE("unit-norm weights give zero penalty") {
    gan.set_critic(linear_critic(w / w.norm()));
    CHECK(gan.gradient_penalty(real, fake, rng).item() == doctest::Approx(0.0).epsilon(1e-9));
  }
}

TEST_CASE("json round trip preserves sampling") {
  Fixture f;
  auto gan = f.gan("sales", 1);
  gan.fit(f.encoded("sales"), f.conditions("sales", gan));
  const auto& spec = f.db.schema().table("sales");
  auto copy = TableGan::from_json(nlohmann::json::parse(gan.to_json().dump()), spec);
  const Matrix cond = f.conditions("sales", gan);
  CHECK(copy.sample_encoded(cond, 3) == gan.sample_encoded(cond, 3));
  CHECK(copy.history().size() == gan.history().size());
}

TEST_CASE("train config validation and json") {
  TrainConfig c;
  CHECK_NOTHROW(c.validate());
  c.batch_size = 15;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kInvalidArgument);
  c = TrainConfig();
  c.critic_dropout = 0.3;
  CHECK(code_of([&] { c.validate(); }) == ErrorCode::kInvalidArgument);
  c.gradient_penalty = 0.0;
  CHECK_NOTHROW(c.validate());

  auto parsed = TrainConfig::from_json(nlohmann::json{{"epochs", 5}, {"pac", 5}});
  CHECK(parsed.epochs == 5);
  CHECK(parsed.pac == 5);
  CHECK(parsed.batch_size == 500);
  CHECK(TrainConfig::from_json(parsed.to_json()).to_json() == parsed.to_json());
  CHECK(error_of([] { TrainConfig::from_json(nlohmann::json{{"epoch", 5}}); })
            .what() == std::string("unknown config key 'epoch'"));
  CHECK(code_of([] { TrainConfig::from_json(nlohmann::json{{"epochs", "x"}}); }) ==
        ErrorCode::kInvalidArgument);
}
