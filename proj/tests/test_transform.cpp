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
#include <numeric>
#include <random>

#include "doctest.h"
#include "rctgan/error.hpp"
#include "rctgan/transform.hpp"
#include "test_util.hpp"

using namespace rctgan;
using rctgan::testing::code_of;

namespace {

const char* kChainMetadata = R"({"tables": {
  "A": {"primary_key": "id", "columns": {"id": "id", "g": "numerical"}},
  "B": {"primary_key": "id", "columns": {"id": "id", "a_id": "id", "c": "categorical"},
        "foreign_keys": [{"column": "a_id", "references": {"table": "A", "column": "id"}}]},
  "C": {"primary_key": "id", "columns": {"id": "id", "b_id": "id", "v": "numerical"},
        "foreign_keys": [{"column": "b_id", "references": {"table": "B", "column": "id"}}]}
}})";

Database chain_db() {
  Database db(testing::schema_from(kChainMetadata));
  Table a = make_empty_table(db.schema().table("A"));
  a.column("id").labels = {"1", "2"};
  a.column("g").numbers = {3.0, 7.0};
  db.set_table(a);
  Table b = make_empty_table(db.schema().table("B"));
  b.column("id").labels = {"10", "11"};
  b.column("a_id").labels = {"2", "1"};
  b.column("c").labels = {"A", "B"};
  db.set_table(b);
  Table c = make_empty_table(db.schema().table("C"));
  c.column("id").labels = {"100"};
  c.column("b_id").labels = {"10"};
  c.column("v").numbers = {1.0};
  db.set_table(c);
  return db;
}

}  // namespace

TEST_CASE("single Gaussian: fit recovers parameters and alpha follows the scale rule") {
  std::mt19937_64 rng(42);
  std::normal_distribution<double> normal(5.0, 2.0);
  std::vector<double> values(10000);
  for (auto& v : values) v = normal(rng);
  auto enc = ContinuousEncoder::fit(values, 1, 1);
  REQUIRE(enc.components().size() == 1);
  const auto& c = enc.components()[0];
  CHECK(c.mean == doctest::Approx(5.0).epsilon(0.02));
  CHECK(c.stddev == doctest::Approx(2.0).epsilon(0.03));
  CHECK(c.weight == doctest::Approx(1.0));
  std::vector<double> out(2);
  nn::Rng r(0);
  enc.encode(7.0, ModeSelection::kSample, r, out);
  CHECK(out[0] == doctest::Approx((7.0 - c.mean) / (4.0 * c.stddev)).epsilon(1e-12));
  CHECK(out[0] == doctest::Approx(0.25).epsilon(0.05));
  CHECK(out[1] == 1.0);

  // Exact case: {3, 7} has mean 5 and population stddev 2.
  auto exact = ContinuousEncoder::fit(std::vector<double>{3.0, 7.0}, 1, 1);
  exact.encode(7.0, ModeSelection::kSample, r, out);
  CHECK(out[0] == doctest::Approx(0.25).epsilon(1e-12));
}

TEST_CASE("constant column becomes a degenerate single mode") {
  auto enc = ContinuousEncoder::fit(std::vector<double>{3, 3, 3}, 10, 1);
  CHECK(enc.is_degenerate());
  REQUIRE(enc.components().size() == 1);
  CHECK(enc.components()[0].stddev == doctest::Approx(3e-6));
  std::vector<double> out(2);
  nn::Rng r(0);
  enc.encode(3.0, ModeSelection::kSample, r, out);
  CHECK(out[0] == 0.0);
  CHECK(out[1] == 1.0);
  CHECK(enc.decode(std::vector<double>{0.7, 1.0}) == 3.0);
  CHECK(code_of([] { ContinuousEncoder::fit(std::vector<double>{1.0}, 3, 1); }) ==
        ErrorCode::kInvalidArgument);
}

TEST_CASE("two separated clusters keep exactly two modes") {
  std::mt19937_64 rng(5);
  std::normal_distribution<double> n0(0.0, 1.0), n100(100.0, 1.0);
  std::vector<double> values;
  for (int i = 0; i < 1000; ++i) {
    values.push_back(n0(rng));
    values.push_back(n100(rng));
  }
  auto enc = ContinuousEncoder::fit(values, 10, 9);
  REQUIRE(enc.components().size() == 2);
  CHECK(enc.components()[0].mean == doctest::Approx(0.0).epsilon(0.1).scale(1.0));
  CHECK(enc.components()[1].mean == doctest::Approx(100.0).epsilon(0.01));
  double total = 0.0;
  for (const auto& c : enc.components()) total += c.weight;
  CHECK(std::fabs(total - 1.0) < 1e-9);
}

TEST_CASE("mixture weights sum to one after pruning on skewed data") {
  std::mt19937_64 rng(8);
  std::exponential_distribution<double> expo(0.3);
  for (int trial = 0; trial < 5; ++trial) {
    std::vector<double> values(500);
    for (auto& v : values) v = expo(rng);
    auto enc = ContinuousEncoder::fit(values, 10, trial);
    double total = 0.0;
    for (const auto& c : enc.components()) {
      total += c.weight;
      CHECK(c.weight >= kPruneWeight);
      CHECK(c.stddev > 0.0);
    }
    CHECK(std::fabs(total - 1.0) < 1e-9);
  }
}

TEST_CASE("discrete encoder one-hot and argmax decode") {
  std::vector<std::string> values{"red", "green", "blue", "green"};
  auto enc = DiscreteEncoder::fit(values);
  CHECK(enc.categories() == std::vector<std::string>{"blue", "green", "red"});
  std::vector<double> out(3);
  enc.encode("green", out);
  CHECK(out == std::vector<double>{0, 1, 0});
  CHECK(enc.decode(std::vector<double>{0, 0, 0}) == "blue");
  CHECK(enc.decode(std::vector<double>{0.2, 0.1, 0.7}) == "red");
  CHECK(std::accumulate(enc.frequencies().begin(), enc.frequencies().end(), 0.0) ==
        doctest::Approx(1.0));
  CHECK(code_of([&] { enc.decode(std::vector<double>{1, 0}); }) ==
        ErrorCode::kWidthMismatch);

  auto with_missing = DiscreteEncoder::fit(std::vector<std::string>{"a", ""});
  CHECK(with_missing.categories() == std::vector<std::string>{kMissingCategory, "a"});
  with_missing.encode("", std::span<double>(out.data(), 2));
  CHECK(with_missing.decode(std::span<const double>(out.data(), 2)) == "");
}

TEST_CASE("random mixed rows round-trip through the table encoder") {
  auto schema = testing::schema_from(R"({"tables": {"T": {"primary_key": "id",
      "columns": {"id": "id", "x": "numerical", "k": "categorical",
                  "n": "integer", "t": "datetime"}}}})");
  std::mt19937_64 rng(21);
  std::normal_distribution<double> a(-3.0, 0.5), b(40.0, 4.0);
  const std::vector<std::string> cats{"p", "q", "r", "s", ""};
  Table t = make_empty_table(schema->table("T"));
  for (int i = 0; i < 1000; ++i) {
    t.column("id").labels.push_back(std::to_string(i));
    t.column("x").numbers.push_back(rng() % 2 ? a(rng) : b(rng));
    t.column("k").labels.push_back(cats[rng() % cats.size()]);
    t.column("n").numbers.push_back(static_cast<double>(rng() % 20));
    t.column("t").numbers.push_back(1.4e9 + static_cast<double>(rng() % 100000));
  }
  auto enc = TableEncoder::fit(schema->table("T"), t, 10, 17);
  nn::Rng r(1);
  Matrix encoded = enc.encode(t, ModeSelection::kSample, r);
  CHECK(encoded.rows() == 1000);
  CHECK(encoded.cols() == enc.width());

  Table back = make_empty_table(schema->table("T"));
  enc.decode(encoded, back);
  CHECK(back.column("k").labels == t.column("k").labels);
  CHECK(back.column("n").numbers == t.column("n").numbers);
  CHECK(back.column("t").numbers == t.column("t").numbers);
  const auto& span = enc.layout().spans[0];
  const auto& x = t.column("x").numbers;
  double worst = 0.0;
  for (Index i = 0; i < encoded.rows(); ++i) {
    if (std::fabs(encoded(i, span.offset)) >= 1.0) continue;  // clipped
    Index mode = 0;
    for (Index m = 0; m < span.width - 1; ++m) {
      if (encoded(i, span.offset + 1 + m) == 1.0) mode = m;
    }
    const double sigma = enc.continuous(0).components()[mode].stddev;
    const double err = std::fabs(back.column("x").numbers[i] - x[i]);
    worst = std::max(worst, err / (4.0 * sigma * 1e-6));
  }
  CHECK(worst <= 1.0);

  // Layout spans tile [0, width).
  Index at = 0;
  for (const auto& s : enc.layout().spans) {
    CHECK(s.offset == at);
    at += s.width;
  }
  CHECK(at == enc.width());

  Matrix narrow(1, enc.width() - 1);
  CHECK(code_of([&] { enc.decode(narrow, back); }) == ErrorCode::kWidthMismatch);
}

TEST_CASE("missing continuous values are imputed with the mean") {
  auto schema = testing::schema_from(R"({"tables": {"T": {"primary_key": null,
      "columns": {"x": "numerical"}}}})");
  Table t = make_empty_table(schema->table("T"));
  t.column("x").numbers = {1.0, std::nan(""), 3.0};
  auto enc = TableEncoder::fit(schema->table("T"), t, 1, 1);
  CHECK(enc.continuous(0).fill_value() == 2.0);
  nn::Rng r(0);
  auto row = enc.encode_row(t, 1, ModeSelection::kMostLikely, r);
  CHECK(row[0] == doctest::Approx(0.0));
}

TEST_CASE("condition vectors concatenate ancestor encodings in slot order") {
  auto db = chain_db();
  const auto& schema = db.schema();
  std::map<std::string, TableEncoder> encoders;
  for (const auto& t : schema.tables()) {
    encoders.emplace(t.name, TableEncoder::fit(t, db.table(t.name), 1, 3));
  }
  EncoderLookup lookup = [&](const std::string& name) -> const TableEncoder& {
    return encoders.at(name);
  };

  auto root = make_condition_layout(schema, "A", 2, lookup);
  CHECK(root.width == 0);
  CHECK(build_condition(root, {}).empty());

  auto depth1 = make_condition_layout(schema, "B", 1, lookup);
  CHECK(depth1.width == 2);  // A.g: alpha + one mode
  auto depth1_c = make_condition_layout(schema, "C", 1, lookup);
  REQUIRE(depth1_c.slots.size() == 1);
  CHECK(build_condition(depth1_c, {{1.0, 0.0}}) == std::vector<double>{1, 0});

  auto depth2 = make_condition_layout(schema, "C", 2, lookup);
  REQUIRE(depth2.slots.size() == 2);
  CHECK(depth2.slots[0].path.table() == "B");
  CHECK(depth2.slots[1].path.table() == "A");
  CHECK(depth2.width == 4);
  CHECK(build_condition(depth2, {{1, 0}, {0.25, 1}}) ==
        std::vector<double>{1, 0, 0.25, 1});

  // Same vector assembled from the database: C row -> B "10" (category A)
  // -> A "2" (g = 7, mean 5, stddev 2, alpha 0.25).
  Matrix cond = build_conditions(depth2, db, db.table("C"), lookup);
  REQUIRE(cond.rows() == 1);
  CHECK(cond(0, 0) == 1.0);
  CHECK(cond(0, 1) == 0.0);
  CHECK(cond(0, 2) == doctest::Approx(0.25).epsilon(1e-12));
  CHECK(cond(0, 3) == 1.0);

  CHECK(code_of([&] { build_condition(depth2, {{1, 0}}); }) ==
        ErrorCode::kMissingAncestorRow);
  CHECK(code_of([&] { build_condition(depth2, {{1, 0}, {0.25}}); }) ==
        ErrorCode::kWidthMismatch);
  Table orphan = db.table("C");
  orphan.column("b_id").labels[0] = "404";
  CHECK(code_of([&] { build_conditions(depth2, db, orphan, lookup); }) ==
        ErrorCode::kMissingAncestorRow);
}

TEST_CASE("encoder JSON round-trip preserves the layout") {
  auto db = chain_db();
  const auto& spec = db.schema().table("B");
  auto enc = TableEncoder::fit(spec, db.table("B"), 3, 1);
  auto back = TableEncoder::from_json(enc.to_json(), spec);
  CHECK(back.to_json() == enc.to_json());
  CHECK(back.width() == enc.width());
}
