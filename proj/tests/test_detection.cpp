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

#include <algorithm>
#include <cmath>
#include <random>

#include "rctgan/detection.hpp"
#include "test_util.hpp"

using namespace rctgan;
using namespace rctgan::testing;

namespace {

// Independent oracle: count over every positive/negative pair.
double brute_force_auc(const std::vector<double>& pos, const std::vector<double>& neg) {
  double wins = 0;
  for (double p : pos) {
    for (double n : neg) wins += p > n ? 1.0 : (p == n ? 0.5 : 0.0);
  }
  return wins / static_cast<double>(pos.size() * neg.size());
}

double auc_of(const std::vector<double>& pos, const std::vector<double>& neg) {
  std::vector<double> scores(pos);
  scores.insert(scores.end(), neg.begin(), neg.end());
  std::vector<int> labels(pos.size(), 1);
  labels.resize(scores.size(), 0);
  return roc_auc(scores, labels);
}

double train_auc(const Matrix& x, const std::vector<int>& y) {
  const auto model = train_logistic(x, y);
  const Vector s = model.decision(x);
  return roc_auc(std::span<const double>(s.data(), static_cast<std::size_t>(s.size())), y);
}

Table mixed_table(std::size_t rows, std::uint64_t seed) {
  TableSpec spec{"t", {{"id", ColumnKind::kId}, {"c", ColumnKind::kCategorical},
                       {"x", ColumnKind::kNumerical}, {"n", ColumnKind::kInteger}}, "id"};
  Table t = make_empty_table(spec);
  std::mt19937_64 rng(seed);
  std::normal_distribution<double> normal;
  std::uniform_int_distribution<int> cat(0, 2);
  for (std::size_t i = 0; i < rows; ++i) {
    t.column("id").labels.push_back(std::to_string(i));
    const int k = cat(rng);
    t.column("c").labels.push_back(std::string(1, static_cast<char>('a' + k)));
    t.column("x").numbers.push_back(normal(rng) + k);
    t.column("n").numbers.push_back(std::round(3 * normal(rng)));
  }
  return t;
}

}  // namespace

TEST_CASE("detection score mapping") {
  CHECK(std::abs(detection_score(0.5) - 1.0) <= 1e-12);
  CHECK(std::abs(detection_score(1.0) - 0.0) <= 1e-12);
  CHECK(std::abs(detection_score(0.3) - 1.0) <= 1e-12);
  CHECK(std::abs(detection_score(0.75) - 0.5) <= 1e-12);
  CHECK(std::abs(detection_score(0.68665) - 0.6267) <= 1e-12);
  for (int i = 0; i <= 100; ++i) {
    const double x = 0.005 * i;
    CHECK(std::abs(detection_score(0.5 + x) + 2 * x - 1.0) <= 1e-12);
    if (i) CHECK(detection_score(0.5 + x) <= detection_score(0.5 + x - 0.005));
  }
}

TEST_CASE("roc auc against brute force") {
  CHECK(auc_of({0.9, 0.4}, {0.3, 0.5}) == doctest::Approx(0.75).epsilon(1e-15));
  CHECK(auc_of({1, 1, 1}, {1, 1}) == 0.5);
  CHECK(auc_of({3, 4}, {1, 2}) == 1.0);
  std::mt19937_64 rng(3);
  std::uniform_int_distribution<int> coarse(0, 5);  // many ties
  for (int trial = 0; trial < 50; ++trial) {
    std::vector<double> pos(1 + trial % 7), neg(1 + trial % 5);
    for (auto& v : pos) v = coarse(rng);
    for (auto& v : neg) v = coarse(rng);
    CHECK(auc_of(pos, neg) == doctest::Approx(brute_force_auc(pos, neg)).epsilon(1e-12));
    // Invariance under a strictly increasing transform.
    std::vector<double> tp(pos), tn(neg);
    for (auto& v : tp) v = std::exp(3 * v) - 7;
    for (auto& v : tn) v = std::exp(3 * v) - 7;
    CHECK(auc_of(tp, tn) == auc_of(pos, neg));
  }
  CHECK(code_of([] { (void)auc_of({1, 2}, {}); }) == ErrorCode::kSingleClass);
}

TEST_CASE("logistic regression") {
  SUBCASE("separable 1-d data") {
    Matrix x(2, 1);
    x << -1, 1;
    CHECK(train_auc(x, {0, 1}) == 1.0);
  }
  SUBCASE("indistinguishable classes") {
    Matrix x = Matrix::Constant(4, 2, 0.3);
    CHECK(train_auc(x, {0, 1, 0, 1}) == 0.5);
  }
  SUBCASE("xor is out of reach for a linear model") {
    std::mt19937_64 rng(9);
    std::normal_distribution<double> noise(0, 0.1);
    Matrix x(400, 2);
    std::vector<int> y(400);
    for (int i = 0; i < 400; ++i) {
      const int a = i % 2, b = (i / 2) % 2;
      x(i, 0) = (a ? 1 : -1) + noise(rng);
      x(i, 1) = (b ? 1 : -1) + noise(rng);
      y[i] = a ^ b;
    }
    CHECK(train_auc(x, y) < 0.65);
  }
  SUBCASE("single class") {
    Matrix x = Matrix::Zero(3, 1);
    CHECK(code_of([&] { train_logistic(x, std::vector<int>{1, 1, 1}); }) ==
          ErrorCode::kSingleClass);
  }
  SUBCASE("recovers a known boundary") {
    std::mt19937_64 rng(2);
    std::normal_distribution<double> normal;
    Matrix x(2000, 2);
    std::vector<int> y(2000);
    std::uniform_real_distribution<double> unit;
    for (int i = 0; i < 2000; ++i) {
      x(i, 0) = normal(rng);
      x(i, 1) = normal(rng);
      const double p = 1 / (1 + std::exp(-(2 * x(i, 0) - x(i, 1) + 0.5)));
      y[i] = unit(rng) < p;
    }
    const auto m = train_logistic(x, y, 0.0, 2000);
    CHECK(m.weights(0) == doctest::Approx(2.0).epsilon(0.15));
    CHECK(m.weights(1) == doctest::Approx(-1.0).epsilon(0.15));
    CHECK(m.intercept == doctest::Approx(0.5).epsilon(0.3));
  }
}

TEST_CASE("table detection") {
  const Table real = mixed_table(600, 1);
  SUBCASE("identical copy scores high") {
    CHECK(ld_score(real, real).score >= 0.85);
  }
  SUBCASE("shuffled rows score high") {
    Table shuffled = real;
    std::vector<std::size_t> order(real.row_count());
    std::iota(order.begin(), order.end(), 0);
    std::shuffle(order.begin(), order.end(), std::mt19937_64(4));
    for (auto& col : shuffled.columns) {
      const Column src = col;
      for (std::size_t i = 0; i < order.size(); ++i) {
        if (!src.labels.empty()) col.labels[i] = src.labels[order[i]];
        if (!src.numbers.empty()) col.numbers[i] = src.numbers[order[i]];
      }
    }
    CHECK(ld_score(real, shuffled).score >= 0.85);
  }
  SUBCASE("fresh sample from the same distribution scores high") {
    CHECK(ld_score(real, mixed_table(600, 2)).score >= 0.85);
  }
  SUBCASE("shifted copy scores low") {
    Table shifted = real;
    for (auto& v : shifted.column("x").numbers) v += 4;
    const auto r = ld_score(real, shifted);
    CHECK(r.score <= 0.15);
    CHECK(r.auc >= 0.9);
  }
  SUBCASE("deterministic for a seed and balanced on unequal sizes") {
    const Table other = mixed_table(300, 5);
    DetectionOptions o;
    o.seed = 11;
    const auto a = ld_score(real, other, o);
    const auto b = ld_score(real, other, o);
    CHECK(a.auc == b.auc);
    CHECK(a.n_real == 600);
    CHECK(a.n_synth == 300);
    CHECK(a.score == detection_score(a.auc));
  }
  SUBCASE("errors") {
    DetectionOptions o;
    o.folds = 1;
    CHECK(code_of([&] { ld_score(real, real, o); }) == ErrorCode::kInvalidArgument);
    Table empty = make_empty_table(TableSpec{"t", {{"id", ColumnKind::kId}, {"c", ColumnKind::kCategorical},
                                                   {"x", ColumnKind::kNumerical}, {"n", ColumnKind::kInteger}}, "id"});
    CHECK(code_of([&] { ld_score(real, empty); }) == ErrorCode::kSingleClass);
  }
}

TEST_CASE("parent-child detection sees broken dependence") {
  auto schema = schema_from(R"({"tables": {
    "p": {"primary_key": "id", "columns": {"id": "id", "c": "categorical"}},
    "ch": {"primary_key": "id", "columns": {"id": "id", "pid": "id", "v": "numerical"},
           "foreign_keys": [{"column": "pid", "references": {"table": "p", "column": "id"}}]}}})");
  auto build = [&](bool dependent, std::uint64_t seed) {
    Database db(schema);
    Table p = make_empty_table(schema->table("p"));
    Table ch = make_empty_table(schema->table("ch"));
    std::mt19937_64 rng(seed);
    std::normal_distribution<double> normal;
    std::bernoulli_distribution coin;
    for (int i = 0; i < 500; ++i) {
      const bool b = i % 2;
      p.column("id").labels.push_back(std::to_string(i));
      p.column("c").labels.push_back(b ? "B" : "A");
      for (int k = 0; k < 2; ++k) {
        ch.column("id").labels.push_back(std::to_string(2 * i + k));
        ch.column("pid").labels.push_back(std::to_string(i));
        const bool shift = dependent ? b : coin(rng);
        ch.column("v").numbers.push_back(normal(rng) + (shift ? 5 : 0));
      }
    }
    db.set_table(p);
    db.set_table(ch);
    return db;
  };
  const Database real = build(true, 1);
  const Database faithful = build(true, 2);
  const Database broken = build(false, 3);
  const auto good = pc_ld_score(real, faithful, "ch");
  const auto bad = pc_ld_score(real, broken, "ch");
  CHECK(good.score >= 0.85);
  CHECK(bad.score < ld_score(real.table("ch"), broken.table("ch")).score);
  CHECK(bad.score < ld_score(real.table("p"), broken.table("p")).score);
  CHECK(good.score - bad.score >= 0.3);

  const auto report = evaluate(real, broken);
  CHECK(report.tables.size() == 2);
  REQUIRE(report.relationships.size() == 1);
  CHECK(report.relationships[0].child == "ch");
  const auto j = report.to_json();
  CHECK(j.at("tables").contains("p"));
  CHECK(j.at("tables").contains("ch"));
  CHECK(j.at("avg_ld") == doctest::Approx((report.tables.at("p").score + report.tables.at("ch").score) / 2));
  CHECK(j.at("avg_pc_ld") == report.relationships[0].result.score);
  CHECK(j.at("folds") == 3);
  CHECK(report.to_text().find("pc_ld") != std::string::npos);
  for (const auto& [name, r] : report.tables) {
    CHECK(r.score >= 0.0);
    CHECK(r.score <= 1.0);
  }
}
