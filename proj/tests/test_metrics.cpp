// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#include "worldkit/metrics.hpp"

#include <random>

#include "doctest.h"

using namespace worldkit;
using kg::Triple;

namespace {

// independent count-everything oracle for the set metrics
struct OracleScores {
  double em, f1;
};

OracleScores oracle_set_scores(const std::vector<std::string>& pred,
                               const std::vector<std::string>& gold) {
  std::set<std::string> p(pred.begin(), pred.end());
  std::set<std::string> g(gold.begin(), gold.end());
  if (p.empty() && g.empty()) return {100.0, 100.0};
  long tp = 0;
  for (const auto& x : p) tp += g.count(x) ? 1 : 0;
  double precision = p.empty() ? 0.0 : double(tp) / double(p.size());
  double recall = g.empty() ? 0.0 : double(tp) / double(g.size());
  double f1 = precision + recall > 0 ? 200.0 * precision * recall / (precision + recall) : 0.0;
  return {100.0 * recall, f1};
}

std::vector<Triple> random_triples(std::mt19937_64& rng, int max_n) {
  static const char* words[] = {"a", "b", "c", "d", "e"};
  std::vector<Triple> out;
  int n = static_cast<int>(rng() % (max_n + 1));
  for (int i = 0; i < n; ++i) {
    out.emplace_back(words[rng() % 5], words[rng() % 5], words[rng() % 5]);
  }
  return out;
}

}  // namespace

TEST_CASE("graph metrics: identity, disjoint, empty conventions") {
  std::vector<Triple> g = {Triple("you", "in", "hall"), Triple("you", "have", "gun")};
  auto same = metrics::graph_em_f1(g, g);
  CHECK(same.em == doctest::Approx(100.0));
  CHECK(same.f1 == doctest::Approx(100.0));

  auto vs_empty = metrics::graph_em_f1({}, g);
  CHECK(vs_empty.em == 0.0);
  CHECK(vs_empty.f1 == 0.0);

  auto both_empty = metrics::graph_em_f1({}, {});
  CHECK(both_empty.em == 100.0);
  CHECK(both_empty.f1 == 100.0);
}

TEST_CASE("graph metrics: half overlap") {
  std::vector<Triple> pred = {Triple("a", "in", "x"), Triple("b", "in", "x")};
  std::vector<Triple> gold = {Triple("b", "in", "x"), Triple("c", "in", "x")};
  auto s = metrics::graph_em_f1(pred, gold);
  CHECK(s.em == doctest::Approx(50.0));
  CHECK(s.f1 == doctest::Approx(50.0));
}

TEST_CASE("token metrics give partial credit") {
  std::vector<Triple> pred = {Triple("you", "in", "Hall")};
  std::vector<Triple> gold = {Triple("you", "in", "Armory")};
  auto g = metrics::graph_em_f1(pred, gold);
  auto t = metrics::token_em_f1(pred, gold);
  CHECK(g.f1 == 0.0);
  CHECK(t.em == doctest::Approx(100.0 * 2.0 / 3.0));
  CHECK(t.f1 == doctest::Approx(100.0 * 2.0 / 3.0));
}

TEST_CASE("token f1 dominates graph f1 on equal-size graphs") {
  std::mt19937_64 rng(2024);
  for (int it = 0; it < 500; ++it) {
    auto pred = random_triples(rng, 6);
    auto gold = random_triples(rng, 6);
    std::sort(pred.begin(), pred.end());
    pred.erase(std::unique(pred.begin(), pred.end()), pred.end());
    std::sort(gold.begin(), gold.end());
    gold.erase(std::unique(gold.begin(), gold.end()), gold.end());
    if (pred.size() != gold.size()) continue;
    auto g = metrics::graph_em_f1(pred, gold);
    auto t = metrics::token_em_f1(pred, gold);
    CHECK(t.f1 >= g.f1 - 1e-9);
  }
}

TEST_CASE("action metrics") {
  std::set<std::string> gold = {"east", "west"};
  auto s = metrics::action_em_f1({"east"}, gold);
  CHECK(s.em == doctest::Approx(50.0));
  CHECK(s.f1 == doctest::Approx(100.0 * 2.0 / 3.0));

  // whitespace-normalized duplicates collapse
  auto d = metrics::action_em_f1({"take  wire", "take wire"}, {"take wire"});
  CHECK(d.em == doctest::Approx(100.0));
  CHECK(d.f1 == doctest::Approx(100.0));
}

TEST_CASE("graph metrics equal the counting oracle on random cases") {
  std::mt19937_64 rng(555);
  for (int it = 0; it < 1000; ++it) {
    auto pred = random_triples(rng, 5);
    auto gold = random_triples(rng, 5);
    std::vector<std::string> ps, gs;
    for (const auto& t : pred) ps.push_back(t.key());
    for (const auto& t : gold) gs.push_back(t.key());
    auto mine = metrics::graph_em_f1(pred, gold);
    auto oracle = oracle_set_scores(ps, gs);
    CHECK(mine.em == doctest::Approx(oracle.em).epsilon(1e-12));
    CHECK(mine.f1 == doctest::Approx(oracle.f1).epsilon(1e-12));
  }
}

TEST_CASE("metric properties: symmetry of f1, monotonicity, bounds") {
  std::mt19937_64 rng(99);
  for (int it = 0; it < 300; ++it) {
    auto pred = random_triples(rng, 5);
    auto gold = random_triples(rng, 5);
    auto ab = metrics::graph_em_f1(pred, gold);
    auto ba = metrics::graph_em_f1(gold, pred);
    CHECK(ab.f1 == doctest::Approx(ba.f1).epsilon(1e-12));
    CHECK(ab.em >= 0.0);
    CHECK(ab.em <= 100.0);
    CHECK(ab.f1 >= 0.0);
    CHECK(ab.f1 <= 100.0);

    if (!gold.empty()) {
      // adding a correct triple never hurts
      auto pred_plus = pred;
      pred_plus.push_back(gold[0]);
      auto plus = metrics::graph_em_f1(pred_plus, gold);
      CHECK(plus.em >= ab.em - 1e-9);
      CHECK(plus.f1 >= ab.f1 - 1e-9);

      // adding an incorrect triple never raises f1
      auto pred_bad = pred;
      pred_bad.push_back(Triple("definitely", "not", "there"));
      auto bad = metrics::graph_em_f1(pred_bad, gold);
      CHECK(bad.f1 <= ab.f1 + 1e-9);
    }
  }
}

TEST_CASE("weighted aggregation arithmetic") {
  metrics::GameRow a{"small", 1, {{"em", 0.0}}};
  metrics::GameRow b{"large", 3, {{"em", 100.0}}};
  auto report = metrics::aggregate_weighted({a, b});
  CHECK(report.overall.values.at("em") == doctest::Approx(75.0));
  CHECK(report.overall.samples == 4);

  auto solo = metrics::aggregate_weighted({b});
  CHECK(solo.overall.values.at("em") == doctest::Approx(100.0));

  CHECK_THROWS_AS(metrics::aggregate_weighted({}), std::invalid_argument);
  metrics::GameRow zero{"zero", 0, {{"em", 1.0}}};
  CHECK_THROWS_AS(metrics::aggregate_weighted({zero}), std::invalid_argument);
}

TEST_CASE("published per-game rows aggregate to the published overall cells") {
  // nine test games with their sample counts; overall is size weighted
  std::vector<long> sizes = {886, 654, 434, 990, 276, 462, 2210, 630, 1294};
  std::vector<double> em = {21.62, 34.39, 41.05, 50.41, 30.00, 41.56, 40.10, 41.87, 42.43};
  std::vector<double> f1 = {24.44, 34.39, 44.53, 52.43, 34.30, 42.20, 41.65, 42.74, 45.17};
  std::vector<metrics::GameRow> rows;
  for (std::size_t i = 0; i < sizes.size(); ++i) {
    rows.push_back({"game" + std::to_string(i), sizes[i], {{"em", em[i]}, {"f1", f1[i]}}});
  }
  auto report = metrics::aggregate_weighted(rows);
  CHECK(report.overall.samples == 7836);
  CHECK(std::abs(report.overall.values.at("em") - 39.15) <= 0.05);
  CHECK(std::abs(report.overall.values.at("f1") - 41.06) <= 0.05);

  auto table = metrics::render_table(report);
  CHECK(table.find("overall") != std::string::npos);
  CHECK(table.find("39.15") != std::string::npos);
}
