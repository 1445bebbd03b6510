// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#include "worldkit/metrics.hpp"

#include <algorithm>
#include <iomanip>
#include <sstream>
#include <stdexcept>

namespace worldkit::metrics {

PairScore score_from_counts(const MatchCounts& c) {
  PairScore s;
  if (c.predicted == 0 && c.gold == 0) {
    s.em = 100.0;
    s.f1 = 100.0;
    return s;
  }
  double precision = c.predicted > 0 ? static_cast<double>(c.tp) / c.predicted : 0.0;
  double recall = c.gold > 0 ? static_cast<double>(c.tp) / c.gold : 0.0;
  s.em = 100.0 * recall;
  s.f1 = (precision + recall) > 0.0 ? 100.0 * 2.0 * precision * recall / (precision + recall) : 0.0;
  return s;
}

namespace {

std::vector<kg::Triple> sorted_unique(std::vector<kg::Triple> v) {
  std::sort(v.begin(), v.end());
  v.erase(std::unique(v.begin(), v.end()), v.end());
  return v;
}

}  // namespace

MatchCounts graph_counts(const std::vector<kg::Triple>& pred, const std::vector<kg::Triple>& gold) {
  auto p = sorted_unique(pred);
  auto g = sorted_unique(gold);
  std::vector<kg::Triple> inter;
  std::set_intersection(p.begin(), p.end(), g.begin(), g.end(), std::back_inserter(inter));
  return MatchCounts{static_cast<long>(inter.size()), static_cast<long>(p.size()),
                     static_cast<long>(g.size())};
}

PairScore graph_em_f1(const std::vector<kg::Triple>& pred, const std::vector<kg::Triple>& gold) {
  return score_from_counts(graph_counts(pred, gold));
}

MatchCounts token_counts(const std::vector<kg::Triple>& pred, const std::vector<kg::Triple>& gold) {
  auto flatten = [](const std::vector<kg::Triple>& triples) {
    std::map<std::string, long> counts;
    for (const auto& t : sorted_unique(triples)) {
      ++counts[t.subject];
      ++counts[t.relation];
      ++counts[t.object];
    }
    return counts;
  };
  auto p = flatten(pred);
  auto g = flatten(gold);
  MatchCounts c;
  for (const auto& [tok, n] : p) c.predicted += n;
  for (const auto& [tok, n] : g) c.gold += n;
  for (const auto& [tok, n] : p) {
    auto it = g.find(tok);
    if (it != g.end()) c.tp += std::min(n, it->second);
  }
  return c;
}

PairScore token_em_f1(const std::vector<kg::Triple>& pred, const std::vector<kg::Triple>& gold) {
  return score_from_counts(token_counts(pred, gold));
}

namespace {

std::string normalize_action(const std::string& a) {
  std::string out;
  bool in_space = true;
  for (char ch : a) {
    if (ch == ' ' || ch == '\t' || ch == '\n' || ch == '\r') {
      if (!in_space) {
        out.push_back(' ');
        in_space = true;
      }
    } else {
      out.push_back(ch);
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

}  // namespace

MatchCounts action_counts(const std::set<std::string>& pred, const std::set<std::string>& gold) {
  std::set<std::string> p, g;
  for (const auto& a : pred) p.insert(normalize_action(a));
  for (const auto& a : gold) g.insert(normalize_action(a));
  MatchCounts c;
  c.predicted = static_cast<long>(p.size());
  c.gold = static_cast<long>(g.size());
  for (const auto& a : p) c.tp += g.count(a) ? 1 : 0;
  return c;
}

PairScore action_em_f1(const std::set<std::string>& pred, const std::set<std::string>& gold) {
  return score_from_counts(action_counts(pred, gold));
}

ScoreReport aggregate_weighted(const std::vector<GameRow>& per_game) {
  if (per_game.empty()) throw std::invalid_argument("no per-game rows to aggregate");
  ScoreReport report;
  report.per_game = per_game;
  report.overall.game = "overall";
  long total = 0;
  std::map<std::string, double> weighted;
  for (const auto& row : per_game) {
    if (row.samples <= 0) throw std::invalid_argument("per-game sample count must be positive");
    total += row.samples;
    for (const auto& [k, v] : row.values) weighted[k] += static_cast<double>(row.samples) * v;
  }
  report.overall.samples = total;
  for (const auto& [k, v] : weighted) report.overall.values[k] = v / static_cast<double>(total);
  return report;
}

std::string render_table(const ScoreReport& report) {
  std::vector<std::string> metric_names;
  for (const auto& [k, v] : report.overall.values) metric_names.push_back(k);

  std::size_t game_w = 7;
  for (const auto& row : report.per_game) game_w = std::max(game_w, row.game.size());

  std::ostringstream os;
  os << std::left << std::setw(static_cast<int>(game_w) + 2) << "game" << std::right
     << std::setw(8) << "n";
  for (const auto& m : metric_names) os << std::setw(std::max<int>(10, static_cast<int>(m.size()) + 2)) << m;
  os << "\n";

  auto emit = [&](const GameRow& row) {
    os << std::left << std::setw(static_cast<int>(game_w) + 2) << row.game << std::right
       << std::setw(8) << row.samples;
    for (const auto& m : metric_names) {
      auto it = row.values.find(m);
      os << std::setw(std::max<int>(10, static_cast<int>(m.size()) + 2)) << std::fixed
         << std::setprecision(2) << (it == row.values.end() ? 0.0 : it->second);
    }
    os << "\n";
  };
  for (const auto& row : report.per_game) emit(row);
  emit(report.overall);
  return os.str();
}

}  // namespace worldkit::metrics
