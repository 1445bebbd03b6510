// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <map>
#include <set>
#include <string>
#include <vector>

#include "worldkit/kg.hpp"

namespace worldkit::metrics {

struct MatchCounts {
  long tp = 0;
  long predicted = 0;
  long gold = 0;
};

/// EM is exact-match recall (fraction of gold items matched); F1 the harmonic
/// mean of precision and recall. Both empty scores 100/100; an empty side
/// against a non-empty one scores 0. Values are percentages.
struct PairScore {
  double em = 0.0;
  double f1 = 0.0;
};

PairScore score_from_counts(const MatchCounts& c);

/// Whole-triple matching under normalized equality.
MatchCounts graph_counts(const std::vector<kg::Triple>& pred, const std::vector<kg::Triple>& gold);
PairScore graph_em_f1(const std::vector<kg::Triple>& pred, const std::vector<kg::Triple>& gold);

/// Unigram component overlap (multiset intersection of subjects, relations,
/// objects), granting partial credit.
MatchCounts token_counts(const std::vector<kg::Triple>& pred, const std::vector<kg::Triple>& gold);
PairScore token_em_f1(const std::vector<kg::Triple>& pred, const std::vector<kg::Triple>& gold);

/// Whole-string action matching after whitespace normalization.
MatchCounts action_counts(const std::set<std::string>& pred, const std::set<std::string>& gold);
PairScore action_em_f1(const std::set<std::string>& pred, const std::set<std::string>& gold);

struct GameRow {
  std::string game;
  long samples = 0;
  std::map<std::string, double> values;  // metric name -> percentage
};

struct ScoreReport {
  std::vector<GameRow> per_game;
  GameRow overall;  // size-weighted mean of per-game values
};

/// Weighted aggregation: overall[k] = sum(samples_g * value_g[k]) / sum(samples_g).
/// Throws std::invalid_argument on empty input or non-positive counts.
ScoreReport aggregate_weighted(const std::vector<GameRow>& per_game);

/// Human-readable aligned table, one row per game plus the overall row.
std::string render_table(const ScoreReport& report);

}  // namespace worldkit::metrics
