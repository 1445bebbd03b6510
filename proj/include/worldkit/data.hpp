// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <utility>
#include <vector>

#include "worldkit/kg.hpp"
#include "worldkit/vocab.hpp"

namespace worldkit::data {

/// One observed game state: text fields kept verbatim, graph normalized.
struct StateSnapshot {
  std::string location_name;
  std::string location_desc;
  std::string observation;
  std::string inventory;
  std::map<std::string, std::string> surrounding_objects;   // name -> description
  std::map<std::string, std::string> inventory_objects;
  std::map<std::string, std::vector<std::string>> surrounding_attrs;
  std::map<std::string, std::vector<std::string>> inventory_attrs;
  kg::KnowledgeGraph graph;
  std::set<std::string> valid_actions;
};

/// One transition record: previous state, action taken, next state, reward.
struct StateSample {
  std::string game;
  StateSnapshot prev;
  std::string action;
  StateSnapshot next;
  double reward = 0.0;
};

struct LoadReport {
  int total = 0;
  int parsed = 0;
  int skipped = 0;
  std::vector<std::string> issues;  // one line per skipped record
};

/// Reads a corpus file (JSON array or newline-delimited JSON records).
/// Malformed records are skipped and itemized; parsing zero records or an
/// unreadable file throws std::runtime_error.
std::pair<std::vector<StateSample>, LoadReport> load_corpus(const std::string& path);

/// Writes the corpus in the same record format load_corpus reads.
void save_corpus(const std::vector<StateSample>& samples, const std::string& path);

/// Seeded uniform split into (train, validation); disjoint, union = input.
std::pair<std::vector<StateSample>, std::vector<StateSample>> split_train_val(
    const std::vector<StateSample>& samples, double fraction, std::uint64_t seed);

struct GameStats {
  long samples = 0;
  long input_vocab = 0;            // distinct text-side tokens
  double avg_obs_tokens = 0.0;
  double avg_valid_actions = 0.0;
  double avg_graph_triples = 0.0;  // next-state graph size
  double avg_diff_triples = 0.0;   // additions per transition
  double avg_diff_target_tokens = 0.0;   // serialized additions length
  double avg_graph_target_tokens = 0.0;  // serialized next graph length
};

struct CorpusStats {
  std::vector<std::pair<std::string, GameStats>> per_game;  // sorted by game
  GameStats overall;
};

CorpusStats compute_stats(const std::vector<StateSample>& samples);
std::string render_stats(const CorpusStats& stats);

/// Vocabulary builders over every relevant field of the given samples.
codec::Vocabulary build_graph_vocab(const std::vector<StateSample>& samples);
codec::Vocabulary build_action_vocab(const std::vector<StateSample>& samples);
codec::Vocabulary build_text_vocab(const std::vector<StateSample>& samples, int max_size);

}  // namespace worldkit::data
