// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "worldkit/eval.hpp"
#include "worldkit/train.hpp"

namespace worldkit::ablate {

/// One grid row: which components stay enabled.
struct GraphRow {
  bool diff = true;   // predict the graph difference instead of the full graph
  bool multi = true;  // train both decoders
  bool sos = true;    // set-of-sequences loss instead of plain seq
  std::string label() const;
};

struct ActionRow {
  bool multi = true;
  bool sos = true;
  std::string label() const;
};

struct BenchmarkSpec {
  int worlds = 20;
  int train_worlds = 16;  // remaining worlds are the held-out test games
  int rooms = 5;
  int objects = 10;
  int attr_objects = 5;
  int samples_per_world = 250;
  std::uint64_t seed = 2026;
};

struct Benchmark {
  std::vector<data::StateSample> train_set;
  std::vector<data::StateSample> test_set;
};

/// Deterministic corpus: per-world rollouts, world-level train/test split.
Benchmark build_benchmark(const BenchmarkSpec& spec);

struct Options {
  model::ModelConfig base;             // row configs derive from this
  std::vector<std::uint64_t> seeds = {1, 2, 3};
  std::int64_t train_steps = 400;      // equal budget per row
  double budget_seconds = 0.0;         // optional wall-clock cap per run
  int beam_width = 3;
  int eval_samples = 150;
  int threads = 1;
  bool verbose = false;
};

struct RunScore {
  std::uint64_t seed = 0;
  double graph_em = 0.0;
  double graph_f1 = 0.0;
  double token_em = 0.0;
  double token_f1 = 0.0;
  double diff_em = 0.0;
  double diff_f1 = 0.0;
  double action_em = 0.0;
  double action_f1 = 0.0;
};

struct RowResult {
  std::string label;
  bool is_full = false;
  bool is_none = false;
  std::vector<RunScore> runs;  // one per seed
  double mean(double RunScore::* field) const;
};

struct Report {
  std::vector<RowResult> graph_rows;
  std::vector<RowResult> action_rows;
};

model::ModelConfig configure_graph_row(model::ModelConfig base, const GraphRow& row);
model::ModelConfig configure_action_row(model::ModelConfig base, const ActionRow& row);

/// The five-row graph grid (none, three single-component-removed, all).
std::vector<GraphRow> graph_grid();
/// The four-row action grid.
std::vector<ActionRow> action_grid();

Report run_graph_grid(const Benchmark& bench, const Options& opts);
Report run_action_grid(const Benchmark& bench, const Options& opts);

std::string render_report(const Report& report);

}  // namespace worldkit::ablate
