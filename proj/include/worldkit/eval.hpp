// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <set>
#include <string>
#include <vector>

#include "worldkit/beam.hpp"
#include "worldkit/metrics.hpp"
#include "worldkit/model.hpp"

namespace worldkit::eval {

struct EvalOptions {
  int beam_width = 15;
  int max_samples = 0;  // 0 = all
  int threads = 1;
  std::string predictions_path;  // newline-delimited dump, empty = none
};

/// What the model predicted for one sample, already mapped back to sets.
struct SamplePrediction {
  std::vector<kg::Triple> final_graph;   // prediction on the final-graph footing
  std::vector<kg::Triple> additions;     // diff-level prediction (diff/add-del modes)
  std::vector<kg::Triple> deletions;     // add-del mode only (diff mode infers them)
  std::set<std::string> actions;
  bool graph_truncated = false;
  bool action_truncated = false;
  double graph_score = 0.0;
  double action_score = 0.0;
};

/// Beam-search prediction for one sample. Diff-mode additions are combined
/// with rule-inferred deletions and applied to the previous graph leniently,
/// so every target mode is scored on the same final-graph footing.
SamplePrediction predict_sample(model::WorldModel& m, const data::StateSample& sample,
                                int beam_width);

/// Per-sample metric values for one prediction against its gold sample.
std::map<std::string, double> score_prediction(const model::ModelConfig& cfg,
                                               const SamplePrediction& pred,
                                               const data::StateSample& sample);

/// Full evaluation: per-game mean metrics, size-weighted overall row.
metrics::ScoreReport evaluate(model::WorldModel& m, const std::vector<data::StateSample>& samples,
                              const EvalOptions& opts);

}  // namespace worldkit::eval
