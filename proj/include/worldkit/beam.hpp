// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <string>
#include <vector>

#include "worldkit/model.hpp"

namespace worldkit::beam {

/// Frozen per-sample encoder outputs (inference mode, no tape).
struct EncodedState {
  nn::Matrix text;
  nn::Matrix graph;
  nn::Matrix state;
};

EncodedState encode_state(model::WorldModel& m, const data::StateSnapshot& prev,
                          const std::string& action);

struct Hypothesis {
  std::vector<int> serialization;  // target-vocabulary token stream
  double score = 0.0;              // mean log-probability per decision (rank key)
  double log_prob = 0.0;           // raw accumulated log-probability
  int decisions = 0;               // scored choices along the hypothesis
  bool truncated = false;          // hit a length or element cap
};

struct GenResult {
  std::vector<Hypothesis> hypotheses;  // sorted by score, non-increasing
};

/// Length-bounded beam search under the decoder's generation mask: in set
/// mode attention is restricted to the element being generated and prior
/// completed elements are never attended; in seq mode it is ordinary causal
/// decoding. Returns up to beam_width hypotheses.
GenResult generate(model::WorldModel& m, model::WorldModel::DecoderKind kind,
                   const EncodedState& enc, int beam_width);

/// Independent greedy decoder: takes the locally best continuation at every
/// decision point. Used as the beam-width-1 oracle.
Hypothesis generate_greedy(model::WorldModel& m, model::WorldModel::DecoderKind kind,
                           const EncodedState& enc);

/// Inference-mode decoder logits for a full row plan; must agree exactly with
/// the tape forward. Exposed for consistency tests.
nn::Matrix decoder_logits(model::WorldModel& m, model::WorldModel::DecoderKind kind,
                          const EncodedState& enc, const model::RowPlan& plan);

}  // namespace worldkit::beam
