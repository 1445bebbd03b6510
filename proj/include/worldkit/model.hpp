// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <algorithm>
#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "worldkit/codec.hpp"
#include "worldkit/data.hpp"
#include "worldkit/tensor.hpp"

namespace worldkit::model {

struct BlockConfig {
  int layers = 2;
  int heads = 2;
  int ffn = 128;
  int max_len = 256;
};

enum class LossMode { Sos, Seq };
enum class TargetMode { Diff, FullGraph, AddDel };
enum class TaskMode { Both, GraphOnly, ActionOnly };

std::string_view loss_mode_name(LossMode m);
std::string_view target_mode_name(TargetMode m);
std::string_view task_mode_name(TaskMode m);
LossMode parse_loss_mode(std::string_view s);
TargetMode parse_target_mode(std::string_view s);
TaskMode parse_task_mode(std::string_view s);

struct ModelConfig {
  int d = 64;
  BlockConfig text_encoder{2, 2, 128, 256};
  BlockConfig graph_encoder{2, 2, 128, 256};
  BlockConfig aggregator{1, 2, 128, 512};
  BlockConfig action_decoder{2, 2, 128, 256};
  BlockConfig graph_decoder{2, 2, 128, 256};

  double dropout = 0.1;  // applied in training mode only
  std::string activation = "gelu";
  double learning_rate = 3e-4;
  int batch_size = 16;
  double grad_clip = 1.0;
  int beam_width = 15;
  double mlm_rate = 0.15;

  LossMode loss_mode = LossMode::Sos;
  TargetMode target_mode = TargetMode::Diff;
  TaskMode task = TaskMode::Both;
  nn::Reduction reduction = nn::Reduction::Mean;
  bool shuffle_targets = true;  // set-order augmentation, SOS mode only

  int max_element_tokens = 8;  // element length cap during generation
  int max_elements = 48;       // element count cap during generation
  std::uint64_t seed = 0;

  /// Default configuration: full test suite runs in minutes on a CPU.
  static ModelConfig desk();
  /// Very small configuration for gradient checks and fast unit tests.
  static ModelConfig tiny();
  /// Full-scale preset (6 layers, d=768, ffn 3072, aggregator 2x2x4096).
  /// Shipped for completeness; never instantiated by the test suite.
  static ModelConfig paper_scale();

  void validate() const;  // throws std::invalid_argument
  std::string to_json_string() const;
  static ModelConfig from_json_string(const std::string& text);
};

/// Weights for one transformer stack (encoder or decoder).
struct StackParams {
  nn::Param tok_emb;  // vocab x d (absent for the aggregator)
  nn::Param pos_emb;  // max_len x d (absent for the aggregator)
  bool has_embeddings = true;

  struct Layer {
    nn::Param ln1_g, ln1_b;
    nn::Param wq, bq, wk, bk, wv, bv, wo, bo;
    bool has_cross = false;
    nn::Param lnc_g, lnc_b;
    nn::Param cwq, cbq, cwk, cbk, cwv, cbv, cwo, cbo;
    nn::Param ln2_g, ln2_b;
    nn::Param w1, b1, w2, b2;
  };
  std::vector<Layer> layers;
  nn::Param lnf_g, lnf_b;

  nn::Param out_w, out_b;  // d x vocab head: generation (decoders), MLM (encoders)
  bool has_out = true;

  void collect(std::vector<nn::Param*>& out);
};

/// Position-embedding layout shared by the set-mode decoder views: element
/// rows use 1 + within-element offset, boundary rows encode how many elements
/// are already complete.
inline constexpr int kMaxElementLen = 8;       // longest supported element
inline constexpr int kBoundaryPosBase = kMaxElementLen + 2;
inline constexpr int kBoundaryCountCap = 63;
inline int boundary_pos_index(int elements_done) {
  return kBoundaryPosBase + std::min(elements_done, kBoundaryCountCap);
}

/// How the decoder reads a serialized target set: one query row per supervised
/// position, with explicit inputs, position-embedding indices and attention
/// mask. Rows 0..serial_positions-1 line up with the serialization; set-mode
/// plans append one terminator row for the final element plus one boundary row
/// per completed element.
struct RowPlan {
  std::vector<int> input_ids;
  std::vector<int> pos_idx;
  codec::MaskSpec mask;

  std::vector<nn::Supervision> content;  // element tokens + the set-end prediction
  std::vector<nn::Supervision> framing;  // element terminators + set-continue terms

  int serial_positions = 0;
  int const_row = -1;                         // the set-end boundary row, if any
  std::vector<int> boundary_rows;             // count-i boundary rows, i < elements
  std::vector<std::vector<int>> element_rows; // content row indices per element

  int rows() const { return static_cast<int>(input_ids.size()); }
};

/// Set-of-sequences view. Every element reads [<bos>, tokens...] with
/// within-element positions and block-causal attention, predicts its tokens
/// and then <sep> ("this element is complete"). Boundary rows — input <bos>,
/// position encoding the number of completed elements, self-attention only —
/// predict <sep> ("another element follows") after each of the first k-1
/// elements and <eos> ("the set ends") after the last. No row ever sees
/// another element or the element order, so the per-element and boundary
/// terms are exactly invariant under element permutation.
RowPlan sos_decoder_plan(const codec::SetSerialization& target);

/// Ordinary causal view: inputs are the serialization shifted right behind
/// <bos>, absolute positions, lower-triangular mask, every position supervised.
RowPlan seq_decoder_plan(const std::vector<int>& serialization);

/// Drops trailing elements until the row plan fits max_positions rows.
codec::SetSerialization truncate_serialization(const codec::SetSerialization& s, int max_positions);

// ---------------------------------------------------------------------------
// losses at the logits level (pure functions; usable on any logits matrix)
// ---------------------------------------------------------------------------

double row_nll(const nn::Matrix& logits, int row, int target);

/// Cross-entropy over every serialization position (teacher-forced shift).
double loss_seq(const nn::Matrix& logits, const std::vector<int>& serialization,
                nn::Reduction red);

/// Set-of-sequences loss: per-element token terms plus the single set-end
/// term. Invariant under element permutation when the logits come from a
/// decoder run under the matching sos plan.
double loss_sos(const nn::Matrix& logits, const RowPlan& plan, nn::Reduction red);
double loss_sos(const nn::Matrix& logits, const codec::SetSerialization& target,
                nn::Reduction red);

/// Element-terminator and set-continue supervision (training only).
double loss_framing(const nn::Matrix& logits, const RowPlan& plan, nn::Reduction red);

// ---------------------------------------------------------------------------
// the model
// ---------------------------------------------------------------------------

struct LossBreakdown {
  double graph = 0.0;
  double action = 0.0;
  double total = 0.0;
};

/// Token stream + position indices for an encoder.
struct EncoderInput {
  std::vector<int> ids;
  std::vector<int> pos;
  int truncated = 0;
};

class WorldModel {
 public:
  WorldModel(ModelConfig cfg, codec::Vocabulary text_vocab, codec::Vocabulary graph_vocab,
             codec::Vocabulary action_vocab);

  const ModelConfig& config() const { return cfg_; }
  ModelConfig& mutable_config() { return cfg_; }
  const codec::Vocabulary& text_vocab() const { return text_vocab_; }
  const codec::Vocabulary& graph_vocab() const { return graph_vocab_; }
  const codec::Vocabulary& action_vocab() const { return action_vocab_; }

  StackParams& text_encoder() { return text_enc_; }
  StackParams& graph_encoder() { return graph_enc_; }
  StackParams& aggregator() { return agg_; }
  StackParams& action_decoder() { return action_dec_; }
  StackParams& graph_decoder() { return graph_dec_; }

  std::vector<nn::Param*> parameters();
  std::vector<std::pair<std::string, std::vector<nn::Param*>>> parameter_blocks();
  std::int64_t parameter_count();
  static std::int64_t parameter_count(const ModelConfig& cfg, int text_vocab, int graph_vocab,
                                      int action_vocab);
  void zero_grads();
  bool grads_finite();

  /// Versioned little-endian binary container: config, vocabularies, tensors.
  void save(const std::string& path);
  static WorldModel load(const std::string& path);

  // -- input preparation ----------------------------------------------------

  /// Observation fields in fixed order (location, observation, inventory),
  /// then the taken action, then the valid-action strings, <sep>-separated.
  EncoderInput build_text_input(const data::StateSnapshot& state,
                                const std::string& action) const;
  /// <bos> + triple-tokenized serialization with within-triple positions.
  EncoderInput build_graph_input(const kg::KnowledgeGraph& g) const;

  /// Target serialization for the configured graph target mode.
  codec::SetSerialization graph_target(const data::StateSample& sample) const;
  codec::SetSerialization action_target(const data::StateSample& sample) const;

  // -- training-mode forward (tape) -----------------------------------------

  struct Dropout {
    double rate = 0.0;
    nn::Rng* rng = nullptr;
  };

  nn::Value encode_text(nn::Tape& tape, const EncoderInput& in, const Dropout& drop);
  nn::Value encode_graph(nn::Tape& tape, const EncoderInput& in, const Dropout& drop);
  nn::Value aggregate(nn::Tape& tape, nn::Value text_enc, nn::Value graph_enc,
                      const Dropout& drop);

  enum class DecoderKind { Graph, Action };

  /// Decoder logits under the plan's mask, cross-attending over
  /// [aggregated state; side context].
  nn::Value decode(nn::Tape& tape, DecoderKind kind, nn::Value state, nn::Value side,
                   const RowPlan& plan, const Dropout& drop);

  /// Builds the task supervision for a plan under the configured loss mode.
  std::vector<nn::Supervision> task_supervision(const RowPlan& plan, LossMode mode) const;

  /// Full multi-task (or single-task) training loss for one sample.
  /// augment_seed, when set, shuffles target element order (SOS mode only).
  LossBreakdown sample_loss(nn::Tape& tape, const data::StateSample& sample,
                            const Dropout& drop, std::optional<std::uint64_t> augment_seed,
                            nn::Value* out_loss);

 private:
  ModelConfig cfg_;
  codec::Vocabulary text_vocab_;
  codec::Vocabulary graph_vocab_;
  codec::Vocabulary action_vocab_;

  StackParams text_enc_;
  StackParams graph_enc_;
  StackParams agg_;
  StackParams action_dec_;
  StackParams graph_dec_;

  void init_params(nn::Rng& rng);
};

/// Analytic-versus-central-difference agreement, sampled per parameter block.
struct GradCheckReport {
  struct Block {
    std::string name;
    double max_rel_err = 0.0;
    int coords = 0;
  };
  std::vector<Block> blocks;
  double max_rel_err = 0.0;
};

GradCheckReport gradient_check(WorldModel& model, const data::StateSample& sample,
                               int coords_per_block, double epsilon, std::uint64_t seed);

}  // namespace worldkit::model
