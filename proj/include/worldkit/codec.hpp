// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "worldkit/kg.hpp"
#include "worldkit/vocab.hpp"

namespace worldkit::codec {

/// Where each element of a serialized set lives inside the flat token stream.
/// Separator/EOS positions belong to no element.
struct SegmentLayout {
  struct Span {
    int start = 0;
    int length = 0;
  };
  std::vector<Span> spans;       // one per element, ordered, disjoint
  std::vector<int> element_of;   // per position: element index, or -1 for SEP/EOS
  std::vector<int> offset_of;    // per position: within-element offset, or -1

  int positions() const { return static_cast<int>(element_of.size()); }
  int elements() const { return static_cast<int>(spans.size()); }
};

/// A set of token sequences flattened as
///   elem_1 <sep> elem_2 <sep> ... elem_k <eos>
/// together with the layout describing the element boundaries.
struct SetSerialization {
  std::vector<int> token_ids;
  SegmentLayout layout;
  int truncated_elements = 0;  // actions cut to the per-element token budget
};

/// Boolean self-attention matrix: allow(p, q) means position p may attend to q.
struct MaskSpec {
  int size = 0;
  std::vector<std::uint8_t> bits;  // row-major

  static MaskSpec causal(int n);
  bool allow(int p, int q) const { return bits[static_cast<std::size_t>(p) * size + q] != 0; }
  void set(int p, int q, bool v) { bits[static_cast<std::size_t>(p) * size + q] = v ? 1 : 0; }
};

/// Maximum whitespace tokens per encoded action; longer actions are truncated.
inline constexpr int kMaxActionTokens = 5;

/// Builds the flat stream and layout from per-element token lists.
SetSerialization assemble_serialization(std::vector<std::vector<int>> elements);

/// Each triple becomes a 3-token element (subject, relation, object) in
/// canonical element order. Out-of-vocabulary components map to <unk>.
SetSerialization encode_graph_set(const std::vector<kg::Triple>& triples, const Vocabulary& v);
SetSerialization encode_graph_set(const kg::KnowledgeGraph& g, const Vocabulary& v);

/// Tagged 4-token elements ("add"/"del", subject, relation, object) covering
/// additions and deletions together, in canonical element order.
SetSerialization encode_add_del_set(const std::vector<kg::Triple>& additions,
                                    const std::vector<kg::Triple>& deletions,
                                    const Vocabulary& v);

/// Each action splits on whitespace into at most kMaxActionTokens tokens;
/// elements are ordered lexicographically.
SetSerialization encode_action_set(const std::set<std::string>& actions, const Vocabulary& v);

struct DecodeResult {
  std::vector<std::string> elements;  // sorted, de-duplicated
  int malformed = 0;                  // elements dropped for wrong arity
};

/// Inverse of the encoders, lenient by construction: splits on <sep>, stops at
/// the first <eos>, drops empty elements, de-duplicates. With required_arity
/// > 0, elements of any other length are dropped and counted as malformed.
/// Graph-kind elements are rendered "s | r | o"; action elements "w1 w2 ...".
DecodeResult decode_set(const std::vector<int>& tokens, const Vocabulary& v,
                        int required_arity = 0);

std::set<std::string> decode_string_set(const std::vector<int>& tokens, const Vocabulary& v,
                                        int required_arity = 0);

/// Parses "s | r | o" element strings back into triples; skips malformed ones.
std::vector<kg::Triple> elements_to_triples(const std::vector<std::string>& elements);

/// Splits tagged "add/del | s | r | o" elements into (additions, deletions).
std::pair<std::vector<kg::Triple>, std::vector<kg::Triple>> elements_to_add_del(
    const std::vector<std::string>& elements);

/// Block-diagonal causal mask over a serialized set: position p attends to q
/// iff they share an element and q <= p; separator/EOS positions attend only
/// to themselves.
MaskSpec sos_attention_mask(const SegmentLayout& layout);

/// Deterministically permutes element order; the decoded set is unchanged.
SetSerialization shuffle_elements(const SetSerialization& s, std::uint64_t seed);

enum class MlmScheme { Token, Phrase };

struct MlmExample {
  std::vector<int> input_ids;  // masked positions replaced by <mask>
  std::vector<int> positions;  // which positions are supervised
  std::vector<int> targets;    // original ids at those positions
};

/// Token scheme: every non-reserved position is masked independently with
/// probability rate. Phrase scheme: whole triple components are masked as
/// units (requires a layout whose elements all have length 3). At least one
/// position is masked whenever any candidate exists.
MlmExample mlm_mask(const std::vector<int>& tokens, double rate, MlmScheme scheme,
                    const SegmentLayout& layout, std::uint64_t seed);

}  // namespace worldkit::codec
