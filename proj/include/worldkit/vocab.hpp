// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <string>
#include <string_view>
#include <vector>

namespace worldkit::codec {

// Reserved token ids, fixed across every vocabulary.
inline constexpr int kPad = 0;
inline constexpr int kUnk = 1;
inline constexpr int kBos = 2;
inline constexpr int kEos = 3;
inline constexpr int kSep = 4;
inline constexpr int kMask = 5;
inline constexpr int kNumReserved = 6;

enum class VocabKind { Graph, Action, Text };

std::string_view vocab_kind_name(VocabKind kind);

/// Immutable token ↔ id bijection. Ids are dense from 0 with the six reserved
/// tokens first; unknown lookups yield kUnk.
class Vocabulary {
 public:
  /// Deterministic build: unique non-reserved tokens sorted by string.
  static Vocabulary build(VocabKind kind, std::vector<std::string> tokens);

  /// Keeps the `max_size - kNumReserved` most frequent tokens (ties broken by
  /// string order). max_size <= 0 keeps everything.
  static Vocabulary build_frequency_capped(VocabKind kind,
                                           const std::map<std::string, std::int64_t>& counts,
                                           int max_size);

  /// Reconstructs a vocabulary from a complete id-ordered token list (reserved
  /// tokens first). Used when reloading persisted models.
  static Vocabulary from_token_list(VocabKind kind, std::vector<std::string> tokens);
  const std::vector<std::string>& tokens() const { return tokens_; }

  VocabKind kind() const { return kind_; }
  int size() const { return static_cast<int>(tokens_.size()); }

  int id_of(std::string_view token) const;
  const std::string& token_of(int id) const;
  bool contains(std::string_view token) const;
  static bool is_reserved(int id) { return id >= 0 && id < kNumReserved; }

  /// Newline-delimited token file with a format-version header and the
  /// reserved tokens first; reload is bit-exact.
  void save(const std::string& path) const;
  static Vocabulary load(const std::string& path);

  bool operator==(const Vocabulary& other) const = default;

 private:
  Vocabulary() = default;

  VocabKind kind_ = VocabKind::Graph;
  std::vector<std::string> tokens_;
  std::map<std::string, int> ids_;
};

/// Lowercase whitespace/punctuation tokenizer used for observation text.
std::vector<std::string> tokenize_text(std::string_view text);

}  // namespace worldkit::codec
