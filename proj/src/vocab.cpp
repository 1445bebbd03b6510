// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#include "worldkit/vocab.hpp"

#include <algorithm>
#include <cctype>
#include <fstream>
#include <stdexcept>

namespace worldkit::codec {

namespace {

const char* kReservedTokens[kNumReserved] = {"<pad>", "<unk>", "<bos>",
                                             "<eos>", "<sep>", "<mask>"};

constexpr std::string_view kVocabHeaderPrefix = "# worldkit vocab v1 kind=";

bool is_reserved_token(std::string_view tok) {
  for (const char* r : kReservedTokens) {
    if (tok == r) return true;
  }
  return false;
}

}  // namespace

std::string_view vocab_kind_name(VocabKind kind) {
  switch (kind) {
    case VocabKind::Graph: return "graph";
    case VocabKind::Action: return "action";
    case VocabKind::Text: return "text";
  }
  return "graph";
}

Vocabulary Vocabulary::build(VocabKind kind, std::vector<std::string> tokens) {
  std::sort(tokens.begin(), tokens.end());
  tokens.erase(std::unique(tokens.begin(), tokens.end()), tokens.end());

  Vocabulary v;
  v.kind_ = kind;
  for (const char* r : kReservedTokens) v.tokens_.emplace_back(r);
  for (auto& t : tokens) {
    if (t.empty() || is_reserved_token(t)) continue;
    v.tokens_.push_back(std::move(t));
  }
  for (int i = 0; i < static_cast<int>(v.tokens_.size()); ++i) v.ids_[v.tokens_[i]] = i;
  return v;
}

Vocabulary Vocabulary::build_frequency_capped(VocabKind kind,
                                              const std::map<std::string, std::int64_t>& counts,
                                              int max_size) {
  std::vector<std::pair<std::int64_t, std::string>> ranked;
  ranked.reserve(counts.size());
  for (const auto& [tok, n] : counts) {
    if (!tok.empty() && !is_reserved_token(tok)) ranked.emplace_back(n, tok);
  }
  std::sort(ranked.begin(), ranked.end(), [](const auto& a, const auto& b) {
    if (a.first != b.first) return a.first > b.first;
    return a.second < b.second;
  });
  int keep = max_size > 0 ? std::max(0, max_size - kNumReserved)
                          : static_cast<int>(ranked.size());
  std::vector<std::string> kept;
  for (int i = 0; i < std::min<int>(keep, static_cast<int>(ranked.size())); ++i) {
    kept.push_back(ranked[i].second);
  }
  return build(kind, std::move(kept));
}

Vocabulary Vocabulary::from_token_list(VocabKind kind, std::vector<std::string> tokens) {
  if (static_cast<int>(tokens.size()) < kNumReserved) {
    throw std::invalid_argument("token list shorter than the reserved prefix");
  }
  for (int i = 0; i < kNumReserved; ++i) {
    if (tokens[i] != kReservedTokens[i]) {
      throw std::invalid_argument("token list must start with the reserved tokens");
    }
  }
  Vocabulary v;
  v.kind_ = kind;
  v.tokens_ = std::move(tokens);
  for (int i = 0; i < static_cast<int>(v.tokens_.size()); ++i) v.ids_[v.tokens_[i]] = i;
  return v;
}

int Vocabulary::id_of(std::string_view token) const {
  auto it = ids_.find(std::string(token));
  return it == ids_.end() ? kUnk : it->second;
}

const std::string& Vocabulary::token_of(int id) const {
  if (id < 0 || id >= size()) return tokens_[kUnk];
  return tokens_[id];
}

bool Vocabulary::contains(std::string_view token) const {
  return ids_.find(std::string(token)) != ids_.end();
}

void Vocabulary::save(const std::string& path) const {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write vocabulary file: " + path);
  out << kVocabHeaderPrefix << vocab_kind_name(kind_) << "\n";
  for (const auto& t : tokens_) out << t << "\n";
}

Vocabulary Vocabulary::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read vocabulary file: " + path);
  std::string header;
  std::getline(in, header);
  if (header.rfind(kVocabHeaderPrefix, 0) != 0) {
    throw std::runtime_error("bad vocabulary header in " + path);
  }
  std::string kind_name = header.substr(kVocabHeaderPrefix.size());
  VocabKind kind;
  if (kind_name == "graph") kind = VocabKind::Graph;
  else if (kind_name == "action") kind = VocabKind::Action;
  else if (kind_name == "text") kind = VocabKind::Text;
  else throw std::runtime_error("unknown vocabulary kind: " + kind_name);

  Vocabulary v;
  v.kind_ = kind;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    v.tokens_.push_back(line);
  }
  if (static_cast<int>(v.tokens_.size()) < kNumReserved) {
    throw std::runtime_error("vocabulary file too short: " + path);
  }
  for (int i = 0; i < kNumReserved; ++i) {
    if (v.tokens_[i] != kReservedTokens[i]) {
      throw std::runtime_error("vocabulary file missing reserved tokens: " + path);
    }
  }
  for (int i = 0; i < static_cast<int>(v.tokens_.size()); ++i) v.ids_[v.tokens_[i]] = i;
  return v;
}

std::vector<std::string> tokenize_text(std::string_view text) {
  std::vector<std::string> out;
  std::string cur;
  auto flush = [&] {
    if (!cur.empty()) {
      out.push_back(cur);
      cur.clear();
    }
  };
  for (char raw : text) {
    unsigned char c = static_cast<unsigned char>(raw);
    if (std::isspace(c)) {
      flush();
    } else if (std::isalnum(c) || raw == '\'' || raw == '-' || raw == '$') {
      cur.push_back(static_cast<char>(std::tolower(c)));
    } else {
      flush();
      out.emplace_back(1, raw);
    }
  }
  flush();
  return out;
}

}  // namespace worldkit::codec
