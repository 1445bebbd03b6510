// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#include "worldkit/codec.hpp"

#include <algorithm>
#include <random>
#include <sstream>
#include <stdexcept>

namespace worldkit::codec {

// e1 <sep> e2 <sep> ... ek <eos>
SetSerialization assemble_serialization(std::vector<std::vector<int>> elements) {
  SetSerialization s;
  for (std::size_t i = 0; i < elements.size(); ++i) {
    SegmentLayout::Span span;
    span.start = static_cast<int>(s.token_ids.size());
    span.length = static_cast<int>(elements[i].size());
    for (std::size_t j = 0; j < elements[i].size(); ++j) {
      s.token_ids.push_back(elements[i][j]);
      s.layout.element_of.push_back(static_cast<int>(i));
      s.layout.offset_of.push_back(static_cast<int>(j));
    }
    s.layout.spans.push_back(span);
    if (i + 1 < elements.size()) {
      s.token_ids.push_back(kSep);
      s.layout.element_of.push_back(-1);
      s.layout.offset_of.push_back(-1);
    }
  }
  s.token_ids.push_back(kEos);
  s.layout.element_of.push_back(-1);
  s.layout.offset_of.push_back(-1);
  return s;
}

namespace {

SetSerialization assemble(std::vector<std::vector<int>> elements) {
  return assemble_serialization(std::move(elements));
}

std::vector<int> triple_tokens(const kg::Triple& t, const Vocabulary& v) {
  return {v.id_of(t.subject), v.id_of(t.relation), v.id_of(t.object)};
}

}  // namespace

MaskSpec MaskSpec::causal(int n) {
  MaskSpec m;
  m.size = n;
  m.bits.assign(static_cast<std::size_t>(n) * n, 0);
  for (int p = 0; p < n; ++p) {
    for (int q = 0; q <= p; ++q) m.set(p, q, true);
  }
  return m;
}

SetSerialization encode_graph_set(const std::vector<kg::Triple>& triples, const Vocabulary& v) {
  std::vector<kg::Triple> sorted = triples;
  std::sort(sorted.begin(), sorted.end());
  sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());

  std::vector<std::vector<int>> elements;
  elements.reserve(sorted.size());
  for (const auto& t : sorted) elements.push_back(triple_tokens(t, v));
  return assemble(std::move(elements));
}

SetSerialization encode_graph_set(const kg::KnowledgeGraph& g, const Vocabulary& v) {
  return encode_graph_set(g.triples(), v);
}

SetSerialization encode_add_del_set(const std::vector<kg::Triple>& additions,
                                    const std::vector<kg::Triple>& deletions,
                                    const Vocabulary& v) {
  // element order: canonical over the tagged 4-token form, "add" rows first
  std::vector<std::vector<int>> elements;
  auto append = [&](const std::vector<kg::Triple>& triples, const char* tag) {
    std::vector<kg::Triple> sorted = triples;
    std::sort(sorted.begin(), sorted.end());
    sorted.erase(std::unique(sorted.begin(), sorted.end()), sorted.end());
    for (const auto& t : sorted) {
      std::vector<int> e = {v.id_of(tag)};
      for (int id : triple_tokens(t, v)) e.push_back(id);
      elements.push_back(std::move(e));
    }
  };
  append(additions, "add");
  append(deletions, "del");
  return assemble(std::move(elements));
}

SetSerialization encode_action_set(const std::set<std::string>& actions, const Vocabulary& v) {
  SetSerialization out;
  std::vector<std::vector<int>> elements;
  int truncated = 0;
  for (const auto& action : actions) {  // std::set iterates lexicographically
    std::vector<int> ids;
    std::istringstream words(action);
    std::string w;
    while (words >> w) {
      if (static_cast<int>(ids.size()) == kMaxActionTokens) {
        ++truncated;
        break;
      }
      ids.push_back(v.id_of(w));
    }
    if (!ids.empty()) elements.push_back(std::move(ids));
  }
  out = assemble(std::move(elements));
  out.truncated_elements = truncated;
  return out;
}

DecodeResult decode_set(const std::vector<int>& tokens, const Vocabulary& v, int required_arity) {
  const bool graph_like = v.kind() == VocabKind::Graph;
  DecodeResult res;
  std::vector<std::string> parts;
  auto flush = [&] {
    if (parts.empty()) return;
    if (required_arity > 0 && static_cast<int>(parts.size()) != required_arity) {
      ++res.malformed;
      parts.clear();
      return;
    }
    std::string joined;
    for (std::size_t i = 0; i < parts.size(); ++i) {
      if (i > 0) joined += graph_like ? " | " : " ";
      joined += parts[i];
    }
    res.elements.push_back(std::move(joined));
    parts.clear();
  };

  for (int id : tokens) {
    if (id == kEos) break;
    if (id == kSep) {
      flush();
      continue;
    }
    if (id == kPad || id == kBos || id == kMask) continue;
    parts.push_back(v.token_of(id));
  }
  flush();

  std::sort(res.elements.begin(), res.elements.end());
  res.elements.erase(std::unique(res.elements.begin(), res.elements.end()), res.elements.end());
  return res;
}

std::set<std::string> decode_string_set(const std::vector<int>& tokens, const Vocabulary& v,
                                        int required_arity) {
  DecodeResult r = decode_set(tokens, v, required_arity);
  return {r.elements.begin(), r.elements.end()};
}

namespace {

std::vector<std::string> split_on_bars(const std::string& s) {
  std::vector<std::string> parts;
  std::size_t pos = 0;
  while (true) {
    std::size_t bar = s.find(" | ", pos);
    if (bar == std::string::npos) {
      parts.push_back(s.substr(pos));
      break;
    }
    parts.push_back(s.substr(pos, bar - pos));
    pos = bar + 3;
  }
  return parts;
}

}  // namespace

std::vector<kg::Triple> elements_to_triples(const std::vector<std::string>& elements) {
  std::vector<kg::Triple> out;
  for (const auto& e : elements) {
    auto parts = split_on_bars(e);
    if (parts.size() != 3) continue;
    out.emplace_back(parts[0], parts[1], parts[2]);
  }
  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::pair<std::vector<kg::Triple>, std::vector<kg::Triple>> elements_to_add_del(
    const std::vector<std::string>& elements) {
  std::vector<kg::Triple> adds, dels;
  for (const auto& e : elements) {
    auto parts = split_on_bars(e);
    if (parts.size() != 4) continue;
    if (parts[0] == "add") adds.emplace_back(parts[1], parts[2], parts[3]);
    else if (parts[0] == "del") dels.emplace_back(parts[1], parts[2], parts[3]);
  }
  auto tidy = [](std::vector<kg::Triple>& v) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  };
  tidy(adds);
  tidy(dels);
  return {std::move(adds), std::move(dels)};
}

MaskSpec sos_attention_mask(const SegmentLayout& layout) {
  const int n = layout.positions();
  MaskSpec m;
  m.size = n;
  m.bits.assign(static_cast<std::size_t>(n) * n, 0);
  for (int p = 0; p < n; ++p) {
    if (layout.element_of[p] < 0) {
      m.set(p, p, true);  // separator / EOS
      continue;
    }
    for (int q = 0; q <= p; ++q) {
      if (layout.element_of[q] == layout.element_of[p]) m.set(p, q, true);
    }
  }
  return m;
}

SetSerialization shuffle_elements(const SetSerialization& s, std::uint64_t seed) {
  const int k = s.layout.elements();
  std::vector<int> order(k);
  for (int i = 0; i < k; ++i) order[i] = i;
  std::mt19937_64 rng(seed);
  for (int i = k - 1; i > 0; --i) {
    int j = static_cast<int>(rng() % static_cast<std::uint64_t>(i + 1));
    std::swap(order[i], order[j]);
  }

  std::vector<std::vector<int>> elements;
  elements.reserve(k);
  for (int i = 0; i < k; ++i) {
    const auto& span = s.layout.spans[order[i]];
    elements.emplace_back(s.token_ids.begin() + span.start,
                          s.token_ids.begin() + span.start + span.length);
  }
  SetSerialization out = assemble(std::move(elements));
  out.truncated_elements = s.truncated_elements;
  return out;
}

MlmExample mlm_mask(const std::vector<int>& tokens, double rate, MlmScheme scheme,
                    const SegmentLayout& layout, std::uint64_t seed) {
  if (rate <= 0.0 || rate >= 1.0) throw std::invalid_argument("mlm rate must lie in (0, 1)");
  std::mt19937_64 rng(seed);
  auto coin = [&] {
    return (static_cast<double>(rng() >> 11) * 0x1.0p-53) < rate;
  };

  MlmExample ex;
  ex.input_ids = tokens;

  // Unit = a maskable group of positions: single positions for the token
  // scheme, whole triple components for the phrase scheme.
  std::vector<std::vector<int>> units;
  if (scheme == MlmScheme::Token) {
    for (int p = 0; p < static_cast<int>(tokens.size()); ++p) {
      if (!Vocabulary::is_reserved(tokens[p])) units.push_back({p});
    }
  } else {
    for (const auto& span : layout.spans) {
      if (span.length != 3) {
        throw std::invalid_argument("phrase masking requires a triple layout");
      }
    }
    for (const auto& span : layout.spans) {
      for (int c = 0; c < span.length; ++c) units.push_back({span.start + c});
    }
  }

  std::vector<int> chosen;
  for (int u = 0; u < static_cast<int>(units.size()); ++u) {
    if (coin()) chosen.push_back(u);
  }
  if (chosen.empty() && !units.empty()) {
    chosen.push_back(static_cast<int>(rng() % units.size()));
  }

  for (int u : chosen) {
    for (int p : units[u]) {
      ex.positions.push_back(p);
      ex.targets.push_back(tokens[p]);
      ex.input_ids[p] = kMask;
    }
  }
  return ex;
}

}  // namespace worldkit::codec
