// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#include "worldkit/kg.hpp"

#include <algorithm>
#include <cctype>
#include <sstream>

namespace worldkit::kg {

std::string normalize_component(std::string_view s) {
  std::string out;
  out.reserve(s.size());
  bool in_space = true;  // swallow leading whitespace
  for (char c : s) {
    if (std::isspace(static_cast<unsigned char>(c))) {
      if (!in_space) {
        out.push_back(' ');
        in_space = true;
      }
    } else {
      out.push_back(static_cast<char>(std::tolower(static_cast<unsigned char>(c))));
      in_space = false;
    }
  }
  while (!out.empty() && out.back() == ' ') out.pop_back();
  return out;
}

Triple::Triple(std::string_view s, std::string_view r, std::string_view o)
    : subject(normalize_component(s)),
      relation(normalize_component(r)),
      object(normalize_component(o)) {}

std::string Triple::key() const {
  std::string k;
  k.reserve(subject.size() + relation.size() + object.size() + 6);
  k += subject;
  k += " | ";
  k += relation;
  k += " | ";
  k += object;
  return k;
}

KnowledgeGraph::KnowledgeGraph(std::vector<Triple> triples) : triples_(std::move(triples)) {
  std::sort(triples_.begin(), triples_.end());
  triples_.erase(std::unique(triples_.begin(), triples_.end()), triples_.end());
}

void KnowledgeGraph::insert(Triple t) {
  auto it = std::lower_bound(triples_.begin(), triples_.end(), t);
  if (it != triples_.end() && *it == t) return;
  triples_.insert(it, std::move(t));
}

void KnowledgeGraph::erase(const Triple& t) {
  auto it = std::lower_bound(triples_.begin(), triples_.end(), t);
  if (it != triples_.end() && *it == t) triples_.erase(it);
}

bool KnowledgeGraph::contains(const Triple& t) const {
  auto it = std::lower_bound(triples_.begin(), triples_.end(), t);
  return it != triples_.end() && *it == t;
}

RelationClassifier RelationClassifier::defaults() {
  RelationClassifier c;
  c.set("in", RelationKind::LocationOfEntity);
  c.set("have", RelationKind::Possession);
  c.set("is", RelationKind::Attribute);
  for (const char* dir : {"north", "south", "east", "west", "up", "down",
                          "northeast", "northwest", "southeast", "southwest"}) {
    c.set(dir, RelationKind::MapEdge);
  }
  return c;
}

void RelationClassifier::set(std::string_view relation, RelationKind kind) {
  table_[normalize_component(relation)] = kind;
}

RelationKind RelationClassifier::classify(std::string_view relation) const {
  auto it = table_.find(normalize_component(relation));
  return it == table_.end() ? RelationKind::Other : it->second;
}

ContradictionLexicon ContradictionLexicon::defaults() {
  ContradictionLexicon lex;
  lex.add_pair("open", "closed");
  lex.add_pair("on", "off");
  lex.add_pair("locked", "unlocked");
  lex.add_pair("lit", "unlit");
  lex.add_pair("worn", "removed");
  return lex;
}

void ContradictionLexicon::add_pair(std::string_view a, std::string_view b) {
  std::string na = normalize_component(a);
  std::string nb = normalize_component(b);
  if (na == nb) throw std::invalid_argument("contradiction pair must be irreflexive: " + na);
  table_[na].insert(nb);
  table_[nb].insert(na);
}

bool ContradictionLexicon::contradicts(std::string_view a, std::string_view b) const {
  auto it = table_.find(normalize_component(a));
  return it != table_.end() && it->second.count(normalize_component(b)) > 0;
}

std::vector<std::string> ContradictionLexicon::contradictions_of(std::string_view a) const {
  auto it = table_.find(normalize_component(a));
  if (it == table_.end()) return {};
  return {it->second.begin(), it->second.end()};
}

ApplyError::ApplyError(std::vector<Triple> missing_deletions, std::vector<Triple> present_additions)
    : std::runtime_error([&] {
        std::ostringstream os;
        os << "inconsistent diff:";
        for (const auto& t : missing_deletions) os << " deletion not in graph <" << t.key() << ">;";
        for (const auto& t : present_additions) os << " addition already in graph <" << t.key() << ">;";
        return os.str();
      }()),
      missing_deletions_(std::move(missing_deletions)),
      present_additions_(std::move(present_additions)) {}

GraphDiff diff(const KnowledgeGraph& prev, const KnowledgeGraph& next) {
  GraphDiff d;
  std::set_difference(next.begin(), next.end(), prev.begin(), prev.end(),
                      std::back_inserter(d.additions));
  std::set_difference(prev.begin(), prev.end(), next.begin(), next.end(),
                      std::back_inserter(d.deletions));
  return d;
}

KnowledgeGraph apply_diff(const KnowledgeGraph& g, const GraphDiff& d, ApplyMode mode) {
  if (mode == ApplyMode::Strict) {
    std::vector<Triple> missing;
    std::vector<Triple> present;
    for (const auto& t : d.deletions) {
      if (!g.contains(t)) missing.push_back(t);
    }
    for (const auto& t : d.additions) {
      if (g.contains(t)) present.push_back(t);
    }
    if (!missing.empty() || !present.empty()) {
      throw ApplyError(std::move(missing), std::move(present));
    }
  }
  KnowledgeGraph out = g;
  for (const auto& t : d.deletions) out.erase(t);
  for (const auto& t : d.additions) out.insert(t);
  return out;
}

std::vector<Triple> infer_deletions(const KnowledgeGraph& g_prev,
                                    const std::vector<Triple>& additions,
                                    const ContradictionLexicon& lexicon,
                                    const RelationClassifier& classifier) {
  std::vector<Triple> out;
  auto emit = [&](const Triple& t) { out.push_back(t); };

  for (const auto& added : additions) {
    switch (classifier.classify(added)) {
      case RelationKind::MapEdge:
      case RelationKind::Other:
        break;  // rule 1: the map is immutable; unknown relations infer nothing
      case RelationKind::LocationOfEntity:
      case RelationKind::Possession: {
        // rule 2: an entity sits in exactly one place. Being held counts as a
        // place; the held entity is the object of a possession triple.
        const std::string& entity = classifier.classify(added) == RelationKind::Possession
                                        ? added.object
                                        : added.subject;
        for (const auto& old : g_prev) {
          if (old == added) continue;
          RelationKind k = classifier.classify(old);
          if (k == RelationKind::LocationOfEntity && old.subject == entity) emit(old);
          if (k == RelationKind::Possession && old.object == entity) emit(old);
        }
        break;
      }
      case RelationKind::Attribute: {
        // rule 3: a new attribute value displaces the values it contradicts
        for (const auto& old : g_prev) {
          if (classifier.classify(old) != RelationKind::Attribute) continue;
          if (old.subject != added.subject) continue;
          if (lexicon.contradicts(added.object, old.object)) emit(old);
        }
        break;
      }
    }
  }

  std::sort(out.begin(), out.end());
  out.erase(std::unique(out.begin(), out.end()), out.end());
  return out;
}

std::vector<Triple> canonicalize(const KnowledgeGraph& g) { return g.triples(); }

}  // namespace worldkit::kg
