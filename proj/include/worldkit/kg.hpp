// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <compare>
#include <map>
#include <set>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

namespace worldkit::kg {

/// Lowercases, trims, and collapses internal whitespace runs to single spaces.
std::string normalize_component(std::string_view s);

/// One ⟨subject, relation, object⟩ fact. Components are stored normalized
/// (lowercase, whitespace-collapsed), so equality is plain string equality.
struct Triple {
  std::string subject;
  std::string relation;
  std::string object;

  Triple() = default;
  Triple(std::string_view s, std::string_view r, std::string_view o);

  /// Canonical form "subject | relation | object"; defines the sort order.
  std::string key() const;

  bool operator==(const Triple& other) const = default;
  bool operator<(const Triple& other) const { return key() < other.key(); }
};

/// A set of triples with canonical (key-sorted) iteration order.
class KnowledgeGraph {
 public:
  KnowledgeGraph() = default;
  explicit KnowledgeGraph(std::vector<Triple> triples);

  /// Inserts a triple; duplicates are ignored (set semantics).
  void insert(Triple t);
  void erase(const Triple& t);
  bool contains(const Triple& t) const;

  std::size_t size() const { return triples_.size(); }
  bool empty() const { return triples_.empty(); }

  const std::vector<Triple>& triples() const { return triples_; }
  auto begin() const { return triples_.begin(); }
  auto end() const { return triples_.end(); }

  bool operator==(const KnowledgeGraph& other) const = default;

 private:
  std::vector<Triple> triples_;  // sorted by key, unique
};

/// The delta between two graphs: additions = next − prev, deletions = prev − next.
struct GraphDiff {
  std::vector<Triple> additions;
  std::vector<Triple> deletions;

  bool empty() const { return additions.empty() && deletions.empty(); }
};

enum class RelationKind {
  LocationOfEntity,  // "in": entity (subject) is at a place
  Possession,        // "have": holder (subject) carries entity (object)
  Attribute,         // "is": entity (subject) has attribute value (object)
  MapEdge,           // compass links between rooms; immutable
  Other,
};

/// Maps relation strings to their kind. Unmapped strings are Other.
class RelationClassifier {
 public:
  static RelationClassifier defaults();

  void set(std::string_view relation, RelationKind kind);
  RelationKind classify(std::string_view relation) const;
  RelationKind classify(const Triple& t) const { return classify(t.relation); }

 private:
  std::map<std::string, RelationKind> table_;
};

/// Symmetric, irreflexive pairs of mutually exclusive attribute values.
class ContradictionLexicon {
 public:
  static ContradictionLexicon defaults();

  /// Registers a ↮ b both ways. Throws std::invalid_argument if a == b.
  void add_pair(std::string_view a, std::string_view b);
  bool contradicts(std::string_view a, std::string_view b) const;
  std::vector<std::string> contradictions_of(std::string_view a) const;

 private:
  std::map<std::string, std::set<std::string>> table_;
};

enum class ApplyMode { Strict, Lenient };

/// Thrown by strict apply_diff; carries the offending triples.
class ApplyError : public std::runtime_error {
 public:
  ApplyError(std::vector<Triple> missing_deletions, std::vector<Triple> present_additions);

  const std::vector<Triple>& missing_deletions() const { return missing_deletions_; }
  const std::vector<Triple>& present_additions() const { return present_additions_; }

 private:
  std::vector<Triple> missing_deletions_;
  std::vector<Triple> present_additions_;
};

/// additions = next − prev, deletions = prev − next.
/// Total: apply_diff(prev, diff(prev, next), Strict) == next always holds.
GraphDiff diff(const KnowledgeGraph& prev, const KnowledgeGraph& next);

/// (g − deletions) ∪ additions. Strict mode requires deletions ⊆ g and
/// additions ∩ g = ∅ and throws ApplyError otherwise; lenient mode ignores
/// absent deletions and already-present additions.
KnowledgeGraph apply_diff(const KnowledgeGraph& g, const GraphDiff& d,
                          ApplyMode mode = ApplyMode::Strict);

/// Derives the triples that must leave g_prev when `additions` enter it:
///  - map edges are never touched,
///  - a new location/possession for entity e displaces e's old ones,
///  - a new attribute value displaces values it contradicts.
/// The result is a subset of g_prev, sorted, never containing map edges.
std::vector<Triple> infer_deletions(const KnowledgeGraph& g_prev,
                                    const std::vector<Triple>& additions,
                                    const ContradictionLexicon& lexicon,
                                    const RelationClassifier& classifier);

/// Key-sorted copy of the graph's triples.
std::vector<Triple> canonicalize(const KnowledgeGraph& g);

}  // namespace worldkit::kg
