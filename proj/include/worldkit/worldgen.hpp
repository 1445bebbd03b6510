// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <map>
#include <set>
#include <string>
#include <vector>

#include "worldkit/data.hpp"
#include "worldkit/kg.hpp"

namespace worldkit::gen {

/// Compass directions; even/odd pairs are opposites (north/south, ...).
inline constexpr int kNumDirections = 6;
std::string_view direction_name(int dir);
int opposite_direction(int dir);

struct AttributeSlot {
  std::string value_a;  // initial value
  std::string value_b;  // contradicting value
};

struct ObjectSpec {
  std::string name;
  int initial_room = 0;
  int inside_of = -1;  // container object index, -1 = placed in the room
  bool portable = true;
  bool wearable = false;
  bool container = false;
  std::vector<AttributeSlot> slots;
};

/// A generated world: rooms with a bidirectionally consistent compass map,
/// objects with optional attributes, containers with hidden contents.
struct WorldSpec {
  std::uint64_t seed = 0;
  std::vector<std::string> rooms;
  std::map<std::pair<int, int>, int> exits;  // (room, direction) -> room
  std::vector<ObjectSpec> objects;
  int goal_room = -1;

  bool has_exit(int room, int dir) const { return exits.count({room, dir}) > 0; }
  int exit_to(int room, int dir) const { return exits.at({room, dir}); }
};

/// Seeded deterministic world with a connected room graph.
/// Throws std::invalid_argument for infeasible parameters.
WorldSpec generate_world(std::uint64_t seed, int n_rooms, int n_objects, int n_attr_objects);

struct GameState {
  int player_room = 0;
  struct Placement {
    bool held = false;
    int room = 0;        // meaningful when not held and inside < 0
    int inside = -1;     // container object index
    bool operator==(const Placement& other) const = default;
  };
  std::vector<Placement> objects;
  std::vector<std::vector<int>> slot_values;  // 0 = value_a, 1 = value_b
  std::vector<bool> revealed;                 // object known to the player
  std::vector<bool> room_seen;
  int steps = 0;
  bool goal_reached = false;

  bool operator==(const GameState& other) const = default;
};

GameState initial_state(const WorldSpec& spec);

/// Complete belief-state rendering: player location and possessions, revealed
/// object locations and attribute values, and the full (fixed) compass map.
kg::KnowledgeGraph state_to_graph(const GameState& state, const WorldSpec& spec);

/// Exactly the applicable template instantiations; every returned action is
/// guaranteed to change the state.
std::set<std::string> valid_actions(const GameState& state, const WorldSpec& spec);

struct StepResult {
  GameState state;
  std::string observation;
  double reward = 0.0;
};

/// Deterministic transition. Actions outside the valid set leave the state
/// unchanged and observe "Nothing happens.".
StepResult step(const GameState& state, const std::string& action, const WorldSpec& spec);

std::string describe_room(const GameState& state, const WorldSpec& spec, int room);
std::string describe_inventory(const GameState& state, const WorldSpec& spec);
data::StateSnapshot snapshot(const GameState& state, const WorldSpec& spec,
                             const std::string& observation);

enum class Policy { Random, CoverageWalk };

/// Rollout-generated transition records. CoverageWalk prefers actions leading
/// to states not seen before in the rollout.
std::vector<data::StateSample> emit_corpus(const WorldSpec& spec, Policy policy, int n_samples,
                                           std::uint64_t seed,
                                           const std::string& game_name = "");

}  // namespace worldkit::gen
