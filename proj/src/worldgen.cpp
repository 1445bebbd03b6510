// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#include "worldkit/worldgen.hpp"

#include <algorithm>
#include <sstream>
#include <stdexcept>

#include "worldkit/tensor.hpp"  // Rng

namespace worldkit::gen {

namespace {

const char* kDirections[kNumDirections] = {"north", "south", "east", "west", "up", "down"};

const char* kRoomNames[] = {"cellar",  "library",  "armory",    "kitchen", "garden",
                            "chapel",  "attic",    "vault",     "workshop", "gallery",
                            "corridor", "study",   "pantry",    "cloister", "tower",
                            "courtyard", "archive", "forge",    "greenhouse", "crypt"};

const char* kItemNames[] = {"lamp",   "sword",  "key",    "coin",   "book",  "rope",
                            "amulet", "flask",  "cloak",  "dagger", "map",   "gem",
                            "bell",   "candle", "mirror", "horn",   "quill", "ring",
                            "scroll", "staff"};

const char* kContainerNames[] = {"chest", "cabinet", "crate", "locker", "coffer", "trunk"};

std::string numbered(const char* const* base, std::size_t base_len, int index) {
  if (index < static_cast<int>(base_len)) return base[index];
  std::ostringstream os;
  os << base[index % base_len] << " " << (index / static_cast<int>(base_len) + 1);
  return os.str();
}

}  // namespace

std::string_view direction_name(int dir) { return kDirections[dir]; }
int opposite_direction(int dir) { return dir ^ 1; }

WorldSpec generate_world(std::uint64_t seed, int n_rooms, int n_objects, int n_attr_objects) {
  if (n_rooms < 1) throw std::invalid_argument("world needs at least one room");
  if (n_objects < 0 || n_attr_objects < 0 || n_attr_objects > n_objects) {
    throw std::invalid_argument("bad object counts");
  }
  if (n_rooms > 1 && static_cast<long>(n_rooms) * kNumDirections < 2L * (n_rooms - 1)) {
    throw std::invalid_argument("more exits demanded than directions allow");
  }

  nn::Rng rng(seed ^ 0x5742d1ull);
  WorldSpec spec;
  spec.seed = seed;
  for (int i = 0; i < n_rooms; ++i) {
    spec.rooms.push_back(numbered(kRoomNames, std::size(kRoomNames), i));
  }

  // spanning tree first, then a few extra links; all edges paired
  auto free_dirs = [&](int room) {
    std::vector<int> out;
    for (int d = 0; d < kNumDirections; ++d) {
      if (!spec.has_exit(room, d)) out.push_back(d);
    }
    return out;
  };
  for (int room = 1; room < n_rooms; ++room) {
    for (int attempt = 0; attempt < 1000; ++attempt) {
      int other = rng.uniform_int(room);
      auto mine = free_dirs(room);
      auto theirs = free_dirs(other);
      if (mine.empty() || theirs.empty()) continue;
      // pick a direction free on both ends as a matched pair
      std::vector<int> usable;
      for (int d : theirs) {
        if (!spec.has_exit(room, opposite_direction(d))) usable.push_back(d);
      }
      if (usable.empty()) continue;
      int d = usable[rng.uniform_int(static_cast<int>(usable.size()))];
      spec.exits[{other, d}] = room;
      spec.exits[{room, opposite_direction(d)}] = other;
      break;
    }
    if (!spec.has_exit(room, 0) && free_dirs(room).size() == kNumDirections) {
      throw std::runtime_error("failed to connect room graph");
    }
  }
  int extra = n_rooms / 3;
  for (int e = 0; e < extra; ++e) {
    int a = rng.uniform_int(n_rooms);
    int b = rng.uniform_int(n_rooms);
    if (a == b) continue;
    std::vector<int> usable;
    for (int d = 0; d < kNumDirections; ++d) {
      if (!spec.has_exit(a, d) && !spec.has_exit(b, opposite_direction(d))) usable.push_back(d);
    }
    if (usable.empty()) continue;
    int d = usable[rng.uniform_int(static_cast<int>(usable.size()))];
    spec.exits[{a, d}] = b;
    spec.exits[{b, opposite_direction(d)}] = a;
  }

  // objects: attribute carriers first (containers, lamps, wearables), then
  // plain portables
  int n_containers = 0;
  for (int i = 0; i < n_objects; ++i) {
    ObjectSpec obj;
    obj.initial_room = rng.uniform_int(n_rooms);
    if (i < n_attr_objects) {
      switch (i % 3) {
        case 0:
          obj.name = numbered(kContainerNames, std::size(kContainerNames), n_containers++);
          obj.container = true;
          obj.portable = false;
          obj.slots.push_back({"closed", "open"});
          break;
        case 1:
          obj.name = numbered(kItemNames, std::size(kItemNames), i);
          obj.slots.push_back({"off", "on"});
          break;
        default:
          obj.name = numbered(kItemNames, std::size(kItemNames), i);
          obj.wearable = true;
          obj.slots.push_back({"removed", "worn"});
          break;
      }
    } else {
      obj.name = numbered(kItemNames, std::size(kItemNames), i);
    }
    spec.objects.push_back(std::move(obj));
  }

  // hide some plain portables inside containers
  std::vector<int> containers;
  for (int i = 0; i < n_objects; ++i) {
    if (spec.objects[i].container) containers.push_back(i);
  }
  if (!containers.empty()) {
    for (int i = n_attr_objects; i < n_objects; ++i) {
      if (rng.uniform() < 0.35) {
        int c = containers[rng.uniform_int(static_cast<int>(containers.size()))];
        spec.objects[i].inside_of = c;
        spec.objects[i].initial_room = spec.objects[c].initial_room;
      }
    }
  }

  spec.goal_room = n_rooms - 1;
  return spec;
}

GameState initial_state(const WorldSpec& spec) {
  GameState st;
  st.player_room = 0;
  st.objects.resize(spec.objects.size());
  st.slot_values.resize(spec.objects.size());
  st.revealed.assign(spec.objects.size(), false);
  st.room_seen.assign(spec.rooms.size(), false);
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const ObjectSpec& o = spec.objects[i];
    st.objects[i].room = o.initial_room;
    st.objects[i].inside = o.inside_of;
    st.slot_values[i].assign(o.slots.size(), 0);
  }
  st.room_seen[0] = true;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    if (spec.objects[i].inside_of < 0 && spec.objects[i].initial_room == 0) st.revealed[i] = true;
  }
  st.goal_reached = spec.goal_room == 0;
  return st;
}

namespace {

// a revealed object the player could interact with from the current room
bool reachable(const GameState& st, const WorldSpec& spec, int obj) {
  if (!st.revealed[obj]) return false;
  const auto& p = st.objects[obj];
  if (p.held) return true;
  if (p.inside >= 0) {
    const auto& c = st.objects[p.inside];
    if (c.held) return true;
    return !c.held && c.inside < 0 && c.room == st.player_room &&
           st.slot_values[p.inside][0] == 1;  // container open
  }
  (void)spec;
  return p.room == st.player_room;
}

int find_object(const WorldSpec& spec, const std::string& name) {
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    if (spec.objects[i].name == name) return static_cast<int>(i);
  }
  return -1;
}

int slot_index(const ObjectSpec& o, const char* a, const char* b) {
  for (std::size_t s = 0; s < o.slots.size(); ++s) {
    if (o.slots[s].value_a == a && o.slots[s].value_b == b) return static_cast<int>(s);
  }
  return -1;
}

void reveal_room(GameState& st, const WorldSpec& spec, int room) {
  st.room_seen[room] = true;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    if (st.objects[i].held || st.objects[i].inside >= 0) continue;
    if (st.objects[i].room == room) st.revealed[i] = true;
  }
}

}  // namespace

kg::KnowledgeGraph state_to_graph(const GameState& st, const WorldSpec& spec) {
  kg::KnowledgeGraph g;
  // fixed compass map
  for (const auto& [key, to] : spec.exits) {
    g.insert(kg::Triple(spec.rooms[key.first], direction_name(key.second), spec.rooms[to]));
  }
  g.insert(kg::Triple("you", "in", spec.rooms[st.player_room]));
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    if (!st.revealed[i]) continue;
    const ObjectSpec& o = spec.objects[i];
    const auto& p = st.objects[i];
    if (p.held) {
      g.insert(kg::Triple("you", "have", o.name));
    } else if (p.inside >= 0) {
      g.insert(kg::Triple(o.name, "in", spec.objects[p.inside].name));
    } else {
      g.insert(kg::Triple(o.name, "in", spec.rooms[p.room]));
    }
    for (std::size_t s = 0; s < o.slots.size(); ++s) {
      const auto& slot = o.slots[s];
      g.insert(kg::Triple(o.name, "is", st.slot_values[i][s] == 0 ? slot.value_a : slot.value_b));
    }
  }
  return g;
}

std::set<std::string> valid_actions(const GameState& st, const WorldSpec& spec) {
  std::set<std::string> out;
  for (int d = 0; d < kNumDirections; ++d) {
    if (spec.has_exit(st.player_room, d)) out.insert(std::string(direction_name(d)));
  }
  int takeable = 0, held = 0;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    if (st.objects[i].held) ++held;
    else if (spec.objects[i].portable && reachable(st, spec, static_cast<int>(i))) ++takeable;
  }
  if (takeable >= 1) out.insert("take all");
  if (held >= 1) out.insert("drop all");
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    const ObjectSpec& o = spec.objects[i];
    const auto& p = st.objects[i];
    if (p.held) {
      out.insert("put " + o.name + " down");
      if (o.wearable) {
        int s = slot_index(o, "removed", "worn");
        out.insert(st.slot_values[i][s] == 0 ? "wear " + o.name : "remove " + o.name);
      }
      int lamp = slot_index(o, "off", "on");
      if (lamp >= 0) {
        out.insert(st.slot_values[i][lamp] == 0 ? "turn " + o.name + " on"
                                                : "turn " + o.name + " off");
      }
      continue;
    }
    if (!reachable(st, spec, static_cast<int>(i))) continue;
    if (o.portable) out.insert("take " + o.name);
    int open_slot = slot_index(o, "closed", "open");
    if (open_slot >= 0) {
      out.insert(st.slot_values[i][open_slot] == 0 ? "open " + o.name : "close " + o.name);
    }
    int lamp = slot_index(o, "off", "on");
    if (lamp >= 0) {
      out.insert(st.slot_values[i][lamp] == 0 ? "turn " + o.name + " on"
                                              : "turn " + o.name + " off");
    }
  }
  return out;
}

std::string describe_room(const GameState& st, const WorldSpec& spec, int room) {
  std::ostringstream os;
  os << "You are in the " << spec.rooms[room] << ".";
  std::vector<std::string> here;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    if (!st.revealed[i]) continue;
    const auto& p = st.objects[i];
    if (!p.held && p.inside < 0 && p.room == room) here.push_back(spec.objects[i].name);
  }
  std::sort(here.begin(), here.end());
  if (!here.empty()) {
    os << " You can see";
    for (std::size_t i = 0; i < here.size(); ++i) {
      os << (i == 0 ? " a " : i + 1 == here.size() ? " and a " : ", a ") << here[i];
    }
    os << " here.";
  }
  os << " Exits lead";
  bool first = true;
  for (int d = 0; d < kNumDirections; ++d) {
    if (!spec.has_exit(room, d)) continue;
    os << (first ? " " : " and ") << direction_name(d);
    first = false;
  }
  os << ".";
  return os.str();
}

std::string describe_inventory(const GameState& st, const WorldSpec& spec) {
  std::vector<std::string> held;
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    if (st.objects[i].held) held.push_back(spec.objects[i].name);
  }
  std::sort(held.begin(), held.end());
  if (held.empty()) return "You are carrying nothing.";
  std::ostringstream os;
  os << "You are carrying:";
  for (const auto& h : held) os << " a " << h;
  return os.str();
}

StepResult step(const GameState& state, const std::string& action, const WorldSpec& spec) {
  StepResult res;
  res.state = state;
  GameState& st = res.state;
  auto valid = valid_actions(state, spec);
  if (!valid.count(action)) {
    res.observation = "Nothing happens.";
    return res;
  }
  ++st.steps;

  auto finish = [&](std::string obs) {
    if (!st.goal_reached && st.player_room == spec.goal_room) {
      st.goal_reached = true;
      res.reward = 1.0;
    }
    res.observation = std::move(obs);
  };

  // direction?
  for (int d = 0; d < kNumDirections; ++d) {
    if (action == direction_name(d)) {
      st.player_room = spec.exit_to(st.player_room, d);
      reveal_room(st, spec, st.player_room);
      finish(describe_room(st, spec, st.player_room));
      return res;
    }
  }

  std::istringstream is(action);
  std::string verb;
  is >> verb;
  std::string rest;
  std::getline(is, rest);
  if (!rest.empty() && rest.front() == ' ') rest.erase(rest.begin());

  if (action == "take all") {
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      if (!state.objects[i].held && spec.objects[i].portable &&
          reachable(state, spec, static_cast<int>(i))) {
        st.objects[i].held = true;
        st.objects[i].inside = -1;
      }
    }
    finish("You take everything you can.");
  } else if (action == "drop all") {
    for (std::size_t i = 0; i < spec.objects.size(); ++i) {
      if (!state.objects[i].held) continue;
      st.objects[i].held = false;
      st.objects[i].inside = -1;
      st.objects[i].room = st.player_room;
      int s = slot_index(spec.objects[i], "removed", "worn");
      if (s >= 0) st.slot_values[i][s] = 0;
    }
    finish("You drop everything.");
  } else if (verb == "take") {
    int obj = find_object(spec, rest);
    st.objects[obj].held = true;
    st.objects[obj].inside = -1;
    finish("Taken.");
  } else if (verb == "put") {  // "put <name> down"
    std::string name = rest.substr(0, rest.size() - std::string(" down").size());
    int obj = find_object(spec, name);
    st.objects[obj].held = false;
    st.objects[obj].inside = -1;
    st.objects[obj].room = st.player_room;
    // dropping something worn takes it off as well
    int s = slot_index(spec.objects[obj], "removed", "worn");
    if (s >= 0) st.slot_values[obj][s] = 0;
    finish("Dropped.");
  } else if (verb == "open" || verb == "close") {
    int obj = find_object(spec, rest);
    int s = slot_index(spec.objects[obj], "closed", "open");
    st.slot_values[obj][s] = verb == "open" ? 1 : 0;
    std::ostringstream os;
    os << "You " << verb << " the " << rest << ".";
    if (verb == "open" && spec.objects[obj].container) {
      std::vector<std::string> inside;
      for (std::size_t i = 0; i < spec.objects.size(); ++i) {
        if (st.objects[i].inside == obj && !st.objects[i].held) {
          st.revealed[i] = true;
          inside.push_back(spec.objects[i].name);
        }
      }
      std::sort(inside.begin(), inside.end());
      if (!inside.empty()) {
        os << " Inside you see";
        for (const auto& n : inside) os << " a " << n;
        os << ".";
      }
    }
    finish(os.str());
  } else if (verb == "turn") {  // "turn <name> on|off"
    std::size_t sp = rest.rfind(' ');
    std::string name = rest.substr(0, sp);
    std::string mode = rest.substr(sp + 1);
    int obj = find_object(spec, name);
    int s = slot_index(spec.objects[obj], "off", "on");
    st.slot_values[obj][s] = mode == "on" ? 1 : 0;
    finish("The " + name + " is now " + mode + ".");
  } else if (verb == "wear") {
    int obj = find_object(spec, rest);
    int s = slot_index(spec.objects[obj], "removed", "worn");
    st.slot_values[obj][s] = 1;
    finish("You put on the " + rest + ".");
  } else if (verb == "remove") {
    int obj = find_object(spec, rest);
    int s = slot_index(spec.objects[obj], "removed", "worn");
    st.slot_values[obj][s] = 0;
    finish("You take off the " + rest + ".");
  } else {
    res.observation = "Nothing happens.";
  }
  return res;
}

data::StateSnapshot snapshot(const GameState& st, const WorldSpec& spec,
                             const std::string& observation) {
  data::StateSnapshot snap;
  snap.location_name = spec.rooms[st.player_room];
  snap.location_desc = describe_room(st, spec, st.player_room);
  snap.observation = observation;
  snap.inventory = describe_inventory(st, spec);
  for (std::size_t i = 0; i < spec.objects.size(); ++i) {
    if (!st.revealed[i]) continue;
    const ObjectSpec& o = spec.objects[i];
    const auto& p = st.objects[i];
    std::vector<std::string> attrs;
    for (std::size_t s = 0; s < o.slots.size(); ++s) {
      attrs.push_back(st.slot_values[i][s] == 0 ? o.slots[s].value_a : o.slots[s].value_b);
    }
    if (p.held) {
      snap.inventory_objects[o.name] = "a " + o.name;
      if (!attrs.empty()) snap.inventory_attrs[o.name] = attrs;
    } else if (p.inside >= 0 ? st.objects[p.inside].room == st.player_room
                             : p.room == st.player_room) {
      snap.surrounding_objects[o.name] = "a " + o.name;
      if (!attrs.empty()) snap.surrounding_attrs[o.name] = attrs;
    }
  }
  snap.graph = state_to_graph(st, spec);
  snap.valid_actions = valid_actions(st, spec);
  return snap;
}

std::vector<data::StateSample> emit_corpus(const WorldSpec& spec, Policy policy, int n_samples,
                                           std::uint64_t seed, const std::string& game_name) {
  if (n_samples < 1) throw std::invalid_argument("n_samples must be >= 1");
  std::string game = game_name.empty() ? "synth-" + std::to_string(spec.seed) : game_name;
  nn::Rng rng(seed ^ 0xc0ffeeull);

  auto graph_key = [](const kg::KnowledgeGraph& g) {
    std::string s;
    for (const auto& t : g) {
      s += t.key();
      s += '\n';
    }
    return s;
  };

  std::vector<data::StateSample> out;
  std::set<std::string> seen_states;
  constexpr int kEpisodeLen = 40;

  while (static_cast<int>(out.size()) < n_samples) {
    GameState st = initial_state(spec);
    std::string obs = describe_room(st, spec, st.player_room);
    seen_states.insert(graph_key(state_to_graph(st, spec)));
    for (int t = 0; t < kEpisodeLen && static_cast<int>(out.size()) < n_samples; ++t) {
      auto valid = valid_actions(st, spec);
      if (valid.empty()) break;
      std::vector<std::string> actions(valid.begin(), valid.end());

      std::string chosen;
      if (policy == Policy::CoverageWalk) {
        std::vector<std::string> fresh;
        for (const auto& a : actions) {
          StepResult probe = step(st, a, spec);
          if (!seen_states.count(graph_key(state_to_graph(probe.state, spec)))) {
            fresh.push_back(a);
          }
        }
        if (!fresh.empty()) {
          chosen = fresh[rng.uniform_int(static_cast<int>(fresh.size()))];
        }
      }
      if (chosen.empty()) {
        chosen = actions[rng.uniform_int(static_cast<int>(actions.size()))];
      }

      StepResult next = step(st, chosen, spec);
      data::StateSample sample;
      sample.game = game;
      sample.prev = snapshot(st, spec, obs);
      sample.action = chosen;
      sample.next = snapshot(next.state, spec, next.observation);
      sample.reward = next.reward;
      out.push_back(std::move(sample));

      st = next.state;
      obs = next.observation;
      seen_states.insert(graph_key(state_to_graph(st, spec)));
    }
  }
  return out;
}

}  // namespace worldkit::gen
