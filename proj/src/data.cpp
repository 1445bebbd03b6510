// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#include "worldkit/data.hpp"

#include <algorithm>
#include <fstream>
#include <iomanip>
#include <sstream>

#include "json.hpp"

#include "worldkit/codec.hpp"
#include "worldkit/tensor.hpp"

namespace worldkit::data {

namespace {

using nlohmann::json;

// Single place that knows the on-disk field names.
constexpr const char* kGame = "game";
constexpr const char* kState = "state";
constexpr const char* kNextState = "next_state";
constexpr const char* kAction = "action";
constexpr const char* kReward = "reward";
constexpr const char* kLocationName = "location_name";
constexpr const char* kLocationDesc = "location_desc";
constexpr const char* kObservation = "observation";
constexpr const char* kInventory = "inventory";
constexpr const char* kSurroundingObjects = "surrounding_objects";
constexpr const char* kInventoryObjects = "inventory_objects";
constexpr const char* kSurroundingAttrs = "surrounding_attrs";
constexpr const char* kInventoryAttrs = "inventory_attrs";
constexpr const char* kGraph = "graph";
constexpr const char* kValidActions = "valid_actions";

json snapshot_to_json(const StateSnapshot& s) {
  json j;
  j[kLocationName] = s.location_name;
  j[kLocationDesc] = s.location_desc;
  j[kObservation] = s.observation;
  j[kInventory] = s.inventory;
  j[kSurroundingObjects] = s.surrounding_objects;
  j[kInventoryObjects] = s.inventory_objects;
  j[kSurroundingAttrs] = s.surrounding_attrs;
  j[kInventoryAttrs] = s.inventory_attrs;
  json graph = json::array();
  for (const auto& t : s.graph) graph.push_back({t.subject, t.relation, t.object});
  j[kGraph] = graph;
  j[kValidActions] = s.valid_actions;
  return j;
}

StateSnapshot snapshot_from_json(const json& j) {
  StateSnapshot s;
  s.location_name = j.value(kLocationName, "");
  s.location_desc = j.value(kLocationDesc, "");
  s.observation = j.value(kObservation, "");
  s.inventory = j.value(kInventory, "");
  if (j.contains(kSurroundingObjects)) {
    s.surrounding_objects = j.at(kSurroundingObjects).get<std::map<std::string, std::string>>();
  }
  if (j.contains(kInventoryObjects)) {
    s.inventory_objects = j.at(kInventoryObjects).get<std::map<std::string, std::string>>();
  }
  if (j.contains(kSurroundingAttrs)) {
    s.surrounding_attrs =
        j.at(kSurroundingAttrs).get<std::map<std::string, std::vector<std::string>>>();
  }
  if (j.contains(kInventoryAttrs)) {
    s.inventory_attrs =
        j.at(kInventoryAttrs).get<std::map<std::string, std::vector<std::string>>>();
  }
  for (const auto& item : j.at(kGraph)) {
    if (!item.is_array() || item.size() != 3) {
      throw std::runtime_error("graph triple does not have 3 components");
    }
    kg::Triple t(item[0].get<std::string>(), item[1].get<std::string>(),
                 item[2].get<std::string>());
    if (t.subject.empty() || t.relation.empty() || t.object.empty()) {
      throw std::runtime_error("graph triple has an empty component");
    }
    s.graph.insert(std::move(t));
  }
  for (const auto& a : j.at(kValidActions)) {
    std::string act = a.get<std::string>();
    if (act.empty()) throw std::runtime_error("empty valid action");
    s.valid_actions.insert(std::move(act));
  }
  return s;
}

StateSample sample_from_json(const json& j) {
  StateSample s;
  s.game = j.value(kGame, "unknown");
  s.action = j.at(kAction).get<std::string>();
  if (s.action.empty()) throw std::runtime_error("empty action");
  s.reward = j.value(kReward, 0.0);
  s.prev = snapshot_from_json(j.at(kState));
  s.next = snapshot_from_json(j.at(kNextState));
  return s;
}

}  // namespace

std::pair<std::vector<StateSample>, LoadReport> load_corpus(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read corpus file: " + path);

  std::vector<json> records;
  // either one JSON array or newline-delimited records
  char first = 0;
  in >> std::ws;
  first = static_cast<char>(in.peek());
  if (first == '[') {
    json root = json::parse(in);
    for (auto& r : root) records.push_back(std::move(r));
  } else {
    std::string line;
    while (std::getline(in, line)) {
      if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
      records.push_back(json::parse(line));
    }
  }

  std::vector<StateSample> samples;
  LoadReport report;
  report.total = static_cast<int>(records.size());
  for (int i = 0; i < static_cast<int>(records.size()); ++i) {
    // header records carry format metadata, not samples
    if (records[i].contains("format_version") && !records[i].contains(kState)) {
      --report.total;
      continue;
    }
    try {
      samples.push_back(sample_from_json(records[i]));
      ++report.parsed;
    } catch (const std::exception& e) {
      ++report.skipped;
      std::ostringstream os;
      os << "record " << i << ": " << e.what();
      report.issues.push_back(os.str());
    }
  }
  if (samples.empty()) throw std::runtime_error("no parseable records in " + path);
  return {std::move(samples), std::move(report)};
}

void save_corpus(const std::vector<StateSample>& samples, const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write corpus file: " + path);
  out << json{{"format_version", 1}, {"kind", "corpus"}}.dump() << "\n";
  for (const auto& s : samples) {
    json j;
    j[kGame] = s.game;
    j[kState] = snapshot_to_json(s.prev);
    j[kAction] = s.action;
    j[kNextState] = snapshot_to_json(s.next);
    j[kReward] = s.reward;
    out << j.dump() << "\n";
  }
}

std::pair<std::vector<StateSample>, std::vector<StateSample>> split_train_val(
    const std::vector<StateSample>& samples, double fraction, std::uint64_t seed) {
  if (fraction <= 0.0 || fraction >= 1.0) {
    throw std::invalid_argument("split fraction must lie in (0, 1)");
  }
  std::vector<int> order(samples.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);
  nn::Rng rng(seed ^ 0x591177ull);
  rng.shuffle(order);
  std::size_t n_val = static_cast<std::size_t>(fraction * static_cast<double>(samples.size()));
  std::vector<StateSample> train, val;
  for (std::size_t i = 0; i < order.size(); ++i) {
    (i < n_val ? val : train).push_back(samples[order[i]]);
  }
  return {std::move(train), std::move(val)};
}

CorpusStats compute_stats(const std::vector<StateSample>& samples) {
  if (samples.empty()) throw std::invalid_argument("no samples");
  struct Acc {
    long n = 0;
    std::set<std::string> vocab;
    double obs_tokens = 0, valid_actions = 0, graph_triples = 0, diff_triples = 0;
    double diff_tokens = 0, graph_tokens = 0;
  };
  std::map<std::string, Acc> per_game;
  Acc overall;

  auto serial_len = [](long k) { return k > 0 ? 4 * k : 1; };  // 3k tokens + (k-1) seps + eos

  for (const auto& s : samples) {
    kg::GraphDiff d = kg::diff(s.prev.graph, s.next.graph);
    long adds = static_cast<long>(d.additions.size());
    long next_size = static_cast<long>(s.next.graph.size());

    std::vector<std::string> text_tokens;
    for (const std::string* field :
         {&s.prev.location_name, &s.prev.location_desc, &s.prev.observation, &s.prev.inventory}) {
      for (auto& t : codec::tokenize_text(*field)) text_tokens.push_back(std::move(t));
    }
    for (auto& t : codec::tokenize_text(s.action)) text_tokens.push_back(std::move(t));

    for (Acc* a : {&per_game[s.game], &overall}) {
      ++a->n;
      for (const auto& t : text_tokens) a->vocab.insert(t);
      a->obs_tokens += static_cast<double>(text_tokens.size());
      a->valid_actions += static_cast<double>(s.prev.valid_actions.size());
      a->graph_triples += static_cast<double>(next_size);
      a->diff_triples += static_cast<double>(adds);
      a->diff_tokens += static_cast<double>(serial_len(adds));
      a->graph_tokens += static_cast<double>(serial_len(next_size));
    }
  }

  auto to_stats = [](const Acc& a) {
    GameStats g;
    g.samples = a.n;
    g.input_vocab = static_cast<long>(a.vocab.size());
    double n = static_cast<double>(a.n);
    g.avg_obs_tokens = a.obs_tokens / n;
    g.avg_valid_actions = a.valid_actions / n;
    g.avg_graph_triples = a.graph_triples / n;
    g.avg_diff_triples = a.diff_triples / n;
    g.avg_diff_target_tokens = a.diff_tokens / n;
    g.avg_graph_target_tokens = a.graph_tokens / n;
    return g;
  };

  CorpusStats stats;
  for (const auto& [game, acc] : per_game) stats.per_game.emplace_back(game, to_stats(acc));
  stats.overall = to_stats(overall);
  return stats;
}

std::string render_stats(const CorpusStats& stats) {
  std::ostringstream os;
  os << std::left << std::setw(18) << "game" << std::right << std::setw(9) << "samples"
     << std::setw(9) << "vocab" << std::setw(11) << "obs.tok" << std::setw(11) << "actions"
     << std::setw(11) << "triples" << std::setw(11) << "diff" << "\n";
  auto row = [&](const std::string& name, const GameStats& g) {
    os << std::left << std::setw(18) << name << std::right << std::setw(9) << g.samples
       << std::setw(9) << g.input_vocab << std::setw(11) << std::fixed << std::setprecision(2)
       << g.avg_obs_tokens << std::setw(11) << g.avg_valid_actions << std::setw(11)
       << g.avg_graph_triples << std::setw(11) << g.avg_diff_triples << "\n";
  };
  for (const auto& [game, g] : stats.per_game) row(game, g);
  row("overall", stats.overall);
  return os.str();
}

codec::Vocabulary build_graph_vocab(const std::vector<StateSample>& samples) {
  std::vector<std::string> tokens;
  auto add_graph = [&](const kg::KnowledgeGraph& g) {
    for (const auto& t : g) {
      tokens.push_back(t.subject);
      tokens.push_back(t.relation);
      tokens.push_back(t.object);
    }
  };
  for (const auto& s : samples) {
    add_graph(s.prev.graph);
    add_graph(s.next.graph);
  }
  // tags used by the tagged add/del target mode
  tokens.emplace_back("add");
  tokens.emplace_back("del");
  return codec::Vocabulary::build(codec::VocabKind::Graph, std::move(tokens));
}

codec::Vocabulary build_action_vocab(const std::vector<StateSample>& samples) {
  std::vector<std::string> tokens;
  auto add_actions = [&](const std::set<std::string>& actions) {
    for (const auto& a : actions) {
      std::istringstream is(a);
      std::string w;
      while (is >> w) tokens.push_back(w);
    }
  };
  for (const auto& s : samples) {
    add_actions(s.prev.valid_actions);
    add_actions(s.next.valid_actions);
    std::istringstream is(s.action);
    std::string w;
    while (is >> w) tokens.push_back(w);
  }
  return codec::Vocabulary::build(codec::VocabKind::Action, std::move(tokens));
}

codec::Vocabulary build_text_vocab(const std::vector<StateSample>& samples, int max_size) {
  std::map<std::string, std::int64_t> counts;
  auto add_text = [&](const std::string& text) {
    for (const auto& t : codec::tokenize_text(text)) ++counts[t];
  };
  for (const auto& s : samples) {
    for (const StateSnapshot* snap : {&s.prev, &s.next}) {
      add_text(snap->location_name);
      add_text(snap->location_desc);
      add_text(snap->observation);
      add_text(snap->inventory);
      for (const auto& a : snap->valid_actions) add_text(a);
    }
    add_text(s.action);
  }
  return codec::Vocabulary::build_frequency_capped(codec::VocabKind::Text, counts, max_size);
}

}  // namespace worldkit::data
