// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#include "worldkit/data.hpp"

#include <algorithm>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

#include "doctest.h"
#include "worldkit/worldgen.hpp"

using namespace worldkit;

namespace {

// the ztuu "put on gloves" state: 20 graph triples, 18 valid actions
const char* kZtuuRecord = R"JSON(
{"game":"ztuu",
 "state":{
   "location_name":"Cultural Complex",
   "location_desc":"This imposing ante-room, the center of what was apparently the cultural center of the GUE. You can see a pair of razor-like gloves here.",
   "observation":"You put on the razor-like gloves.",
   "inventory":"You are carrying: a brass lantern (providing light), a pair of glasses, four candy bars, a cheaply-made sword",
   "inventory_attrs":{"glasses":["clothing"],"gloves":["clothing"],"sword":["animate","equip"],"lantern":["animate","equip"]},
   "graph":[["sign","in","Cultural Complex"],["you","have","Forever Gores"],["you","have","ZM$100000"],["you","have","Baby Rune"],["tunnel","in","Cultural Complex"],["you","in","Cultural Complex"],["you","have","brass lantern"],["you","have","glasses"],["decoration","in","Cultural Complex"],["you","have","cheaply-made sword"],["you","have","Multi-Implementeers"],["you","have","razor-like gloves"],["glasses","is","clothing"],["gloves","is","clothing"],["sword","is","animate"],["tunnel","is","animate"],["sign","is","animate"],["lantern","is","animate"],["sword","is","equip"],["lantern","is","equip"]],
   "valid_actions":["west","turn lantern off","east","south","put multi down","put forever down","put lantern down","put rune down","put glasses down","put sword down","take razor off","put on glasses","examine glasses","lower razor","throw multi","throw lantern","put multi in glasses","north"]},
 "action":"west",
 "next_state":{
   "location_name":"Hallway",
   "location_desc":"A hallway.",
   "observation":"You walk west.",
   "inventory":"You are carrying things.",
   "graph":[["you","in","Hallway"]],
   "valid_actions":["east"]},
 "reward":0}
)JSON";

std::string write_temp(const std::string& name, const std::string& content) {
  std::string path = name;
  std::ofstream out(path);
  out << content;
  return path;
}

}  // namespace

TEST_CASE("ztuu fixture parses with 20 triples and 18 valid actions") {
  std::string path = write_temp("ztuu_fixture_test.json", std::string("[") + kZtuuRecord + "]");
  auto [samples, report] = data::load_corpus(path);
  REQUIRE(samples.size() == 1);
  CHECK(report.parsed == 1);
  CHECK(report.skipped == 0);
  CHECK(samples[0].game == "ztuu");
  CHECK(samples[0].prev.graph.size() == 20);
  CHECK(samples[0].prev.valid_actions.size() == 18);
  CHECK(samples[0].prev.graph.contains(kg::Triple("sword", "is", "equip")));
  std::remove(path.c_str());
}

TEST_CASE("malformed records are skipped and itemized") {
  std::string bad =
      R"({"game":"g","state":{"graph":[["only","two"]],"valid_actions":["a"]},)"
      R"("action":"a","next_state":{"graph":[],"valid_actions":[]},"reward":0})";
  std::string good =
      R"({"game":"g","state":{"graph":[["a","in","b"]],"valid_actions":["go"]},)"
      R"("action":"go","next_state":{"graph":[["a","in","c"]],"valid_actions":["go"]},"reward":0})";
  std::string path = write_temp("malformed_corpus_test.jsonl", bad + "\n" + good + "\n");
  auto [samples, report] = data::load_corpus(path);
  CHECK(report.total == 2);
  CHECK(report.parsed == 1);
  CHECK(report.skipped == 1);
  REQUIRE(report.issues.size() == 1);
  CHECK(report.issues[0].find("3 components") != std::string::npos);
  CHECK(report.parsed + report.skipped == report.total);
  std::remove(path.c_str());
}

TEST_CASE("load_corpus rejects unreadable and empty inputs") {
  CHECK_THROWS_AS(data::load_corpus("no_such_file_anywhere.json"), std::runtime_error);
  std::string path = write_temp("empty_corpus_test.jsonl", "\n");
  CHECK_THROWS_AS(data::load_corpus(path), std::runtime_error);
  std::remove(path.c_str());
}

TEST_CASE("writer/reader round-trip over a synthetic corpus") {
  auto spec = gen::generate_world(31, 4, 5, 2);
  auto corpus = gen::emit_corpus(spec, gen::Policy::CoverageWalk, 80, 3);
  std::string path = "roundtrip_corpus_test.jsonl";
  data::save_corpus(corpus, path);
  auto [loaded, report] = data::load_corpus(path);
  CHECK(report.skipped == 0);
  REQUIRE(loaded.size() == corpus.size());
  for (std::size_t i = 0; i < corpus.size(); ++i) {
    CHECK(loaded[i].game == corpus[i].game);
    CHECK(loaded[i].action == corpus[i].action);
    CHECK(loaded[i].prev.graph == corpus[i].prev.graph);
    CHECK(loaded[i].next.graph == corpus[i].next.graph);
    CHECK(loaded[i].prev.valid_actions == corpus[i].prev.valid_actions);
    CHECK(loaded[i].reward == corpus[i].reward);
  }
  std::remove(path.c_str());
}

TEST_CASE("split_train_val is a seeded disjoint partition") {
  auto spec = gen::generate_world(31, 4, 5, 2);
  auto corpus = gen::emit_corpus(spec, gen::Policy::Random, 100, 3);
  auto [train, val] = data::split_train_val(corpus, 0.10, 17);
  CHECK(val.size() == 10);
  CHECK(train.size() == 90);

  auto [train2, val2] = data::split_train_val(corpus, 0.10, 17);
  REQUIRE(val2.size() == val.size());
  for (std::size_t i = 0; i < val.size(); ++i) CHECK(val2[i].action == val[i].action);

  // disjointness + coverage via graph keys and actions
  auto key = [](const data::StateSample& s) {
    std::string k = s.action + "|";
    for (const auto& t : s.prev.graph) k += t.key() + ";";
    k += s.prev.observation + s.next.observation;
    return k;
  };
  std::multiset<std::string> all, split_union;
  for (const auto& s : corpus) all.insert(key(s));
  for (const auto& s : train) split_union.insert(key(s));
  for (const auto& s : val) split_union.insert(key(s));
  CHECK(all == split_union);

  CHECK_THROWS_AS(data::split_train_val(corpus, 0.0, 1), std::invalid_argument);
  CHECK_THROWS_AS(data::split_train_val(corpus, 1.0, 1), std::invalid_argument);
}

TEST_CASE("compute_stats matches a manual recount") {
  auto spec = gen::generate_world(31, 4, 5, 2);
  auto corpus = gen::emit_corpus(spec, gen::Policy::Random, 50, 9);
  auto stats = data::compute_stats(corpus);
  REQUIRE(stats.per_game.size() == 1);
  CHECK(stats.overall.samples == 50);

  double graph_sum = 0.0, diff_sum = 0.0, actions_sum = 0.0;
  for (const auto& s : corpus) {
    graph_sum += static_cast<double>(s.next.graph.size());
    diff_sum += static_cast<double>(kg::diff(s.prev.graph, s.next.graph).additions.size());
    actions_sum += static_cast<double>(s.prev.valid_actions.size());
  }
  CHECK(stats.overall.avg_graph_triples == doctest::Approx(graph_sum / 50.0));
  CHECK(stats.overall.avg_diff_triples == doctest::Approx(diff_sum / 50.0));
  CHECK(stats.overall.avg_valid_actions == doctest::Approx(actions_sum / 50.0));

  // stats invariant under permutation
  auto shuffled = corpus;
  std::reverse(shuffled.begin(), shuffled.end());
  auto stats2 = data::compute_stats(shuffled);
  CHECK(stats2.overall.avg_graph_triples == doctest::Approx(stats.overall.avg_graph_triples));
  CHECK(stats2.overall.input_vocab == stats.overall.input_vocab);

  // single sample sanity
  auto one = data::compute_stats({corpus[0]});
  CHECK(one.overall.avg_graph_triples ==
        doctest::Approx(static_cast<double>(corpus[0].next.graph.size())));

  // the diff target is shorter than the full-graph target on synthetic worlds
  CHECK(stats.overall.avg_diff_target_tokens < stats.overall.avg_graph_target_tokens);
}

TEST_CASE("vocabulary builders cover observed fields") {
  auto spec = gen::generate_world(31, 4, 5, 2);
  auto corpus = gen::emit_corpus(spec, gen::Policy::Random, 40, 9);

  auto gv = data::build_graph_vocab(corpus);
  for (const auto& s : corpus) {
    for (const auto& t : s.next.graph) {
      CHECK(gv.contains(t.subject));
      CHECK(gv.contains(t.relation));
      CHECK(gv.contains(t.object));
    }
  }
  CHECK(gv.contains("add"));
  CHECK(gv.contains("del"));

  auto av = data::build_action_vocab(corpus);
  for (const auto& s : corpus) {
    for (const auto& a : s.next.valid_actions) {
      std::istringstream is(a);
      std::string w;
      while (is >> w) CHECK(av.contains(w));
    }
  }

  auto tv = data::build_text_vocab(corpus, 0);
  CHECK(tv.size() > codec::kNumReserved);
  auto tv_capped = data::build_text_vocab(corpus, codec::kNumReserved + 5);
  CHECK(tv_capped.size() == codec::kNumReserved + 5);

  // deterministic rebuilds
  auto gv2 = data::build_graph_vocab(corpus);
  CHECK(gv2 == gv);
}

TEST_CASE("corpus of one sample counts distinct graph components") {
  data::StateSample s;
  s.game = "g";
  s.action = "go";
  s.prev.graph.insert(kg::Triple("a", "in", "b"));
  s.prev.valid_actions = {"go"};
  s.next.graph.insert(kg::Triple("a", "in", "c"));
  s.next.graph.insert(kg::Triple("d", "in", "c"));
  s.next.valid_actions = {"go"};
  auto v = data::build_graph_vocab({s});
  // components: a, b, c, d, in + add/del tags
  CHECK(v.size() == codec::kNumReserved + 5 + 2);
}
