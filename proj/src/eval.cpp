// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#include "worldkit/eval.hpp"

#include <algorithm>
#include <atomic>
#include <fstream>
#include <thread>

#include "json.hpp"

namespace worldkit::eval {

using model::TargetMode;
using model::TaskMode;
using model::WorldModel;

SamplePrediction predict_sample(WorldModel& m, const data::StateSample& sample, int beam_width) {
  const model::ModelConfig& cfg = m.config();
  SamplePrediction pred;
  beam::EncodedState enc = beam::encode_state(m, sample.prev, sample.action);

  if (cfg.task != TaskMode::ActionOnly) {
    beam::GenResult gen = beam::generate(m, WorldModel::DecoderKind::Graph, enc, beam_width);
    if (!gen.hypotheses.empty()) {
      const beam::Hypothesis& top = gen.hypotheses.front();
      pred.graph_truncated = top.truncated;
      pred.graph_score = top.score;
      int arity = cfg.target_mode == TargetMode::AddDel ? 4 : 3;
      codec::DecodeResult dec = codec::decode_set(top.serialization, m.graph_vocab(), arity);
      switch (cfg.target_mode) {
        case TargetMode::Diff: {
          pred.additions = codec::elements_to_triples(dec.elements);
          std::vector<kg::Triple> inferred = kg::infer_deletions(
              sample.prev.graph, pred.additions, kg::ContradictionLexicon::defaults(),
              kg::RelationClassifier::defaults());
          kg::GraphDiff d{pred.additions, std::move(inferred)};
          pred.final_graph =
              kg::apply_diff(sample.prev.graph, d, kg::ApplyMode::Lenient).triples();
          break;
        }
        case TargetMode::FullGraph:
          pred.final_graph = codec::elements_to_triples(dec.elements);
          break;
        case TargetMode::AddDel: {
          auto [adds, dels] = codec::elements_to_add_del(dec.elements);
          pred.additions = adds;
          pred.deletions = dels;
          kg::GraphDiff d{std::move(adds), std::move(dels)};
          pred.final_graph =
              kg::apply_diff(sample.prev.graph, d, kg::ApplyMode::Lenient).triples();
          break;
        }
      }
    }
  }

  if (cfg.task != TaskMode::GraphOnly) {
    beam::GenResult gen = beam::generate(m, WorldModel::DecoderKind::Action, enc, beam_width);
    if (!gen.hypotheses.empty()) {
      const beam::Hypothesis& top = gen.hypotheses.front();
      pred.action_truncated = top.truncated;
      pred.action_score = top.score;
      pred.actions = codec::decode_string_set(top.serialization, m.action_vocab());
    }
  }
  return pred;
}

std::map<std::string, double> score_prediction(const model::ModelConfig& cfg,
                                               const SamplePrediction& pred,
                                               const data::StateSample& sample) {
  std::map<std::string, double> values;
  if (cfg.task != TaskMode::ActionOnly) {
    std::vector<kg::Triple> gold_graph = sample.next.graph.triples();
    metrics::PairScore g = metrics::graph_em_f1(pred.final_graph, gold_graph);
    metrics::PairScore t = metrics::token_em_f1(pred.final_graph, gold_graph);
    values["graph_em"] = g.em;
    values["graph_f1"] = g.f1;
    values["token_em"] = t.em;
    values["token_f1"] = t.f1;
    if (cfg.target_mode != TargetMode::FullGraph) {
      kg::GraphDiff gold = kg::diff(sample.prev.graph, sample.next.graph);
      metrics::PairScore da = metrics::graph_em_f1(pred.additions, gold.additions);
      values["diff_em"] = da.em;
      values["diff_f1"] = da.f1;
    }
  }
  if (cfg.task != TaskMode::GraphOnly) {
    metrics::PairScore a = metrics::action_em_f1(pred.actions, sample.next.valid_actions);
    values["action_em"] = a.em;
    values["action_f1"] = a.f1;
  }
  return values;
}

metrics::ScoreReport evaluate(WorldModel& m, const std::vector<data::StateSample>& samples,
                              const EvalOptions& opts) {
  if (samples.empty()) throw std::invalid_argument("no samples to evaluate");
  int n = static_cast<int>(samples.size());
  if (opts.max_samples > 0) n = std::min(n, opts.max_samples);

  std::vector<SamplePrediction> preds(n);
  int threads = std::max(1, opts.threads);
  if (threads == 1) {
    for (int i = 0; i < n; ++i) preds[i] = predict_sample(m, samples[i], opts.beam_width);
  } else {
    // forward-only inference over a frozen snapshot; samples are independent
    std::vector<std::thread> pool;
    std::atomic<int> cursor{0};
    for (int t = 0; t < threads; ++t) {
      pool.emplace_back([&] {
        while (true) {
          int i = cursor.fetch_add(1);
          if (i >= n) break;
          preds[i] = predict_sample(m, samples[i], opts.beam_width);
        }
      });
    }
    for (auto& th : pool) th.join();
  }

  std::ofstream dump;
  if (!opts.predictions_path.empty()) {
    dump.open(opts.predictions_path);
    if (!dump) throw std::runtime_error("cannot write predictions: " + opts.predictions_path);
    dump << nlohmann::json{{"format_version", 1}, {"kind", "predictions"}}.dump() << "\n";
  }

  struct Acc {
    long n = 0;
    std::map<std::string, double> sums;
  };
  std::map<std::string, Acc> per_game;
  for (int i = 0; i < n; ++i) {
    auto values = score_prediction(m.config(), preds[i], samples[i]);
    Acc& acc = per_game[samples[i].game];
    ++acc.n;
    for (const auto& [k, v] : values) acc.sums[k] += v;

    if (dump.is_open()) {
      nlohmann::json j;
      j["index"] = i;
      j["game"] = samples[i].game;
      nlohmann::json graph = nlohmann::json::array();
      for (const auto& t : preds[i].final_graph) graph.push_back({t.subject, t.relation, t.object});
      j["pred_graph"] = graph;
      nlohmann::json adds = nlohmann::json::array();
      for (const auto& t : preds[i].additions) adds.push_back({t.subject, t.relation, t.object});
      j["pred_additions"] = adds;
      j["pred_actions"] = preds[i].actions;
      j["graph_truncated"] = preds[i].graph_truncated;
      j["action_truncated"] = preds[i].action_truncated;
      j["scores"] = values;
      dump << j.dump() << "\n";
    }
  }

  std::vector<metrics::GameRow> rows;
  for (const auto& [game, acc] : per_game) {
    metrics::GameRow row;
    row.game = game;
    row.samples = acc.n;
    for (const auto& [k, v] : acc.sums) row.values[k] = v / static_cast<double>(acc.n);
    rows.push_back(std::move(row));
  }
  return metrics::aggregate_weighted(rows);
}

}  // namespace worldkit::eval
