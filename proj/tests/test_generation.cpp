// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#include "worldkit/beam.hpp"

#include <algorithm>
#include <cmath>

#include "doctest.h"
#include "worldkit/metrics.hpp"
#include "worldkit/train.hpp"
#include "worldkit/worldgen.hpp"

using namespace worldkit;
using model::ModelConfig;
using model::WorldModel;
using nn::Matrix;

namespace {

struct Fixture {
  std::vector<data::StateSample> corpus;
  WorldModel model;

  static Fixture make(ModelConfig cfg, std::uint64_t seed = 51) {
    auto spec = gen::generate_world(seed, 4, 6, 3);
    auto corpus = gen::emit_corpus(spec, gen::Policy::CoverageWalk, 40, seed);
    cfg.seed = seed;
    WorldModel m(cfg, data::build_text_vocab(corpus, 0), data::build_graph_vocab(corpus),
                 data::build_action_vocab(corpus));
    return Fixture{std::move(corpus), std::move(m)};
  }
};

}  // namespace

TEST_CASE("inference forward matches the training tape forward") {
  auto fx = Fixture::make(ModelConfig::tiny());
  auto& m = fx.model;
  const auto& sample = fx.corpus[0];

  // tape path
  nn::Tape tape;
  WorldModel::Dropout off;
  auto tin = m.build_text_input(sample.prev, sample.action);
  auto gin = m.build_graph_input(sample.prev.graph);
  auto text = m.encode_text(tape, tin, off);
  auto graph = m.encode_graph(tape, gin, off);
  auto state = m.aggregate(tape, text, graph, off);
  auto target = m.graph_target(sample);
  model::RowPlan plan = model::sos_decoder_plan(target);
  auto logits = m.decode(tape, WorldModel::DecoderKind::Graph, state, graph, plan, off);

  // inference path
  beam::EncodedState enc = beam::encode_state(m, sample.prev, sample.action);
  Matrix ilogits = beam::decoder_logits(m, WorldModel::DecoderKind::Graph, enc, plan);

  const Matrix& tl = tape.value(logits);
  REQUIRE(tl.rows == ilogits.rows);
  REQUIRE(tl.cols == ilogits.cols);
  double worst = 0.0;
  for (std::size_t i = 0; i < tl.data.size(); ++i) {
    worst = std::max(worst, std::abs(tl.data[i] - ilogits.data[i]));
  }
  CHECK(worst < 1e-9);

  // encoder rows too
  const Matrix& tt = tape.value(text);
  double enc_diff = 0.0;
  for (std::size_t i = 0; i < tt.data.size(); ++i) {
    enc_diff = std::max(enc_diff, std::abs(tt.data[i] - enc.text.data[i]));
  }
  CHECK(enc_diff < 1e-9);
}

TEST_CASE("beam width 1 equals greedy decoding") {
  for (std::uint64_t seed : {3ull, 9ull, 27ull}) {
    ModelConfig cfg = ModelConfig::tiny();
    auto fx = Fixture::make(cfg, seed);
    auto& m = fx.model;
    int checked = 0;
    for (const auto& sample : fx.corpus) {
      if (checked >= 12) break;
      ++checked;
      beam::EncodedState enc = beam::encode_state(m, sample.prev, sample.action);
      for (auto kind : {WorldModel::DecoderKind::Graph, WorldModel::DecoderKind::Action}) {
        beam::GenResult beam1 = beam::generate(m, kind, enc, 1);
        beam::Hypothesis greedy = beam::generate_greedy(m, kind, enc);
        REQUIRE(!beam1.hypotheses.empty());
        CHECK(beam1.hypotheses[0].serialization == greedy.serialization);
        CHECK(beam1.hypotheses[0].score == doctest::Approx(greedy.score).epsilon(1e-12));
      }
    }
  }
}

TEST_CASE("beam scores are non-increasing in rank") {
  auto fx = Fixture::make(ModelConfig::tiny());
  auto& m = fx.model;
  for (int i = 0; i < 10; ++i) {
    beam::EncodedState enc = beam::encode_state(m, fx.corpus[i].prev, fx.corpus[i].action);
    auto res = beam::generate(m, WorldModel::DecoderKind::Graph, enc, 7);
    REQUIRE(!res.hypotheses.empty());
    CHECK(static_cast<int>(res.hypotheses.size()) <= 7);
    for (std::size_t k = 1; k < res.hypotheses.size(); ++k) {
      CHECK(res.hypotheses[k - 1].score >= res.hypotheses[k].score);
    }
  }
}

TEST_CASE("greedy scores equal per-row log-probabilities from the full forward") {
  auto fx = Fixture::make(ModelConfig::tiny());
  auto& m = fx.model;
  const auto& sample = fx.corpus[4];
  beam::EncodedState enc = beam::encode_state(m, sample.prev, sample.action);
  beam::Hypothesis hyp = beam::generate_greedy(m, WorldModel::DecoderKind::Graph, enc);
  REQUIRE(!hyp.serialization.empty());
  REQUIRE(hyp.serialization.back() == codec::kEos);

  // rebuild the serialization the decoder saw and re-score it with the
  // teacher-forced full forward
  std::vector<std::vector<int>> elements;
  std::vector<int> cur;
  for (int tok : hyp.serialization) {
    if (tok == codec::kSep || tok == codec::kEos) {
      if (!cur.empty()) elements.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(tok);
    }
  }
  codec::SetSerialization ser = codec::assemble_serialization(elements);
  REQUIRE(ser.token_ids == hyp.serialization);
  model::RowPlan plan = model::sos_decoder_plan(ser);
  Matrix logits = beam::decoder_logits(m, WorldModel::DecoderKind::Graph, enc, plan);

  auto lsm = [&](int row, int tok) { return -model::row_nll(logits, row, tok); };
  double expected = 0.0;
  for (std::size_t e = 0; e < plan.element_rows.size(); ++e) {
    expected += lsm(plan.boundary_rows[e], codec::kSep);  // another element follows
    for (int r : plan.element_rows[e]) expected += lsm(r, ser.token_ids[r]);
  }
  for (const auto& f : plan.framing) {
    bool is_boundary = std::find(plan.boundary_rows.begin(), plan.boundary_rows.end(), f.row) !=
                       plan.boundary_rows.end();
    if (!is_boundary) expected += lsm(f.row, codec::kSep);  // element terminators
  }
  expected += lsm(plan.const_row, codec::kEos);  // final stop
  CHECK(hyp.log_prob == doctest::Approx(expected).epsilon(1e-9));
  CHECK(hyp.score == doctest::Approx(expected / hyp.decisions).epsilon(1e-9));
}

TEST_CASE("seq-mode generation terminates and decodes") {
  ModelConfig cfg = ModelConfig::tiny();
  cfg.loss_mode = model::LossMode::Seq;
  auto fx = Fixture::make(cfg);
  auto& m = fx.model;
  beam::EncodedState enc = beam::encode_state(m, fx.corpus[0].prev, fx.corpus[0].action);
  auto res = beam::generate(m, WorldModel::DecoderKind::Graph, enc, 4);
  REQUIRE(!res.hypotheses.empty());
  for (const auto& h : res.hypotheses) {
    CHECK(h.serialization.back() == codec::kEos);
  }
  auto g1 = beam::generate(m, WorldModel::DecoderKind::Graph, enc, 1);
  auto greedy = beam::generate_greedy(m, WorldModel::DecoderKind::Graph, enc);
  CHECK(g1.hypotheses[0].serialization == greedy.serialization);
}

TEST_CASE("a trained model beam-decodes sensible diffs") {
  // quick end-to-end sanity: overfit a few samples, then check the top beam
  // hypothesis reproduces most gold additions
  ModelConfig cfg = ModelConfig::tiny();
  cfg.batch_size = 6;
  cfg.dropout = 0.0;
  cfg.learning_rate = 2e-3;
  auto fx = Fixture::make(cfg, 77);
  auto& m = fx.model;

  std::vector<const data::StateSample*> batch;
  for (int i = 0; i < 6; ++i) batch.push_back(&fx.corpus[i]);
  train::Adam opt(m.parameters(), train::AdamConfig{2e-3, 0.9, 0.999, 1e-8});
  nn::Rng rng(2);
  for (int step = 0; step < 220; ++step) train::train_step(m, opt, batch, rng, true);

  double em_sum = 0.0;
  for (int i = 0; i < 6; ++i) {
    const auto& sample = fx.corpus[i];
    beam::EncodedState enc = beam::encode_state(m, sample.prev, sample.action);
    auto res = beam::generate(m, WorldModel::DecoderKind::Graph, enc, 5);
    REQUIRE(!res.hypotheses.empty());
    auto dec = codec::decode_set(res.hypotheses[0].serialization, m.graph_vocab(), 3);
    auto pred = codec::elements_to_triples(dec.elements);
    auto gold = kg::diff(sample.prev.graph, sample.next.graph).additions;
    em_sum += metrics::graph_em_f1(pred, gold).em;
  }
  CHECK(em_sum / 6.0 > 60.0);
}
