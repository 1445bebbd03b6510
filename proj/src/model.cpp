// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#include "worldkit/model.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <cstring>
#include <fstream>
#include <sstream>
#include <stdexcept>

#include "json.hpp"

namespace worldkit::model {

using nn::Matrix;
using nn::Param;
using nn::Reduction;
using nn::Supervision;
using nn::Tape;
using nn::Value;

std::string_view loss_mode_name(LossMode m) { return m == LossMode::Sos ? "sos" : "seq"; }
std::string_view target_mode_name(TargetMode m) {
  switch (m) {
    case TargetMode::Diff: return "diff";
    case TargetMode::FullGraph: return "full";
    case TargetMode::AddDel: return "add-del";
  }
  return "diff";
}
std::string_view task_mode_name(TaskMode m) {
  switch (m) {
    case TaskMode::Both: return "both";
    case TaskMode::GraphOnly: return "graph";
    case TaskMode::ActionOnly: return "action";
  }
  return "both";
}

LossMode parse_loss_mode(std::string_view s) {
  if (s == "sos") return LossMode::Sos;
  if (s == "seq") return LossMode::Seq;
  throw std::invalid_argument("unknown loss mode: " + std::string(s));
}
TargetMode parse_target_mode(std::string_view s) {
  if (s == "diff") return TargetMode::Diff;
  if (s == "full") return TargetMode::FullGraph;
  if (s == "add-del") return TargetMode::AddDel;
  throw std::invalid_argument("unknown target mode: " + std::string(s));
}
TaskMode parse_task_mode(std::string_view s) {
  if (s == "both") return TaskMode::Both;
  if (s == "graph") return TaskMode::GraphOnly;
  if (s == "action") return TaskMode::ActionOnly;
  throw std::invalid_argument("unknown task mode: " + std::string(s));
}

ModelConfig ModelConfig::desk() { return ModelConfig{}; }

ModelConfig ModelConfig::tiny() {
  ModelConfig c;
  c.d = 32;
  c.text_encoder = {2, 2, 64, 128};
  c.graph_encoder = {2, 2, 64, 160};
  c.aggregator = {1, 2, 64, 288};
  c.action_decoder = {2, 2, 64, 160};
  c.graph_decoder = {2, 2, 64, 160};
  c.dropout = 0.0;
  return c;
}

ModelConfig ModelConfig::paper_scale() {
  ModelConfig c;
  c.d = 768;
  c.text_encoder = {6, 6, 3072, 1024};
  c.graph_encoder = {6, 6, 3072, 1024};
  c.aggregator = {2, 2, 4096, 2048};
  c.action_decoder = {6, 6, 3072, 1024};
  c.graph_decoder = {6, 6, 3072, 1024};
  c.dropout = 0.1;
  c.batch_size = 16;
  c.learning_rate = 3e-4;
  c.grad_clip = 1.0;
  c.beam_width = 15;
  return c;
}

void ModelConfig::validate() const {
  auto check_block = [&](const char* name, const BlockConfig& b) {
    if (b.layers < 1) throw std::invalid_argument(std::string(name) + ": layers must be >= 1");
    if (b.heads < 1 || d % b.heads != 0) {
      throw std::invalid_argument(std::string(name) + ": embedding size must divide by heads");
    }
    if (b.ffn < 1) throw std::invalid_argument(std::string(name) + ": ffn size must be >= 1");
    if (b.max_len < 4) throw std::invalid_argument(std::string(name) + ": input length too small");
  };
  if (d < 2) throw std::invalid_argument("embedding size too small");
  check_block("text_encoder", text_encoder);
  check_block("graph_encoder", graph_encoder);
  check_block("aggregator", aggregator);
  check_block("action_decoder", action_decoder);
  check_block("graph_decoder", graph_decoder);
  if (beam_width < 1) throw std::invalid_argument("beam width must be >= 1");
  if (dropout < 0.0 || dropout >= 1.0) throw std::invalid_argument("dropout must lie in [0, 1)");
  if (mlm_rate <= 0.0 || mlm_rate >= 1.0) throw std::invalid_argument("mlm rate must lie in (0, 1)");
  if (batch_size < 1) throw std::invalid_argument("batch size must be >= 1");
  if (max_element_tokens < 1 || max_elements < 1) {
    throw std::invalid_argument("generation caps must be >= 1");
  }
  if (max_element_tokens > kMaxElementLen) {
    throw std::invalid_argument("max_element_tokens exceeds the supported element length");
  }
  const int min_dec_len = kBoundaryPosBase + kBoundaryCountCap + 1;
  if (action_decoder.max_len < min_dec_len || graph_decoder.max_len < min_dec_len) {
    throw std::invalid_argument("decoder input length too small for the boundary positions");
  }
  if (activation != "gelu") throw std::invalid_argument("unsupported activation: " + activation);
}

namespace {

nlohmann::json block_to_json(const BlockConfig& b) {
  return {{"layers", b.layers}, {"heads", b.heads}, {"ffn", b.ffn}, {"max_len", b.max_len}};
}

BlockConfig block_from_json(const nlohmann::json& j) {
  BlockConfig b;
  b.layers = j.at("layers").get<int>();
  b.heads = j.at("heads").get<int>();
  b.ffn = j.at("ffn").get<int>();
  b.max_len = j.at("max_len").get<int>();
  return b;
}

}  // namespace

std::string ModelConfig::to_json_string() const {
  nlohmann::json j;
  j["d"] = d;
  j["text_encoder"] = block_to_json(text_encoder);
  j["graph_encoder"] = block_to_json(graph_encoder);
  j["aggregator"] = block_to_json(aggregator);
  j["action_decoder"] = block_to_json(action_decoder);
  j["graph_decoder"] = block_to_json(graph_decoder);
  j["dropout"] = dropout;
  j["activation"] = activation;
  j["learning_rate"] = learning_rate;
  j["batch_size"] = batch_size;
  j["grad_clip"] = grad_clip;
  j["beam_width"] = beam_width;
  j["mlm_rate"] = mlm_rate;
  j["loss_mode"] = std::string(loss_mode_name(loss_mode));
  j["target_mode"] = std::string(target_mode_name(target_mode));
  j["task"] = std::string(task_mode_name(task));
  j["reduction"] = reduction == Reduction::Mean ? "mean" : "sum";
  j["shuffle_targets"] = shuffle_targets;
  j["max_element_tokens"] = max_element_tokens;
  j["max_elements"] = max_elements;
  j["seed"] = seed;
  return j.dump(2);
}

ModelConfig ModelConfig::from_json_string(const std::string& text) {
  nlohmann::json j = nlohmann::json::parse(text);
  ModelConfig c;
  c.d = j.at("d").get<int>();
  c.text_encoder = block_from_json(j.at("text_encoder"));
  c.graph_encoder = block_from_json(j.at("graph_encoder"));
  c.aggregator = block_from_json(j.at("aggregator"));
  c.action_decoder = block_from_json(j.at("action_decoder"));
  c.graph_decoder = block_from_json(j.at("graph_decoder"));
  c.dropout = j.at("dropout").get<double>();
  c.activation = j.at("activation").get<std::string>();
  c.learning_rate = j.at("learning_rate").get<double>();
  c.batch_size = j.at("batch_size").get<int>();
  c.grad_clip = j.at("grad_clip").get<double>();
  c.beam_width = j.at("beam_width").get<int>();
  c.mlm_rate = j.at("mlm_rate").get<double>();
  c.loss_mode = parse_loss_mode(j.at("loss_mode").get<std::string>());
  c.target_mode = parse_target_mode(j.at("target_mode").get<std::string>());
  c.task = parse_task_mode(j.at("task").get<std::string>());
  c.reduction = j.at("reduction").get<std::string>() == "sum" ? Reduction::Sum : Reduction::Mean;
  c.shuffle_targets = j.at("shuffle_targets").get<bool>();
  c.max_element_tokens = j.at("max_element_tokens").get<int>();
  c.max_elements = j.at("max_elements").get<int>();
  c.seed = j.at("seed").get<std::uint64_t>();
  c.validate();
  return c;
}

void StackParams::collect(std::vector<Param*>& out) {
  if (has_embeddings) {
    out.push_back(&tok_emb);
    out.push_back(&pos_emb);
  }
  for (auto& l : layers) {
    out.push_back(&l.ln1_g);
    out.push_back(&l.ln1_b);
    out.push_back(&l.wq);
    out.push_back(&l.bq);
    out.push_back(&l.wk);
    out.push_back(&l.bk);
    out.push_back(&l.wv);
    out.push_back(&l.bv);
    out.push_back(&l.wo);
    out.push_back(&l.bo);
    if (l.has_cross) {
      out.push_back(&l.lnc_g);
      out.push_back(&l.lnc_b);
      out.push_back(&l.cwq);
      out.push_back(&l.cbq);
      out.push_back(&l.cwk);
      out.push_back(&l.cbk);
      out.push_back(&l.cwv);
      out.push_back(&l.cbv);
      out.push_back(&l.cwo);
      out.push_back(&l.cbo);
    }
    out.push_back(&l.ln2_g);
    out.push_back(&l.ln2_b);
    out.push_back(&l.w1);
    out.push_back(&l.b1);
    out.push_back(&l.w2);
    out.push_back(&l.b2);
  }
  out.push_back(&lnf_g);
  out.push_back(&lnf_b);
  if (has_out) {
    out.push_back(&out_w);
    out.push_back(&out_b);
  }
}

// ---------------------------------------------------------------------------
// row plans
// ---------------------------------------------------------------------------

RowPlan sos_decoder_plan(const codec::SetSerialization& target) {
  const auto& lay = target.layout;
  const int m = static_cast<int>(target.token_ids.size());
  const int k = lay.elements();
  RowPlan plan;
  plan.serial_positions = m;

  // one appended terminator row for the last element, plus one boundary row
  // per completed element (the set-end boundary reuses the <eos> position)
  const int rows = k > 0 ? m + 1 + k : m;
  plan.input_ids.assign(rows, codec::kBos);
  plan.pos_idx.assign(rows, 0);
  plan.mask.size = rows;
  plan.mask.bits.assign(static_cast<std::size_t>(rows) * rows, 0);

  std::vector<std::vector<int>> element_all_rows;  // content + terminator per element
  for (int i = 0; i < k; ++i) {
    const auto& span = lay.spans[i];
    if (span.length > kMaxElementLen) {
      throw std::invalid_argument("set element longer than the decoder supports");
    }
    std::vector<int> rows_of_element;
    for (int j = 0; j < span.length; ++j) {
      int r = span.start + j;
      plan.input_ids[r] = j == 0 ? codec::kBos : target.token_ids[span.start + j - 1];
      plan.pos_idx[r] = 1 + j;
      rows_of_element.push_back(r);
      plan.content.push_back({r, target.token_ids[r], 1.0});
    }
    // the terminator row: sees the whole element, predicts <sep>
    int rt = (i + 1 < k) ? span.start + span.length  // the <sep> position
                         : m;                        // appended row for the last element
    plan.input_ids[rt] = target.token_ids[span.start + span.length - 1];
    plan.pos_idx[rt] = 1 + span.length;
    plan.framing.push_back({rt, codec::kSep, 1.0});
    // block-causal attention over [content rows..., terminator]
    rows_of_element.push_back(rt);
    for (std::size_t a = 0; a < rows_of_element.size(); ++a) {
      for (std::size_t b = 0; b <= a; ++b) {
        plan.mask.set(rows_of_element[a], rows_of_element[b], true);
      }
    }
    element_all_rows.push_back(rows_of_element);
    rows_of_element.pop_back();
    plan.element_rows.push_back(std::move(rows_of_element));
  }

  // boundary rows: input <bos>, position = completed-element count, attending
  // themselves and the rows of every element completed so far (a set-level
  // pool: element rows carry no order information, so pooling them keeps the
  // boundary order-invariant). Counts 0..k-1 predict <sep> (the set
  // continues); count k predicts <eos> at the <eos> position.
  auto wire_boundary = [&](int row, int count) {
    plan.pos_idx[row] = boundary_pos_index(count);
    plan.mask.set(row, row, true);
    for (int e = 0; e < count; ++e) {
      for (int r : element_all_rows[e]) plan.mask.set(row, r, true);
    }
  };
  for (int i = 0; i < k; ++i) {
    int rb = m + 1 + i;
    wire_boundary(rb, i);
    plan.boundary_rows.push_back(rb);
    plan.framing.push_back({rb, codec::kSep, 1.0});
  }
  int rc = m - 1;  // the <eos> position
  plan.const_row = rc;
  plan.input_ids[rc] = codec::kBos;
  wire_boundary(rc, k);
  plan.content.push_back({rc, codec::kEos, 1.0});
  return plan;
}

RowPlan seq_decoder_plan(const std::vector<int>& serialization) {
  const int m = static_cast<int>(serialization.size());
  RowPlan plan;
  plan.serial_positions = m;
  plan.input_ids.resize(m);
  plan.pos_idx.resize(m);
  for (int p = 0; p < m; ++p) {
    plan.input_ids[p] = p == 0 ? codec::kBos : serialization[p - 1];
    plan.pos_idx[p] = p;
    plan.content.push_back({p, serialization[p], 1.0});
  }
  plan.mask = codec::MaskSpec::causal(m);
  return plan;
}

codec::SetSerialization truncate_serialization(const codec::SetSerialization& s, int max_positions) {
  if (static_cast<int>(s.token_ids.size()) + 1 <= max_positions) return s;
  std::vector<std::vector<int>> elements;
  for (const auto& span : s.layout.spans) {
    elements.emplace_back(s.token_ids.begin() + span.start,
                          s.token_ids.begin() + span.start + span.length);
  }
  while (!elements.empty()) {
    int m = 0;
    for (const auto& e : elements) m += static_cast<int>(e.size());
    m += static_cast<int>(elements.size()) - 1 + 1;  // separators + <eos>
    if (m + 1 <= max_positions) break;
    elements.pop_back();
  }
  codec::SetSerialization out = codec::assemble_serialization(std::move(elements));
  out.truncated_elements = s.truncated_elements + (s.layout.elements() - out.layout.elements());
  return out;
}

// ---------------------------------------------------------------------------
// losses on logits
// ---------------------------------------------------------------------------

double row_nll(const Matrix& logits, int row, int target) {
  double mx = -1e300;
  for (int j = 0; j < logits.cols; ++j) mx = std::max(mx, logits.at(row, j));
  double z = 0.0;
  for (int j = 0; j < logits.cols; ++j) z += std::exp(logits.at(row, j) - mx);
  return std::log(z) - (logits.at(row, target) - mx);
}

namespace {

double reduce_entries(const Matrix& logits, const std::vector<Supervision>& entries,
                      Reduction red) {
  double sum = 0.0;
  double weight = 0.0;
  for (const auto& e : entries) {
    sum += e.weight * row_nll(logits, e.row, e.target);
    weight += e.weight;
  }
  if (red == Reduction::Mean && weight > 0.0) return sum / weight;
  return sum;
}

}  // namespace

double loss_seq(const Matrix& logits, const std::vector<int>& serialization, Reduction red) {
  std::vector<Supervision> entries;
  for (int p = 0; p < static_cast<int>(serialization.size()); ++p) {
    entries.push_back({p, serialization[p], 1.0});
  }
  return reduce_entries(logits, entries, red);
}

double loss_sos(const Matrix& logits, const RowPlan& plan, Reduction red) {
  return reduce_entries(logits, plan.content, red);
}

double loss_sos(const Matrix& logits, const codec::SetSerialization& target, Reduction red) {
  return loss_sos(logits, sos_decoder_plan(target), red);
}

double loss_framing(const Matrix& logits, const RowPlan& plan, Reduction red) {
  return reduce_entries(logits, plan.framing, red);
}

// ---------------------------------------------------------------------------
// model construction
// ---------------------------------------------------------------------------

namespace {

void init_layer(StackParams::Layer& l, const std::string& prefix, int d, int ffn, bool cross) {
  l.ln1_g = Param(prefix + ".ln1_g", 1, d);
  l.ln1_b = Param(prefix + ".ln1_b", 1, d);
  l.wq = Param(prefix + ".wq", d, d);
  l.bq = Param(prefix + ".bq", 1, d);
  l.wk = Param(prefix + ".wk", d, d);
  l.bk = Param(prefix + ".bk", 1, d);
  l.wv = Param(prefix + ".wv", d, d);
  l.bv = Param(prefix + ".bv", 1, d);
  l.wo = Param(prefix + ".wo", d, d);
  l.bo = Param(prefix + ".bo", 1, d);
  l.has_cross = cross;
  if (cross) {
    l.lnc_g = Param(prefix + ".lnc_g", 1, d);
    l.lnc_b = Param(prefix + ".lnc_b", 1, d);
    l.cwq = Param(prefix + ".cwq", d, d);
    l.cbq = Param(prefix + ".cbq", 1, d);
    l.cwk = Param(prefix + ".cwk", d, d);
    l.cbk = Param(prefix + ".cbk", 1, d);
    l.cwv = Param(prefix + ".cwv", d, d);
    l.cbv = Param(prefix + ".cbv", 1, d);
    l.cwo = Param(prefix + ".cwo", d, d);
    l.cbo = Param(prefix + ".cbo", 1, d);
  }
  l.ln2_g = Param(prefix + ".ln2_g", 1, d);
  l.ln2_b = Param(prefix + ".ln2_b", 1, d);
  l.w1 = Param(prefix + ".w1", d, ffn);
  l.b1 = Param(prefix + ".b1", 1, ffn);
  l.w2 = Param(prefix + ".w2", ffn, d);
  l.b2 = Param(prefix + ".b2", 1, d);
}

void init_stack(StackParams& s, const std::string& name, int d, const BlockConfig& bc, int vocab,
                bool embeddings, bool cross, bool out) {
  s.has_embeddings = embeddings;
  s.has_out = out;
  if (embeddings) {
    s.tok_emb = Param(name + ".tok_emb", vocab, d);
    s.pos_emb = Param(name + ".pos_emb", bc.max_len, d);
  }
  s.layers.resize(bc.layers);
  for (int i = 0; i < bc.layers; ++i) {
    init_layer(s.layers[i], name + ".layer" + std::to_string(i), d, bc.ffn, cross);
  }
  s.lnf_g = Param(name + ".lnf_g", 1, d);
  s.lnf_b = Param(name + ".lnf_b", 1, d);
  if (out) {
    s.out_w = Param(name + ".out_w", d, vocab);
    s.out_b = Param(name + ".out_b", 1, vocab);
  }
}

}  // namespace

WorldModel::WorldModel(ModelConfig cfg, codec::Vocabulary text_vocab,
                       codec::Vocabulary graph_vocab, codec::Vocabulary action_vocab)
    : cfg_(std::move(cfg)),
      text_vocab_(std::move(text_vocab)),
      graph_vocab_(std::move(graph_vocab)),
      action_vocab_(std::move(action_vocab)) {
  cfg_.validate();
  init_stack(text_enc_, "text_encoder", cfg_.d, cfg_.text_encoder, text_vocab_.size(), true, false,
             true);
  init_stack(graph_enc_, "graph_encoder", cfg_.d, cfg_.graph_encoder, graph_vocab_.size(), true,
             false, true);
  init_stack(agg_, "aggregator", cfg_.d, cfg_.aggregator, 0, false, false, false);
  init_stack(action_dec_, "action_decoder", cfg_.d, cfg_.action_decoder, action_vocab_.size(),
             true, true, true);
  init_stack(graph_dec_, "graph_decoder", cfg_.d, cfg_.graph_decoder, graph_vocab_.size(), true,
             true, true);
  nn::Rng rng(cfg_.seed * 0x9e3779b9u + 17);
  init_params(rng);
}

void WorldModel::init_params(nn::Rng& rng) {
  constexpr double kInitStd = 0.08;
  for (Param* p : parameters()) {
    bool is_gain = p->name.size() >= 2 && p->name.substr(p->name.size() - 2) == "_g";
    bool is_bias = !is_gain && (p->name.substr(p->name.size() - 2) == "_b" ||
                                p->name.find(".b") != std::string::npos);
    if (is_gain) {
      p->value.fill(1.0);
    } else if (is_bias) {
      p->value.fill(0.0);
    } else {
      for (double& v : p->value.data) v = rng.normal(0.0, kInitStd);
    }
  }
}

std::vector<Param*> WorldModel::parameters() {
  std::vector<Param*> out;
  text_enc_.collect(out);
  graph_enc_.collect(out);
  agg_.collect(out);
  action_dec_.collect(out);
  graph_dec_.collect(out);
  return out;
}

std::vector<std::pair<std::string, std::vector<Param*>>> WorldModel::parameter_blocks() {
  std::vector<std::pair<std::string, std::vector<Param*>>> out;
  auto block = [&](const char* name, StackParams& s) {
    std::vector<Param*> ps;
    s.collect(ps);
    out.emplace_back(name, std::move(ps));
  };
  block("text_encoder", text_enc_);
  block("graph_encoder", graph_enc_);
  block("aggregator", agg_);
  block("action_decoder", action_dec_);
  block("graph_decoder", graph_dec_);
  return out;
}

std::int64_t WorldModel::parameter_count() {
  std::int64_t n = 0;
  for (Param* p : parameters()) n += static_cast<std::int64_t>(p->value.size());
  return n;
}

std::int64_t WorldModel::parameter_count(const ModelConfig& cfg, int text_vocab, int graph_vocab,
                                         int action_vocab) {
  auto layer_count = [&](const BlockConfig& b, bool cross) {
    std::int64_t d = cfg.d;
    std::int64_t per = 2 * d + 4 * (d * d + d);      // ln1 + self qkvo
    if (cross) per += 2 * d + 4 * (d * d + d);       // lnc + cross qkvo
    per += 2 * d + d * b.ffn + b.ffn + b.ffn * d + d;  // ln2 + mlp
    return per * b.layers;
  };
  auto stack_count = [&](const BlockConfig& b, int vocab, bool embeddings, bool cross, bool out) {
    std::int64_t d = cfg.d;
    std::int64_t n = layer_count(b, cross) + 2 * d;  // final ln
    if (embeddings) n += static_cast<std::int64_t>(vocab) * d + static_cast<std::int64_t>(b.max_len) * d;
    if (out) n += static_cast<std::int64_t>(d) * vocab + vocab;
    return n;
  };
  std::int64_t n = 0;
  n += stack_count(cfg.text_encoder, text_vocab, true, false, true);
  n += stack_count(cfg.graph_encoder, graph_vocab, true, false, true);
  n += stack_count(cfg.aggregator, 0, false, false, false);
  n += stack_count(cfg.action_decoder, action_vocab, true, true, true);
  n += stack_count(cfg.graph_decoder, graph_vocab, true, true, true);
  return n;
}

void WorldModel::zero_grads() {
  for (Param* p : parameters()) p->zero_grad();
}

bool WorldModel::grads_finite() {
  for (Param* p : parameters()) {
    if (!p->grad.all_finite()) return false;
  }
  return true;
}

// ---------------------------------------------------------------------------
// checkpoint io
// ---------------------------------------------------------------------------

namespace {

constexpr char kCheckpointMagic[8] = {'W', 'K', 'C', 'H', 'K', 'P', 'T', '1'};
constexpr std::uint32_t kEndianMarker = 0x01020304u;

void write_u64(std::ofstream& out, std::uint64_t v) {
  out.write(reinterpret_cast<const char*>(&v), sizeof(v));
}

std::uint64_t read_u64(std::ifstream& in) {
  std::uint64_t v = 0;
  in.read(reinterpret_cast<char*>(&v), sizeof(v));
  return v;
}

}  // namespace

void WorldModel::save(const std::string& path) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw std::runtime_error("cannot write checkpoint: " + path);
  out.write(kCheckpointMagic, sizeof(kCheckpointMagic));
  std::uint32_t marker = kEndianMarker;
  out.write(reinterpret_cast<const char*>(&marker), sizeof(marker));

  nlohmann::json meta;
  meta["config"] = nlohmann::json::parse(cfg_.to_json_string());
  meta["text_vocab"] = text_vocab_.tokens();
  meta["graph_vocab"] = graph_vocab_.tokens();
  meta["action_vocab"] = action_vocab_.tokens();
  std::string blob = meta.dump();
  write_u64(out, blob.size());
  out.write(blob.data(), static_cast<std::streamsize>(blob.size()));

  auto params = parameters();
  write_u64(out, params.size());
  for (Param* p : params) {
    write_u64(out, p->name.size());
    out.write(p->name.data(), static_cast<std::streamsize>(p->name.size()));
    write_u64(out, static_cast<std::uint64_t>(p->value.rows));
    write_u64(out, static_cast<std::uint64_t>(p->value.cols));
    out.write(reinterpret_cast<const char*>(p->value.data.data()),
              static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
  }
  if (!out) throw std::runtime_error("checkpoint write failed: " + path);
}

WorldModel WorldModel::load(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw std::runtime_error("cannot read checkpoint: " + path);
  char magic[8];
  in.read(magic, sizeof(magic));
  if (std::memcmp(magic, kCheckpointMagic, sizeof(magic)) != 0) {
    throw std::runtime_error("not a worldkit checkpoint: " + path);
  }
  std::uint32_t marker = 0;
  in.read(reinterpret_cast<char*>(&marker), sizeof(marker));
  if (marker != kEndianMarker) {
    throw std::runtime_error("checkpoint byte order mismatch: " + path);
  }
  std::uint64_t blob_len = read_u64(in);
  std::string blob(blob_len, '\0');
  in.read(blob.data(), static_cast<std::streamsize>(blob_len));
  nlohmann::json meta = nlohmann::json::parse(blob);

  ModelConfig cfg = ModelConfig::from_json_string(meta.at("config").dump());
  auto text_v = codec::Vocabulary::from_token_list(
      codec::VocabKind::Text, meta.at("text_vocab").get<std::vector<std::string>>());
  auto graph_v = codec::Vocabulary::from_token_list(
      codec::VocabKind::Graph, meta.at("graph_vocab").get<std::vector<std::string>>());
  auto action_v = codec::Vocabulary::from_token_list(
      codec::VocabKind::Action, meta.at("action_vocab").get<std::vector<std::string>>());

  WorldModel model(cfg, std::move(text_v), std::move(graph_v), std::move(action_v));
  auto params = model.parameters();
  std::uint64_t count = read_u64(in);
  if (count != params.size()) throw std::runtime_error("checkpoint tensor count mismatch");
  for (Param* p : params) {
    std::uint64_t name_len = read_u64(in);
    std::string name(name_len, '\0');
    in.read(name.data(), static_cast<std::streamsize>(name_len));
    std::uint64_t rows = read_u64(in);
    std::uint64_t cols = read_u64(in);
    if (name != p->name || rows != static_cast<std::uint64_t>(p->value.rows) ||
        cols != static_cast<std::uint64_t>(p->value.cols)) {
      throw std::runtime_error("checkpoint tensor mismatch at " + p->name);
    }
    in.read(reinterpret_cast<char*>(p->value.data.data()),
            static_cast<std::streamsize>(p->value.data.size() * sizeof(double)));
  }
  if (!in) throw std::runtime_error("checkpoint truncated: " + path);
  return model;
}

// ---------------------------------------------------------------------------
// input building
// ---------------------------------------------------------------------------

EncoderInput WorldModel::build_text_input(const data::StateSnapshot& state,
                                          const std::string& action) const {
  std::vector<int> ids;
  ids.push_back(codec::kBos);
  auto push_text = [&](const std::string& text) {
    for (const auto& tok : codec::tokenize_text(text)) ids.push_back(text_vocab_.id_of(tok));
  };
  // the taken action leads (truncation must never drop it), then the
  // observation fields in fixed order, then the valid-action strings
  push_text(action);
  ids.push_back(codec::kSep);
  push_text(state.location_name);
  push_text(state.location_desc);
  push_text(state.observation);
  push_text(state.inventory);
  for (const auto& va : state.valid_actions) {
    ids.push_back(codec::kSep);
    push_text(va);
  }
  ids.push_back(codec::kEos);

  EncoderInput in;
  const int cap = cfg_.text_encoder.max_len;
  if (static_cast<int>(ids.size()) > cap) {
    in.truncated = static_cast<int>(ids.size()) - cap;
    ids.resize(cap - 1);
    ids.push_back(codec::kEos);
  }
  in.ids = std::move(ids);
  in.pos.resize(in.ids.size());
  for (int p = 0; p < static_cast<int>(in.ids.size()); ++p) in.pos[p] = p;
  return in;
}

EncoderInput WorldModel::build_graph_input(const kg::KnowledgeGraph& g) const {
  codec::SetSerialization ser = codec::encode_graph_set(g, graph_vocab_);
  ser = truncate_serialization(ser, cfg_.graph_encoder.max_len);
  EncoderInput in;
  in.truncated = ser.truncated_elements;
  in.ids.push_back(codec::kBos);
  in.pos.push_back(0);
  for (int p = 0; p < static_cast<int>(ser.token_ids.size()); ++p) {
    in.ids.push_back(ser.token_ids[p]);
    // within-element offsets; framing rows share index 0 so triple order
    // permutations only permute encoder rows
    in.pos.push_back(ser.layout.offset_of[p] >= 0 ? 1 + ser.layout.offset_of[p] : 0);
  }
  return in;
}

codec::SetSerialization WorldModel::graph_target(const data::StateSample& sample) const {
  codec::SetSerialization ser;
  switch (cfg_.target_mode) {
    case TargetMode::Diff: {
      kg::GraphDiff d = kg::diff(sample.prev.graph, sample.next.graph);
      ser = codec::encode_graph_set(d.additions, graph_vocab_);
      break;
    }
    case TargetMode::FullGraph:
      ser = codec::encode_graph_set(sample.next.graph, graph_vocab_);
      break;
    case TargetMode::AddDel: {
      kg::GraphDiff d = kg::diff(sample.prev.graph, sample.next.graph);
      ser = codec::encode_add_del_set(d.additions, d.deletions, graph_vocab_);
      break;
    }
  }
  return truncate_serialization(ser, cfg_.graph_decoder.max_len);
}

codec::SetSerialization WorldModel::action_target(const data::StateSample& sample) const {
  codec::SetSerialization ser = codec::encode_action_set(sample.next.valid_actions, action_vocab_);
  return truncate_serialization(ser, cfg_.action_decoder.max_len);
}

// ---------------------------------------------------------------------------
// forward passes
// ---------------------------------------------------------------------------

namespace {

Value maybe_dropout(Tape& t, Value x, const WorldModel::Dropout& drop) {
  if (drop.rate <= 0.0 || drop.rng == nullptr) return x;
  const Matrix& v = t.value(x);
  Matrix mask(v.rows, v.cols);
  double keep = 1.0 - drop.rate;
  for (double& m : mask.data) m = drop.rng->uniform() < keep ? 1.0 / keep : 0.0;
  return t.mul_const(x, mask);
}

Value multi_head_attention(Tape& t, Value q_src, Value kv_src,
                           const std::vector<std::uint8_t>* allow, StackParams::Layer& l,
                           bool cross, int heads) {
  Param& wq = cross ? l.cwq : l.wq;
  Param& bq = cross ? l.cbq : l.bq;
  Param& wk = cross ? l.cwk : l.wk;
  Param& bk = cross ? l.cbk : l.bk;
  Param& wv = cross ? l.cwv : l.wv;
  Param& bv = cross ? l.cbv : l.bv;
  Param& wo = cross ? l.cwo : l.wo;
  Param& bo = cross ? l.cbo : l.bo;

  Value q = t.add_row(t.matmul(q_src, t.param(wq)), t.param(bq));
  Value k = t.add_row(t.matmul(kv_src, t.param(wk)), t.param(bk));
  Value v = t.add_row(t.matmul(kv_src, t.param(wv)), t.param(bv));

  const int d = t.value(q).cols;
  const int dh = d / heads;
  std::vector<Value> outs;
  outs.reserve(heads);
  for (int h = 0; h < heads; ++h) {
    Value qh = t.slice_cols(q, h * dh, (h + 1) * dh);
    Value kh = t.slice_cols(k, h * dh, (h + 1) * dh);
    Value vh = t.slice_cols(v, h * dh, (h + 1) * dh);
    Value scores = t.scale(t.matmul_nt(qh, kh), 1.0 / std::sqrt(static_cast<double>(dh)));
    Value probs = t.softmax_masked(scores, allow);
    outs.push_back(t.matmul(probs, vh));
  }
  Value merged = heads == 1 ? outs[0] : t.concat_cols(outs);
  return t.add_row(t.matmul(merged, t.param(wo)), t.param(bo));
}

Value stack_forward(Tape& t, StackParams& s, const BlockConfig& bc, Value x,
                    const codec::MaskSpec* self_mask, Value* memory,
                    const WorldModel::Dropout& drop) {
  for (auto& l : s.layers) {
    Value h = t.layer_norm(x, t.param(l.ln1_g), t.param(l.ln1_b));
    const std::vector<std::uint8_t>* allow = self_mask ? &self_mask->bits : nullptr;
    Value attn = multi_head_attention(t, h, h, allow, l, false, bc.heads);
    x = t.add(x, maybe_dropout(t, attn, drop));
    if (l.has_cross && memory) {
      Value hc = t.layer_norm(x, t.param(l.lnc_g), t.param(l.lnc_b));
      Value cattn = multi_head_attention(t, hc, *memory, nullptr, l, true, bc.heads);
      x = t.add(x, maybe_dropout(t, cattn, drop));
    }
    Value h2 = t.layer_norm(x, t.param(l.ln2_g), t.param(l.ln2_b));
    Value ffn = t.add_row(t.matmul(h2, t.param(l.w1)), t.param(l.b1));
    ffn = t.gelu(ffn);
    ffn = t.add_row(t.matmul(ffn, t.param(l.w2)), t.param(l.b2));
    x = t.add(x, maybe_dropout(t, ffn, drop));
  }
  return t.layer_norm(x, t.param(s.lnf_g), t.param(s.lnf_b));
}

Value embed(Tape& t, StackParams& s, const std::vector<int>& ids, const std::vector<int>& pos,
            const WorldModel::Dropout& drop) {
  Value x = t.add(t.gather_rows(t.param(s.tok_emb), ids), t.gather_rows(t.param(s.pos_emb), pos));
  return maybe_dropout(t, x, drop);
}

}  // namespace

Value WorldModel::encode_text(Tape& tape, const EncoderInput& in, const Dropout& drop) {
  Value x = embed(tape, text_enc_, in.ids, in.pos, drop);
  return stack_forward(tape, text_enc_, cfg_.text_encoder, x, nullptr, nullptr, drop);
}

Value WorldModel::encode_graph(Tape& tape, const EncoderInput& in, const Dropout& drop) {
  Value x = embed(tape, graph_enc_, in.ids, in.pos, drop);
  return stack_forward(tape, graph_enc_, cfg_.graph_encoder, x, nullptr, nullptr, drop);
}

Value WorldModel::aggregate(Tape& tape, Value text_enc, Value graph_enc, const Dropout& drop) {
  const int cap = cfg_.aggregator.max_len;
  int tl = tape.value(text_enc).rows;
  int gl = tape.value(graph_enc).rows;
  Value x;
  if (tl >= cap) {
    x = tape.slice_rows(text_enc, 0, cap);
  } else if (tl + gl > cap) {
    // over budget: drop trailing graph rows, keep the full observation side
    x = tape.concat_rows(text_enc, tape.slice_rows(graph_enc, 0, cap - tl));
  } else {
    x = tape.concat_rows(text_enc, graph_enc);
  }
  return stack_forward(tape, agg_, cfg_.aggregator, x, nullptr, nullptr, drop);
}

Value WorldModel::decode(Tape& tape, DecoderKind kind, Value state, Value side,
                         const RowPlan& plan, const Dropout& drop) {
  StackParams& dec = kind == DecoderKind::Graph ? graph_dec_ : action_dec_;
  const BlockConfig& bc = kind == DecoderKind::Graph ? cfg_.graph_decoder : cfg_.action_decoder;
  Value memory = tape.concat_rows(state, side);
  Value x = embed(tape, dec, plan.input_ids, plan.pos_idx, drop);
  Value rows = stack_forward(tape, dec, bc, x, &plan.mask, &memory, drop);
  return tape.add_row(tape.matmul(rows, tape.param(dec.out_w)), tape.param(dec.out_b));
}

std::vector<Supervision> WorldModel::task_supervision(const RowPlan& plan, LossMode mode) const {
  std::vector<Supervision> sup = plan.content;
  if (mode == LossMode::Sos) {
    sup.insert(sup.end(), plan.framing.begin(), plan.framing.end());
  }
  return sup;
}

LossBreakdown WorldModel::sample_loss(Tape& tape, const data::StateSample& sample,
                                      const Dropout& drop,
                                      std::optional<std::uint64_t> augment_seed,
                                      Value* out_loss) {
  EncoderInput text_in = build_text_input(sample.prev, sample.action);
  EncoderInput graph_in = build_graph_input(sample.prev.graph);

  Value text_rows = encode_text(tape, text_in, drop);
  Value graph_rows = encode_graph(tape, graph_in, drop);
  Value state = aggregate(tape, text_rows, graph_rows, drop);

  const bool sos = cfg_.loss_mode == LossMode::Sos;
  LossBreakdown breakdown;
  Value total;

  auto run_task = [&](DecoderKind kind, codec::SetSerialization target, double& slot) {
    if (sos && cfg_.shuffle_targets && augment_seed.has_value()) {
      target = codec::shuffle_elements(
          target, *augment_seed ^ (kind == DecoderKind::Graph ? 0x9e37ull : 0x79b9ull));
    }
    RowPlan plan = sos ? sos_decoder_plan(target) : seq_decoder_plan(target.token_ids);
    Value side = kind == DecoderKind::Graph ? graph_rows : text_rows;
    Value logits = decode(tape, kind, state, side, plan, drop);
    Value loss = tape.cross_entropy(logits, task_supervision(plan, cfg_.loss_mode),
                                    cfg_.reduction);
    slot = tape.value(loss).at(0, 0);
    total = total.valid() ? tape.add(total, loss) : loss;
  };

  if (cfg_.task != TaskMode::ActionOnly) {
    run_task(DecoderKind::Graph, graph_target(sample), breakdown.graph);
  }
  if (cfg_.task != TaskMode::GraphOnly) {
    run_task(DecoderKind::Action, action_target(sample), breakdown.action);
  }
  breakdown.total = breakdown.graph + breakdown.action;
  if (out_loss) *out_loss = total;
  return breakdown;
}

// ---------------------------------------------------------------------------
// gradient check
// ---------------------------------------------------------------------------

GradCheckReport gradient_check(WorldModel& model, const data::StateSample& sample,
                               int coords_per_block, double epsilon, std::uint64_t seed) {
  WorldModel::Dropout off;
  auto loss_of = [&]() {
    Tape tape;
    Value loss;
    model.sample_loss(tape, sample, off, std::nullopt, &loss);
    return tape.value(loss).at(0, 0);
  };

  model.zero_grads();
  {
    Tape tape;
    Value loss;
    model.sample_loss(tape, sample, off, std::nullopt, &loss);
    tape.backward(loss);
  }

  nn::Rng rng(seed);
  GradCheckReport report;
  for (auto& [name, params] : model.parameter_blocks()) {
    std::int64_t total = 0;
    for (Param* p : params) total += static_cast<std::int64_t>(p->value.size());
    GradCheckReport::Block block;
    block.name = name;
    for (int c = 0; c < coords_per_block; ++c) {
      std::int64_t coord = static_cast<std::int64_t>(rng.next_u64() % static_cast<std::uint64_t>(total));
      Param* target = nullptr;
      for (Param* p : params) {
        if (coord < static_cast<std::int64_t>(p->value.size())) {
          target = p;
          break;
        }
        coord -= static_cast<std::int64_t>(p->value.size());
      }
      double& theta = target->value.data[static_cast<std::size_t>(coord)];
      double analytic = target->grad.data[static_cast<std::size_t>(coord)];
      double h = epsilon * std::max(1.0, std::abs(theta));
      double saved = theta;
      theta = saved + h;
      double lp = loss_of();
      theta = saved - h;
      double lm = loss_of();
      theta = saved;
      double fd = (lp - lm) / (2.0 * h);
      double err = std::abs(analytic - fd) / std::max({std::abs(analytic), std::abs(fd), 1e-6});
      block.max_rel_err = std::max(block.max_rel_err, err);
      ++block.coords;
    }
    report.max_rel_err = std::max(report.max_rel_err, block.max_rel_err);
    report.blocks.push_back(std::move(block));
  }
  return report;
}

}  // namespace worldkit::model
