// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0
//
// Inference-mode forward passes (plain matrix math, no tape) and beam search.
// The arithmetic mirrors the training forward op for op so that incremental
// decoding reproduces teacher-forced logits exactly.

#include "worldkit/beam.hpp"

#include <algorithm>
#include <cassert>
#include <cmath>
#include <set>

namespace worldkit::beam {

using model::ModelConfig;
using model::RowPlan;
using model::StackParams;
using model::WorldModel;
using nn::Matrix;

namespace {

constexpr double kLnEps = 1e-5;
constexpr double kInvSqrt2 = 0.70710678118654752440;

Matrix matmul(const Matrix& A, const Matrix& B) {
  assert(A.cols == B.rows);
  Matrix C(A.rows, B.cols);
  for (int i = 0; i < A.rows; ++i) {
    for (int k = 0; k < A.cols; ++k) {
      double aik = A.at(i, k);
      if (aik == 0.0) continue;
      const double* brow = &B.data[static_cast<std::size_t>(k) * B.cols];
      double* crow = &C.data[static_cast<std::size_t>(i) * C.cols];
      for (int j = 0; j < B.cols; ++j) crow[j] += aik * brow[j];
    }
  }
  return C;
}

void add_row_inplace(Matrix& A, const Matrix& bias) {
  for (int i = 0; i < A.rows; ++i) {
    for (int j = 0; j < A.cols; ++j) A.at(i, j) += bias.at(0, j);
  }
}

void add_inplace(Matrix& A, const Matrix& B) {
  for (std::size_t i = 0; i < A.data.size(); ++i) A.data[i] += B.data[i];
}

Matrix layer_norm(const Matrix& A, const Matrix& g, const Matrix& b) {
  Matrix C(A.rows, A.cols);
  for (int i = 0; i < A.rows; ++i) {
    double mean = 0.0;
    for (int j = 0; j < A.cols; ++j) mean += A.at(i, j);
    mean /= A.cols;
    double var = 0.0;
    for (int j = 0; j < A.cols; ++j) {
      double d = A.at(i, j) - mean;
      var += d * d;
    }
    var /= A.cols;
    double is = 1.0 / std::sqrt(var + kLnEps);
    for (int j = 0; j < A.cols; ++j) {
      C.at(i, j) = g.at(0, j) * ((A.at(i, j) - mean) * is) + b.at(0, j);
    }
  }
  return C;
}

void gelu_inplace(Matrix& A) {
  for (double& x : A.data) x = 0.5 * x * (1.0 + std::erf(x * kInvSqrt2));
}

// Multi-head attention matching the training path: q from q_src, k/v from
// kv_src, optional boolean mask (q rows x kv rows), zero weight outside it.
Matrix attention(const Matrix& q_src, const Matrix& kv_src,
                 const std::vector<std::uint8_t>* allow, const StackParams::Layer& l, bool cross,
                 int heads) {
  const Matrix& wq = cross ? l.cwq.value : l.wq.value;
  const Matrix& bq = cross ? l.cbq.value : l.bq.value;
  const Matrix& wk = cross ? l.cwk.value : l.wk.value;
  const Matrix& bk = cross ? l.cbk.value : l.bk.value;
  const Matrix& wv = cross ? l.cwv.value : l.wv.value;
  const Matrix& bv = cross ? l.cbv.value : l.bv.value;
  const Matrix& wo = cross ? l.cwo.value : l.wo.value;
  const Matrix& bo = cross ? l.cbo.value : l.bo.value;

  Matrix q = matmul(q_src, wq);
  add_row_inplace(q, bq);
  Matrix k = matmul(kv_src, wk);
  add_row_inplace(k, bk);
  Matrix v = matmul(kv_src, wv);
  add_row_inplace(v, bv);

  const int d = q.cols;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));
  Matrix merged(q.rows, d);
  for (int h = 0; h < heads; ++h) {
    const int c0 = h * dh;
    for (int i = 0; i < q.rows; ++i) {
      // scores over kv rows
      std::vector<double> scores(k.rows, 0.0);
      for (int j = 0; j < k.rows; ++j) {
        double s = 0.0;
        for (int t = 0; t < dh; ++t) s += q.at(i, c0 + t) * k.at(j, c0 + t);
        scores[j] = s * scale;
      }
      double mx = -1e300;
      bool any = false;
      for (int j = 0; j < k.rows; ++j) {
        if (allow && !(*allow)[static_cast<std::size_t>(i) * k.rows + j]) continue;
        mx = std::max(mx, scores[j]);
        any = true;
      }
      if (!any) continue;
      double z = 0.0;
      std::vector<double> p(k.rows, 0.0);
      for (int j = 0; j < k.rows; ++j) {
        if (allow && !(*allow)[static_cast<std::size_t>(i) * k.rows + j]) continue;
        p[j] = std::exp(scores[j] - mx);
        z += p[j];
      }
      for (int j = 0; j < k.rows; ++j) p[j] /= z;
      for (int t = 0; t < dh; ++t) {
        double acc = 0.0;
        for (int j = 0; j < k.rows; ++j) acc += p[j] * v.at(j, c0 + t);
        merged.at(i, c0 + t) = acc;
      }
    }
  }
  Matrix out = matmul(merged, wo);
  add_row_inplace(out, bo);
  return out;
}

Matrix embed(const StackParams& s, const std::vector<int>& ids, const std::vector<int>& pos) {
  Matrix x(static_cast<int>(ids.size()), s.tok_emb.value.cols);
  for (int i = 0; i < x.rows; ++i) {
    for (int j = 0; j < x.cols; ++j) {
      x.at(i, j) = s.tok_emb.value.at(ids[i], j) + s.pos_emb.value.at(pos[i], j);
    }
  }
  return x;
}

Matrix stack_forward(const StackParams& s, const model::BlockConfig& bc, Matrix x,
                     const codec::MaskSpec* self_mask, const Matrix* memory) {
  for (const auto& l : s.layers) {
    Matrix h = layer_norm(x, l.ln1_g.value, l.ln1_b.value);
    const std::vector<std::uint8_t>* allow = self_mask ? &self_mask->bits : nullptr;
    Matrix attn = attention(h, h, allow, l, false, bc.heads);
    add_inplace(x, attn);
    if (l.has_cross && memory) {
      Matrix hc = layer_norm(x, l.lnc_g.value, l.lnc_b.value);
      Matrix cattn = attention(hc, *memory, nullptr, l, true, bc.heads);
      add_inplace(x, cattn);
    }
    Matrix h2 = layer_norm(x, l.ln2_g.value, l.ln2_b.value);
    Matrix ffn = matmul(h2, l.w1.value);
    add_row_inplace(ffn, l.b1.value);
    gelu_inplace(ffn);
    Matrix ffn2 = matmul(ffn, l.w2.value);
    add_row_inplace(ffn2, l.b2.value);
    add_inplace(x, ffn2);
  }
  return layer_norm(x, s.lnf_g.value, s.lnf_b.value);
}

Matrix concat_rows(const Matrix& a, const Matrix& b) {
  Matrix c(a.rows + b.rows, a.cols);
  std::copy(a.data.begin(), a.data.end(), c.data.begin());
  std::copy(b.data.begin(), b.data.end(), c.data.begin() + static_cast<std::ptrdiff_t>(a.data.size()));
  return c;
}

Matrix slice_rows(const Matrix& a, int r0, int r1) {
  Matrix c(r1 - r0, a.cols);
  std::copy(a.data.begin() + static_cast<std::ptrdiff_t>(r0) * a.cols,
            a.data.begin() + static_cast<std::ptrdiff_t>(r1) * a.cols, c.data.begin());
  return c;
}

}  // namespace

EncodedState encode_state(WorldModel& m, const data::StateSnapshot& prev,
                          const std::string& action) {
  EncodedState enc;
  model::EncoderInput tin = m.build_text_input(prev, action);
  model::EncoderInput gin = m.build_graph_input(prev.graph);
  enc.text = stack_forward(m.text_encoder(), m.config().text_encoder,
                           embed(m.text_encoder(), tin.ids, tin.pos), nullptr, nullptr);
  enc.graph = stack_forward(m.graph_encoder(), m.config().graph_encoder,
                            embed(m.graph_encoder(), gin.ids, gin.pos), nullptr, nullptr);
  const int cap = m.config().aggregator.max_len;
  Matrix agg_in;
  if (enc.text.rows >= cap) {
    agg_in = slice_rows(enc.text, 0, cap);
  } else if (enc.text.rows + enc.graph.rows > cap) {
    agg_in = concat_rows(enc.text, slice_rows(enc.graph, 0, cap - enc.text.rows));
  } else {
    agg_in = concat_rows(enc.text, enc.graph);
  }
  enc.state = stack_forward(m.aggregator(), m.config().aggregator, std::move(agg_in), nullptr,
                            nullptr);
  return enc;
}

nn::Matrix decoder_logits(WorldModel& m, WorldModel::DecoderKind kind, const EncodedState& enc,
                          const RowPlan& plan) {
  StackParams& dec =
      kind == WorldModel::DecoderKind::Graph ? m.graph_decoder() : m.action_decoder();
  const model::BlockConfig& bc = kind == WorldModel::DecoderKind::Graph
                                     ? m.config().graph_decoder
                                     : m.config().action_decoder;
  const Matrix& side = kind == WorldModel::DecoderKind::Graph ? enc.graph : enc.text;
  Matrix memory = concat_rows(enc.state, side);
  Matrix rows = stack_forward(dec, bc, embed(dec, plan.input_ids, plan.pos_idx), &plan.mask,
                              &memory);
  Matrix logits = matmul(rows, dec.out_w.value);
  add_row_inplace(logits, dec.out_b.value);
  return logits;
}

// ---------------------------------------------------------------------------
// incremental decoding
// ---------------------------------------------------------------------------

namespace {

struct DecoderCache {
  std::vector<Matrix> cross_k;  // per layer: memory rows x d
  std::vector<Matrix> cross_v;
};

/// Self-attention keys/values of the rows decoded so far (the open element in
/// set mode; the whole sequence in seq mode).
struct StepState {
  std::vector<Matrix> k;  // per layer: rows x d
  std::vector<Matrix> v;
};

std::vector<double> log_softmax_row(const Matrix& logits) {
  std::vector<double> out(logits.cols);
  double mx = -1e300;
  for (int j = 0; j < logits.cols; ++j) mx = std::max(mx, logits.at(0, j));
  double z = 0.0;
  for (int j = 0; j < logits.cols; ++j) z += std::exp(logits.at(0, j) - mx);
  double lz = mx + std::log(z);
  for (int j = 0; j < logits.cols; ++j) out[j] = logits.at(0, j) - lz;
  return out;
}

void append_row(Matrix& m, const Matrix& row) {
  if (m.rows == 0) {
    m = row;
    return;
  }
  m.data.insert(m.data.end(), row.data.begin(), row.data.end());
  ++m.rows;
}

/// Decodes one row: appends its keys/values to the local state and returns
/// logits. Self-attention covers the optional pooled rows (completed
/// elements) followed by the local rows.
Matrix decoder_step(WorldModel& m, WorldModel::DecoderKind kind, const DecoderCache& cache,
                    StepState& st, int input_id, int pos_idx,
                    const StepState* pool = nullptr) {
  StackParams& dec =
      kind == WorldModel::DecoderKind::Graph ? m.graph_decoder() : m.action_decoder();
  const model::BlockConfig& bc = kind == WorldModel::DecoderKind::Graph
                                     ? m.config().graph_decoder
                                     : m.config().action_decoder;
  const int d = m.config().d;
  const int heads = bc.heads;
  const int dh = d / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  if (st.k.empty()) {
    st.k.assign(dec.layers.size(), Matrix());
    st.v.assign(dec.layers.size(), Matrix());
  }

  Matrix x(1, d);
  for (int j = 0; j < d; ++j) {
    x.at(0, j) = dec.tok_emb.value.at(input_id, j) + dec.pos_emb.value.at(pos_idx, j);
  }

  for (std::size_t li = 0; li < dec.layers.size(); ++li) {
    const auto& l = dec.layers[li];
    Matrix h = layer_norm(x, l.ln1_g.value, l.ln1_b.value);
    Matrix q = matmul(h, l.wq.value);
    add_row_inplace(q, l.bq.value);
    Matrix krow = matmul(h, l.wk.value);
    add_row_inplace(krow, l.bk.value);
    Matrix vrow = matmul(h, l.wv.value);
    add_row_inplace(vrow, l.bv.value);
    append_row(st.k[li], krow);
    append_row(st.v[li], vrow);

    const Matrix* pk = pool && !pool->k.empty() ? &pool->k[li] : nullptr;
    const Matrix* pv = pool && !pool->v.empty() ? &pool->v[li] : nullptr;
    const int pool_rows = pk ? pk->rows : 0;
    const Matrix& K = st.k[li];
    const Matrix& V = st.v[li];
    const int total_rows = pool_rows + K.rows;
    Matrix merged(1, d);
    for (int h2 = 0; h2 < heads; ++h2) {
      const int c0 = h2 * dh;
      std::vector<double> scores(total_rows);
      double mx = -1e300;
      for (int j = 0; j < total_rows; ++j) {
        const Matrix& src_k = j < pool_rows ? *pk : K;
        int r = j < pool_rows ? j : j - pool_rows;
        double s = 0.0;
        for (int t = 0; t < dh; ++t) s += q.at(0, c0 + t) * src_k.at(r, c0 + t);
        scores[j] = s * scale;
        mx = std::max(mx, scores[j]);
      }
      double z = 0.0;
      for (int j = 0; j < total_rows; ++j) {
        scores[j] = std::exp(scores[j] - mx);
        z += scores[j];
      }
      for (int t = 0; t < dh; ++t) {
        double acc = 0.0;
        for (int j = 0; j < total_rows; ++j) {
          const Matrix& src_v = j < pool_rows ? *pv : V;
          int r = j < pool_rows ? j : j - pool_rows;
          acc += (scores[j] / z) * src_v.at(r, c0 + t);
        }
        merged.at(0, c0 + t) = acc;
      }
    }
    Matrix attn = matmul(merged, l.wo.value);
    add_row_inplace(attn, l.bo.value);
    add_inplace(x, attn);

    // cross-attention over the cached memory projections
    Matrix hc = layer_norm(x, l.lnc_g.value, l.lnc_b.value);
    Matrix qc = matmul(hc, l.cwq.value);
    add_row_inplace(qc, l.cbq.value);
    const Matrix& Kc = cache.cross_k[li];
    const Matrix& Vc = cache.cross_v[li];
    Matrix cmerged(1, d);
    for (int h2 = 0; h2 < heads; ++h2) {
      const int c0 = h2 * dh;
      std::vector<double> scores(Kc.rows);
      double mx = -1e300;
      for (int j = 0; j < Kc.rows; ++j) {
        double s = 0.0;
        for (int t = 0; t < dh; ++t) s += qc.at(0, c0 + t) * Kc.at(j, c0 + t);
        scores[j] = s * scale;
        mx = std::max(mx, scores[j]);
      }
      double z = 0.0;
      for (int j = 0; j < Kc.rows; ++j) {
        scores[j] = std::exp(scores[j] - mx);
        z += scores[j];
      }
      for (int t = 0; t < dh; ++t) {
        double acc = 0.0;
        for (int j = 0; j < Kc.rows; ++j) acc += (scores[j] / z) * Vc.at(j, c0 + t);
        cmerged.at(0, c0 + t) = acc;
      }
    }
    Matrix cattn = matmul(cmerged, l.cwo.value);
    add_row_inplace(cattn, l.cbo.value);
    add_inplace(x, cattn);

    Matrix h3 = layer_norm(x, l.ln2_g.value, l.ln2_b.value);
    Matrix ffn = matmul(h3, l.w1.value);
    add_row_inplace(ffn, l.b1.value);
    gelu_inplace(ffn);
    Matrix ffn2 = matmul(ffn, l.w2.value);
    add_row_inplace(ffn2, l.b2.value);
    add_inplace(x, ffn2);
  }
  x = layer_norm(x, dec.lnf_g.value, dec.lnf_b.value);
  Matrix logits = matmul(x, dec.out_w.value);
  add_row_inplace(logits, dec.out_b.value);
  return logits;
}

DecoderCache make_cache(WorldModel& m, WorldModel::DecoderKind kind, const EncodedState& enc) {
  StackParams& dec =
      kind == WorldModel::DecoderKind::Graph ? m.graph_decoder() : m.action_decoder();
  const Matrix& side = kind == WorldModel::DecoderKind::Graph ? enc.graph : enc.text;
  Matrix memory = concat_rows(enc.state, side);
  DecoderCache cache;
  for (const auto& l : dec.layers) {
    Matrix kc = matmul(memory, l.cwk.value);
    add_row_inplace(kc, l.cbk.value);
    Matrix vc = matmul(memory, l.cwv.value);
    add_row_inplace(vc, l.cbv.value);
    cache.cross_k.push_back(std::move(kc));
    cache.cross_v.push_back(std::move(vc));
  }
  return cache;
}

// boundary logits: a fresh row at the count position, attending the pooled
// rows of every completed element (order-free) plus itself
std::vector<double> boundary_lsm(WorldModel& m, WorldModel::DecoderKind kind,
                                 const DecoderCache& cache, const StepState& pool,
                                 int elements_done) {
  StepState tmp;
  Matrix logits = decoder_step(m, kind, cache, tmp, codec::kBos,
                               model::boundary_pos_index(elements_done), &pool);
  return log_softmax_row(logits);
}

struct Hyp {
  std::vector<int> serial;
  double score = 0.0;  // raw accumulated log-probability
  StepState st;        // rows of the open element (set mode) or everything (seq)
  StepState pool;      // rows of completed elements (set mode)
  std::set<std::vector<int>> completed;  // elements already in the set
  std::vector<int> open_tokens;          // tokens of the open element
  int cur_len = -1;  // tokens in the open element; -1 = at a boundary (set mode)
  int elements = 0;
  int decisions = 0;
  bool truncated = false;
};

void merge_into_pool(StepState& pool, const StepState& element) {
  if (element.k.empty()) return;
  if (pool.k.empty()) {
    pool = element;
    return;
  }
  for (std::size_t li = 0; li < pool.k.size(); ++li) {
    pool.k[li].data.insert(pool.k[li].data.end(), element.k[li].data.begin(),
                           element.k[li].data.end());
    pool.k[li].rows += element.k[li].rows;
    pool.v[li].data.insert(pool.v[li].data.end(), element.v[li].data.begin(),
                           element.v[li].data.end());
    pool.v[li].rows += element.v[li].rows;
  }
}

struct Candidate {
  int parent = 0;
  int token = -1;       // -1: boundary stop; -2: boundary open
  double score = 0.0;
  bool closes = false;  // token == <sep> in an element row
};

}  // namespace

GenResult generate(WorldModel& m, WorldModel::DecoderKind kind, const EncodedState& enc,
                   int beam_width) {
  if (beam_width < 1) beam_width = 1;
  const ModelConfig& cfg = m.config();
  const codec::Vocabulary& vocab =
      kind == WorldModel::DecoderKind::Graph ? m.graph_vocab() : m.action_vocab();
  DecoderCache cache = make_cache(m, kind, enc);
  const bool sos = cfg.loss_mode == model::LossMode::Sos;

  const int dec_max_len = kind == WorldModel::DecoderKind::Graph ? cfg.graph_decoder.max_len
                                                                 : cfg.action_decoder.max_len;
  const int step_cap = sos ? cfg.max_elements * (cfg.max_element_tokens + 2) + 2 : dec_max_len;

  std::vector<Hyp> live(1);
  std::vector<Hypothesis> done;

  // hypotheses are ranked by mean log-probability per decision; the raw sum
  // systematically prefers the shortest (often empty) set otherwise
  auto finalize = [](std::vector<int> serial, double raw, int decisions, bool truncated) {
    Hypothesis fin;
    fin.serialization = std::move(serial);
    fin.log_prob = raw;
    fin.decisions = decisions;
    fin.score = raw / std::max(1, decisions);
    fin.truncated = truncated;
    return fin;
  };
  auto keep_best_done = [&]() {
    std::stable_sort(done.begin(), done.end(),
                     [](const Hypothesis& a, const Hypothesis& b) { return a.score > b.score; });
    if (static_cast<int>(done.size()) > beam_width) done.resize(beam_width);
  };

  for (int step = 0; step < step_cap && !live.empty(); ++step) {
    std::vector<Candidate> cands;
    std::vector<Matrix> row_logits(live.size());  // element/seq rows, lazily used
    std::vector<std::vector<double>> row_lsm(live.size());

    for (int hi = 0; hi < static_cast<int>(live.size()); ++hi) {
      Hyp& h = live[hi];
      std::size_t cands_before = cands.size();
      if (sos && h.cur_len < 0) {
        // boundary: stop the set or open another element
        std::vector<double> blsm = boundary_lsm(m, kind, cache, h.pool, h.elements);
        cands.push_back({hi, -1, h.score + blsm[codec::kEos], false});
        if (h.elements < cfg.max_elements) {
          cands.push_back({hi, -2, h.score + blsm[codec::kSep], false});
        }
        (void)cands_before;
        continue;
      }
      // element row (set mode) or next sequence row (seq mode)
      int input_id, pos_idx;
      if (sos) {
        input_id = h.cur_len == 0 ? codec::kBos : h.serial.back();
        pos_idx = 1 + h.cur_len;
      } else {
        input_id = h.serial.empty() ? codec::kBos : h.serial.back();
        pos_idx = static_cast<int>(h.serial.size());
      }
      row_logits[hi] = decoder_step(m, kind, cache, h.st, input_id, pos_idx);
      row_lsm[hi] = log_softmax_row(row_logits[hi]);
      const std::vector<double>& lsm = row_lsm[hi];

      if (sos) {
        bool forced_close = h.cur_len >= cfg.max_element_tokens;
        if (!forced_close) {
          for (int tok = codec::kNumReserved; tok < vocab.size(); ++tok) {
            cands.push_back({hi, tok, h.score + lsm[tok], false});
          }
        }
        // sets never repeat an element: a close that would duplicate one is
        // not a legal continuation
        if (h.cur_len >= 1 && !h.completed.count(h.open_tokens)) {
          cands.push_back({hi, codec::kSep, h.score + lsm[codec::kSep], true});
        }
        if (cands.size() == cands_before) {
          // dead end (a duplicate pinned at the element cap): finalize as-is
          std::vector<int> serial = h.serial;
          serial.push_back(codec::kEos);
          done.push_back(finalize(std::move(serial), h.score, h.decisions, true));
        }
      } else {
        for (int tok = codec::kNumReserved; tok < vocab.size(); ++tok) {
          cands.push_back({hi, tok, h.score + lsm[tok], false});
        }
        cands.push_back({hi, codec::kSep, h.score + lsm[codec::kSep], false});
        cands.push_back({hi, codec::kEos, h.score + lsm[codec::kEos], false});
      }
    }

    std::stable_sort(cands.begin(), cands.end(),
                     [](const Candidate& a, const Candidate& b) { return a.score > b.score; });
    if (static_cast<int>(cands.size()) > beam_width) cands.resize(beam_width);

    std::vector<Hyp> next;
    for (const Candidate& c : cands) {
      const Hyp& parent = live[c.parent];
      if (sos && c.token == -1) {  // set ends
        std::vector<int> serial = parent.serial;
        serial.push_back(codec::kEos);
        done.push_back(finalize(std::move(serial), c.score, parent.decisions + 1,
                                parent.truncated || parent.elements >= cfg.max_elements));
        continue;
      }
      Hyp child;
      child.serial = parent.serial;
      child.score = c.score;
      child.elements = parent.elements;
      child.decisions = parent.decisions + 1;
      child.truncated = parent.truncated;
      child.pool = parent.pool;
      child.completed = parent.completed;
      child.open_tokens = parent.open_tokens;
      if (sos && c.token == -2) {  // open a fresh element
        if (parent.elements > 0) child.serial.push_back(codec::kSep);
        child.cur_len = 0;
        child.st = StepState{};
        child.open_tokens.clear();
      } else if (sos && c.closes) {  // element complete: fold it into the pool
        child.cur_len = -1;
        child.elements = parent.elements + 1;
        merge_into_pool(child.pool, parent.st);
        child.st = StepState{};
        child.completed.insert(parent.open_tokens);
        child.open_tokens.clear();
        if (parent.cur_len >= cfg.max_element_tokens) child.truncated = true;
      } else if (!sos && c.token == codec::kEos) {
        std::vector<int> serial = parent.serial;
        serial.push_back(codec::kEos);
        done.push_back(finalize(std::move(serial), c.score, parent.decisions + 1,
                                parent.truncated));
        continue;
      } else {
        child.st = parent.st;  // includes the row appended by this step
        child.serial.push_back(c.token);
        if (sos) child.open_tokens.push_back(c.token);
        child.cur_len = sos ? parent.cur_len + 1 : -1;
      }
      next.push_back(std::move(child));
    }
    live = std::move(next);
    keep_best_done();
  }

  // anything still alive hit the step cap: finalize as truncated
  for (Hyp& h : live) {
    std::vector<int> serial = std::move(h.serial);
    serial.push_back(codec::kEos);
    done.push_back(finalize(std::move(serial), h.score, h.decisions, true));
  }
  keep_best_done();

  GenResult res;
  res.hypotheses = std::move(done);
  return res;
}

Hypothesis generate_greedy(WorldModel& m, WorldModel::DecoderKind kind, const EncodedState& enc) {
  const ModelConfig& cfg = m.config();
  const codec::Vocabulary& vocab =
      kind == WorldModel::DecoderKind::Graph ? m.graph_vocab() : m.action_vocab();
  DecoderCache cache = make_cache(m, kind, enc);
  const bool sos = cfg.loss_mode == model::LossMode::Sos;
  const int dec_max_len = kind == WorldModel::DecoderKind::Graph ? cfg.graph_decoder.max_len
                                                                 : cfg.action_decoder.max_len;
  const int step_cap = sos ? cfg.max_elements * (cfg.max_element_tokens + 2) + 2 : dec_max_len;

  Hypothesis out;
  StepState st;
  StepState pool;
  std::set<std::vector<int>> completed;
  std::vector<int> open_tokens;
  int cur_len = -1;
  int elements = 0;
  double score = 0.0;
  int decisions = 0;
  auto seal = [&](bool truncated) {
    out.log_prob = score;
    out.decisions = decisions;
    out.score = score / std::max(1, decisions);
    out.truncated = out.truncated || truncated;
  };

  for (int step = 0; step < step_cap; ++step) {
    if (sos && cur_len < 0) {
      std::vector<double> blsm = boundary_lsm(m, kind, cache, pool, elements);
      double stop_score = blsm[codec::kEos];
      bool can_open = elements < cfg.max_elements;
      double open_score = can_open ? blsm[codec::kSep] : -1e300;
      if (stop_score >= open_score) {
        score += stop_score;
        ++decisions;
        out.serialization.push_back(codec::kEos);
        seal(!can_open);
        return out;
      }
      score += open_score;
      ++decisions;
      if (elements > 0) out.serialization.push_back(codec::kSep);
      cur_len = 0;
      st = StepState{};
      continue;
    }
    int input_id, pos_idx;
    if (sos) {
      input_id = cur_len == 0 ? codec::kBos : out.serialization.back();
      pos_idx = 1 + cur_len;
    } else {
      input_id = out.serialization.empty() ? codec::kBos : out.serialization.back();
      pos_idx = static_cast<int>(out.serialization.size());
    }
    Matrix logits = decoder_step(m, kind, cache, st, input_id, pos_idx);
    std::vector<double> lsm = log_softmax_row(logits);

    int best = -1;
    double best_score = -1e301;
    auto consider = [&](int tok) {
      if (lsm[tok] > best_score) {
        best = tok;
        best_score = lsm[tok];
      }
    };
    bool forced_close = sos && cur_len >= cfg.max_element_tokens;
    if (sos) {
      if (!forced_close) {
        for (int tok = codec::kNumReserved; tok < vocab.size(); ++tok) consider(tok);
      }
      if (cur_len >= 1 && !completed.count(open_tokens)) consider(codec::kSep);
    } else {
      for (int tok = codec::kNumReserved; tok < vocab.size(); ++tok) consider(tok);
      consider(codec::kSep);
      consider(codec::kEos);
    }
    if (best < 0) {  // no legal continuation (duplicate at the element cap)
      out.serialization.push_back(codec::kEos);
      seal(true);
      return out;
    }
    score += lsm[best];
    ++decisions;
    if (sos && best == codec::kSep) {
      if (forced_close) out.truncated = true;
      cur_len = -1;
      ++elements;
      merge_into_pool(pool, st);
      completed.insert(open_tokens);
      open_tokens.clear();
      st = StepState{};
    } else if (!sos && best == codec::kEos) {
      out.serialization.push_back(codec::kEos);
      seal(false);
      return out;
    } else {
      out.serialization.push_back(best);
      if (sos) {
        ++cur_len;
        open_tokens.push_back(best);
      }
    }
  }
  out.serialization.push_back(codec::kEos);
  seal(true);
  return out;
}

}  // namespace worldkit::beam
