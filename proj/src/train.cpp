// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#include "worldkit/train.hpp"

#include <chrono>
#include <cmath>
#include <fstream>
#include <iostream>

#include "json.hpp"

namespace worldkit::train {

using model::LossBreakdown;
using model::WorldModel;
using nn::Matrix;
using nn::Param;
using nn::Tape;
using nn::Value;

Adam::Adam(std::vector<Param*> params, AdamConfig cfg) : params_(std::move(params)), cfg_(cfg) {
  m_.reserve(params_.size());
  v_.reserve(params_.size());
  for (Param* p : params_) {
    m_.emplace_back(p->value.rows, p->value.cols);
    v_.emplace_back(p->value.rows, p->value.cols);
  }
}

void Adam::step() {
  ++t_;
  double bc1 = 1.0 - std::pow(cfg_.beta1, static_cast<double>(t_));
  double bc2 = 1.0 - std::pow(cfg_.beta2, static_cast<double>(t_));
  for (std::size_t i = 0; i < params_.size(); ++i) {
    Param* p = params_[i];
    for (std::size_t j = 0; j < p->value.data.size(); ++j) {
      double g = p->grad.data[j];
      double& m = m_[i].data[j];
      double& v = v_[i].data[j];
      m = cfg_.beta1 * m + (1.0 - cfg_.beta1) * g;
      v = cfg_.beta2 * v + (1.0 - cfg_.beta2) * g * g;
      double mhat = m / bc1;
      double vhat = v / bc2;
      p->value.data[j] -= cfg_.lr * mhat / (std::sqrt(vhat) + cfg_.eps);
    }
  }
}

double clip_global_norm(const std::vector<Param*>& params, double max_norm) {
  double sq = 0.0;
  for (Param* p : params) {
    for (double g : p->grad.data) sq += g * g;
  }
  double norm = std::sqrt(sq);
  if (max_norm > 0.0 && norm > max_norm) {
    double s = max_norm / norm;
    for (Param* p : params) {
      for (double& g : p->grad.data) g *= s;
    }
  }
  return norm;
}

StepResult train_step(WorldModel& model, Adam& opt,
                      const std::vector<const data::StateSample*>& batch, nn::Rng& rng,
                      bool augment) {
  model.zero_grads();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  WorldModel::Dropout drop;
  drop.rate = model.config().dropout;
  drop.rng = drop.rate > 0.0 ? &rng : nullptr;

  LossBreakdown sum;
  for (const data::StateSample* sample : batch) {
    Tape tape;
    Value loss;
    std::optional<std::uint64_t> aug;
    if (augment) aug = rng.next_u64();
    LossBreakdown b = model.sample_loss(tape, *sample, drop, aug, &loss);
    if (!std::isfinite(b.total)) throw NumericError("non-finite training loss");
    sum.graph += b.graph;
    sum.action += b.action;
    sum.total += b.total;
    Value scaled = tape.scale(loss, inv_batch);
    tape.backward(scaled);
  }
  if (!model.grads_finite()) throw NumericError("non-finite gradients");

  StepResult res;
  res.grad_norm = clip_global_norm(opt.params(), model.config().grad_clip);
  opt.step();
  res.loss.graph = sum.graph * inv_batch;
  res.loss.action = sum.action * inv_batch;
  res.loss.total = sum.total * inv_batch;
  return res;
}

PretrainResult pretrain_step(WorldModel& model, Adam& opt, PretrainScheme scheme,
                             const std::vector<const data::StateSample*>& batch, nn::Rng& rng) {
  model.zero_grads();
  const double inv_batch = 1.0 / static_cast<double>(batch.size());
  const double rate = model.config().mlm_rate;
  WorldModel::Dropout drop;
  drop.rate = model.config().dropout;
  drop.rng = drop.rate > 0.0 ? &rng : nullptr;

  PretrainResult res;
  long correct = 0;
  for (const data::StateSample* sample : batch) {
    Tape tape;
    Value rows;
    std::vector<int> positions;
    std::vector<int> targets;

    if (scheme == PretrainScheme::TextMlm) {
      model::EncoderInput in = model.build_text_input(sample->prev, sample->action);
      codec::MlmExample ex = codec::mlm_mask(in.ids, rate, codec::MlmScheme::Token,
                                             codec::SegmentLayout{}, rng.next_u64());
      if (ex.positions.empty()) continue;
      model::EncoderInput masked = in;
      masked.ids = ex.input_ids;
      rows = model.encode_text(tape, masked, drop);
      positions = ex.positions;
      targets = ex.targets;
    } else {
      codec::SetSerialization ser =
          codec::encode_graph_set(sample->prev.graph, model.graph_vocab());
      ser = model::truncate_serialization(ser, model.config().graph_encoder.max_len);
      if (ser.layout.elements() == 0) continue;
      codec::MlmExample ex =
          codec::mlm_mask(ser.token_ids, rate, codec::MlmScheme::Phrase, ser.layout, rng.next_u64());
      if (ex.positions.empty()) continue;
      model::EncoderInput in;
      in.ids.push_back(codec::kBos);
      in.pos.push_back(0);
      for (int p = 0; p < static_cast<int>(ex.input_ids.size()); ++p) {
        in.ids.push_back(ex.input_ids[p]);
        in.pos.push_back(ser.layout.offset_of[p] >= 0 ? 1 + ser.layout.offset_of[p] : 0);
      }
      rows = model.encode_graph(tape, in, drop);
      for (int p : ex.positions) positions.push_back(p + 1);  // shifted behind <bos>
      targets = ex.targets;
    }

    model::StackParams& enc =
        scheme == PretrainScheme::TextMlm ? model.text_encoder() : model.graph_encoder();
    Value logits = tape.add_row(tape.matmul(rows, tape.param(enc.out_w)), tape.param(enc.out_b));

    std::vector<nn::Supervision> sup;
    for (std::size_t i = 0; i < positions.size(); ++i) {
      sup.push_back({positions[i], targets[i], 1.0});
    }
    Value loss = tape.cross_entropy(logits, sup, nn::Reduction::Mean);
    double l = tape.value(loss).at(0, 0);
    if (!std::isfinite(l)) throw NumericError("non-finite pretraining loss");
    res.loss += l;

    const Matrix& lg = tape.value(logits);
    for (std::size_t i = 0; i < positions.size(); ++i) {
      int best = 0;
      for (int j = 1; j < lg.cols; ++j) {
        if (lg.at(positions[i], j) > lg.at(positions[i], best)) best = j;
      }
      if (best == targets[i]) ++correct;
      ++res.masked_positions;
    }
    tape.backward(tape.scale(loss, inv_batch));
  }
  if (!model.grads_finite()) throw NumericError("non-finite pretraining gradients");
  clip_global_norm(opt.params(), model.config().grad_clip);
  opt.step();
  res.loss *= inv_batch;
  res.masked_accuracy =
      res.masked_positions > 0 ? static_cast<double>(correct) / res.masked_positions : 0.0;
  return res;
}

double validation_loss(WorldModel& model, const std::vector<data::StateSample>& val) {
  if (val.empty()) return 0.0;
  WorldModel::Dropout off;
  double sum = 0.0;
  for (const auto& sample : val) {
    Tape tape;
    LossBreakdown b = model.sample_loss(tape, sample, off, std::nullopt, nullptr);
    sum += b.total;
  }
  return sum / static_cast<double>(val.size());
}

TrainSummary fit(WorldModel& model, const std::vector<data::StateSample>& train_set,
                 const std::vector<data::StateSample>& val_set, const TrainOptions& opts) {
  if (train_set.empty()) throw std::invalid_argument("empty training set");
  Adam opt(model.parameters(), AdamConfig{model.config().learning_rate, 0.9, 0.999, 1e-8});
  nn::Rng rng(model.config().seed ^ 0x5eed5eedull);

  std::ofstream log;
  if (!opts.log_path.empty()) {
    log.open(opts.log_path);
    if (!log) throw std::runtime_error("cannot write training log: " + opts.log_path);
    log << nlohmann::json{{"format_version", 1}, {"kind", "training-log"}}.dump() << "\n";
  }

  TrainSummary summary;
  summary.best_val_loss = 1e300;
  int epochs_since_best = 0;
  auto started = std::chrono::steady_clock::now();
  bool stop = false;

  std::vector<int> order(train_set.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = static_cast<int>(i);

  for (int epoch = 0; epoch < opts.max_epochs && !stop; ++epoch) {
    rng.shuffle(order);
    const int bs = model.config().batch_size;
    for (std::size_t off = 0; off < order.size() && !stop; off += bs) {
      std::vector<const data::StateSample*> batch;
      for (std::size_t i = off; i < std::min(order.size(), off + bs); ++i) {
        batch.push_back(&train_set[order[i]]);
      }
      StepResult step = train_step(model, opt, batch, rng, opts.augment);
      ++summary.steps;
      summary.step_losses.push_back(step.loss.total);

      if (log.is_open()) {
        double wall_ms = std::chrono::duration<double, std::milli>(
                             std::chrono::steady_clock::now() - started)
                             .count();
        log << nlohmann::json{{"step", summary.steps},
                              {"graph_loss", step.loss.graph},
                              {"action_loss", step.loss.action},
                              {"total", step.loss.total},
                              {"wall_ms", wall_ms}}
                   .dump()
            << "\n";
      }
      if (opts.max_steps > 0 && summary.steps >= opts.max_steps) stop = true;
      if (opts.max_seconds > 0.0) {
        double elapsed =
            std::chrono::duration<double>(std::chrono::steady_clock::now() - started).count();
        if (elapsed >= opts.max_seconds) stop = true;
      }
    }
    summary.epochs = epoch + 1;

    double val = val_set.empty() ? summary.step_losses.back() : validation_loss(model, val_set);
    if (opts.verbose) {
      std::cerr << "epoch " << summary.epochs << " steps " << summary.steps << " val " << val
                << "\n";
    }
    if (val < summary.best_val_loss - 1e-12) {
      summary.best_val_loss = val;
      epochs_since_best = 0;
      if (!opts.checkpoint_path.empty()) model.save(opts.checkpoint_path);
    } else {
      ++epochs_since_best;
      if (epochs_since_best >= opts.patience) {
        summary.early_stopped = true;
        break;
      }
    }
  }
  if (!opts.checkpoint_path.empty() && summary.best_val_loss == 1e300) {
    model.save(opts.checkpoint_path);
  }
  return summary;
}

}  // namespace worldkit::train
