// Copyright (c) 2026 The worldkit authors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <stdexcept>
#include <string>
#include <vector>

#include "worldkit/model.hpp"

namespace worldkit::train {

/// Raised when a loss or gradient stops being finite.
class NumericError : public std::runtime_error {
 public:
  explicit NumericError(const std::string& what) : std::runtime_error(what) {}
};

struct AdamConfig {
  double lr = 3e-4;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double eps = 1e-8;
};

/// Plain Adam over an explicit parameter list; no schedule, no weight decay.
class Adam {
 public:
  Adam(std::vector<nn::Param*> params, AdamConfig cfg);
  void step();
  const std::vector<nn::Param*>& params() const { return params_; }

 private:
  std::vector<nn::Param*> params_;
  AdamConfig cfg_;
  std::vector<nn::Matrix> m_;
  std::vector<nn::Matrix> v_;
  std::int64_t t_ = 0;
};

/// Scales gradients so their global l2 norm is at most max_norm; returns the
/// pre-clip norm.
double clip_global_norm(const std::vector<nn::Param*>& params, double max_norm);

struct StepResult {
  model::LossBreakdown loss;  // batch means
  double grad_norm = 0.0;
};

/// One optimizer step over a batch: accumulate gradients sample by sample,
/// clip, update. Throws NumericError on non-finite loss or gradients.
StepResult train_step(model::WorldModel& model, Adam& opt,
                      const std::vector<const data::StateSample*>& batch, nn::Rng& rng,
                      bool augment);

enum class PretrainScheme { TextMlm, GraphMlm };

struct PretrainResult {
  double loss = 0.0;
  double masked_accuracy = 0.0;
  int masked_positions = 0;
};

/// One masked-language-model step on the chosen encoder. The optimizer must
/// cover only that encoder's parameters.
PretrainResult pretrain_step(model::WorldModel& model, Adam& opt, PretrainScheme scheme,
                             const std::vector<const data::StateSample*>& batch, nn::Rng& rng);

/// Mean per-sample validation loss (dropout off, no augmentation).
double validation_loss(model::WorldModel& model, const std::vector<data::StateSample>& val);

struct TrainOptions {
  int max_epochs = 100;
  int patience = 5;          // epochs without validation improvement
  std::int64_t max_steps = 0;  // 0 = no cap
  double max_seconds = 0.0;    // 0 = no cap
  bool augment = true;
  std::string log_path;          // newline-delimited records, empty = no log
  std::string checkpoint_path;   // best model, empty = no checkpoint
  int checkpoint_every_epochs = 1;
  bool verbose = false;
};

struct TrainSummary {
  std::int64_t steps = 0;
  int epochs = 0;
  double best_val_loss = 0.0;
  bool early_stopped = false;
  std::vector<double> step_losses;  // total loss per optimizer step
};

/// Epoch loop with seeded shuffling and early stopping on validation loss.
TrainSummary fit(model::WorldModel& model, const std::vector<data::StateSample>& train_set,
                 const std::vector<data::StateSample>& val_set, const TrainOptions& opts);

}  // namespace worldkit::train
