// Copyright 2026 The dlm Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//    http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#ifndef DLM_TRAINING_HPP
#define DLM_TRAINING_HPP

#include <cstdint>
#include <functional>
#include <map>
#include <span>
#include <string>
#include <vector>

#include "dlm/data.hpp"
#include "dlm/model.hpp"

namespace dlm {

// ---- losses -------------------------------------------------------------------
// Means over the batch of per-sequence summed token NLL.

Tensor loss_asr(Tape& tape, const Model& model, const LabelledBatch& batch);
Tensor loss_lm(Tape& tape, const Model& model, const TextBatch& batch);
// (1 - alpha) * loss_asr + alpha * loss_lm. At alpha = 0 or 1 the unused term
// is not evaluated, so the result is exactly the other loss.
Tensor loss_total(Tape& tape, const Model& model, const LabelledBatch& p_batch,
                  const TextBatch& t_batch, double alpha);

// (1 - alpha) * asr + alpha * lm; alpha 0 and 1 return the operand itself.
Tensor interpolate_losses(Tape& tape, const Tensor& asr, const Tensor& lm, double alpha);

void check_alpha(double alpha);

// Mean per-utterance NLL without building a graph.
double evaluate_asr(const Model& model, std::span<const Utterance> utterances);
double evaluate_lm(const Model& model, std::span<const std::vector<TokenId>> corpus);
// exp(total NLL / total predicted tokens).
double perplexity(const Model& model, std::span<const std::vector<TokenId>> corpus);

// ---- optimiser ----------------------------------------------------------------

struct AdaDeltaConfig {
  double rho = 0.95;
  double epsilon = 1e-6;
  double clip = 5.0;  // global L2 norm; <= 0 disables clipping
};

// Zeiler's AdaDelta over a subset of a parameter store, with global-norm
// gradient clipping applied to the same subset. Accumulators are kept in
// double precision.
class AdaDelta {
 public:
  // An empty `names` list manages every parameter.
  AdaDelta(ParamStore& params, AdaDeltaConfig config, std::vector<std::string> names = {});

  // Clips the managed gradients in place, then updates. Returns the global
  // norm measured before clipping. A non-finite norm is a divergence error.
  double step();

  const std::vector<std::string>& names() const { return names_; }
  std::span<const double> sq_grad(const std::string& name) const;
  std::span<const double> sq_update(const std::string& name) const;
  const AdaDeltaConfig& config() const { return config_; }

 private:
  ParamStore* params_;
  AdaDeltaConfig config_;
  std::vector<std::string> names_;
  std::map<std::string, std::vector<double>> eg2_;
  std::map<std::string, std::vector<double>> edx2_;
};

// Rescales grads so their joint L2 norm is at most `threshold`; returns the
// norm before rescaling.
double clip_global_norm(ParamStore& params, std::span<const std::string> names, double threshold);

// ---- epochs -------------------------------------------------------------------

struct EpochStats {
  double mean_loss = 0.0;
  std::size_t steps = 0;
  std::size_t text_batches = 0;
  std::size_t text_passes = 0;
};

// One step per batch: loss_asr, backward, optimiser step.
EpochStats asr_epoch(Model& model, std::span<const LabelledBatch> batches, AdaDelta& optimizer);
// One step per batch: loss_lm, backward, optimiser step.
EpochStats lm_epoch(Model& model, std::span<const TextBatch> batches, AdaDelta& optimizer);
// One step per labelled batch, each paired with the next text batch from the
// stream; one combined backward of loss_total per step.
EpochStats mixed_epoch(Model& model, std::span<const LabelledBatch> batches, TextStream& text,
                       double alpha, AdaDelta& optimizer);

// Shuffled text batches for one pass, deterministic in `seed`.
std::vector<TextBatch> shuffled_text_batches(std::span<const std::vector<TokenId>> corpus,
                                             std::size_t batch_size, std::uint64_t seed);

// ---- strategies ---------------------------------------------------------------

enum class Strategy { kNone, kOne, kTwo };

const char* to_string(Strategy s);
Strategy parse_strategy(const std::string& text);

struct TrainConfig {
  Strategy strategy = Strategy::kNone;
  double alpha = 0.7;
  std::size_t batch_size = 30;
  std::size_t text_batch_size = 150;
  // Per phase; a phase without an entry uses `epochs`.
  std::size_t epochs = 15;
  std::vector<std::size_t> phase_epochs;
  std::size_t patience = 3;
  std::size_t sort_window = 0;
  AdaDeltaConfig optimizer;
  std::uint64_t seed = 1;

  std::size_t epochs_for(std::size_t phase) const;  // phase is 1-based
  void validate() const;
};

struct TrainingData {
  std::span<const Utterance> train;
  std::span<const Utterance> valid;
  std::span<const std::vector<TokenId>> text;        // external text
  std::span<const std::vector<TokenId>> text_valid;  // held-out text
};

enum class PhaseKind { kAsr, kMixed, kLmSubnet };

struct MetricLine {
  std::size_t phase = 0;
  std::size_t epoch = 0;
  std::size_t step = 0;  // cumulative optimiser steps
  double loss = 0.0;     // mean training loss of the epoch
  double val = 0.0;
};

std::string format_metric_line(const MetricLine& line);

struct TrainResult {
  std::vector<MetricLine> log;
  std::vector<std::string> warnings;
  double best_val = 0.0;  // of the final phase
};

// Phase plan of a strategy: none = [asr]; 1 = [asr, mixed, asr];
// 2 = [lm-subnet, mixed].
std::vector<PhaseKind> strategy_phases(Strategy s);

// Runs every phase with early stopping on validation loss (ASR loss, or LM
// loss on held-out text for the LM-subnet phase). Each phase starts a fresh
// optimiser from the best parameters of the previous phase. `on_line` sees
// each metric line as it is produced.
TrainResult run_strategy(Model& model, const TrainConfig& config, const TrainingData& data,
                         const std::function<void(const MetricLine&)>& on_line = {});

// Runs an explicit phase list; run_strategy is this with strategy_phases().
TrainResult run_phases(Model& model, const TrainConfig& config, const TrainingData& data,
                       std::span<const PhaseKind> phases,
                       const std::function<void(const MetricLine&)>& on_line = {});

// Trains a standalone LM (or any model's LM subnet) on text with early
// stopping on held-out perplexity. Epoch = one pass over the corpus.
TrainResult train_language_model(Model& model, const TrainConfig& config,
                                 std::span<const std::vector<TokenId>> text,
                                 std::span<const std::vector<TokenId>> text_valid,
                                 const std::function<void(const MetricLine&)>& on_line = {});

// Names of theta_d in a model.
std::vector<std::string> lm_subnet_names(const Model& model);

}  // namespace dlm

#endif  // DLM_TRAINING_HPP
