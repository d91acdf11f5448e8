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

#include "dlm/training.hpp"

#include <cmath>
#include <cstdio>
#include <limits>

#include "dlm/error.hpp"

namespace dlm {

// ---- losses -------------------------------------------------------------------

namespace {

Tensor batch_mean(Tape& tape, const std::vector<Tensor>& losses) {
  Tensor total = losses.front();
  for (std::size_t i = 1; i < losses.size(); ++i) total = add(tape, total, losses[i]);
  if (losses.size() == 1) return total;
  return scale(tape, total, 1.0f / static_cast<float>(losses.size()));
}

void require_finite(double loss, const char* what) {
  if (!std::isfinite(loss)) fail(ErrorKind::kDivergence, std::string(what) + ": loss is not finite");
}

}  // namespace

void check_alpha(double alpha) {
  if (!(alpha >= 0.0 && alpha <= 1.0)) {
    fail(ErrorKind::kConfig, "alpha must be in [0, 1], got " + std::to_string(alpha));
  }
}

Tensor loss_asr(Tape& tape, const Model& model, const LabelledBatch& batch) {
  if (batch.size() == 0) fail(ErrorKind::kContract, "loss_asr: empty batch");
  std::vector<Tensor> losses;
  losses.reserve(batch.size());
  for (std::size_t i = 0; i < batch.size(); ++i) {
    losses.push_back(model.forward_asr(tape, batch.features[i], batch.targets[i], batch.frames[i]).loss);
  }
  return batch_mean(tape, losses);
}

Tensor loss_lm(Tape& tape, const Model& model, const TextBatch& batch) {
  if (batch.size() == 0) fail(ErrorKind::kContract, "loss_lm: empty batch");
  std::vector<Tensor> losses;
  losses.reserve(batch.size());
  for (const auto& seq : batch.sequences) losses.push_back(model.forward_lm(tape, seq).loss);
  return batch_mean(tape, losses);
}

Tensor loss_total(Tape& tape, const Model& model, const LabelledBatch& p_batch, const TextBatch& t_batch,
                  double alpha) {
  check_alpha(alpha);
  if (alpha == 0.0) return loss_asr(tape, model, p_batch);
  if (alpha == 1.0) return loss_lm(tape, model, t_batch);
  return interpolate_losses(tape, loss_asr(tape, model, p_batch), loss_lm(tape, model, t_batch), alpha);
}

Tensor interpolate_losses(Tape& tape, const Tensor& asr, const Tensor& lm, double alpha) {
  check_alpha(alpha);
  if (alpha == 0.0) return asr;
  if (alpha == 1.0) return lm;
  return add(tape, scale(tape, asr, static_cast<float>(1.0 - alpha)), scale(tape, lm, static_cast<float>(alpha)));
}

double evaluate_asr(const Model& model, std::span<const Utterance> utterances) {
  if (utterances.empty()) fail(ErrorKind::kContract, "evaluate_asr: no utterances");
  double total = 0.0;
  for (const auto& u : utterances) {
    Tape tape(false);
    total += model.forward_asr(tape, u.features, u.tokens).loss.item();
  }
  return total / static_cast<double>(utterances.size());
}

double evaluate_lm(const Model& model, std::span<const std::vector<TokenId>> corpus) {
  if (corpus.empty()) fail(ErrorKind::kContract, "evaluate_lm: empty corpus");
  double total = 0.0;
  for (const auto& seq : corpus) {
    Tape tape(false);
    total += model.forward_lm(tape, seq).loss.item();
  }
  return total / static_cast<double>(corpus.size());
}

double perplexity(const Model& model, std::span<const std::vector<TokenId>> corpus) {
  if (corpus.empty()) fail(ErrorKind::kContract, "perplexity: empty corpus");
  double total = 0.0;
  std::size_t tokens = 0;
  for (const auto& seq : corpus) {
    Tape tape(false);
    total += model.forward_lm(tape, seq).loss.item();
    tokens += seq.size();
  }
  return std::exp(total / static_cast<double>(tokens));
}

// ---- optimiser ----------------------------------------------------------------

double clip_global_norm(ParamStore& params, std::span<const std::string> names, double threshold) {
  double sq = 0.0;
  for (const auto& n : names) {
    for (float g : params.get(n).grad()) sq += static_cast<double>(g) * g;
  }
  const double norm = std::sqrt(sq);
  if (!std::isfinite(norm)) fail(ErrorKind::kDivergence, "gradient norm is not finite");
  if (threshold > 0.0 && norm > threshold) {
    const double factor = threshold / norm;
    for (const auto& n : names) {
      for (float& g : params.get(n).mutable_grad()) g = static_cast<float>(g * factor);
    }
  }
  return norm;
}

AdaDelta::AdaDelta(ParamStore& params, AdaDeltaConfig config, std::vector<std::string> names)
    : params_(&params), config_(config), names_(std::move(names)) {
  if (!(config_.rho > 0.0 && config_.rho < 1.0)) fail(ErrorKind::kConfig, "adadelta rho must be in (0, 1)");
  if (!(config_.epsilon > 0.0)) fail(ErrorKind::kConfig, "adadelta epsilon must be > 0");
  if (names_.empty()) names_ = params.names();
  for (const auto& n : names_) {
    const Tensor& t = params.get(n);
    if (!t.requires_grad()) fail(ErrorKind::kContract, "adadelta: parameter " + n + " has no gradient");
    eg2_[n].assign(t.numel(), 0.0);
    edx2_[n].assign(t.numel(), 0.0);
  }
}

double AdaDelta::step() {
  const double norm = clip_global_norm(*params_, names_, config_.clip);
  const double rho = config_.rho;
  const double eps = config_.epsilon;
  for (const auto& n : names_) {
    Tensor& t = params_->get(n);
    auto& eg2 = eg2_.at(n);
    auto& edx2 = edx2_.at(n);
    if (t.numel() != eg2.size() || t.grad().size() != eg2.size()) {
      fail(ErrorKind::kContract, "adadelta: shape of " + n + " changed");
    }
    auto x = t.mutable_data();
    auto g = t.grad();
    for (std::size_t i = 0; i < eg2.size(); ++i) {
      const double gi = g[i];
      eg2[i] = rho * eg2[i] + (1.0 - rho) * gi * gi;
      const double dx = -(std::sqrt(edx2[i] + eps) / std::sqrt(eg2[i] + eps)) * gi;
      edx2[i] = rho * edx2[i] + (1.0 - rho) * dx * dx;
      x[i] = static_cast<float>(x[i] + dx);
    }
  }
  return norm;
}

std::span<const double> AdaDelta::sq_grad(const std::string& name) const { return eg2_.at(name); }
std::span<const double> AdaDelta::sq_update(const std::string& name) const { return edx2_.at(name); }

// ---- epochs -------------------------------------------------------------------

namespace {

template <typename LossFn>
double optimise(Model& model, AdaDelta& optimizer, LossFn&& loss_fn) {
  model.params().zero_grad();
  Tape tape;
  Tensor loss = loss_fn(tape);
  const double value = loss.item();
  require_finite(value, "training");
  tape.backward(loss);
  optimizer.step();
  return value;
}

}  // namespace

EpochStats asr_epoch(Model& model, std::span<const LabelledBatch> batches, AdaDelta& optimizer) {
  if (batches.empty()) fail(ErrorKind::kConfig, "asr_epoch: no labelled batches");
  EpochStats stats;
  double total = 0.0;
  for (const auto& b : batches) {
    total += optimise(model, optimizer, [&](Tape& tape) { return loss_asr(tape, model, b); });
    ++stats.steps;
  }
  stats.mean_loss = total / static_cast<double>(stats.steps);
  return stats;
}

EpochStats lm_epoch(Model& model, std::span<const TextBatch> batches, AdaDelta& optimizer) {
  if (batches.empty()) fail(ErrorKind::kConfig, "lm_epoch: no text batches");
  EpochStats stats;
  double total = 0.0;
  for (const auto& b : batches) {
    total += optimise(model, optimizer, [&](Tape& tape) { return loss_lm(tape, model, b); });
    ++stats.steps;
  }
  stats.text_batches = stats.steps;
  stats.mean_loss = total / static_cast<double>(stats.steps);
  return stats;
}

EpochStats mixed_epoch(Model& model, std::span<const LabelledBatch> batches, TextStream& text, double alpha,
                       AdaDelta& optimizer) {
  check_alpha(alpha);
  if (batches.empty()) fail(ErrorKind::kConfig, "mixed_epoch: no labelled batches");
  EpochStats stats;
  const std::size_t served = text.batches_served();
  const std::size_t passes = text.passes_started();
  double total = 0.0;
  for (const auto& b : batches) {
    const TextBatch t = text.next();
    total += optimise(model, optimizer, [&](Tape& tape) { return loss_total(tape, model, b, t, alpha); });
    ++stats.steps;
  }
  stats.text_batches = text.batches_served() - served;
  stats.text_passes = text.passes_started() - passes;
  stats.mean_loss = total / static_cast<double>(stats.steps);
  return stats;
}

std::vector<TextBatch> shuffled_text_batches(std::span<const std::vector<TokenId>> corpus, std::size_t batch_size,
                                             std::uint64_t seed) {
  TextStream stream(corpus, batch_size, Rng(seed));
  std::vector<TextBatch> out;
  const std::size_t n = stream.batches_per_pass();
  out.reserve(n);
  for (std::size_t i = 0; i < n; ++i) out.push_back(stream.next());
  return out;
}

// ---- strategies ---------------------------------------------------------------

const char* to_string(Strategy s) {
  switch (s) {
    case Strategy::kNone:
      return "none";
    case Strategy::kOne:
      return "1";
    case Strategy::kTwo:
      return "2";
  }
  return "?";
}

Strategy parse_strategy(const std::string& text) {
  if (text == "none" || text == "0") return Strategy::kNone;
  if (text == "1") return Strategy::kOne;
  if (text == "2") return Strategy::kTwo;
  fail(ErrorKind::kConfig, "unknown strategy '" + text + "' (expected none, 1 or 2)");
}

std::size_t TrainConfig::epochs_for(std::size_t phase) const {
  if (phase >= 1 && phase <= phase_epochs.size()) return phase_epochs[phase - 1];
  return epochs;
}

void TrainConfig::validate() const {
  check_alpha(alpha);
  if (batch_size == 0) fail(ErrorKind::kConfig, "batch_size must be >= 1");
  if (text_batch_size == 0) fail(ErrorKind::kConfig, "text_batch_size must be >= 1");
  if (patience == 0) fail(ErrorKind::kConfig, "patience must be >= 1");
  if (!(optimizer.rho > 0.0 && optimizer.rho < 1.0)) fail(ErrorKind::kConfig, "rho must be in (0, 1)");
  if (!(optimizer.epsilon > 0.0)) fail(ErrorKind::kConfig, "epsilon must be > 0");
  if (!(optimizer.clip > 0.0)) fail(ErrorKind::kConfig, "clip must be > 0");
}

std::string format_metric_line(const MetricLine& line) {
  char buf[160];
  std::snprintf(buf, sizeof(buf), "phase=%zu epoch=%zu step=%zu loss=%.6f val=%.6f", line.phase, line.epoch,
                line.step, line.loss, line.val);
  return buf;
}

std::vector<PhaseKind> strategy_phases(Strategy s) {
  switch (s) {
    case Strategy::kNone:
      return {PhaseKind::kAsr};
    case Strategy::kOne:
      return {PhaseKind::kAsr, PhaseKind::kMixed, PhaseKind::kAsr};
    case Strategy::kTwo:
      return {PhaseKind::kLmSubnet, PhaseKind::kMixed};
  }
  return {};
}

std::vector<std::string> lm_subnet_names(const Model& model) { return model.partition().lm_subnet; }

namespace {

// Epoch loop with early stopping shared by every phase kind. The parameters
// at phase entry are the first candidate for "best".
template <typename EpochFn, typename ValFn>
double run_phase(Model& model, std::size_t phase, std::size_t epochs, std::size_t patience, std::size_t& step,
                 EpochFn&& epoch_fn, ValFn&& val_fn, TrainResult& result,
                 const std::function<void(const MetricLine&)>& on_line) {
  double best = val_fn();
  require_finite(best, "validation");
  ParamStore best_params = model.params().clone();
  std::size_t since_best = 0;
  for (std::size_t e = 1; e <= epochs; ++e) {
    const EpochStats stats = epoch_fn(e);
    step += stats.steps;
    const double val = val_fn();
    require_finite(val, "validation");
    MetricLine line{phase, e, step, stats.mean_loss, val};
    result.log.push_back(line);
    if (on_line) on_line(line);
    if (val < best) {
      best = val;
      best_params = model.params().clone();
      since_best = 0;
    } else if (++since_best >= patience) {
      break;
    }
  }
  model.params().assign_values(best_params);
  return best;
}

}  // namespace

TrainResult run_strategy(Model& model, const TrainConfig& config, const TrainingData& data,
                         const std::function<void(const MetricLine&)>& on_line) {
  const auto phases = strategy_phases(config.strategy);
  return run_phases(model, config, data, phases, on_line);
}

TrainResult run_phases(Model& model, const TrainConfig& config, const TrainingData& data,
                       std::span<const PhaseKind> phases, const std::function<void(const MetricLine&)>& on_line) {
  config.validate();
  if (model.arch() == Architecture::kLm) fail(ErrorKind::kConfig, "training needs an A1 or A2 model");
  if (data.train.empty()) fail(ErrorKind::kConfig, "no labelled training data");
  if (data.valid.empty()) fail(ErrorKind::kConfig, "no validation data");
  for (auto kind : phases) {
    if (kind != PhaseKind::kAsr && data.text.empty()) fail(ErrorKind::kConfig, "strategy needs external text");
    if (kind == PhaseKind::kLmSubnet && data.text_valid.empty()) {
      fail(ErrorKind::kConfig, "strategy 2 needs held-out text for validation");
    }
  }

  TrainResult result;
  std::size_t step = 0;
  const Rng root(config.seed);
  for (std::size_t p = 0; p < phases.size(); ++p) {
    const std::size_t phase = p + 1;
    const std::size_t epochs = config.epochs_for(phase);
    if (epochs == 0) {
      result.warnings.push_back("phase " + std::to_string(phase) + " has zero epochs; skipped");
      continue;
    }
    const std::uint64_t phase_seed = root.fork(phase).next_u64();
    auto val_asr = [&] { return evaluate_asr(model, data.valid); };
    switch (phases[p]) {
      case PhaseKind::kAsr: {
        AdaDelta opt(model.params(), config.optimizer);
        auto epoch = [&](std::size_t e) {
          auto batches = make_batches(data.train, config.batch_size, hash_combine(phase_seed, e), config.sort_window);
          return asr_epoch(model, batches, opt);
        };
        result.best_val = run_phase(model, phase, epochs, config.patience, step, epoch, val_asr, result, on_line);
        break;
      }
      case PhaseKind::kMixed: {
        AdaDelta opt(model.params(), config.optimizer);
        TextStream stream(data.text, config.text_batch_size, Rng(phase_seed).fork(0x74657874));
        auto epoch = [&](std::size_t e) {
          auto batches = make_batches(data.train, config.batch_size, hash_combine(phase_seed, e), config.sort_window);
          return mixed_epoch(model, batches, stream, config.alpha, opt);
        };
        result.best_val = run_phase(model, phase, epochs, config.patience, step, epoch, val_asr, result, on_line);
        break;
      }
      case PhaseKind::kLmSubnet: {
        AdaDelta opt(model.params(), config.optimizer, lm_subnet_names(model));
        auto epoch = [&](std::size_t e) {
          auto batches = shuffled_text_batches(data.text, config.text_batch_size, hash_combine(phase_seed, e));
          return lm_epoch(model, batches, opt);
        };
        auto val_lm = [&] { return evaluate_lm(model, data.text_valid); };
        result.best_val = run_phase(model, phase, epochs, config.patience, step, epoch, val_lm, result, on_line);
        break;
      }
    }
  }
  return result;
}

TrainResult train_language_model(Model& model, const TrainConfig& config, std::span<const std::vector<TokenId>> text,
                                 std::span<const std::vector<TokenId>> text_valid,
                                 const std::function<void(const MetricLine&)>& on_line) {
  config.validate();
  if (text.empty()) fail(ErrorKind::kConfig, "language model training needs a non-empty text corpus");
  if (text_valid.empty()) text_valid = text;
  TrainResult result;
  std::size_t step = 0;
  const std::uint64_t seed = Rng(config.seed).fork(1).next_u64();
  AdaDelta opt(model.params(), config.optimizer, lm_subnet_names(model));
  auto epoch = [&](std::size_t e) {
    auto batches = shuffled_text_batches(text, config.text_batch_size, hash_combine(seed, e));
    return lm_epoch(model, batches, opt);
  };
  auto val = [&] { return evaluate_lm(model, text_valid); };
  result.best_val = run_phase(model, 1, config.epochs_for(1), config.patience, step, epoch, val, result, on_line);
  return result;
}

}  // namespace dlm
