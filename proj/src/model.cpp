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

#include "dlm/model.hpp"

#include <optional>

#include "dlm/error.hpp"

namespace dlm {

const char* to_string(Architecture arch) {
  switch (arch) {
    case Architecture::kA1: return "A1";
    case Architecture::kA2: return "A2";
    case Architecture::kLm: return "LM";
  }
  return "?";
}

Architecture parse_architecture(const std::string& text) {
  if (text == "A1") return Architecture::kA1;
  if (text == "A2") return Architecture::kA2;
  if (text == "LM") return Architecture::kLm;
  fail(ErrorKind::kConfig, "unknown architecture '" + text + "' (expected A1, A2 or LM)");
}

bool is_lm_subnet_param(const std::string& name) {
  return name.starts_with("emb.") || name.starts_with("dec.lstm.") ||
         name.starts_with("dec.proj_s.");
}

namespace {

std::string encoder_prefix(std::size_t layer, bool backward) {
  return "enc.l" + std::to_string(layer) + (backward ? ".bw" : ".fw");
}

}  // namespace

Model::Model(const ModelConfig& config, Rng& rng) : config_(config) {
  // Two ids are the minimum: <sos> and <eos>.
  if (config_.vocab_size < 2) fail(ErrorKind::kConfig, "vocab_size must be at least 2");
  if (config_.location_width % 2 == 0) {
    fail(ErrorKind::kConfig, "location_width must be odd");
  }
  const bool acoustic = config_.arch != Architecture::kLm;
  if (acoustic) {
    if (config_.encoder_layers == 0) fail(ErrorKind::kConfig, "encoder_layers must be >= 1");
    std::size_t input = config_.feature_dim;
    for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
      register_lstm(params_, encoder_prefix(l, false), input, config_.encoder_units);
      register_lstm(params_, encoder_prefix(l, true), input, config_.encoder_units);
      input = 2 * config_.encoder_units;
    }
    const std::size_t d_a = config_.attention_dim;
    params_.add("att.w_query", {d_a, config_.decoder_units});
    params_.add("att.w_key", {d_a, config_.context_dim()});
    params_.add("att.w_location", {d_a, config_.location_filters});
    params_.add("att.filters", {config_.location_filters, config_.location_width});
    params_.add("att.energy", {d_a});
    params_.add("att.energy_bias", {d_a});
  }
  params_.add("emb.table", {config_.vocab_size, config_.embedding_dim});
  const std::size_t aux = config_.arch == Architecture::kA1 ? config_.context_dim() : 0;
  register_lstm(params_, "dec.lstm", config_.embedding_dim + aux, config_.decoder_units);
  params_.add("dec.proj_s.weight", {config_.vocab_size, config_.decoder_units});
  params_.add("dec.proj_s.bias", {config_.vocab_size});
  if (config_.arch == Architecture::kA2) {
    params_.add("dec.proj_c.weight", {config_.vocab_size, config_.context_dim()});
  }

  init_uniform(params_, rng, config_.init_scale);
  bind();
  for (auto& layer : encoder_.layers) {
    set_forget_bias(layer.forward, 1.0f);
    set_forget_bias(layer.backward, 1.0f);
  }
  set_forget_bias(decoder_, 1.0f);
}

Model::Model(Architecture arch, ParamStore params) : params_(std::move(params)) {
  config_.arch = arch;
  auto need = [this](const std::string& name) -> const Tensor& {
    if (!params_.contains(name)) fail(ErrorKind::kValidation, "checkpoint lacks parameter " + name);
    return params_.get(name);
  };
  const Tensor& table = need("emb.table");
  if (table.rank() != 2) fail(ErrorKind::kValidation, "emb.table must be rank 2");
  config_.vocab_size = table.dim(0);
  config_.embedding_dim = table.dim(1);
  const Tensor& dec_hh = need("dec.lstm.w_hh");
  if (dec_hh.rank() != 2) fail(ErrorKind::kValidation, "dec.lstm.w_hh must be rank 2");
  config_.decoder_units = dec_hh.dim(1);
  if (arch != Architecture::kLm) {
    std::size_t layers = 0;
    while (params_.contains(encoder_prefix(layers, false) + ".w_ih")) ++layers;
    if (layers == 0) fail(ErrorKind::kValidation, "checkpoint has no encoder layers");
    config_.encoder_layers = layers;
    const Tensor& w0 = need(encoder_prefix(0, false) + ".w_ih");
    const Tensor& h0 = need(encoder_prefix(0, false) + ".w_hh");
    if (w0.rank() != 2 || h0.rank() != 2) fail(ErrorKind::kValidation, "encoder weights must be rank 2");
    config_.feature_dim = w0.dim(1);
    config_.encoder_units = h0.dim(1);
    const Tensor& wq = need("att.w_query");
    const Tensor& filters = need("att.filters");
    if (wq.rank() != 2 || filters.rank() != 2) fail(ErrorKind::kValidation, "attention weights must be rank 2");
    config_.attention_dim = wq.dim(0);
    config_.location_filters = filters.dim(0);
    config_.location_width = filters.dim(1);
  }
  validate_shapes();
  bind();
}

void Model::validate_shapes() const {
  // Rebuild the reference layout from the inferred config and compare.
  Rng rng(0);
  std::optional<Model> built;
  try {
    built.emplace(config_, rng);
  } catch (const Error& e) {
    fail(ErrorKind::kValidation, std::string("inconsistent checkpoint: ") + e.what());
  }
  const Model& reference = *built;
  const auto& want = reference.params_.names();
  if (want.size() != params_.size()) {
    fail(ErrorKind::kValidation, "parameter count " + std::to_string(params_.size()) +
                                     " does not match architecture " + to_string(config_.arch) +
                                     " (expected " + std::to_string(want.size()) + ")");
  }
  for (const auto& name : want) {
    if (!params_.contains(name)) fail(ErrorKind::kValidation, "checkpoint lacks parameter " + name);
    const Shape& expect = reference.params_.get(name).shape();
    const Shape& got = params_.get(name).shape();
    if (expect != got) {
      fail(ErrorKind::kValidation, "shape mismatch for " + name + ": " + shape_string(got) +
                                       " vs expected " + shape_string(expect));
    }
  }
}

void Model::bind() {
  encoder_ = {};
  encoder_.subsample_stages = kSubsampleStages;
  if (config_.arch != Architecture::kLm) {
    for (std::size_t l = 0; l < config_.encoder_layers; ++l) {
      BlstmLayerParams layer;
      for (bool bw : {false, true}) {
        const std::string prefix = encoder_prefix(l, bw);
        LstmCellParams& cell = bw ? layer.backward : layer.forward;
        cell.w_input = params_.get(prefix + ".w_ih");
        cell.w_hidden = params_.get(prefix + ".w_hh");
        cell.bias = params_.get(prefix + ".b");
      }
      encoder_.layers.push_back(layer);
    }
    attention_.w_query = params_.get("att.w_query");
    attention_.w_key = params_.get("att.w_key");
    attention_.w_location = params_.get("att.w_location");
    attention_.filters = params_.get("att.filters");
    attention_.energy = params_.get("att.energy");
    attention_.energy_bias = params_.get("att.energy_bias");
  }
  embedding_ = params_.get("emb.table");
  decoder_.w_input = params_.get("dec.lstm.w_ih");
  decoder_.w_hidden = params_.get("dec.lstm.w_hh");
  decoder_.bias = params_.get("dec.lstm.b");
  proj_s_.weight = params_.get("dec.proj_s.weight");
  proj_s_.bias = params_.get("dec.proj_s.bias");
  proj_c_ = {};
  if (config_.arch == Architecture::kA2) proj_c_.weight = params_.get("dec.proj_c.weight");
}

Model Model::clone() const {
  Model copy(config_.arch, params_.clone());
  copy.config_.init_scale = config_.init_scale;
  return copy;
}

ParamPartition Model::partition() const {
  ParamPartition out;
  for (const auto& name : params_.names()) {
    (is_lm_subnet_param(name) ? out.lm_subnet : out.rest).push_back(name);
  }
  return out;
}

DecoderSession Model::begin(Tape& tape, const Tensor& features, std::size_t frames) const {
  if (config_.arch == Architecture::kLm) {
    fail(ErrorKind::kContract, "a standalone LM has no acoustic encoder");
  }
  DecoderSession session;
  session.has_acoustics = true;
  EncoderOutput h = encode(tape, encoder_, features, frames);
  session.memory = prepare_attention(tape, attention_, h);
  return session;
}

DecoderState Model::initial_state(const DecoderSession& session) const {
  DecoderState state;
  state.lstm = zero_lstm_state(config_.decoder_units);
  if (session.has_acoustics) state.prev_weights = uniform_weights(session.memory.length);
  state.prev_token = kSosId;
  return state;
}

StepResult Model::step(Tape& tape, const DecoderSession& session, const DecoderState& state,
                       const StepOptions& options) const {
  if (state.prev_token >= config_.vocab_size) {
    fail(ErrorKind::kVocabulary, "token id " + std::to_string(state.prev_token) +
                                     " outside vocabulary of size " +
                                     std::to_string(config_.vocab_size));
  }
  StepResult result;
  result.next.prev_weights = state.prev_weights;
  Tensor emb = embed(tape, embedding_, state.prev_token);

  if (config_.arch == Architecture::kA1) {
    Tensor context;
    if (session.has_acoustics) {
      AttentionResult att =
          attend(tape, attention_, session.memory, state.lstm.hidden, state.prev_weights);
      context = options.zero_context ? Tensor::zeros({config_.context_dim()}) : att.context;
      result.next.prev_weights = att.weights;
    } else {
      // Text-only update of the coupled decoder: c_i is the all-zero vector.
      context = Tensor::zeros({config_.context_dim()});
    }
    const Tensor parts[] = {emb, context};
    result.next.lstm = lstm_step(tape, decoder_, state.lstm, concat(tape, parts));
    result.lm_logits = linear(tape, proj_s_, result.next.lstm.hidden);
    result.log_probs = log_softmax(tape, result.lm_logits);
    result.context = context;
  } else {
    result.next.lstm = lstm_step(tape, decoder_, state.lstm, emb);
    result.lm_logits = linear(tape, proj_s_, result.next.lstm.hidden);
    Tensor logits = result.lm_logits;
    if (session.has_acoustics && config_.arch == Architecture::kA2) {
      AttentionResult att =
          attend(tape, attention_, session.memory, result.next.lstm.hidden, state.prev_weights);
      result.context = att.context;
      result.next.prev_weights = att.weights;
      logits = add(tape, logits, matmul(tape, proj_c_.weight, att.context));
    }
    result.log_probs = log_softmax(tape, logits);
  }
  return result;
}

SequenceOutput Model::run(Tape& tape, const DecoderSession& session,
                          std::span<const TokenId> targets, const StepOptions& options) const {
  if (targets.empty()) fail(ErrorKind::kContract, "empty target sequence");
  for (TokenId y : targets) {
    if (y >= config_.vocab_size) {
      fail(ErrorKind::kVocabulary, "target id " + std::to_string(y) +
                                       " outside vocabulary of size " +
                                       std::to_string(config_.vocab_size));
    }
  }
  SequenceOutput out;
  DecoderState state = initial_state(session);
  std::vector<Tensor> picked;
  picked.reserve(targets.size());
  for (TokenId y : targets) {
    StepResult r = step(tape, session, state, options);
    picked.push_back(pick(tape, r.log_probs, y));
    out.log_probs.push_back(r.log_probs);
    out.hidden.push_back(r.next.lstm.hidden);
    out.lm_logits.push_back(r.lm_logits);
    out.contexts.push_back(r.context);
    out.attention.push_back(r.next.prev_weights);
    state = std::move(r.next);
    state.prev_token = y;  // teacher forcing
  }
  out.loss = scale(tape, sum(tape, concat(tape, picked)), -1.0f);
  return out;
}

SequenceOutput Model::forward_asr(Tape& tape, const Tensor& features,
                                  std::span<const TokenId> targets, std::size_t frames,
                                  const StepOptions& options) const {
  if (targets.empty()) fail(ErrorKind::kContract, "empty target sequence");
  DecoderSession session = begin(tape, features, frames);
  return run(tape, session, targets, options);
}

SequenceOutput Model::forward_lm(Tape& tape, std::span<const TokenId> targets) const {
  return run(tape, begin_text_only(), targets, {});
}

}  // namespace dlm
