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

#include "dlm/layers.hpp"

#include <algorithm>

#include "dlm/error.hpp"

namespace dlm {

// ---- ParamStore ---------------------------------------------------------------

Tensor& ParamStore::add(const std::string& name, Shape shape) {
  if (contains(name)) fail(ErrorKind::kContract, "duplicate parameter " + name);
  index_[name] = tensors_.size();
  names_.push_back(name);
  tensors_.push_back(Tensor::zeros(std::move(shape), true));
  return tensors_.back();
}

Tensor& ParamStore::get(const std::string& name) {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::kContract, "unknown parameter " + name);
  return tensors_[it->second];
}

const Tensor& ParamStore::get(const std::string& name) const {
  auto it = index_.find(name);
  if (it == index_.end()) fail(ErrorKind::kContract, "unknown parameter " + name);
  return tensors_[it->second];
}

std::size_t ParamStore::total_elements() const {
  std::size_t n = 0;
  for (const auto& t : tensors_) n += t.numel();
  return n;
}

void ParamStore::zero_grad() {
  for (auto& t : tensors_) t.zero_grad();
}

ParamStore ParamStore::clone() const {
  ParamStore copy;
  copy.names_ = names_;
  copy.index_ = index_;
  copy.tensors_.reserve(tensors_.size());
  for (const auto& t : tensors_) copy.tensors_.push_back(t.clone(true));
  return copy;
}

void ParamStore::assign_values(const ParamStore& other) {
  if (other.names_ != names_) fail(ErrorKind::kContract, "assign_values: parameter sets differ");
  for (std::size_t i = 0; i < tensors_.size(); ++i) {
    if (tensors_[i].shape() != other.tensors_[i].shape()) {
      fail(ErrorKind::kDimension, "assign_values: shape mismatch for " + names_[i]);
    }
    auto src = other.tensors_[i].data();
    std::copy(src.begin(), src.end(), tensors_[i].mutable_data().begin());
  }
}

void init_uniform(ParamStore& store, Rng& rng, float scale) {
  for (const auto& name : store.names()) {
    for (auto& v : store.get(name).mutable_data()) {
      v = static_cast<float>(rng.uniform(-scale, scale));
    }
  }
}

// ---- dense --------------------------------------------------------------------

Tensor linear(Tape& tape, const LinearParams& p, const Tensor& x) {
  Tensor y = matmul(tape, p.weight, x);
  return p.bias.defined() ? add(tape, y, p.bias) : y;
}

Tensor embed(Tape& tape, const Tensor& table, std::size_t token_id) {
  if (token_id >= table.dim(0)) {
    fail(ErrorKind::kVocabulary, "token id " + std::to_string(token_id) +
                                     " outside vocabulary of size " +
                                     std::to_string(table.dim(0)));
  }
  return row(tape, table, token_id);
}

// ---- LSTM ---------------------------------------------------------------------

LstmCellParams register_lstm(ParamStore& store, const std::string& prefix,
                             std::size_t input_size, std::size_t units) {
  LstmCellParams p;
  p.w_input = store.add(prefix + ".w_ih", {4 * units, input_size});
  p.w_hidden = store.add(prefix + ".w_hh", {4 * units, units});
  p.bias = store.add(prefix + ".b", {4 * units});
  return p;
}

void set_forget_bias(LstmCellParams& p, float value) {
  const std::size_t u = p.units();
  auto b = p.bias.mutable_data();
  std::fill(b.begin() + u, b.begin() + 2 * u, value);
}

LstmState zero_lstm_state(std::size_t units) {
  return {Tensor::zeros({units}), Tensor::zeros({units})};
}

LstmState lstm_step_projected(Tape& tape, const LstmCellParams& p, const LstmState& state,
                              const Tensor& projected_input) {
  const std::size_t u = p.units();
  if (state.hidden.numel() != u || state.cell.numel() != u) {
    fail(ErrorKind::kDimension, "lstm_step: state size does not match " + std::to_string(u) +
                                    " units");
  }
  Tensor gates = add(tape, projected_input, matmul(tape, p.w_hidden, state.hidden));
  Tensor both = lstm_cell(tape, gates, state.cell);
  Tensor hidden = slice(tape, both, 0, u);
  Tensor cell = slice(tape, both, u, u);
  return {hidden, cell};
}

LstmState lstm_step(Tape& tape, const LstmCellParams& p, const LstmState& state,
                    const Tensor& input) {
  if (input.rank() != 1 || input.numel() != p.input_size()) {
    fail(ErrorKind::kDimension, "lstm_step: input " + shape_string(input.shape()) +
                                    " does not match declared input size " +
                                    std::to_string(p.input_size()));
  }
  Tensor projected = add(tape, matmul(tape, p.w_input, input), p.bias);
  return lstm_step_projected(tape, p, state, projected);
}

// ---- encoder ------------------------------------------------------------------

std::size_t encoded_length(std::size_t frames, std::size_t subsample_stages) {
  for (std::size_t s = 0; s < subsample_stages; ++s) frames = (frames + 1) / 2;
  return frames;
}

namespace {

// Runs one direction over all rows of `inputs` and returns hidden states in
// time order.
Tensor run_direction(Tape& tape, const LstmCellParams& p, const Tensor& inputs, bool reverse) {
  const std::size_t steps = inputs.dim(0);
  Tensor projected =
      add_to_rows(tape, matmul(tape, inputs, transpose(tape, p.w_input)), p.bias);
  LstmState state = zero_lstm_state(p.units());
  std::vector<Tensor> outputs(steps);
  for (std::size_t i = 0; i < steps; ++i) {
    const std::size_t t = reverse ? steps - 1 - i : i;
    state = lstm_step_projected(tape, p, state, row(tape, projected, t));
    outputs[t] = state.hidden;
  }
  return stack_rows(tape, outputs);
}

}  // namespace

EncoderOutput encode(Tape& tape, const EncoderParams& p, const Tensor& features,
                     std::size_t frames) {
  if (features.rank() != 2) {
    fail(ErrorKind::kDimension, "encode: features must be [T x d], got " +
                                    shape_string(features.shape()));
  }
  if (p.layers.empty()) fail(ErrorKind::kConfig, "encode: encoder has no layers");
  if (frames == 0) frames = features.dim(0);
  if (frames > features.dim(0)) {
    fail(ErrorKind::kDimension, "encode: " + std::to_string(frames) +
                                    " frames requested from " + shape_string(features.shape()));
  }
  if (frames < 4) {
    fail(ErrorKind::kInputTooShort, "encode: need at least 4 frames, got " +
                                        std::to_string(frames));
  }
  if (features.dim(1) != p.layers.front().forward.input_size()) {
    fail(ErrorKind::kDimension, "encode: feature dim " + std::to_string(features.dim(1)) +
                                    " does not match encoder input " +
                                    std::to_string(p.layers.front().forward.input_size()));
  }

  Tensor x = frames == features.dim(0) ? features : rows(tape, features, 0, frames);
  const std::size_t last = p.layers.size() - 1;
  for (std::size_t l = 0; l < p.layers.size(); ++l) {
    Tensor fw = run_direction(tape, p.layers[l].forward, x, false);
    Tensor bw = run_direction(tape, p.layers[l].backward, x, true);
    x = concat_cols(tape, fw, bw);
    for (std::size_t s = 0; s < p.subsample_stages; ++s) {
      if (std::min(s, last) == l) x = subsample_rows(tape, x, 2);
    }
  }
  return {x, x.dim(0)};
}

// ---- attention ----------------------------------------------------------------

Tensor uniform_weights(std::size_t length) {
  return Tensor::from_data({length}, std::vector<float>(length, 1.0f / static_cast<float>(length)));
}

AttentionMemory prepare_attention(Tape& tape, const AttentionParams& p, const EncoderOutput& h) {
  if (h.length == 0 || h.length > h.h.dim(0)) {
    fail(ErrorKind::kDimension, "attention: invalid encoder length " + std::to_string(h.length));
  }
  AttentionMemory memory;
  memory.length = h.length;
  memory.values = h.length == h.h.dim(0) ? h.h : rows(tape, h.h, 0, h.length);
  memory.values_t = transpose(tape, memory.values);
  memory.keys = matmul(tape, memory.values, transpose(tape, p.w_key));
  return memory;
}

AttentionResult attend(Tape& tape, const AttentionParams& p, const AttentionMemory& memory,
                       const Tensor& query, const Tensor& prev_weights) {
  if (prev_weights.rank() != 1 || prev_weights.numel() != memory.length) {
    fail(ErrorKind::kDimension, "attend: previous weights " + shape_string(prev_weights.shape()) +
                                    " do not match encoder length " +
                                    std::to_string(memory.length));
  }
  Tensor location = conv1d_same(tape, prev_weights, p.filters);              // [T' x K]
  Tensor loc_proj = matmul(tape, location, transpose(tape, p.w_location));   // [T' x d_a]
  Tensor q = add(tape, matmul(tape, p.w_query, query), p.energy_bias);       // [d_a]
  Tensor pre = add_to_rows(tape, add(tape, memory.keys, loc_proj), q);
  Tensor energies = matmul(tape, tanh(tape, pre), p.energy);                 // [T']
  Tensor weights = softmax(tape, energies);
  Tensor context = matmul(tape, memory.values_t, weights); // [d_h]
  return {context, weights};
}

AttentionResult attend(Tape& tape, const AttentionParams& p, const EncoderOutput& h,
                       const Tensor& query, const Tensor& prev_weights) {
  return attend(tape, p, prepare_attention(tape, p, h), query, prev_weights);
}

}  // namespace dlm
