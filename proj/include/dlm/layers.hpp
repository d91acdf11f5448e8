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

#ifndef DLM_LAYERS_HPP
#define DLM_LAYERS_HPP

#include <cstddef>
#include <map>
#include <string>
#include <vector>

#include "dlm/rng.hpp"
#include "dlm/tensor.hpp"

namespace dlm {

// Ordered registry of named trainable leaves.
class ParamStore {
 public:
  Tensor& add(const std::string& name, Shape shape);
  Tensor& get(const std::string& name);
  const Tensor& get(const std::string& name) const;
  bool contains(const std::string& name) const { return index_.count(name) != 0; }

  const std::vector<std::string>& names() const { return names_; }
  std::size_t size() const { return names_.size(); }
  std::size_t total_elements() const;

  void zero_grad();
  // Deep copy; the result shares no storage with this store.
  ParamStore clone() const;
  // Overwrite values from a store with identical names and shapes.
  void assign_values(const ParamStore& other);

 private:
  std::vector<std::string> names_;
  std::vector<Tensor> tensors_;
  std::map<std::string, std::size_t> index_;
};

// uniform(-scale, scale) for every parameter, in registration order.
void init_uniform(ParamStore& store, Rng& rng, float scale);

// ---- dense ------------------------------------------------------------------

struct LinearParams {
  Tensor weight;  // [out x in]
  Tensor bias;    // [out], may be undefined
};

Tensor linear(Tape& tape, const LinearParams& p, const Tensor& x);

// Row lookup in a [V x e] table; out-of-range ids are vocabulary errors.
Tensor embed(Tape& tape, const Tensor& table, std::size_t token_id);

// ---- LSTM ---------------------------------------------------------------------

// Gate rows are stacked as (input, forget, cell, output), u rows each.
struct LstmCellParams {
  Tensor w_input;   // [4u x in]
  Tensor w_hidden;  // [4u x u]
  Tensor bias;      // [4u]

  std::size_t units() const { return w_hidden.dim(1); }
  std::size_t input_size() const { return w_input.dim(1); }
};

struct LstmState {
  Tensor hidden;  // [u]
  Tensor cell;    // [u]
};

LstmCellParams register_lstm(ParamStore& store, const std::string& prefix,
                             std::size_t input_size, std::size_t units);
// Sets the forget-gate slice of the bias to `value`.
void set_forget_bias(LstmCellParams& p, float value);

LstmState zero_lstm_state(std::size_t units);

LstmState lstm_step(Tape& tape, const LstmCellParams& p, const LstmState& state,
                    const Tensor& input);
// Same recurrence when W_input * x + bias has already been computed.
LstmState lstm_step_projected(Tape& tape, const LstmCellParams& p, const LstmState& state,
                              const Tensor& projected_input);

// ---- encoder ------------------------------------------------------------------

struct BlstmLayerParams {
  LstmCellParams forward;
  LstmCellParams backward;
};

struct EncoderParams {
  std::vector<BlstmLayerParams> layers;
  // Number of 2x frame-skipping stages. Stage s runs after layer
  // min(s, layers - 1), so a one-layer encoder still reduces by 4.
  std::size_t subsample_stages = 2;

  std::size_t output_size() const { return 2 * layers.back().forward.units(); }
};

struct EncoderOutput {
  Tensor h;               // [rows x d_h]; rows beyond `length` are padding
  std::size_t length = 0;  // T'
};

// Length of the encoder output for T input frames.
std::size_t encoded_length(std::size_t frames, std::size_t subsample_stages);

// features: [T x d_in] with T >= 4. Only the first `frames` rows are read
// (0 means all rows), so zero-padded batch rows never reach the network.
EncoderOutput encode(Tape& tape, const EncoderParams& p, const Tensor& features,
                     std::size_t frames = 0);

// ---- location-aware attention ----------------------------------------------------

struct AttentionParams {
  Tensor w_query;     // [d_a x u]
  Tensor w_key;       // [d_a x d_h]
  Tensor w_location;  // [d_a x K]
  Tensor filters;     // [K x w], w odd
  Tensor energy;      // [d_a]
  Tensor energy_bias; // [d_a]
};

// Per-utterance keys, computed once and reused at every decoding step.
struct AttentionMemory {
  Tensor values;    // h rows [T' x d_h]
  Tensor values_t;  // [d_h x T']
  Tensor keys;      // W_key h_t for every t, [T' x d_a]
  std::size_t length = 0;
};

struct AttentionResult {
  Tensor context;  // [d_h]
  Tensor weights;  // [T']
};

AttentionMemory prepare_attention(Tape& tape, const AttentionParams& p, const EncoderOutput& h);

// e_t = v . tanh(W_q q + W_k h_t + W_f f_t + b), f = conv1d_same(prev, filters),
// weights = softmax(e), context = sum_t weights_t h_t.
AttentionResult attend(Tape& tape, const AttentionParams& p, const AttentionMemory& memory,
                       const Tensor& query, const Tensor& prev_weights);
AttentionResult attend(Tape& tape, const AttentionParams& p, const EncoderOutput& h,
                       const Tensor& query, const Tensor& prev_weights);

Tensor uniform_weights(std::size_t length);

}  // namespace dlm

#endif  // DLM_LAYERS_HPP
