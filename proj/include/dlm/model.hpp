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

#ifndef DLM_MODEL_HPP
#define DLM_MODEL_HPP

// Attention encoder-decoder in two wirings.
//
//   A1 (coupled):   c_i = att(h, s_{i-1});  s_i = LSTM(s_{i-1}, [emb(y_{i-1}); c_i])
//                   P(y_i) = softmax(proj_s(s_i))
//   A2 (decoupled): s_i = LSTM(s_{i-1}, emb(y_{i-1}));  c_i = att(h, s_i)
//                   P(y_i) = softmax(proj_s(s_i) + proj_c(c_i))
//
// In A2 the embedding, decoder LSTM and proj_s form a language model that
// never sees the acoustics. A standalone LM (Architecture::kLm) holds only
// those parameters and is used for shallow fusion.

#include <cstdint>
#include <filesystem>
#include <span>
#include <string>
#include <vector>

#include "dlm/layers.hpp"
#include "dlm/rng.hpp"
#include "dlm/tensor.hpp"

namespace dlm {

using TokenId = std::uint32_t;

inline constexpr TokenId kSosId = 0;
inline constexpr TokenId kEosId = 1;
inline constexpr TokenId kUnkId = 2;

// Values double as the checkpoint architecture tag.
enum class Architecture : std::uint8_t { kA1 = 0, kA2 = 1, kLm = 2 };

const char* to_string(Architecture arch);
Architecture parse_architecture(const std::string& text);

struct ModelConfig {
  Architecture arch = Architecture::kA2;
  std::size_t vocab_size = 0;
  std::size_t feature_dim = 8;
  std::size_t encoder_layers = 2;
  std::size_t encoder_units = 32;  // per direction
  std::size_t embedding_dim = 16;
  std::size_t decoder_units = 64;
  std::size_t attention_dim = 32;
  std::size_t location_filters = 4;
  std::size_t location_width = 5;
  float init_scale = 0.1f;

  std::size_t context_dim() const { return 2 * encoder_units; }
};

inline constexpr std::size_t kSubsampleStages = 2;

struct DecoderState {
  LstmState lstm;       // s and cell
  Tensor prev_weights;  // [T'], undefined in LM mode
  TokenId prev_token = kSosId;
};

// Encoder-side state shared by every decoding step of one utterance.
struct DecoderSession {
  bool has_acoustics = false;
  AttentionMemory memory;
};

struct StepOptions {
  // A1 only: replace the attention context by zeros after computing it.
  bool zero_context = false;
};

struct StepResult {
  Tensor log_probs;     // [V]
  Tensor lm_logits;     // proj_s(s_i)
  Tensor context;       // c_i (zeros in A1 LM mode, undefined for A2/LM text-only)
  DecoderState next;
};

struct SequenceOutput {
  std::vector<Tensor> log_probs;  // one [V] per target position
  Tensor loss;                    // summed negative log-likelihood
  // Trace of the decoder trajectory, aligned with log_probs.
  std::vector<Tensor> hidden;
  std::vector<Tensor> lm_logits;
  std::vector<Tensor> contexts;
  std::vector<Tensor> attention;
};

struct ParamPartition {
  std::vector<std::string> lm_subnet;  // theta_d
  std::vector<std::string> rest;
};

class Model {
 public:
  // Registers every parameter and initialises it from `rng`:
  // uniform(-init_scale, init_scale) with LSTM forget biases set to 1.
  Model(const ModelConfig& config, Rng& rng);
  // Adopts an existing parameter store (checkpoint loading). Shapes are
  // validated against the architecture and the config is inferred from them.
  Model(Architecture arch, ParamStore params);

  Model(Model&&) = default;
  Model& operator=(Model&&) = default;
  Model(const Model&) = delete;
  Model& operator=(const Model&) = delete;

  Model clone() const;

  const ModelConfig& config() const { return config_; }
  Architecture arch() const { return config_.arch; }
  std::size_t vocab_size() const { return config_.vocab_size; }
  ParamStore& params() { return params_; }
  const ParamStore& params() const { return params_; }

  ParamPartition partition() const;

  // ---- teacher-forced passes ----
  // `targets` must be non-empty; y_0 is <sos>. `frames` = 0 uses all rows.
  SequenceOutput forward_asr(Tape& tape, const Tensor& features, std::span<const TokenId> targets,
                             std::size_t frames = 0, const StepOptions& options = {}) const;
  SequenceOutput forward_lm(Tape& tape, std::span<const TokenId> targets) const;

  // ---- incremental decoding ----
  DecoderSession begin(Tape& tape, const Tensor& features, std::size_t frames = 0) const;
  DecoderSession begin_text_only() const { return {}; }
  DecoderState initial_state(const DecoderSession& session) const;
  StepResult step(Tape& tape, const DecoderSession& session, const DecoderState& state,
                  const StepOptions& options = {}) const;

 private:
  void bind();
  void validate_shapes() const;
  SequenceOutput run(Tape& tape, const DecoderSession& session, std::span<const TokenId> targets,
                     const StepOptions& options) const;

  ModelConfig config_;
  ParamStore params_;

  EncoderParams encoder_;
  AttentionParams attention_;
  Tensor embedding_;
  LstmCellParams decoder_;
  LinearParams proj_s_;
  LinearParams proj_c_;
};

bool is_lm_subnet_param(const std::string& name);

// ---- checkpoints ----
// "DLM1", u32 version, u8 architecture, u32 vocab, u32 parameter count, then
// per parameter u16 name length, name, u8 rank, u32 dims, f32 data; all
// little-endian.
inline constexpr std::uint32_t kCheckpointVersion = 1;

std::vector<std::uint8_t> serialize_checkpoint(const Model& model);
Model deserialize_checkpoint(std::span<const std::uint8_t> bytes);
void save_checkpoint(const Model& model, const std::filesystem::path& path);
Model load_checkpoint(const std::filesystem::path& path);

}  // namespace dlm

#endif  // DLM_MODEL_HPP
