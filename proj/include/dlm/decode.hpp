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

#ifndef DLM_DECODE_HPP
#define DLM_DECODE_HPP

#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dlm/model.hpp"

namespace dlm {

// ---- beam search --------------------------------------------------------------

struct BeamConfig {
  std::size_t beam = 4;
  // Shallow-fusion weight; ignored without a fusion LM.
  double beta = 0.3;
  // Output length limit, ceil(ratio * T'); a non-zero max_length overrides it.
  double max_length_ratio = 2.0;
  std::size_t max_length = 0;
  // Off by default. Normalisation divides the final score by the length;
  // coverage adds weight * (encoder frames whose summed attention exceeds 0.5).
  bool length_normalize = false;
  double coverage_weight = 0.0;
};

struct Hypothesis {
  std::vector<TokenId> tokens;  // after <sos>; ends with <eos> when finished
  double model_score = 0.0;     // summed model log-probs
  double lm_score = 0.0;        // summed fusion-LM log-probs
  double total = 0.0;           // model_score + beta * lm_score
  double final_score = 0.0;     // total plus the optional adjustments
  bool finished = false;
};

struct BeamResult {
  // Ranked by final_score, best first.
  std::vector<Hypothesis> nbest;
  const Hypothesis& best() const { return nbest.front(); }
};

// `lm` is an optional fusion LM over the same vocabulary (kConfig otherwise).
// Each step expands every live hypothesis over all tokens except <sos> and
// keeps the top `beam` candidates; those ending in <eos> join the finished
// pool. Search stops once no live hypothesis can beat the best finished one
// or the length limit is hit. If nothing finished, the live beam is ranked.
BeamResult beam_search(const Model& model, const Tensor& features, const BeamConfig& config,
                       const Model* lm = nullptr, std::size_t frames = 0);

// Step-wise argmax until <eos> or the length limit.
std::vector<TokenId> greedy_decode(const Model& model, const Tensor& features,
                                   std::size_t max_length, std::size_t frames = 0);

std::size_t decode_length_limit(const BeamConfig& config, std::size_t encoded_frames);

// ---- scoring ------------------------------------------------------------------

enum class Unit { kChar, kWord };

Unit parse_unit(const std::string& text);
const char* to_string(Unit unit);

// kChar: UTF-8 code points, spaces included. kWord: whitespace-separated.
std::vector<std::string> split_units(std::string_view text, Unit unit);

struct EditStats {
  std::size_t substitutions = 0;
  std::size_t insertions = 0;
  std::size_t deletions = 0;
  std::size_t reference_units = 0;
  std::size_t pairs = 0;

  std::size_t errors() const { return substitutions + insertions + deletions; }
  // errors / reference_units; an all-empty reference set divides by 1.
  double rate() const;
  EditStats& operator+=(const EditStats& other);
};

// Levenshtein alignment with unit costs.
EditStats align(std::span<const std::string> hyp, std::span<const std::string> ref);

EditStats error_rate(std::span<const std::string> hypotheses, std::span<const std::string> references,
                     Unit unit);

// Text block: unit, pairs, S/I/D counts, total units and the rate.
std::string format_report(const EditStats& stats, Unit unit);

}  // namespace dlm

#endif  // DLM_DECODE_HPP
