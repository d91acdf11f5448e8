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

#include "dlm/decode.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>

#include "dlm/data.hpp"
#include "dlm/error.hpp"

namespace dlm {

std::size_t decode_length_limit(const BeamConfig& config, std::size_t encoded_frames) {
  if (config.max_length > 0) return config.max_length;
  const double limit = std::ceil(config.max_length_ratio * static_cast<double>(encoded_frames));
  return std::max<std::size_t>(1, static_cast<std::size_t>(limit));
}

namespace {

struct LiveHyp {
  Hypothesis hyp;
  DecoderState state;
  DecoderState lm_state;
  std::vector<float> coverage;
};

struct Candidate {
  double total;
  std::size_t parent;
  TokenId token;
};

double coverage_bonus(const std::vector<float>& coverage) {
  double n = 0.0;
  for (float c : coverage) n += c > 0.5f ? 1.0 : 0.0;
  return n;
}

void finalize(Hypothesis& h, const BeamConfig& config, const std::vector<float>& coverage) {
  h.final_score = h.total;
  if (config.length_normalize && !h.tokens.empty()) h.final_score /= static_cast<double>(h.tokens.size());
  if (config.coverage_weight != 0.0) h.final_score += config.coverage_weight * coverage_bonus(coverage);
}

}  // namespace

BeamResult beam_search(const Model& model, const Tensor& features, const BeamConfig& config, const Model* lm,
                       std::size_t frames) {
  if (config.beam == 0) fail(ErrorKind::kConfig, "beam width must be >= 1");
  if (config.beta < 0.0) fail(ErrorKind::kConfig, "fusion weight beta must be >= 0");
  const bool fuse = lm != nullptr && config.beta != 0.0;
  if (lm != nullptr && lm->vocab_size() != model.vocab_size()) {
    fail(ErrorKind::kConfig, "fusion LM vocabulary (" + std::to_string(lm->vocab_size()) +
                                 ") differs from the model's (" + std::to_string(model.vocab_size()) + ")");
  }
  const bool track_coverage = config.coverage_weight != 0.0;
  const std::size_t vocab = model.vocab_size();

  Tape enc_tape(false);
  const DecoderSession session = model.begin(enc_tape, features, frames);
  const DecoderSession lm_session = fuse ? lm->begin_text_only() : DecoderSession{};
  const std::size_t limit = decode_length_limit(config, session.memory.length);

  std::vector<LiveHyp> live(1);
  live[0].state = model.initial_state(session);
  if (fuse) live[0].lm_state = lm->initial_state(lm_session);
  if (track_coverage) live[0].coverage.assign(session.memory.length, 0.0f);

  std::vector<LiveHyp> finished;
  std::vector<Candidate> candidates;
  for (std::size_t length = 1; length <= limit && !live.empty(); ++length) {
    std::vector<StepResult> steps;
    std::vector<StepResult> lm_steps;
    candidates.clear();
    for (std::size_t h = 0; h < live.size(); ++h) {
      Tape tape(false);
      steps.push_back(model.step(tape, session, live[h].state));
      const auto lp = steps.back().log_probs.data();
      std::span<const float> lm_lp;
      if (fuse) {
        lm_steps.push_back(lm->step(tape, lm_session, live[h].lm_state));
        lm_lp = lm_steps.back().log_probs.data();
      }
      const Hypothesis& base = live[h].hyp;
      for (TokenId v = 0; v < vocab; ++v) {
        if (v == kSosId) continue;
        const double model_score = base.model_score + lp[v];
        const double lm_score = fuse ? base.lm_score + lm_lp[v] : 0.0;
        candidates.push_back({model_score + config.beta * lm_score, h, v});
      }
    }
    const std::size_t keep = std::min(config.beam, candidates.size());
    auto better = [](const Candidate& a, const Candidate& b) {
      if (a.total != b.total) return a.total > b.total;
      if (a.parent != b.parent) return a.parent < b.parent;
      return a.token < b.token;
    };
    std::partial_sort(candidates.begin(), candidates.begin() + static_cast<std::ptrdiff_t>(keep), candidates.end(),
                      better);

    std::vector<LiveHyp> next;
    for (std::size_t k = 0; k < keep; ++k) {
      const Candidate& c = candidates[k];
      const LiveHyp& parent = live[c.parent];
      LiveHyp child;
      child.hyp.tokens = parent.hyp.tokens;
      child.hyp.tokens.push_back(c.token);
      child.hyp.model_score = parent.hyp.model_score + steps[c.parent].log_probs.data()[c.token];
      child.hyp.lm_score = fuse ? parent.hyp.lm_score + lm_steps[c.parent].log_probs.data()[c.token] : 0.0;
      child.hyp.total = c.total;
      child.state = steps[c.parent].next;
      child.state.prev_token = c.token;
      if (fuse) {
        child.lm_state = lm_steps[c.parent].next;
        child.lm_state.prev_token = c.token;
      }
      if (track_coverage) {
        child.coverage = parent.coverage;
        const auto w = child.state.prev_weights.data();
        for (std::size_t t = 0; t < child.coverage.size() && t < w.size(); ++t) child.coverage[t] += w[t];
      }
      if (c.token == kEosId) {
        child.hyp.finished = true;
        finished.push_back(std::move(child));
      } else {
        next.push_back(std::move(child));
      }
    }
    live = std::move(next);

    // Scores only decrease as tokens are appended, so once the best finished
    // hypothesis is ahead of every live one nothing can overtake it. The
    // adjustments break that argument, so they disable the early exit.
    if (!finished.empty() && !live.empty() && !config.length_normalize && config.coverage_weight == 0.0) {
      double best_finished = -INFINITY;
      for (const auto& f : finished) best_finished = std::max(best_finished, f.hyp.total);
      if (best_finished >= live.front().hyp.total) break;
    }
  }

  std::vector<LiveHyp>& pool = finished.empty() ? live : finished;
  BeamResult result;
  for (auto& h : pool) {
    finalize(h.hyp, config, h.coverage);
    result.nbest.push_back(std::move(h.hyp));
  }
  std::stable_sort(result.nbest.begin(), result.nbest.end(),
                   [](const Hypothesis& a, const Hypothesis& b) { return a.final_score > b.final_score; });
  if (result.nbest.size() > config.beam) result.nbest.resize(config.beam);
  if (result.nbest.empty()) fail(ErrorKind::kContract, "beam search produced no hypothesis");
  return result;
}

std::vector<TokenId> greedy_decode(const Model& model, const Tensor& features, std::size_t max_length,
                                   std::size_t frames) {
  Tape enc_tape(false);
  const DecoderSession session = model.begin(enc_tape, features, frames);
  DecoderState state = model.initial_state(session);
  std::vector<TokenId> out;
  for (std::size_t i = 0; i < max_length; ++i) {
    Tape tape(false);
    StepResult r = model.step(tape, session, state);
    const auto lp = r.log_probs.data();
    TokenId best = kEosId;
    float best_lp = -INFINITY;
    for (TokenId v = 0; v < lp.size(); ++v) {
      if (v == kSosId) continue;
      if (lp[v] > best_lp) {
        best_lp = lp[v];
        best = v;
      }
    }
    out.push_back(best);
    if (best == kEosId) break;
    state = r.next;
    state.prev_token = best;
  }
  return out;
}

// ---- scoring ------------------------------------------------------------------

Unit parse_unit(const std::string& text) {
  if (text == "char") return Unit::kChar;
  if (text == "word") return Unit::kWord;
  fail(ErrorKind::kConfig, "unknown unit '" + text + "' (expected char or word)");
}

const char* to_string(Unit unit) { return unit == Unit::kChar ? "char" : "word"; }

std::vector<std::string> split_units(std::string_view text, Unit unit) {
  if (unit == Unit::kChar) return split_code_points(text);
  std::vector<std::string> words;
  std::size_t i = 0;
  auto space = [](char c) { return c == ' ' || c == '\t' || c == '\n' || c == '\r'; };
  while (i < text.size()) {
    while (i < text.size() && space(text[i])) ++i;
    const std::size_t b = i;
    while (i < text.size() && !space(text[i])) ++i;
    if (i > b) words.emplace_back(text.substr(b, i - b));
  }
  return words;
}

double EditStats::rate() const {
  return static_cast<double>(errors()) / static_cast<double>(std::max<std::size_t>(reference_units, 1));
}

EditStats& EditStats::operator+=(const EditStats& o) {
  substitutions += o.substitutions;
  insertions += o.insertions;
  deletions += o.deletions;
  reference_units += o.reference_units;
  pairs += o.pairs;
  return *this;
}

EditStats align(std::span<const std::string> hyp, std::span<const std::string> ref) {
  const std::size_t n = ref.size();
  const std::size_t m = hyp.size();
  // d[i][j]: cost of ref[0..i) against hyp[0..j).
  std::vector<std::size_t> d((n + 1) * (m + 1));
  auto at = [&](std::size_t i, std::size_t j) -> std::size_t& { return d[i * (m + 1) + j]; };
  for (std::size_t i = 0; i <= n; ++i) at(i, 0) = i;
  for (std::size_t j = 0; j <= m; ++j) at(0, j) = j;
  for (std::size_t i = 1; i <= n; ++i) {
    for (std::size_t j = 1; j <= m; ++j) {
      const std::size_t diag = at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1);
      at(i, j) = std::min({diag, at(i - 1, j) + 1, at(i, j - 1) + 1});
    }
  }
  EditStats s;
  s.reference_units = n;
  s.pairs = 1;
  std::size_t i = n, j = m;
  while (i > 0 || j > 0) {
    if (i > 0 && j > 0 && at(i, j) == at(i - 1, j - 1) + (ref[i - 1] == hyp[j - 1] ? 0 : 1)) {
      if (ref[i - 1] != hyp[j - 1]) ++s.substitutions;
      --i;
      --j;
    } else if (i > 0 && at(i, j) == at(i - 1, j) + 1) {
      ++s.deletions;
      --i;
    } else {
      ++s.insertions;
      --j;
    }
  }
  return s;
}

EditStats error_rate(std::span<const std::string> hypotheses, std::span<const std::string> references, Unit unit) {
  if (references.empty()) fail(ErrorKind::kContract, "error_rate: empty reference list");
  if (hypotheses.size() != references.size()) {
    fail(ErrorKind::kContract, "error_rate: " + std::to_string(hypotheses.size()) + " hypotheses for " +
                                   std::to_string(references.size()) + " references");
  }
  EditStats total;
  for (std::size_t i = 0; i < references.size(); ++i) {
    const auto h = split_units(hypotheses[i], unit);
    const auto r = split_units(references[i], unit);
    total += align(h, r);
  }
  return total;
}

std::string format_report(const EditStats& s, Unit unit) {
  char rate[32];
  std::snprintf(rate, sizeof(rate), "%.4f", s.rate());
  std::string out;
  out += std::string("unit: ") + to_string(unit) + "\n";
  out += "pairs: " + std::to_string(s.pairs) + "\n";
  out += "substitutions: " + std::to_string(s.substitutions) + "\n";
  out += "insertions: " + std::to_string(s.insertions) + "\n";
  out += "deletions: " + std::to_string(s.deletions) + "\n";
  out += "errors: " + std::to_string(s.errors()) + "\n";
  out += "reference_units: " + std::to_string(s.reference_units) + "\n";
  out += std::string("rate: ") + rate + "\n";
  return out;
}

}  // namespace dlm
