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


#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "doctest.h"
#include "dlm/decode.hpp"
#include "dlm/error.hpp"
#include "dlm/training.hpp"
#include "grad_check.hpp"
#include "test_util.hpp"
#include "toy_task.hpp"

using namespace dlm;
using dlm::testing::error_of;
using dlm::testing::is_marker;
using dlm::testing::random_tensor;

namespace {

ModelConfig tiny_config(Architecture arch, std::size_t vocab) {
  ModelConfig c;
  c.arch = arch;
  c.vocab_size = vocab;
  c.feature_dim = 3;
  c.encoder_layers = 1;
  c.encoder_units = 3;
  c.embedding_dim = 3;
  c.decoder_units = 5;
  c.attention_dim = 3;
  c.location_filters = 2;
  c.location_width = 3;
  // Large weights give peaked, varied distributions.
  c.init_scale = 1.5f;
  return c;
}

struct Scored {
  std::vector<TokenId> tokens;
  double total = -INFINITY;
};

// Depth-first enumeration of every <eos>-terminated sequence of length <= limit,
// scored with the same accumulation as the search.
Scored exhaustive(const Model& model, const Model* lm, double beta, const Tensor& features, std::size_t limit) {
  Tape enc(false);
  const DecoderSession session = model.begin(enc, features);
  const DecoderSession lm_session = lm ? lm->begin_text_only() : DecoderSession{};
  Scored best;
  std::vector<TokenId> prefix;
  std::function<void(const DecoderState&, const DecoderState&, double, double)> visit =
      [&](const DecoderState& s, const DecoderState& ls, double ms, double lms) {
        Tape tape(false);
        const StepResult r = model.step(tape, session, s);
        StepResult lr;
        if (lm) lr = lm->step(tape, lm_session, ls);
        for (TokenId v = 1; v < model.vocab_size(); ++v) {
          const double m2 = ms + r.log_probs.data()[v];
          const double l2 = lm ? lms + lr.log_probs.data()[v] : 0.0;
          const double total = m2 + beta * l2;
          prefix.push_back(v);
          if (v == kEosId) {
            if (total > best.total) best = {prefix, total};
          } else if (prefix.size() < limit) {
            DecoderState ns = r.next, nls = lm ? lr.next : DecoderState{};
            ns.prev_token = v;
            nls.prev_token = v;
            visit(ns, nls, m2, l2);
          }
          prefix.pop_back();
        }
      };
  visit(model.initial_state(session), lm ? lm->initial_state(lm_session) : DecoderState{}, 0.0, 0.0);
  return best;
}

std::size_t dp_distance(const std::vector<std::string>& a, const std::vector<std::string>& b) {
  std::vector<std::vector<std::size_t>> d(a.size() + 1, std::vector<std::size_t>(b.size() + 1));
  for (std::size_t i = 0; i <= a.size(); ++i) d[i][0] = i;
  for (std::size_t j = 0; j <= b.size(); ++j) d[0][j] = j;
  for (std::size_t i = 1; i <= a.size(); ++i) {
    for (std::size_t j = 1; j <= b.size(); ++j) {
      d[i][j] = std::min({d[i - 1][j] + 1, d[i][j - 1] + 1, d[i - 1][j - 1] + (a[i - 1] == b[j - 1] ? 0 : 1)});
    }
  }
  return d[a.size()][b.size()];
}

}  // namespace

TEST_CASE("beam width 1 is greedy decoding") {
  for (int seed = 0; seed < 50; ++seed) {
    Rng rng(seed);
    const auto arch = seed % 2 ? Architecture::kA1 : Architecture::kA2;
    Model m(tiny_config(arch, 3 + seed % 4), rng);
    const Tensor x = random_tensor(rng, {8 + static_cast<std::size_t>(seed % 5), 3}, -2, 2, false);
    BeamConfig cfg;
    cfg.beam = 1;
    const auto beam = beam_search(m, x, cfg);
    const auto greedy = greedy_decode(m, x, decode_length_limit(cfg, (x.dim(0) + 3) / 4));
    CHECK(beam.best().tokens == greedy);
  }
}

TEST_CASE("wide beam equals exhaustive enumeration") {
  int instances = 0;
  for (std::size_t vocab : {2u, 3u, 4u}) {
    for (std::size_t limit = 1; limit <= 4; ++limit) {
      for (int seed = 0; seed < 6; ++seed) {
        Rng rng(100 * vocab + 10 * limit + seed);
        const auto arch = seed % 2 ? Architecture::kA1 : Architecture::kA2;
        Model m(tiny_config(arch, vocab), rng);
        ModelConfig lc = tiny_config(Architecture::kLm, vocab);
        Model lm(lc, rng);
        // T = 8 frames gives T' = 2.
        const Tensor x = random_tensor(rng, {8, 3}, -2, 2, false);
        for (double beta : {0.0, 0.5}) {
          BeamConfig cfg;
          cfg.beam = 256;  // >= V^4
          cfg.max_length = limit;
          cfg.beta = beta;
          const Model* fusion = beta > 0 ? &lm : nullptr;
          const auto got = beam_search(m, x, cfg, fusion);
          const auto want = exhaustive(m, fusion, beta, x, limit);
          CHECK(got.best().tokens == want.tokens);
          CHECK(got.best().total == doctest::Approx(want.total).epsilon(1e-12));
          ++instances;
        }
      }
    }
  }
  CHECK(instances == 144);
}

TEST_CASE("n-best ordering and fusion decomposition") {
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 500);
    Model m(tiny_config(Architecture::kA2, 5), rng);
    Model lm(tiny_config(Architecture::kLm, 5), rng);
    const Tensor x = random_tensor(rng, {12, 3}, -2, 2, false);
    BeamConfig cfg;
    cfg.beam = 6;
    cfg.beta = 0.3;
    const auto r = beam_search(m, x, cfg, &lm);
    REQUIRE(!r.nbest.empty());
    CHECK(r.nbest.size() <= 6);
    for (std::size_t i = 1; i < r.nbest.size(); ++i) CHECK(r.nbest[i - 1].final_score >= r.nbest[i].final_score);
    for (const auto& h : r.nbest) {
      CHECK(h.total == h.model_score + 0.3 * h.lm_score);
      CHECK(h.finished == (!h.tokens.empty() && h.tokens.back() == kEosId));
      if (!h.finished) continue;
      Tape tape(false);
      const double model_nll = m.forward_asr(tape, x, h.tokens).loss.item();
      const double lm_nll = lm.forward_lm(tape, h.tokens).loss.item();
      CHECK(h.model_score == doctest::Approx(-model_nll).epsilon(1e-5));
      CHECK(h.lm_score == doctest::Approx(-lm_nll).epsilon(1e-5));
    }
  }
}

TEST_CASE("fusion weight zero ignores the LM") {
  for (int seed = 0; seed < 10; ++seed) {
    Rng rng(seed + 900);
    Model m(tiny_config(Architecture::kA1, 6), rng);
    Model lm(tiny_config(Architecture::kLm, 6), rng);
    const Tensor x = random_tensor(rng, {10, 3}, -2, 2, false);
    BeamConfig cfg;
    cfg.beta = 0.0;
    const auto with = beam_search(m, x, cfg, &lm);
    const auto without = beam_search(m, x, cfg);
    REQUIRE(with.nbest.size() == without.nbest.size());
    for (std::size_t i = 0; i < with.nbest.size(); ++i) {
      CHECK(with.nbest[i].tokens == without.nbest[i].tokens);
      CHECK(with.nbest[i].total == without.nbest[i].total);
    }
  }
}

TEST_CASE("widening the beam never lowers the best score when the wide beam is exhaustive") {
  // A wider but still pruned beam can in principle fall behind a narrower one,
  // so the guarantee is checked against the unpruned width, and the general
  // case only reported.
  int narrower_won = 0;
  for (int seed = 0; seed < 30; ++seed) {
    Rng rng(seed + 1300);
    Model m(tiny_config(Architecture::kA2, 4), rng);
    const Tensor x = random_tensor(rng, {8, 3}, -2, 2, false);
    double previous = -INFINITY;
    for (std::size_t w : {1u, 2u, 3u, 256u}) {
      BeamConfig cfg;
      cfg.beam = w;
      cfg.max_length = 4;
      const auto r = beam_search(m, x, cfg);
      // Unfinished fallbacks have fewer terms and are not comparable.
      if (!r.best().finished) continue;
      const double best = r.best().total;
      if (w == 256u) {
        CHECK(best >= previous);
      } else if (best < previous) {
        ++narrower_won;
      }
      previous = std::max(previous, best);
    }
  }
  MESSAGE("pruned widths losing to a narrower beam: " << narrower_won);
}

TEST_CASE("beam search errors") {
  Rng rng(3);
  Model m(tiny_config(Architecture::kA2, 4), rng);
  Model lm(tiny_config(Architecture::kLm, 5), rng);
  const Tensor x = random_tensor(rng, {8, 3}, -2, 2, false);
  BeamConfig cfg;
  const auto msg = error_of(ErrorKind::kConfig, [&] { beam_search(m, x, cfg, &lm); });
  CHECK(msg.find("vocabulary") != std::string::npos);
  cfg.beam = 0;
  CHECK_FALSE(is_marker(error_of(ErrorKind::kConfig, [&] { beam_search(m, x, cfg); })));
  cfg.beam = 2;
  cfg.beta = -0.1;
  CHECK_FALSE(is_marker(error_of(ErrorKind::kConfig, [&] { beam_search(m, x, cfg); })));
}

TEST_CASE("length limit") {
  BeamConfig cfg;
  CHECK(decode_length_limit(cfg, 5) == 10);
  cfg.max_length_ratio = 0.3;
  CHECK(decode_length_limit(cfg, 5) == 2);
  CHECK(decode_length_limit(cfg, 0) == 1);
  cfg.max_length = 7;
  CHECK(decode_length_limit(cfg, 5) == 7);
}

TEST_CASE("error rate examples") {
  const std::vector<std::string> same{"ab c", "d"};
  CHECK(error_rate(same, same, Unit::kChar).rate() == 0.0);

  const std::vector<std::string> hyp{"sitting"}, ref{"kitten"};
  const auto s = error_rate(hyp, ref, Unit::kChar);
  CHECK(s.errors() == 3);
  CHECK(s.substitutions == 2);
  CHECK(s.insertions == 1);
  CHECK(s.reference_units == 6);

  const std::vector<std::string> empty{""}, abc{"a b c"};
  const auto w = error_rate(empty, abc, Unit::kWord);
  CHECK(w.deletions == 3);
  CHECK(w.rate() == 1.0);
  // Empty reference: insertions over a denominator of one.
  const auto ins = error_rate(abc, empty, Unit::kWord);
  CHECK(ins.insertions == 3);
  CHECK(ins.rate() == 3.0);

  const std::vector<std::string> none;
  CHECK_FALSE(is_marker(error_of(ErrorKind::kContract, [&] { error_rate(none, none, Unit::kChar); })));
  CHECK_FALSE(is_marker(error_of(ErrorKind::kContract, [&] { error_rate(same, hyp, Unit::kChar); })));
}

TEST_CASE("unit splitting") {
  CHECK(split_units("ab c", Unit::kChar) == std::vector<std::string>{"a", "b", " ", "c"});
  CHECK(split_units("  ab   c ", Unit::kWord) == std::vector<std::string>{"ab", "c"});
  CHECK(split_units("\xc3\xa9t\xc3\xa9", Unit::kChar).size() == 3);
  CHECK(parse_unit("word") == Unit::kWord);
  CHECK_FALSE(is_marker(error_of(ErrorKind::kConfig, [] { parse_unit("phone"); })));
}

TEST_CASE("edit distance matches the dynamic-programming oracle") {
  Rng rng(77);
  for (int trial = 0; trial < 1000; ++trial) {
    auto draw = [&] {
      std::vector<std::string> v(rng.below(13));
      for (auto& u : v) u = std::string(1, static_cast<char>('a' + rng.below(4)));
      return v;
    };
    const auto h = draw(), r = draw();
    const auto s = align(h, r);
    REQUIRE(s.errors() == dp_distance(h, r));
    CHECK(s.reference_units == r.size());
    CHECK(r.size() - s.deletions + s.insertions == h.size());
    const auto back = align(r, h);
    CHECK(back.errors() == s.errors());
    CHECK((s.errors() == 0) == (h == r));
  }
}

TEST_CASE("report format") {
  EditStats s;
  s.substitutions = 1;
  s.insertions = 2;
  s.deletions = 0;
  s.reference_units = 9;
  s.pairs = 2;
  CHECK(format_report(s, Unit::kWord) ==
        "unit: word\npairs: 2\nsubstitutions: 1\ninsertions: 2\ndeletions: 0\nerrors: 3\n"
        "reference_units: 9\nrate: 0.3333\n");
}

TEST_CASE("external LM training") {
  dlm::testing::ToyTask task;
  for (std::uint64_t seed : {1u, 2u, 3u}) {
    ModelConfig c = dlm::testing::toy_model_config(Architecture::kLm, task.spec);
    Rng rng(seed);
    Model lm(c, rng);
    AdaDelta opt(lm.params(), AdaDeltaConfig{});
    double prev = perplexity(lm, task.text);
    for (int epoch = 0; epoch < 5; ++epoch) {
      lm_epoch(lm, shuffled_text_batches(task.text, 10, seed + epoch), opt);
      const double now = perplexity(lm, task.text);
      CHECK(now < prev);
      prev = now;
    }
  }
}

TEST_CASE("external LM overfits a single sentence") {
  dlm::testing::ToyTask task;
  ModelConfig c = dlm::testing::toy_model_config(Architecture::kLm, task.spec);
  Rng rng(4);
  Model lm(c, rng);
  // One distinct sentence, repeated so that an epoch is more than one step.
  const std::vector<std::vector<TokenId>> one(100, task.text[0]);
  TrainConfig cfg;
  cfg.epochs = 50;
  cfg.patience = 50;
  cfg.text_batch_size = 10;
  const double before = perplexity(lm, one);
  train_language_model(lm, cfg, one, one);
  const double after = perplexity(lm, one);
  MESSAGE("perplexity " << before << " -> " << after);
  CHECK(after < 1.1);
}

TEST_CASE("LM checkpoint round trip") {
  dlm::testing::ToyTask task;
  Rng rng(5);
  Model lm(dlm::testing::toy_model_config(Architecture::kLm, task.spec), rng);
  const Model back = deserialize_checkpoint(serialize_checkpoint(lm));
  CHECK(back.arch() == Architecture::kLm);
  CHECK(perplexity(back, task.text_valid) == perplexity(lm, task.text_valid));
}
