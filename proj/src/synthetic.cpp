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

#include "dlm/synthetic.hpp"

#include <algorithm>
#include <cstdio>
#include <map>
#include <set>
#include <sstream>
#include <unordered_map>

#include "dlm/binary_io.hpp"
#include "dlm/error.hpp"

namespace dlm {

namespace {

void require(bool ok, const std::string& field, const std::string& what) {
  if (!ok) fail(ErrorKind::kConfig, "synthetic spec: " + field + " " + what);
}

const std::set<std::string>& known_keys() {
  static const std::set<std::string> keys = {
      "alphabet_size",  "confusable_pairs",   "pair_separation",    "lexicon_size",
      "twinned_words",  "twin_share",         "min_word_length",    "max_word_length",
      "ngram_order",    "branching",          "min_sentence_words", "max_sentence_words",
      "feature_dim",    "frames_per_token",   "noise",              "template_scale",
      "labelled_size",  "text_size",          "valid_size",         "test_size"};
  return keys;
}

constexpr std::size_t kStart = static_cast<std::size_t>(-1);

// Word source. Surface word ids: [0, L) regular words, [L, L + H) twins.
class WordSource {
 public:
  WordSource(const SyntheticTaskSpec& spec, std::uint64_t seed, std::size_t lexicon,
             std::vector<std::size_t> twin_of_base)
      : spec_(spec), seed_(seed), lexicon_(lexicon), twin_of_base_(std::move(twin_of_base)) {}

  std::vector<std::size_t> sentence(Rng& rng) {
    const std::size_t n = spec_.min_sentence_words +
                          rng.below(spec_.max_sentence_words - spec_.min_sentence_words + 1);
    std::vector<std::size_t> words;
    std::vector<std::size_t> context(spec_.ngram_order - 1, kStart);
    for (std::size_t i = 0; i < n; ++i) {
      const auto& succ = successors(context);
      double u = rng.uniform() * succ.total;
      std::size_t pick = succ.words.back();
      for (std::size_t k = 0; k < succ.words.size(); ++k) {
        u -= succ.weights[k];
        if (u < 0.0) {
          pick = succ.words[k];
          break;
        }
      }
      words.push_back(pick);
      if (!context.empty()) {
        context.erase(context.begin());
        context.push_back(pick);
      }
    }
    return words;
  }

 private:
  struct Successors {
    std::vector<std::size_t> words;
    std::vector<double> weights;
    double total = 0.0;
  };

  const Successors& successors(const std::vector<std::size_t>& context) {
    std::uint64_t key = 0x51ed270b27a1f3c5ULL;
    for (auto w : context) key = hash_combine(key, static_cast<std::uint64_t>(w));
    auto it = cache_.find(key);
    if (it != cache_.end()) return it->second;
    Rng r(hash_combine(seed_, key));
    std::vector<std::size_t> bases(lexicon_);
    for (std::size_t i = 0; i < lexicon_; ++i) bases[i] = i;
    r.shuffle(std::span<std::size_t>(bases));
    Successors s;
    for (std::size_t k = 0; k < spec_.branching; ++k) {
      std::size_t w = bases[k];
      const bool twin_drawn = r.uniform() < spec_.twin_share;
      if (twin_of_base_[w] != kStart && twin_drawn) w = twin_of_base_[w];
      s.words.push_back(w);
      s.weights.push_back(1.0 / static_cast<double>(k + 1));
      s.total += s.weights.back();
    }
    return cache_.emplace(key, std::move(s)).first->second;
  }

  const SyntheticTaskSpec& spec_;
  std::uint64_t seed_;
  std::size_t lexicon_;
  std::vector<std::size_t> twin_of_base_;  // surface id of the twin or kStart
  std::unordered_map<std::uint64_t, Successors> cache_;
};

Tensor synthesize(const std::vector<TokenId>& ids, const SyntheticTaskSpec& spec,
                  const std::vector<std::vector<float>>& templates, Rng& rng) {
  const std::size_t d = spec.feature_dim;
  const std::size_t t = ids.size() * spec.frames_per_token;
  std::vector<float> values(t * d);
  std::size_t row = 0;
  for (TokenId id : ids) {
    for (std::size_t f = 0; f < spec.frames_per_token; ++f, ++row) {
      for (std::size_t j = 0; j < d; ++j) {
        const double noise = spec.noise > 0.0 ? spec.noise * rng.normal() : 0.0;
        values[row * d + j] = static_cast<float>(templates[id][j] + noise);
      }
    }
  }
  return Tensor::from_data({t, d}, std::move(values));
}

std::string render(const std::vector<std::size_t>& words, const std::vector<std::string>& surface) {
  std::string out;
  for (std::size_t i = 0; i < words.size(); ++i) {
    if (i) out += ' ';
    out += surface[words[i]];
  }
  return out;
}

}  // namespace

void SyntheticTaskSpec::validate() const {
  require(alphabet_size >= 2 && alphabet_size <= 26, "alphabet_size", "must be in [2, 26]");
  require(2 * confusable_pairs <= alphabet_size, "confusable_pairs", "needs 2 letters per pair");
  require(pair_separation >= 0.0, "pair_separation", "must be >= 0");
  require(lexicon_size >= 1, "lexicon_size", "must be >= 1");
  require(twinned_words <= lexicon_size, "twinned_words", "must not exceed lexicon_size");
  require(twinned_words == 0 || confusable_pairs >= 1, "twinned_words", "requires confusable_pairs >= 1");
  require(twin_share >= 0.0 && twin_share <= 1.0, "twin_share", "must be in [0, 1]");
  require(min_word_length >= 1, "min_word_length", "must be >= 1");
  require(max_word_length >= min_word_length, "max_word_length", "must be >= min_word_length");
  require(ngram_order >= 1, "ngram_order", "must be >= 1");
  require(branching >= 1 && branching <= lexicon_size, "branching", "must be in [1, lexicon_size]");
  require(min_sentence_words >= 1, "min_sentence_words", "must be >= 1");
  require(max_sentence_words >= min_sentence_words, "max_sentence_words", "must be >= min_sentence_words");
  require(feature_dim >= 1, "feature_dim", "must be >= 1");
  require(frames_per_token >= 2, "frames_per_token", "must be >= 2");
  require(noise >= 0.0, "noise", "must be >= 0");
  require(template_scale > 0.0, "template_scale", "must be > 0");
  require(labelled_size >= 1, "labelled_size", "must be >= 1");
  require(text_size >= 1, "text_size", "must be >= 1");
  require(valid_size >= 1, "valid_size", "must be >= 1");
  require(test_size >= 1, "test_size", "must be >= 1");
  const std::size_t shortest = min_sentence_words * min_word_length + (min_sentence_words - 1);
  require(shortest * frames_per_token >= 4, "frames_per_token",
          "too small: the shortest sentence would have fewer than 4 frames");
}

SyntheticTaskSpec SyntheticTaskSpec::from_config(const KeyValues& kv) {
  kv.require_known(known_keys(), "synthetic spec");
  SyntheticTaskSpec s;
  s.alphabet_size = kv.get_uint("alphabet_size", s.alphabet_size);
  s.confusable_pairs = kv.get_uint("confusable_pairs", s.confusable_pairs);
  s.pair_separation = kv.get_double("pair_separation", s.pair_separation);
  s.lexicon_size = kv.get_uint("lexicon_size", s.lexicon_size);
  s.twinned_words = kv.get_uint("twinned_words", s.twinned_words);
  s.twin_share = kv.get_double("twin_share", s.twin_share);
  s.min_word_length = kv.get_uint("min_word_length", s.min_word_length);
  s.max_word_length = kv.get_uint("max_word_length", s.max_word_length);
  s.ngram_order = kv.get_uint("ngram_order", s.ngram_order);
  s.branching = kv.get_uint("branching", s.branching);
  s.min_sentence_words = kv.get_uint("min_sentence_words", s.min_sentence_words);
  s.max_sentence_words = kv.get_uint("max_sentence_words", s.max_sentence_words);
  s.feature_dim = kv.get_uint("feature_dim", s.feature_dim);
  s.frames_per_token = kv.get_uint("frames_per_token", s.frames_per_token);
  s.noise = kv.get_double("noise", s.noise);
  s.template_scale = kv.get_double("template_scale", s.template_scale);
  s.labelled_size = kv.get_uint("labelled_size", s.labelled_size);
  s.text_size = kv.get_uint("text_size", s.text_size);
  s.valid_size = kv.get_uint("valid_size", s.valid_size);
  s.test_size = kv.get_uint("test_size", s.test_size);
  s.validate();
  return s;
}

KeyValues SyntheticTaskSpec::to_config() const {
  KeyValues kv;
  auto u = [&](const char* k, std::size_t v) { kv.set(k, std::to_string(v)); };
  auto d = [&](const char* k, double v) { kv.set(k, format_double(v)); };
  u("alphabet_size", alphabet_size);
  u("confusable_pairs", confusable_pairs);
  d("pair_separation", pair_separation);
  u("lexicon_size", lexicon_size);
  u("twinned_words", twinned_words);
  d("twin_share", twin_share);
  u("min_word_length", min_word_length);
  u("max_word_length", max_word_length);
  u("ngram_order", ngram_order);
  u("branching", branching);
  u("min_sentence_words", min_sentence_words);
  u("max_sentence_words", max_sentence_words);
  u("feature_dim", feature_dim);
  u("frames_per_token", frames_per_token);
  d("noise", noise);
  d("template_scale", template_scale);
  u("labelled_size", labelled_size);
  u("text_size", text_size);
  u("valid_size", valid_size);
  u("test_size", test_size);
  return kv;
}

SyntheticCorpus generate_synthetic(const SyntheticTaskSpec& spec, std::uint64_t seed) {
  spec.validate();
  SyntheticCorpus corpus;
  const Rng root(seed);

  std::vector<std::string> symbols = {" "};
  for (std::size_t i = 0; i < spec.alphabet_size; ++i) symbols.emplace_back(1, static_cast<char>('a' + i));
  corpus.vocab = Vocabulary::from_symbols(symbols);
  const TokenId first_letter = corpus.vocab.id("a");

  // Lexicon of distinct random words.
  Rng lex_rng = root.fork(1);
  std::set<std::string> taken;
  const std::size_t attempts = 1000 * (spec.lexicon_size + spec.twinned_words) + 1000;
  for (std::size_t a = 0; corpus.lexicon.size() < spec.lexicon_size; ++a) {
    if (a == attempts) {
      fail(ErrorKind::kConfig, "synthetic spec: lexicon_size too large for alphabet_size and word lengths");
    }
    const std::size_t len = spec.min_word_length + lex_rng.below(spec.max_word_length - spec.min_word_length + 1);
    std::string w;
    for (std::size_t i = 0; i < len; ++i) w += static_cast<char>('a' + lex_rng.below(spec.alphabet_size));
    if (taken.insert(w).second) corpus.lexicon.push_back(w);
  }

  // Twins: flip one confusable letter (partner of letter 2k is 2k+1).
  const std::size_t lexicon = corpus.lexicon.size();
  std::vector<std::size_t> twin_of_base(lexicon, kStart);
  std::vector<std::size_t> candidates(lexicon);
  for (std::size_t i = 0; i < lexicon; ++i) candidates[i] = i;
  lex_rng.shuffle(std::span<std::size_t>(candidates));
  for (std::size_t b : candidates) {
    if (corpus.heldout_words.size() == spec.twinned_words) break;
    const std::string& base = corpus.lexicon[b];
    std::vector<std::size_t> positions;
    for (std::size_t i = 0; i < base.size(); ++i) {
      if (static_cast<std::size_t>(base[i] - 'a') < 2 * spec.confusable_pairs) positions.push_back(i);
    }
    if (positions.empty()) continue;
    std::string twin = base;
    const std::size_t pos = positions[lex_rng.below(positions.size())];
    twin[pos] = static_cast<char>('a' + ((twin[pos] - 'a') ^ 1));
    if (!taken.insert(twin).second) continue;
    twin_of_base[b] = lexicon + corpus.heldout_words.size();
    corpus.heldout_words.push_back(twin);
  }
  if (corpus.heldout_words.size() < spec.twinned_words) {
    fail(ErrorKind::kConfig, "synthetic spec: twinned_words: only " + std::to_string(corpus.heldout_words.size()) +
                                 " lexicon words can be twinned");
  }
  std::vector<std::string> surface = corpus.lexicon;
  surface.insert(surface.end(), corpus.heldout_words.begin(), corpus.heldout_words.end());

  // Templates; the odd member of a confusable pair copies its partner.
  Rng tpl_rng = root.fork(2);
  corpus.templates.assign(corpus.vocab.size(), std::vector<float>(spec.feature_dim, 0.0f));
  for (TokenId id = 3; id < corpus.vocab.size(); ++id) {
    const std::size_t letter = id >= first_letter ? id - first_letter : kStart;
    const bool odd_pair_member = letter != kStart && letter < 2 * spec.confusable_pairs && (letter % 2 == 1);
    for (std::size_t j = 0; j < spec.feature_dim; ++j) {
      if (odd_pair_member) {
        corpus.templates[id][j] =
            static_cast<float>(corpus.templates[id - 1][j] + spec.pair_separation * tpl_rng.normal());
      } else {
        corpus.templates[id][j] = static_cast<float>(spec.template_scale * tpl_rng.normal());
      }
    }
  }

  WordSource source(spec, hash_combine(seed, 0x736f75726365ULL), lexicon, twin_of_base);
  auto is_twin = [&](std::size_t w) { return w >= lexicon; };

  auto labelled_split = [&](std::size_t count, std::uint64_t salt, const char* prefix, bool reject_twins) {
    Rng sent_rng = root.fork(salt);
    Rng feat_rng = root.fork(salt + 100);
    std::vector<Utterance> out;
    const std::size_t cap = 1000 * count + 1000;
    for (std::size_t a = 0; out.size() < count; ++a) {
      if (a == cap) {
        fail(ErrorKind::kConfig, "synthetic spec: cannot draw enough sentences without held-out words");
      }
      const auto words = source.sentence(sent_rng);
      if (reject_twins && std::any_of(words.begin(), words.end(), is_twin)) continue;
      Utterance u;
      char id[32];
      std::snprintf(id, sizeof(id), "%s%06zu", prefix, out.size() + 1);
      u.id = id;
      u.transcript = render(words, surface);
      u.tokens = corpus.vocab.tokenize(u.transcript);
      u.features = synthesize(u.tokens, spec, corpus.templates, feat_rng);
      u.tokens.push_back(kEosId);
      out.push_back(std::move(u));
    }
    return out;
  };
  corpus.labelled = labelled_split(spec.labelled_size, 10, "p", true);
  corpus.valid = labelled_split(spec.valid_size, 11, "v", false);
  corpus.test = labelled_split(spec.test_size, 12, "e", false);

  Rng text_rng = root.fork(13);
  corpus.text.reserve(spec.text_size);
  for (std::size_t i = 0; i < spec.text_size; ++i) corpus.text.push_back(render(source.sentence(text_rng), surface));

  // The external text is only informative if it carries held-out words.
  if (spec.twinned_words > 0) {
    std::vector<std::string> test_lines;
    for (const auto& u : corpus.test) test_lines.push_back(u.transcript);
    if (count_word_occurrences(corpus.text, corpus.heldout_words) == 0 ||
        count_word_occurrences(test_lines, corpus.heldout_words) == 0) {
      fail(ErrorKind::kConfig, "synthetic spec: held-out words never occur in the text or test split; "
                               "raise twin_share, twinned_words or the split sizes");
    }
  }
  return corpus;
}

std::size_t count_word_occurrences(const std::vector<std::string>& lines, const std::vector<std::string>& words) {
  const std::set<std::string> wanted(words.begin(), words.end());
  std::size_t n = 0;
  for (const auto& line : lines) {
    std::istringstream in(line);
    std::string w;
    while (in >> w) n += wanted.count(w);
  }
  return n;
}

void write_synthetic(const SyntheticCorpus& corpus, const SyntheticTaskSpec& spec,
                     const std::filesystem::path& out_dir) {
  std::error_code ec;
  std::filesystem::create_directories(out_dir / "feats", ec);
  if (ec) fail(ErrorKind::kIo, "cannot create " + (out_dir / "feats").string() + ": " + ec.message());

  corpus.vocab.save(out_dir / "vocab.txt");

  auto write_split = [&](const std::vector<Utterance>& utts, const char* name) {
    std::vector<ManifestEntry> entries;
    for (const auto& u : utts) {
      const auto path = out_dir / "feats" / (u.id + ".fea");
      write_features(path, u.features);
      entries.push_back({u.id, path, u.transcript});
    }
    save_manifest(out_dir / name, entries, out_dir);
  };
  write_split(corpus.labelled, "train.tsv");
  write_split(corpus.valid, "valid.tsv");
  write_split(corpus.test, "test.tsv");

  auto lines_text = [](const std::vector<std::string>& lines) {
    std::string s;
    for (const auto& l : lines) s += l + "\n";
    return s;
  };
  std::vector<std::string> valid_lines;
  for (const auto& u : corpus.valid) valid_lines.push_back(u.transcript);
  write_text_file(out_dir / "text.txt", lines_text(corpus.text));
  write_text_file(out_dir / "text_valid.txt", lines_text(valid_lines));
  write_text_file(out_dir / "heldout_words.txt", lines_text(corpus.heldout_words));
  write_text_file(out_dir / "spec.txt", spec.to_config().to_string());

  // Mirrors a data-division table: one row per split.
  std::string report = "split\tkind\tcount\tframes\ttokens\theldout_occurrences\n";
  auto row = [&](const char* name, const std::vector<Utterance>& utts) {
    std::size_t frames = 0, tokens = 0;
    std::vector<std::string> lines;
    for (const auto& u : utts) {
      frames += u.features.dim(0);
      tokens += u.tokens.size() - 1;
      lines.push_back(u.transcript);
    }
    report += std::string(name) + "\tlabelled\t" + std::to_string(utts.size()) + "\t" + std::to_string(frames) + "\t" +
              std::to_string(tokens) + "\t" + std::to_string(count_word_occurrences(lines, corpus.heldout_words)) + "\n";
  };
  row("train", corpus.labelled);
  std::size_t text_tokens = 0;
  for (const auto& l : corpus.text) text_tokens += split_code_points(l).size();
  report += "text\ttext\t" + std::to_string(corpus.text.size()) + "\t0\t" + std::to_string(text_tokens) + "\t" +
            std::to_string(count_word_occurrences(corpus.text, corpus.heldout_words)) + "\n";
  row("valid", corpus.valid);
  row("test", corpus.test);
  write_text_file(out_dir / "split_report.txt", report);
}

}  // namespace dlm
