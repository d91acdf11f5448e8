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

#ifndef DLM_SYNTHETIC_HPP
#define DLM_SYNTHETIC_HPP

// Desk-scale stand-in for a labelled/external-text corpus split.
//
// Sentences come from a word n-gram source over a small lexicon of letter
// strings. Letters are grouped into confusable pairs whose acoustic templates
// coincide (up to pair_separation), so the pair member can only be recovered
// from linguistic context. Some lexicon words have a "twin" that differs in
// one confusable letter. Each n-gram context licenses either the word or its
// twin, never both. Twins are the held-out words: labelled sentences that
// contain one are rejected, while the external text, validation and test
// splits follow the full source. Only a model that learns from the external
// text can spell a twin correctly.

#include <cstdint>
#include <filesystem>
#include <string>
#include <vector>

#include "dlm/config.hpp"
#include "dlm/data.hpp"

namespace dlm {

struct SyntheticTaskSpec {
  std::size_t alphabet_size = 12;
  std::size_t confusable_pairs = 3;
  double pair_separation = 0.0;
  std::size_t lexicon_size = 40;
  std::size_t twinned_words = 12;
  double twin_share = 0.5;  // chance that a context licenses the twin
  std::size_t min_word_length = 2;
  std::size_t max_word_length = 4;
  std::size_t ngram_order = 2;
  std::size_t branching = 4;
  std::size_t min_sentence_words = 2;
  std::size_t max_sentence_words = 4;
  std::size_t feature_dim = 8;
  std::size_t frames_per_token = 4;
  double noise = 0.3;
  double template_scale = 1.0;

  std::size_t labelled_size = 1500;
  std::size_t text_size = 15000;
  std::size_t valid_size = 300;
  std::size_t test_size = 300;

  // Reserved tokens, space and the letters.
  std::size_t vocab_size() const { return 4 + alphabet_size; }

  void validate() const;
  static SyntheticTaskSpec from_config(const KeyValues& kv);
  KeyValues to_config() const;
};

struct SyntheticCorpus {
  Vocabulary vocab;
  std::vector<std::string> lexicon;        // regular words
  std::vector<std::string> heldout_words;  // twins
  std::vector<Utterance> labelled;
  std::vector<Utterance> valid;
  std::vector<Utterance> test;
  std::vector<std::string> text;
  // Acoustic template per vocabulary id (reserved rows are zero).
  std::vector<std::vector<float>> templates;
};

SyntheticCorpus generate_synthetic(const SyntheticTaskSpec& spec, std::uint64_t seed);

// Writes vocab.txt, train.tsv, valid.tsv, test.tsv, feats/, text.txt,
// text_valid.txt, heldout_words.txt, spec.txt and split_report.txt.
void write_synthetic(const SyntheticCorpus& corpus, const SyntheticTaskSpec& spec,
                     const std::filesystem::path& out_dir);

// Number of whitespace-separated words in `lines` that appear in `words`.
std::size_t count_word_occurrences(const std::vector<std::string>& lines,
                                   const std::vector<std::string>& words);

}  // namespace dlm

#endif  // DLM_SYNTHETIC_HPP
