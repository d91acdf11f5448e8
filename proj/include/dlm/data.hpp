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

#ifndef DLM_DATA_HPP
#define DLM_DATA_HPP

#include <cstdint>
#include <filesystem>
#include <map>
#include <span>
#include <string>
#include <string_view>
#include <vector>

#include "dlm/model.hpp"
#include "dlm/rng.hpp"
#include "dlm/tensor.hpp"

namespace dlm {

// ---- vocabulary ---------------------------------------------------------------

// Character vocabulary. Ids 0, 1, 2 are <sos>, <eos>, <unk>; every other
// entry is a single UTF-8 code point.
class Vocabulary {
 public:
  Vocabulary();  // reserved tokens only

  // Reserved tokens followed by `symbols` in the given order.
  static Vocabulary from_symbols(std::span<const std::string> symbols);
  // Every code point seen in `texts`, sorted bytewise.
  static Vocabulary build(std::span<const std::string> texts);

  // One token per line, reserved tokens first.
  static Vocabulary load(const std::filesystem::path& path);
  void save(const std::filesystem::path& path) const;

  std::size_t size() const { return tokens_.size(); }
  const std::string& token(TokenId id) const;
  // kUnkId when absent.
  TokenId id(std::string_view token) const;
  bool contains(std::string_view token) const;

  std::vector<TokenId> tokenize(std::string_view text) const;
  // Reserved ids are dropped, except <unk>, which is spelled out.
  std::string detokenize(std::span<const TokenId> ids) const;

  bool operator==(const Vocabulary& other) const { return tokens_ == other.tokens_; }

 private:
  void append(const std::string& token);

  std::vector<std::string> tokens_;
  std::map<std::string, TokenId, std::less<>> index_;
};

inline constexpr const char* kSosToken = "<sos>";
inline constexpr const char* kEosToken = "<eos>";
inline constexpr const char* kUnkToken = "<unk>";

// Splits UTF-8 into code points; malformed bytes become single-byte units.
std::vector<std::string> split_code_points(std::string_view text);

// ---- features -----------------------------------------------------------------

// "FEA1", u32 T, u32 d, then T*d little-endian f32 row-major.
Tensor read_features(const std::filesystem::path& path);
void write_features(const std::filesystem::path& path, const Tensor& features);
std::vector<std::uint8_t> encode_features(const Tensor& features);
Tensor decode_features(std::span<const std::uint8_t> bytes, const std::string& what = "features");

// ---- corpora ------------------------------------------------------------------

struct ManifestEntry {
  std::string id;
  std::filesystem::path feature_path;  // resolved against the manifest directory
  std::string transcript;
};

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path);
void save_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries,
                   const std::filesystem::path& relative_to);

struct Utterance {
  std::string id;
  Tensor features;              // [T x d]
  std::vector<TokenId> tokens;  // transcript followed by <eos>
  std::string transcript;
};

// Reads every feature file; T < 4 or an empty transcript is a validation
// error naming the utterance.
std::vector<Utterance> load_utterances(std::span<const ManifestEntry> entries,
                                       const Vocabulary& vocab);

// Sentence list, one per non-empty line.
std::vector<std::string> read_text_lines(const std::filesystem::path& path);
// Tokenised sentences with <eos> appended.
std::vector<std::vector<TokenId>> tokenize_corpus(std::span<const std::string> lines,
                                                  const Vocabulary& vocab);

// ---- batching -----------------------------------------------------------------

struct LabelledBatch {
  std::vector<std::string> ids;
  std::vector<Tensor> features;     // each zero padded to max_frames rows
  std::vector<std::size_t> frames;  // true lengths
  std::vector<std::vector<TokenId>> targets;
  std::size_t max_frames = 0;

  std::size_t size() const { return targets.size(); }
};

struct TextBatch {
  std::vector<std::vector<TokenId>> sequences;
  std::size_t size() const { return sequences.size(); }
};

// Shuffles with `seed`, sorts by frame count inside consecutive windows of
// `sort_window` items (0 disables sorting), cuts batches and shuffles the
// batch order. The last batch may be short.
std::vector<LabelledBatch> make_batches(std::span<const Utterance> utterances,
                                        std::size_t batch_size, std::uint64_t seed,
                                        std::size_t sort_window = 0);

// Endless stream over a text corpus. Each pass is a fresh permutation; a pass
// is cut into ceil(N / batch_size) batches.
class TextStream {
 public:
  TextStream(std::span<const std::vector<TokenId>> corpus, std::size_t batch_size, Rng rng);

  TextBatch next();
  std::size_t batches_per_pass() const;
  std::size_t passes_started() const { return passes_; }
  std::size_t batches_served() const { return served_; }

 private:
  void reshuffle();

  std::span<const std::vector<TokenId>> corpus_;
  std::size_t batch_size_;
  Rng rng_;
  std::vector<std::size_t> order_;
  std::size_t cursor_ = 0;
  std::size_t passes_ = 0;
  std::size_t served_ = 0;
};

// Fixed batches over a text corpus in file order, for evaluation.
std::vector<TextBatch> text_batches(std::span<const std::vector<TokenId>> corpus,
                                    std::size_t batch_size);

}  // namespace dlm

#endif  // DLM_DATA_HPP
