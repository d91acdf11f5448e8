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

#include "dlm/data.hpp"

#include <algorithm>
#include <cstring>
#include <set>
#include <sstream>

#include "dlm/binary_io.hpp"
#include "dlm/error.hpp"

namespace dlm {

// ---- vocabulary ---------------------------------------------------------------

std::vector<std::string> split_code_points(std::string_view text) {
  std::vector<std::string> out;
  std::size_t i = 0;
  while (i < text.size()) {
    const auto lead = static_cast<unsigned char>(text[i]);
    std::size_t n = 1;
    if (lead >= 0xF0 && lead < 0xF8) {
      n = 4;
    } else if (lead >= 0xE0) {
      n = lead < 0xF0 ? 3 : 1;
    } else if (lead >= 0xC0) {
      n = 2;
    }
    if (i + n > text.size()) n = 1;
    for (std::size_t k = 1; k < n; ++k) {
      if ((static_cast<unsigned char>(text[i + k]) & 0xC0) != 0x80) {
        n = 1;
        break;
      }
    }
    out.emplace_back(text.substr(i, n));
    i += n;
  }
  return out;
}

Vocabulary::Vocabulary() {
  append(kSosToken);
  append(kEosToken);
  append(kUnkToken);
}

void Vocabulary::append(const std::string& token) {
  if (token.empty()) fail(ErrorKind::kValidation, "vocabulary: empty token");
  if (index_.count(token)) fail(ErrorKind::kValidation, "vocabulary: duplicate token '" + token + "'");
  index_.emplace(token, static_cast<TokenId>(tokens_.size()));
  tokens_.push_back(token);
}

Vocabulary Vocabulary::from_symbols(std::span<const std::string> symbols) {
  Vocabulary v;
  for (const auto& s : symbols) v.append(s);
  return v;
}

Vocabulary Vocabulary::build(std::span<const std::string> texts) {
  std::set<std::string> seen;
  for (const auto& t : texts) {
    for (auto& cp : split_code_points(t)) seen.insert(std::move(cp));
  }
  std::vector<std::string> symbols(seen.begin(), seen.end());
  return from_symbols(symbols);
}

Vocabulary Vocabulary::load(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(line);
  }
  if (lines.size() < 3 || lines[0] != kSosToken || lines[1] != kEosToken || lines[2] != kUnkToken) {
    fail(ErrorKind::kValidation, path.string() + ": vocabulary must start with <sos>, <eos>, <unk>");
  }
  Vocabulary v;
  for (std::size_t i = 3; i < lines.size(); ++i) {
    if (lines[i].empty()) {
      fail(ErrorKind::kParse, path.string() + ":" + std::to_string(i + 1) + ": empty vocabulary entry");
    }
    v.append(lines[i]);
  }
  return v;
}

void Vocabulary::save(const std::filesystem::path& path) const {
  std::string text;
  for (const auto& t : tokens_) text += t + "\n";
  write_text_file(path, text);
}

const std::string& Vocabulary::token(TokenId id) const {
  if (id >= tokens_.size()) {
    fail(ErrorKind::kVocabulary, "token id " + std::to_string(id) + " outside vocabulary of " +
                                     std::to_string(tokens_.size()));
  }
  return tokens_[id];
}

TokenId Vocabulary::id(std::string_view token) const {
  auto it = index_.find(token);
  return it == index_.end() ? kUnkId : it->second;
}

bool Vocabulary::contains(std::string_view token) const { return index_.find(token) != index_.end(); }

std::vector<TokenId> Vocabulary::tokenize(std::string_view text) const {
  std::vector<TokenId> ids;
  for (const auto& cp : split_code_points(text)) {
    // Reserved names are multi-character, so a single code point never hits them.
    ids.push_back(id(cp));
  }
  return ids;
}

std::string Vocabulary::detokenize(std::span<const TokenId> ids) const {
  std::string out;
  for (TokenId t : ids) {
    if (t == kSosId || t == kEosId) continue;
    out += token(t);
  }
  return out;
}

// ---- features -----------------------------------------------------------------

namespace {
constexpr char kFeatureMagic[4] = {'F', 'E', 'A', '1'};
}  // namespace

std::vector<std::uint8_t> encode_features(const Tensor& features) {
  if (features.rank() != 2) fail(ErrorKind::kDimension, "features must be rank 2");
  ByteWriter out;
  out.bytes(kFeatureMagic, 4);
  out.u32(static_cast<std::uint32_t>(features.dim(0)));
  out.u32(static_cast<std::uint32_t>(features.dim(1)));
  for (float v : features.data()) out.f32(v);
  return out.take();
}

Tensor decode_features(std::span<const std::uint8_t> bytes, const std::string& what) {
  ByteReader in(bytes, what);
  char magic[4];
  in.bytes(magic, 4);
  if (std::memcmp(magic, kFeatureMagic, 4) != 0) fail(ErrorKind::kFormat, what + ": bad magic");
  const std::size_t t = in.u32();
  const std::size_t d = in.u32();
  if (t == 0 || d == 0) fail(ErrorKind::kFormat, what + ": empty feature matrix");
  const std::size_t n = t * d;
  if (in.remaining() < 4 * n) {
    fail(ErrorKind::kTruncated, what + ": header promises " + std::to_string(n) + " values, file holds " +
                                    std::to_string(in.remaining() / 4));
  }
  if (in.remaining() > 4 * n) fail(ErrorKind::kFormat, what + ": trailing bytes after feature data");
  std::vector<float> values(n);
  for (auto& v : values) v = in.f32();
  return Tensor::from_data({t, d}, std::move(values));
}

Tensor read_features(const std::filesystem::path& path) {
  return decode_features(read_file(path), path.string());
}

void write_features(const std::filesystem::path& path, const Tensor& features) {
  write_file(path, encode_features(features));
}

// ---- corpora ------------------------------------------------------------------

std::vector<ManifestEntry> load_manifest(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  const auto base = path.parent_path();
  std::vector<ManifestEntry> entries;
  std::map<std::string, std::size_t> first_line;
  std::vector<std::string> duplicates;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    std::vector<std::string> fields;
    std::size_t start = 0;
    for (;;) {
      const auto tab = line.find('\t', start);
      fields.push_back(line.substr(start, tab == std::string::npos ? std::string::npos : tab - start));
      if (tab == std::string::npos) break;
      start = tab + 1;
    }
    if (fields.size() != 3) {
      fail(ErrorKind::kParse, path.string() + ":" + std::to_string(number) + ": expected 3 tab-separated fields, got " +
                                  std::to_string(fields.size()));
    }
    if (fields[0].empty() || fields[1].empty()) {
      fail(ErrorKind::kParse, path.string() + ":" + std::to_string(number) + ": empty utterance id or feature path");
    }
    if (!first_line.emplace(fields[0], number).second) duplicates.push_back(fields[0]);
    std::filesystem::path feats(fields[1]);
    if (feats.is_relative()) feats = base / feats;
    entries.push_back({fields[0], feats, fields[2]});
  }
  if (!duplicates.empty()) {
    std::string list;
    for (const auto& d : duplicates) list += (list.empty() ? "" : ", ") + d;
    fail(ErrorKind::kValidation, path.string() + ": duplicate utterance id(s): " + list);
  }
  return entries;
}

void save_manifest(const std::filesystem::path& path, std::span<const ManifestEntry> entries,
                   const std::filesystem::path& relative_to) {
  std::string text;
  for (const auto& e : entries) {
    const auto rel = e.feature_path.lexically_relative(relative_to);
    text += e.id + "\t" + rel.generic_string() + "\t" + e.transcript + "\n";
  }
  write_text_file(path, text);
}

std::vector<Utterance> load_utterances(std::span<const ManifestEntry> entries, const Vocabulary& vocab) {
  std::vector<Utterance> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    Utterance u;
    u.id = e.id;
    u.features = read_features(e.feature_path);
    if (u.features.dim(0) < 4) {
      fail(ErrorKind::kValidation, "utterance " + e.id + ": " + std::to_string(u.features.dim(0)) +
                                       " frames, at least 4 required");
    }
    u.tokens = vocab.tokenize(e.transcript);
    if (u.tokens.empty()) fail(ErrorKind::kValidation, "utterance " + e.id + ": empty transcript");
    u.tokens.push_back(kEosId);
    u.transcript = e.transcript;
    out.push_back(std::move(u));
  }
  if (out.size() > 1) {
    const std::size_t d = out.front().features.dim(1);
    for (const auto& u : out) {
      if (u.features.dim(1) != d) {
        fail(ErrorKind::kValidation, "utterance " + u.id + ": feature dimension " +
                                         std::to_string(u.features.dim(1)) + ", expected " + std::to_string(d));
      }
    }
  }
  return out;
}

std::vector<std::string> read_text_lines(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (!line.empty()) lines.push_back(line);
  }
  return lines;
}

std::vector<std::vector<TokenId>> tokenize_corpus(std::span<const std::string> lines,
                                                  const Vocabulary& vocab) {
  std::vector<std::vector<TokenId>> out;
  out.reserve(lines.size());
  for (const auto& l : lines) {
    auto ids = vocab.tokenize(l);
    ids.push_back(kEosId);
    out.push_back(std::move(ids));
  }
  return out;
}

// ---- batching -----------------------------------------------------------------

std::vector<LabelledBatch> make_batches(std::span<const Utterance> utterances, std::size_t batch_size,
                                        std::uint64_t seed, std::size_t sort_window) {
  if (batch_size == 0) fail(ErrorKind::kConfig, "batch size must be at least 1");
  Rng rng(seed);
  std::vector<std::size_t> order(utterances.size());
  for (std::size_t i = 0; i < order.size(); ++i) order[i] = i;
  rng.shuffle(std::span<std::size_t>(order));
  if (sort_window > 1) {
    for (std::size_t b = 0; b < order.size(); b += sort_window) {
      const auto e = std::min(order.size(), b + sort_window);
      std::stable_sort(order.begin() + b, order.begin() + e, [&](std::size_t x, std::size_t y) {
        return utterances[x].features.dim(0) < utterances[y].features.dim(0);
      });
    }
  }
  std::vector<LabelledBatch> batches;
  for (std::size_t b = 0; b < order.size(); b += batch_size) {
    const auto e = std::min(order.size(), b + batch_size);
    LabelledBatch batch;
    for (std::size_t i = b; i < e; ++i) batch.max_frames = std::max(batch.max_frames, utterances[order[i]].features.dim(0));
    for (std::size_t i = b; i < e; ++i) {
      const Utterance& u = utterances[order[i]];
      const std::size_t t = u.features.dim(0);
      const std::size_t d = u.features.dim(1);
      batch.ids.push_back(u.id);
      if (t == batch.max_frames) {
        batch.features.push_back(u.features);
      } else {
        std::vector<float> padded(batch.max_frames * d, 0.0f);
        std::copy(u.features.data().begin(), u.features.data().end(), padded.begin());
        batch.features.push_back(Tensor::from_data({batch.max_frames, d}, std::move(padded)));
      }
      batch.frames.push_back(t);
      batch.targets.push_back(u.tokens);
    }
    batches.push_back(std::move(batch));
  }
  rng.shuffle(std::span<LabelledBatch>(batches));
  return batches;
}

TextStream::TextStream(std::span<const std::vector<TokenId>> corpus, std::size_t batch_size, Rng rng)
    : corpus_(corpus), batch_size_(batch_size), rng_(rng) {
  if (corpus_.empty()) fail(ErrorKind::kConfig, "text corpus is empty");
  if (batch_size_ == 0) fail(ErrorKind::kConfig, "text batch size must be at least 1");
  order_.resize(corpus_.size());
  cursor_ = order_.size();  // first next() starts a pass
}

std::size_t TextStream::batches_per_pass() const { return (corpus_.size() + batch_size_ - 1) / batch_size_; }

void TextStream::reshuffle() {
  for (std::size_t i = 0; i < order_.size(); ++i) order_[i] = i;
  rng_.shuffle(std::span<std::size_t>(order_));
  cursor_ = 0;
  ++passes_;
}

TextBatch TextStream::next() {
  if (cursor_ >= order_.size()) reshuffle();
  TextBatch batch;
  const auto e = std::min(order_.size(), cursor_ + batch_size_);
  for (; cursor_ < e; ++cursor_) batch.sequences.push_back(corpus_[order_[cursor_]]);
  ++served_;
  return batch;
}

std::vector<TextBatch> text_batches(std::span<const std::vector<TokenId>> corpus, std::size_t batch_size) {
  if (batch_size == 0) fail(ErrorKind::kConfig, "text batch size must be at least 1");
  std::vector<TextBatch> out;
  for (std::size_t b = 0; b < corpus.size(); b += batch_size) {
    TextBatch batch;
    for (std::size_t i = b; i < std::min(corpus.size(), b + batch_size); ++i) batch.sequences.push_back(corpus[i]);
    out.push_back(std::move(batch));
  }
  return out;
}

}  // namespace dlm
