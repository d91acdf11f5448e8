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

#include "dlm/pipeline.hpp"

#include <charconv>
#include <cstdio>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "dlm/binary_io.hpp"
#include "dlm/error.hpp"
#include "dlm/synthetic.hpp"

namespace dlm {

const std::vector<std::string>& run_config_keys() {
  static const std::vector<std::string> keys = {
      "arch",           "encoder_layers",  "encoder_units",   "embedding_dim",   "decoder_units",
      "attention_dim",  "location_filters", "location_width", "init_scale",      "strategy",
      "alpha",          "batch_size",      "text_batch_size", "epochs",          "epochs_phase1",
      "epochs_phase2",  "epochs_phase3",   "patience",        "sort_window",     "rho",
      "epsilon",        "clip",            "seed",            "beam",            "beta",
      "max_length_ratio", "max_length",    "length_normalize", "coverage_weight", "data_dir",
      "train_manifest", "valid_manifest",  "text",            "text_valid",      "vocab",
      "metric_log"};
  return keys;
}

RunConfig RunConfig::from_config(const KeyValues& kv, const std::filesystem::path& base_dir) {
  const auto& keys = run_config_keys();
  kv.require_known(std::set<std::string>(keys.begin(), keys.end()), "run config");
  RunConfig c;
  c.base_dir = base_dir;
  ModelConfig& m = c.model;
  m.arch = parse_architecture(kv.get_string("arch", to_string(m.arch)));
  if (m.arch == Architecture::kLm) fail(ErrorKind::kConfig, "arch must be A1 or A2");
  m.encoder_layers = kv.get_uint("encoder_layers", m.encoder_layers);
  m.encoder_units = kv.get_uint("encoder_units", m.encoder_units);
  m.embedding_dim = kv.get_uint("embedding_dim", m.embedding_dim);
  m.decoder_units = kv.get_uint("decoder_units", m.decoder_units);
  m.attention_dim = kv.get_uint("attention_dim", m.attention_dim);
  m.location_filters = kv.get_uint("location_filters", m.location_filters);
  m.location_width = kv.get_uint("location_width", m.location_width);
  m.init_scale = static_cast<float>(kv.get_double("init_scale", m.init_scale));
  if (m.encoder_layers == 0 || m.encoder_units == 0 || m.embedding_dim == 0 || m.decoder_units == 0 ||
      m.attention_dim == 0 || m.location_filters == 0) {
    fail(ErrorKind::kConfig, "layer sizes must be >= 1");
  }
  if (m.location_width % 2 == 0) fail(ErrorKind::kConfig, "location_width must be odd");
  if (!(m.init_scale > 0.0f)) fail(ErrorKind::kConfig, "init_scale must be > 0");

  TrainConfig& t = c.train;
  t.strategy = parse_strategy(kv.get_string("strategy", to_string(t.strategy)));
  t.alpha = kv.get_double("alpha", t.alpha);
  t.batch_size = kv.get_uint("batch_size", t.batch_size);
  t.text_batch_size = kv.get_uint("text_batch_size", t.text_batch_size);
  t.epochs = kv.get_uint("epochs", t.epochs);
  for (int p = 1; p <= 3; ++p) {
    const std::string key = "epochs_phase" + std::to_string(p);
    if (!kv.has(key)) continue;
    t.phase_epochs.resize(p, t.epochs);
    t.phase_epochs[p - 1] = kv.get_uint(key, t.epochs);
  }
  t.patience = kv.get_uint("patience", t.patience);
  t.sort_window = kv.get_uint("sort_window", t.sort_window);
  t.optimizer.rho = kv.get_double("rho", t.optimizer.rho);
  t.optimizer.epsilon = kv.get_double("epsilon", t.optimizer.epsilon);
  t.optimizer.clip = kv.get_double("clip", t.optimizer.clip);
  t.seed = kv.get_uint("seed", t.seed);
  t.validate();

  BeamConfig& b = c.beam;
  b.beam = kv.get_uint("beam", b.beam);
  b.beta = kv.get_double("beta", b.beta);
  b.max_length_ratio = kv.get_double("max_length_ratio", b.max_length_ratio);
  b.max_length = kv.get_uint("max_length", b.max_length);
  b.length_normalize = kv.get_bool("length_normalize", b.length_normalize);
  b.coverage_weight = kv.get_double("coverage_weight", b.coverage_weight);
  if (b.beam == 0) fail(ErrorKind::kConfig, "beam must be >= 1");
  if (b.beta < 0.0) fail(ErrorKind::kConfig, "beta must be >= 0");
  if (!(b.max_length_ratio > 0.0)) fail(ErrorKind::kConfig, "max_length_ratio must be > 0");

  c.data_dir = kv.get_string("data_dir", c.data_dir);
  c.train_manifest = kv.get_string("train_manifest", "");
  c.valid_manifest = kv.get_string("valid_manifest", "");
  c.text = kv.get_string("text", "");
  c.text_valid = kv.get_string("text_valid", "");
  c.vocab = kv.get_string("vocab", "");
  c.metric_log = kv.get_string("metric_log", "");
  return c;
}

KeyValues RunConfig::to_config() const {
  KeyValues kv;
  auto u = [&](const std::string& k, std::uint64_t v) { kv.set(k, std::to_string(v)); };
  auto d = [&](const std::string& k, double v) { kv.set(k, format_double(v)); };
  auto s = [&](const std::string& k, const std::string& v) {
    if (!v.empty()) kv.set(k, v);
  };
  kv.set("arch", to_string(model.arch));
  u("encoder_layers", model.encoder_layers);
  u("encoder_units", model.encoder_units);
  u("embedding_dim", model.embedding_dim);
  u("decoder_units", model.decoder_units);
  u("attention_dim", model.attention_dim);
  u("location_filters", model.location_filters);
  u("location_width", model.location_width);
  {
    // Shortest float form, so 0.1f prints as 0.1.
    char buf[32];
    auto [end, ec] = std::to_chars(buf, buf + sizeof(buf), model.init_scale);
    kv.set("init_scale", std::string(buf, end));
  }
  kv.set("strategy", to_string(train.strategy));
  d("alpha", train.alpha);
  u("batch_size", train.batch_size);
  u("text_batch_size", train.text_batch_size);
  u("epochs", train.epochs);
  for (std::size_t p = 0; p < train.phase_epochs.size() && p < 3; ++p) {
    u("epochs_phase" + std::to_string(p + 1), train.phase_epochs[p]);
  }
  u("patience", train.patience);
  u("sort_window", train.sort_window);
  d("rho", train.optimizer.rho);
  d("epsilon", train.optimizer.epsilon);
  d("clip", train.optimizer.clip);
  u("seed", train.seed);
  u("beam", beam.beam);
  d("beta", beam.beta);
  d("max_length_ratio", beam.max_length_ratio);
  u("max_length", beam.max_length);
  kv.set("length_normalize", beam.length_normalize ? "true" : "false");
  d("coverage_weight", beam.coverage_weight);
  s("data_dir", data_dir);
  s("train_manifest", train_manifest);
  s("valid_manifest", valid_manifest);
  s("text", text);
  s("text_valid", text_valid);
  s("vocab", vocab);
  s("metric_log", metric_log);
  return kv;
}

std::filesystem::path RunConfig::resolve(const std::string& value, const char* fallback_name) const {
  std::filesystem::path p = value.empty() ? std::filesystem::path(data_dir) / fallback_name : std::filesystem::path(value);
  if (p.is_relative()) p = base_dir / p;
  return p.lexically_normal();
}

void synth_data(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir, std::uint64_t seed) {
  SyntheticTaskSpec spec;
  if (!spec_path.empty()) spec = SyntheticTaskSpec::from_config(KeyValues::load(spec_path));
  const SyntheticCorpus corpus = generate_synthetic(spec, seed);
  write_synthetic(corpus, spec, out_dir);
}

namespace {

// Opens the metric log for writing and forwards each line to it and `sink`.
class MetricWriter {
 public:
  MetricWriter(const std::filesystem::path& path, LineSink sink) : sink_(std::move(sink)) {
    out_.open(path, std::ios::binary | std::ios::trunc);
    if (!out_) fail(ErrorKind::kIo, "cannot open metric log " + path.string());
  }
  void operator()(const MetricLine& line) {
    const std::string text = format_metric_line(line);
    out_ << text << '\n';
    out_.flush();
    if (sink_) sink_(text);
  }

 private:
  std::ofstream out_;
  LineSink sink_;
};

std::filesystem::path metric_path(const RunConfig& config, const std::filesystem::path& out) {
  if (!config.metric_log.empty()) return config.resolve(config.metric_log, "");
  return std::filesystem::path(out.string() + ".log");
}

void warn_all(const TrainResult& result, const Sinks& sinks) {
  if (!sinks.warning) return;
  for (const auto& w : result.warnings) sinks.warning(w);
}

}  // namespace

TrainResult train_command(const RunConfig& config, const std::filesystem::path& out, const Sinks& sinks,
                          bool alpha_given) {
  if (config.train.strategy == Strategy::kNone && alpha_given && sinks.warning) {
    sinks.warning("alpha is unused with strategy none");
  }
  const Vocabulary vocab = Vocabulary::load(config.resolve(config.vocab, "vocab.txt"));
  const auto train = load_utterances(load_manifest(config.resolve(config.train_manifest, "train.tsv")), vocab);
  const auto valid = load_utterances(load_manifest(config.resolve(config.valid_manifest, "valid.tsv")), vocab);
  if (train.empty()) fail(ErrorKind::kValidation, "training manifest is empty");
  if (valid.empty()) fail(ErrorKind::kValidation, "validation manifest is empty");
  if (valid.front().features.dim(1) != train.front().features.dim(1)) {
    fail(ErrorKind::kValidation, "training and validation feature dimensions differ");
  }

  std::vector<std::vector<TokenId>> text, text_valid;
  const bool needs_text = config.train.strategy != Strategy::kNone;
  if (needs_text) {
    const auto lines = read_text_lines(config.resolve(config.text, "text.txt"));
    text = tokenize_corpus(lines, vocab);
  }
  if (config.train.strategy == Strategy::kTwo) {
    const auto lines = read_text_lines(config.resolve(config.text_valid, "text_valid.txt"));
    text_valid = tokenize_corpus(lines, vocab);
  }

  ModelConfig mc = config.model;
  mc.vocab_size = vocab.size();
  mc.feature_dim = train.front().features.dim(1);
  Rng init_rng = Rng(config.train.seed).fork(0x696e6974);
  Model model(mc, init_rng);

  MetricWriter writer(metric_path(config, out), sinks.metric);
  TrainingData data{train, valid, text, text_valid};
  TrainResult result = run_strategy(model, config.train, data, [&](const MetricLine& l) { writer(l); });
  warn_all(result, sinks);
  save_checkpoint(model, out);
  return result;
}

TrainResult train_lm_command(const RunConfig& config, const std::filesystem::path& out, const Sinks& sinks) {
  const Vocabulary vocab = Vocabulary::load(config.resolve(config.vocab, "vocab.txt"));
  const auto text = tokenize_corpus(read_text_lines(config.resolve(config.text, "text.txt")), vocab);
  if (text.empty()) fail(ErrorKind::kValidation, "text corpus is empty");
  std::vector<std::vector<TokenId>> text_valid;
  const auto valid_path = config.resolve(config.text_valid, "text_valid.txt");
  if (std::filesystem::exists(valid_path)) text_valid = tokenize_corpus(read_text_lines(valid_path), vocab);

  ModelConfig mc = config.model;
  mc.arch = Architecture::kLm;
  mc.vocab_size = vocab.size();
  Rng init_rng = Rng(config.train.seed).fork(0x6c6d);
  Model model(mc, init_rng);
  MetricWriter writer(metric_path(config, out), sinks.metric);
  TrainResult result = train_language_model(model, config.train, text, text_valid, [&](const MetricLine& l) { writer(l); });
  warn_all(result, sinks);
  save_checkpoint(model, out);
  return result;
}

std::vector<DecodedUtterance> decode_manifest(const Model& model, const Model* lm, const Vocabulary& vocab,
                                              const std::filesystem::path& manifest, const BeamConfig& beam) {
  if (model.arch() == Architecture::kLm) fail(ErrorKind::kConfig, "cannot decode with a standalone LM checkpoint");
  if (model.vocab_size() != vocab.size()) {
    fail(ErrorKind::kCompatibility, "model vocabulary size " + std::to_string(model.vocab_size()) +
                                        " does not match vocabulary file size " + std::to_string(vocab.size()));
  }
  if (lm != nullptr && lm->vocab_size() != model.vocab_size()) {
    fail(ErrorKind::kCompatibility, "fusion LM vocabulary size " + std::to_string(lm->vocab_size()) +
                                        " does not match model vocabulary size " + std::to_string(model.vocab_size()));
  }
  const auto entries = load_manifest(manifest);
  std::vector<DecodedUtterance> out;
  out.reserve(entries.size());
  for (const auto& e : entries) {
    const Tensor features = read_features(e.feature_path);
    if (features.dim(1) != model.config().feature_dim) {
      fail(ErrorKind::kCompatibility, "utterance " + e.id + ": feature dimension " + std::to_string(features.dim(1)) +
                                          ", model expects " + std::to_string(model.config().feature_dim));
    }
    DecodedUtterance d;
    d.id = e.id;
    d.result = beam_search(model, features, beam, lm);
    d.text = vocab.detokenize(d.result.best().tokens);
    out.push_back(std::move(d));
  }
  return out;
}

std::string format_hypotheses(const std::vector<DecodedUtterance>& decoded) {
  std::string out;
  for (const auto& d : decoded) out += d.id + "\t" + d.text + "\n";
  return out;
}

std::string format_nbest(const std::vector<DecodedUtterance>& decoded, const Vocabulary& vocab) {
  std::string out;
  char buf[128];
  for (const auto& d : decoded) {
    for (std::size_t r = 0; r < d.result.nbest.size(); ++r) {
      const Hypothesis& h = d.result.nbest[r];
      std::snprintf(buf, sizeof(buf), "\t%zu\t%.6f\t%.6f\t%.6f\t", r + 1, h.total, h.model_score, h.lm_score);
      out += d.id + buf + vocab.detokenize(h.tokens) + "\n";
    }
  }
  return out;
}

std::vector<std::pair<std::string, std::string>> read_hypotheses(const std::filesystem::path& path) {
  std::istringstream in(read_text_file(path));
  std::vector<std::pair<std::string, std::string>> out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto tab = line.find('\t');
    if (tab == std::string::npos || tab == 0) {
      fail(ErrorKind::kParse, path.string() + ":" + std::to_string(number) + ": expected 'utt_id<TAB>hypothesis'");
    }
    out.emplace_back(line.substr(0, tab), line.substr(tab + 1));
  }
  return out;
}

EditStats score_files(const std::filesystem::path& hyp_tsv, const std::filesystem::path& ref_manifest, Unit unit) {
  const auto hyps = read_hypotheses(hyp_tsv);
  if (hyps.empty()) fail(ErrorKind::kValidation, hyp_tsv.string() + ": no hypotheses");
  const auto refs = load_manifest(ref_manifest);
  std::map<std::string, std::string> ref_text;
  for (const auto& r : refs) ref_text[r.id] = r.transcript;
  std::string missing;
  std::set<std::string> seen;
  std::vector<std::string> h, r;
  for (const auto& [id, text] : hyps) {
    auto it = ref_text.find(id);
    if (it == ref_text.end()) {
      missing += (missing.empty() ? "" : ", ") + id;
      continue;
    }
    if (!seen.insert(id).second) fail(ErrorKind::kValidation, hyp_tsv.string() + ": duplicate id " + id);
    h.push_back(text);
    r.push_back(it->second);
  }
  if (!missing.empty()) fail(ErrorKind::kValidation, "hypothesis ids missing from the reference: " + missing);
  return error_rate(h, r, unit);
}

}  // namespace dlm
