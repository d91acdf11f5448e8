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

#ifndef DLM_PIPELINE_HPP
#define DLM_PIPELINE_HPP

// End-to-end commands over files on disk: the layer behind the C API.

#include <filesystem>
#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "dlm/config.hpp"
#include "dlm/decode.hpp"
#include "dlm/model.hpp"
#include "dlm/training.hpp"

namespace dlm {

// Every experiment setting in one flat key = value file. Relative paths are
// resolved against `base_dir` (the config file's directory).
struct RunConfig {
  ModelConfig model;
  TrainConfig train;
  BeamConfig beam;

  std::string data_dir = ".";
  // Empty means data_dir/<default name>.
  std::string train_manifest;  // train.tsv
  std::string valid_manifest;  // valid.tsv
  std::string text;            // text.txt
  std::string text_valid;      // text_valid.txt
  std::string vocab;           // vocab.txt
  std::string metric_log;      // <checkpoint>.log

  std::filesystem::path base_dir = ".";

  static RunConfig from_config(const KeyValues& kv, const std::filesystem::path& base_dir = ".");
  KeyValues to_config() const;

  std::filesystem::path resolve(const std::string& value, const char* fallback_name) const;
};

const std::vector<std::string>& run_config_keys();

using LineSink = std::function<void(const std::string&)>;

struct Sinks {
  LineSink metric;   // metric log lines
  LineSink warning;  // human-readable warnings
};

void synth_data(const std::filesystem::path& spec_path, const std::filesystem::path& out_dir,
                std::uint64_t seed);

// Trains an A1/A2 model per the config, writes the best-validation checkpoint
// to `out` and the metric log next to it (or to config.metric_log).
TrainResult train_command(const RunConfig& config, const std::filesystem::path& out, const Sinks& sinks,
                          bool alpha_given);

// Trains a standalone LM on the external text.
TrainResult train_lm_command(const RunConfig& config, const std::filesystem::path& out, const Sinks& sinks);

struct DecodedUtterance {
  std::string id;
  std::string text;
  BeamResult result;
};

// Checks model/LM/vocabulary agreement (kCompatibility) and decodes every
// manifest entry in order.
std::vector<DecodedUtterance> decode_manifest(const Model& model, const Model* lm, const Vocabulary& vocab,
                                              const std::filesystem::path& manifest, const BeamConfig& beam);

std::string format_hypotheses(const std::vector<DecodedUtterance>& decoded);
std::string format_nbest(const std::vector<DecodedUtterance>& decoded, const Vocabulary& vocab);

// "utt_id<TAB>hypothesis" lines.
std::vector<std::pair<std::string, std::string>> read_hypotheses(const std::filesystem::path& path);

// Scores a hypothesis TSV against a manifest. Ids missing from the reference
// and empty hypothesis files are validation errors.
EditStats score_files(const std::filesystem::path& hyp_tsv, const std::filesystem::path& ref_manifest, Unit unit);

}  // namespace dlm

#endif  // DLM_PIPELINE_HPP
