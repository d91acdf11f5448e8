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

// dlm: command-line front end over the C API.

#include <cstdio>
#include <filesystem>
#include <string>

#include "CLI11.hpp"
#include "dlm/dlm.h"

namespace {

int report(dlm_status status) {
  if (status != DLM_OK) std::fprintf(stderr, "dlm: error: %s\n", dlm_last_error());
  return static_cast<int>(status);
}

void print_line(int kind, const char* line, void*) {
  if (kind == 0) {
    std::printf("%s\n", line);
    std::fflush(stdout);
  } else {
    std::fprintf(stderr, "dlm: warning: %s\n", line);
  }
}

// Owns a config handle for the duration of a command.
struct ConfigHandle {
  dlm_config* ptr = nullptr;
  ~ConfigHandle() { dlm_config_free(ptr); }
};

struct ModelHandle {
  dlm_model* ptr = nullptr;
  ~ModelHandle() { dlm_model_free(ptr); }
};

dlm_status set_if(dlm_config* cfg, const char* key, const std::string& value) {
  if (value.empty()) return DLM_OK;
  return dlm_config_set(cfg, key, value.c_str());
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"dlm: attention encoder-decoder ASR with a decoupled language-model subnet"};
  app.require_subcommand(1);
  app.set_version_flag("--version", std::string(dlm_version()));

  // synth-data
  std::string spec_path, synth_out;
  std::uint64_t synth_seed = 1;
  auto* synth = app.add_subcommand("synth-data", "Generate the synthetic labelled/text corpus");
  synth->add_option("--spec", spec_path, "Task spec (key = value); built-in defaults when omitted")
      ->check(CLI::ExistingFile);
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Generator seed")->capture_default_str();

  // train
  std::string train_config, train_arch, train_strategy, train_alpha, train_out, train_seed, train_log;
  auto* train = app.add_subcommand("train", "Train an A1/A2 model with an update strategy");
  train->add_option("--config", train_config, "Run config (key = value)")->required()->check(CLI::ExistingFile);
  train->add_option("--arch", train_arch, "A1 or A2 (default: config, else A2)")
      ->check(CLI::IsMember({"A1", "A2"}));
  train->add_option("--strategy", train_strategy, "none, 1 or 2 (default: config, else none)")
      ->check(CLI::IsMember({"none", "1", "2"}));
  train->add_option("--alpha", train_alpha, "Interpolation factor in [0, 1] (default: config, else 0.7)");
  train->add_option("--seed", train_seed, "Training seed (default: config, else 1)");
  train->add_option("--log", train_log, "Metric log path (default: <out>.log)");
  train->add_option("--out", train_out, "Output checkpoint")->required();

  // train-lm
  std::string lm_config, lm_out, lm_seed, lm_log;
  auto* train_lm = app.add_subcommand("train-lm", "Train a standalone LSTM LM on the external text");
  train_lm->add_option("--config", lm_config, "Run config (key = value)")->required()->check(CLI::ExistingFile);
  train_lm->add_option("--seed", lm_seed, "Training seed (default: config, else 1)");
  train_lm->add_option("--log", lm_log, "Metric log path (default: <out>.log)");
  train_lm->add_option("--out", lm_out, "Output checkpoint")->required();

  // decode
  dlm_decode_options options;
  dlm_decode_options_default(&options);
  std::string ckpt, manifest, lm_ckpt, vocab, decode_out, nbest;
  bool length_normalize = false;
  auto* decode = app.add_subcommand("decode", "Beam-search decode a manifest");
  decode->add_option("--ckpt", ckpt, "Model checkpoint")->required()->check(CLI::ExistingFile);
  decode->add_option("--manifest", manifest, "Manifest TSV to decode")->required()->check(CLI::ExistingFile);
  decode->add_option("--beam", options.beam, "Beam width")->capture_default_str()->check(CLI::PositiveNumber);
  decode->add_option("--lm", lm_ckpt, "External LM checkpoint for shallow fusion")->check(CLI::ExistingFile);
  decode->add_option("--beta", options.beta, "Fusion weight (used with --lm)")->capture_default_str();
  decode->add_option("--max-length-ratio", options.max_length_ratio, "Output length limit relative to T'")
      ->capture_default_str();
  decode->add_flag("--length-normalize", length_normalize, "Rank final hypotheses by score per token");
  decode->add_option("--coverage-weight", options.coverage_weight, "Coverage bonus weight")->capture_default_str();
  decode->add_option("--vocab", vocab, "Vocabulary file (default: vocab.txt beside the manifest)");
  decode->add_option("--nbest", nbest, "Optional n-best dump path");
  decode->add_option("--out", decode_out, "Hypothesis TSV")->required();

  // score
  std::string hyp, ref, unit = "char";
  auto* score = app.add_subcommand("score", "Score hypotheses against a manifest (CER/WER)");
  score->add_option("--hyp", hyp, "Hypothesis TSV")->required();
  score->add_option("--ref", ref, "Reference manifest")->required();
  score->add_option("--unit", unit, "char or word")->capture_default_str()->check(CLI::IsMember({"char", "word"}));

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : static_cast<int>(DLM_ERR_CONFIG);
  }

  if (*synth) {
    return report(dlm_synth_data(spec_path.empty() ? nullptr : spec_path.c_str(), synth_out.c_str(), synth_seed));
  }

  if (*train || *train_lm) {
    const bool lm = static_cast<bool>(*train_lm);
    ConfigHandle cfg;
    if (dlm_status s = dlm_config_load((lm ? lm_config : train_config).c_str(), &cfg.ptr); s != DLM_OK) {
      return report(s);
    }
    // Command-line flags override the file; paths given here are taken as is.
    auto absolute = [](const std::string& p) {
      return p.empty() ? p : std::filesystem::absolute(p).lexically_normal().string();
    };
    dlm_status s = DLM_OK;
    if (lm) {
      if (s == DLM_OK) s = set_if(cfg.ptr, "seed", lm_seed);
      if (s == DLM_OK) s = set_if(cfg.ptr, "metric_log", absolute(lm_log));
      if (s != DLM_OK) return report(s);
      return report(dlm_train_lm(cfg.ptr, lm_out.c_str(), print_line, nullptr));
    }
    if (s == DLM_OK) s = set_if(cfg.ptr, "arch", train_arch);
    if (s == DLM_OK) s = set_if(cfg.ptr, "strategy", train_strategy);
    if (s == DLM_OK) s = set_if(cfg.ptr, "alpha", train_alpha);
    if (s == DLM_OK) s = set_if(cfg.ptr, "seed", train_seed);
    if (s == DLM_OK) s = set_if(cfg.ptr, "metric_log", absolute(train_log));
    if (s != DLM_OK) return report(s);
    return report(dlm_train(cfg.ptr, train_out.c_str(), print_line, nullptr));
  }

  if (*decode) {
    options.length_normalize = length_normalize ? 1 : 0;
    if (vocab.empty()) vocab = (std::filesystem::path(manifest).parent_path() / "vocab.txt").string();
    ModelHandle model, lm;
    if (dlm_status s = dlm_model_load(ckpt.c_str(), &model.ptr); s != DLM_OK) return report(s);
    if (!lm_ckpt.empty()) {
      if (dlm_status s = dlm_model_load(lm_ckpt.c_str(), &lm.ptr); s != DLM_OK) return report(s);
    }
    return report(dlm_decode_manifest(model.ptr, lm.ptr, vocab.c_str(), manifest.c_str(), &options,
                                      decode_out.c_str(), nbest.empty() ? nullptr : nbest.c_str()));
  }

  if (*score) {
    char* text = nullptr;
    const dlm_status s = dlm_score(hyp.c_str(), ref.c_str(), unit.c_str(), nullptr, &text);
    if (s == DLM_OK) std::fputs(text, stdout);
    dlm_string_free(text);
    return report(s);
  }
  return 0;
}
