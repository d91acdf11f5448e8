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

#include "dlm/dlm.h"

#include <cstdlib>
#include <cstring>
#include <exception>
#include <memory>
#include <new>
#include <string>

#include "dlm/binary_io.hpp"
#include "dlm/error.hpp"
#include "dlm/pipeline.hpp"

struct dlm_config {
  dlm::KeyValues values;
  std::filesystem::path base_dir = ".";
};

struct dlm_model {
  explicit dlm_model(dlm::Model m) : model(std::move(m)) {}
  dlm::Model model;
};

namespace {

thread_local std::string g_last_error;

dlm_status to_status(int code) { return static_cast<dlm_status>(code); }

template <typename Fn>
dlm_status guarded(Fn&& fn) {
  g_last_error.clear();
  try {
    fn();
    return DLM_OK;
  } catch (const dlm::Error& e) {
    g_last_error = std::string(dlm::to_string(e.kind())) + ": " + e.what();
    return to_status(dlm::status_code(e.kind()));
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
  } catch (const std::exception& e) {
    g_last_error = e.what();
  } catch (...) {
    g_last_error = "unknown error";
  }
  return DLM_ERR_INTERNAL;
}

void require(const void* p, const char* what) {
  if (p == nullptr) dlm::fail(dlm::ErrorKind::kContract, std::string(what) + " must not be NULL");
}

char* copy_string(const std::string& s) {
  char* out = static_cast<char*>(std::malloc(s.size() + 1));
  if (out == nullptr) throw std::bad_alloc();
  std::memcpy(out, s.c_str(), s.size() + 1);
  return out;
}

dlm::Sinks make_sinks(dlm_line_fn fn, void* user) {
  dlm::Sinks sinks;
  if (fn != nullptr) {
    sinks.metric = [fn, user](const std::string& l) { fn(0, l.c_str(), user); };
    sinks.warning = [fn, user](const std::string& l) { fn(1, l.c_str(), user); };
  }
  return sinks;
}

dlm::BeamConfig to_beam(const dlm_decode_options& o) {
  dlm::BeamConfig b;
  b.beam = o.beam;
  b.beta = o.beta;
  b.max_length_ratio = o.max_length_ratio;
  b.max_length = o.max_length;
  b.length_normalize = o.length_normalize != 0;
  b.coverage_weight = o.coverage_weight;
  return b;
}

}  // namespace

extern "C" {

const char* dlm_version(void) { return "1.0.0"; }

const char* dlm_last_error(void) { return g_last_error.c_str(); }

dlm_status dlm_config_new(dlm_config** out) {
  return guarded([&] {
    require(out, "out");
    *out = new dlm_config();
  });
}

dlm_status dlm_config_load(const char* path, dlm_config** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    auto cfg = std::make_unique<dlm_config>();
    cfg->values = dlm::KeyValues::load(path);
    cfg->base_dir = std::filesystem::path(path).parent_path();
    if (cfg->base_dir.empty()) cfg->base_dir = ".";
    dlm::RunConfig::from_config(cfg->values, cfg->base_dir);  // validate eagerly
    *out = cfg.release();
  });
}

dlm_status dlm_config_set(dlm_config* config, const char* key, const char* value) {
  return guarded([&] {
    require(config, "config");
    require(key, "key");
    require(value, "value");
    dlm::KeyValues trial = config->values;
    trial.set(key, value);
    dlm::RunConfig::from_config(trial, config->base_dir);
    config->values = std::move(trial);
  });
}

dlm_status dlm_config_dump(const dlm_config* config, char** text) {
  return guarded([&] {
    require(config, "config");
    require(text, "text");
    *text = copy_string(dlm::RunConfig::from_config(config->values, config->base_dir).to_config().to_string());
  });
}

void dlm_config_free(dlm_config* config) { delete config; }

void dlm_string_free(char* text) { std::free(text); }

dlm_status dlm_synth_data(const char* spec_path, const char* out_dir, uint64_t seed) {
  return guarded([&] {
    require(out_dir, "out_dir");
    dlm::synth_data(spec_path ? std::filesystem::path(spec_path) : std::filesystem::path(), out_dir, seed);
  });
}

dlm_status dlm_train(const dlm_config* config, const char* out_checkpoint, dlm_line_fn on_line, void* user) {
  return guarded([&] {
    require(config, "config");
    require(out_checkpoint, "out_checkpoint");
    const auto run = dlm::RunConfig::from_config(config->values, config->base_dir);
    dlm::train_command(run, out_checkpoint, make_sinks(on_line, user), config->values.has("alpha"));
  });
}

dlm_status dlm_train_lm(const dlm_config* config, const char* out_checkpoint, dlm_line_fn on_line, void* user) {
  return guarded([&] {
    require(config, "config");
    require(out_checkpoint, "out_checkpoint");
    const auto run = dlm::RunConfig::from_config(config->values, config->base_dir);
    dlm::train_lm_command(run, out_checkpoint, make_sinks(on_line, user));
  });
}

dlm_status dlm_model_load(const char* path, dlm_model** out) {
  return guarded([&] {
    require(path, "path");
    require(out, "out");
    *out = new dlm_model(dlm::load_checkpoint(path));
  });
}

void dlm_model_free(dlm_model* model) { delete model; }

dlm_status dlm_model_vocab_size(const dlm_model* model, size_t* out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = model->model.vocab_size();
  });
}

dlm_status dlm_model_arch(const dlm_model* model, const char** out) {
  return guarded([&] {
    require(model, "model");
    require(out, "out");
    *out = dlm::to_string(model->model.arch());
  });
}

void dlm_decode_options_default(dlm_decode_options* options) {
  if (options == nullptr) return;
  const dlm::BeamConfig b;
  options->beam = b.beam;
  options->beta = b.beta;
  options->max_length_ratio = b.max_length_ratio;
  options->max_length = b.max_length;
  options->length_normalize = b.length_normalize ? 1 : 0;
  options->coverage_weight = b.coverage_weight;
}

dlm_status dlm_decode_manifest(const dlm_model* model, const dlm_model* lm, const char* vocab_path,
                               const char* manifest, const dlm_decode_options* options, const char* out_tsv,
                               const char* nbest_path) {
  return guarded([&] {
    require(model, "model");
    require(vocab_path, "vocab_path");
    require(manifest, "manifest");
    require(out_tsv, "out_tsv");
    dlm_decode_options defaults;
    dlm_decode_options_default(&defaults);
    const dlm::BeamConfig beam = to_beam(options ? *options : defaults);
    const auto vocab = dlm::Vocabulary::load(vocab_path);
    const auto decoded = dlm::decode_manifest(model->model, lm ? &lm->model : nullptr, vocab, manifest, beam);
    dlm::write_text_file(out_tsv, dlm::format_hypotheses(decoded));
    if (nbest_path != nullptr) dlm::write_text_file(nbest_path, dlm::format_nbest(decoded, vocab));
  });
}

dlm_status dlm_score(const char* hyp_tsv, const char* ref_manifest, const char* unit, dlm_score_result* result,
                     char** report) {
  return guarded([&] {
    require(hyp_tsv, "hyp_tsv");
    require(ref_manifest, "ref_manifest");
    require(unit, "unit");
    const dlm::Unit u = dlm::parse_unit(unit);
    const dlm::EditStats s = dlm::score_files(hyp_tsv, ref_manifest, u);
    if (result != nullptr) {
      result->substitutions = s.substitutions;
      result->insertions = s.insertions;
      result->deletions = s.deletions;
      result->reference_units = s.reference_units;
      result->pairs = s.pairs;
      result->rate = s.rate();
    }
    if (report != nullptr) *report = copy_string(dlm::format_report(s, u));
  });
}

}  // extern "C"
