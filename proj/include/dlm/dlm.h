/* Copyright 2026 The dlm Authors.
 *
 * Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *    http://www.apache.org/licenses/LICENSE-2.0
 *
 * Unless required by applicable law or agreed to in writing, software
 * distributed under the License is distributed on an "AS IS" BASIS,
 * WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
 * See the License for the specific language governing permissions and
 * limitations under the License.
 */

#ifndef DLM_DLM_H
#define DLM_DLM_H

/* C interface to the dlm library.
 *
 * Every function returns a dlm_status. On failure a description is available
 * from dlm_last_error() until the next call on the same thread. Handles are
 * opaque; each *_new / *_load has a matching *_free that accepts NULL.
 */

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#define DLM_API __declspec(dllexport)
#else
#define DLM_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

/* Values are the process exit codes of the command-line tool. */
typedef enum dlm_status {
  DLM_OK = 0,
  DLM_ERR_INTERNAL = 1,
  DLM_ERR_CONFIG = 2,
  DLM_ERR_DATA = 3,
  DLM_ERR_NUMERIC = 4,
  DLM_ERR_COMPATIBILITY = 5
} dlm_status;

typedef struct dlm_config dlm_config;
typedef struct dlm_model dlm_model;

/* kind: 0 metric line, 1 warning. */
typedef void (*dlm_line_fn)(int kind, const char* line, void* user);

DLM_API const char* dlm_version(void);
DLM_API const char* dlm_last_error(void);

/* ---- configuration ---- */

/* Empty configuration: every key at its documented default. */
DLM_API dlm_status dlm_config_new(dlm_config** out);
/* Parses a key = value file; relative paths resolve against its directory. */
DLM_API dlm_status dlm_config_load(const char* path, dlm_config** out);
DLM_API dlm_status dlm_config_set(dlm_config* config, const char* key, const char* value);
/* Full resolved configuration as key = value text; free with dlm_string_free. */
DLM_API dlm_status dlm_config_dump(const dlm_config* config, char** text);
DLM_API void dlm_config_free(dlm_config* config);

DLM_API void dlm_string_free(char* text);

/* ---- commands ---- */

/* spec_path may be NULL for the default task. */
DLM_API dlm_status dlm_synth_data(const char* spec_path, const char* out_dir, uint64_t seed);

/* Trains an A1/A2 model; writes the checkpoint to out_checkpoint and the
 * metric log to the configured path (default: out_checkpoint + ".log"). */
DLM_API dlm_status dlm_train(const dlm_config* config, const char* out_checkpoint, dlm_line_fn on_line,
                             void* user);

/* Trains a standalone LM on the configured text corpus. */
DLM_API dlm_status dlm_train_lm(const dlm_config* config, const char* out_checkpoint, dlm_line_fn on_line,
                                void* user);

/* ---- models ---- */

DLM_API dlm_status dlm_model_load(const char* path, dlm_model** out);
DLM_API void dlm_model_free(dlm_model* model);
DLM_API dlm_status dlm_model_vocab_size(const dlm_model* model, size_t* out);
/* "A1", "A2" or "LM"; static storage. */
DLM_API dlm_status dlm_model_arch(const dlm_model* model, const char** out);

typedef struct dlm_decode_options {
  size_t beam;
  double beta;
  double max_length_ratio;
  size_t max_length; /* 0: use the ratio */
  int length_normalize;
  double coverage_weight;
} dlm_decode_options;

DLM_API void dlm_decode_options_default(dlm_decode_options* options);

/* Decodes every utterance of a manifest. lm may be NULL. Writes
 * "utt_id<TAB>hypothesis" lines to out_tsv and, when nbest_path is not NULL,
 * the n-best dump. A vocabulary disagreement between model, LM and vocab
 * file is DLM_ERR_COMPATIBILITY. */
DLM_API dlm_status dlm_decode_manifest(const dlm_model* model, const dlm_model* lm, const char* vocab_path,
                                       const char* manifest, const dlm_decode_options* options,
                                       const char* out_tsv, const char* nbest_path);

typedef struct dlm_score_result {
  size_t substitutions;
  size_t insertions;
  size_t deletions;
  size_t reference_units;
  size_t pairs;
  double rate;
} dlm_score_result;

/* unit: "char" or "word". report (optional) receives the text report; free
 * it with dlm_string_free. */
DLM_API dlm_status dlm_score(const char* hyp_tsv, const char* ref_manifest, const char* unit,
                             dlm_score_result* result, char** report);

#ifdef __cplusplus
}
#endif

#endif /* DLM_DLM_H */
