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

#include "dlm/error.hpp"

namespace dlm {

int status_code(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kConfig:
      return 2;
    case ErrorKind::kVocabulary:
    case ErrorKind::kInputTooShort:
    case ErrorKind::kParse:
    case ErrorKind::kIo:
    case ErrorKind::kFormat:
    case ErrorKind::kTruncated:
    case ErrorKind::kValidation:
      return 3;
    case ErrorKind::kNumericDomain:
    case ErrorKind::kDivergence:
      return 4;
    case ErrorKind::kCompatibility:
      return 5;
    case ErrorKind::kDimension:
    case ErrorKind::kContract:
      return 1;
  }
  return 1;
}

const char* to_string(ErrorKind kind) noexcept {
  switch (kind) {
    case ErrorKind::kDimension: return "dimension error";
    case ErrorKind::kNumericDomain: return "numeric-domain error";
    case ErrorKind::kContract: return "contract error";
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kVocabulary: return "vocabulary error";
    case ErrorKind::kInputTooShort: return "input-too-short error";
    case ErrorKind::kParse: return "parse error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kFormat: return "format error";
    case ErrorKind::kTruncated: return "truncation error";
    case ErrorKind::kValidation: return "validation error";
    case ErrorKind::kCompatibility: return "compatibility error";
    case ErrorKind::kDivergence: return "numeric divergence";
  }
  return "error";
}

}  // namespace dlm
