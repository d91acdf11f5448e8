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

#ifndef DLM_ERROR_HPP
#define DLM_ERROR_HPP

#include <stdexcept>
#include <string>

namespace dlm {

enum class ErrorKind {
  kDimension,
  kNumericDomain,
  kContract,
  kConfig,
  kVocabulary,
  kInputTooShort,
  kParse,
  kIo,
  kFormat,
  kTruncated,
  kValidation,
  kCompatibility,
  kDivergence,
};

// Every failure raised by the library carries a kind so that the C API and
// the command line tool can map it onto a stable status code.
class Error : public std::runtime_error {
 public:
  Error(ErrorKind kind, const std::string& what)
      : std::runtime_error(what), kind_(kind) {}

  ErrorKind kind() const noexcept { return kind_; }

 private:
  ErrorKind kind_;
};

// Process exit / C status code for an error kind:
// 2 config, 3 data, 4 numeric, 5 compatibility, 1 anything else.
int status_code(ErrorKind kind) noexcept;

const char* to_string(ErrorKind kind) noexcept;

[[noreturn]] inline void fail(ErrorKind kind, const std::string& what) {
  throw Error(kind, what);
}

}  // namespace dlm

#endif  // DLM_ERROR_HPP
