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

#ifndef DLM_CONFIG_HPP
#define DLM_CONFIG_HPP

// Flat "key = value" files. '#' starts a comment line; blank lines are
// ignored; keys are unique. Typed accessors raise ErrorKind::kConfig naming
// the offending key.

#include <cstdint>
#include <filesystem>
#include <map>
#include <set>
#include <string>
#include <vector>

namespace dlm {

class KeyValues {
 public:
  static KeyValues parse(const std::string& text, const std::string& source = "config");
  static KeyValues load(const std::filesystem::path& path);

  bool has(const std::string& key) const { return values_.count(key) != 0; }
  const std::string& raw(const std::string& key) const;
  void set(const std::string& key, const std::string& value) { values_[key] = value; }
  const std::map<std::string, std::string>& entries() const { return values_; }

  // Rejects keys outside `known`, listing them in the message.
  void require_known(const std::set<std::string>& known, const std::string& what) const;

  std::string get_string(const std::string& key, const std::string& fallback) const;
  double get_double(const std::string& key, double fallback) const;
  std::int64_t get_int(const std::string& key, std::int64_t fallback) const;
  std::uint64_t get_uint(const std::string& key, std::uint64_t fallback) const;
  bool get_bool(const std::string& key, bool fallback) const;

  // Serialises in key order, one "key = value" per line.
  std::string to_string() const;

 private:
  std::map<std::string, std::string> values_;
};

// Shortest decimal text that parses back to the same double.
std::string format_double(double value);

}  // namespace dlm

#endif  // DLM_CONFIG_HPP
