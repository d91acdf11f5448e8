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

#include "dlm/config.hpp"

#include <charconv>
#include <sstream>

#include "dlm/binary_io.hpp"
#include "dlm/error.hpp"

namespace dlm {

namespace {

std::string trim(const std::string& s) {
  const auto b = s.find_first_not_of(" \t\r");
  if (b == std::string::npos) return "";
  const auto e = s.find_last_not_of(" \t\r");
  return s.substr(b, e - b + 1);
}

}  // namespace

KeyValues KeyValues::parse(const std::string& text, const std::string& source) {
  KeyValues kv;
  std::istringstream in(text);
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    const std::string body = trim(line);
    if (body.empty() || body[0] == '#') continue;
    const auto eq = body.find('=');
    if (eq == std::string::npos) {
      fail(ErrorKind::kConfig, source + ":" + std::to_string(number) + ": expected 'key = value'");
    }
    const std::string key = trim(body.substr(0, eq));
    const std::string value = trim(body.substr(eq + 1));
    if (key.empty()) fail(ErrorKind::kConfig, source + ":" + std::to_string(number) + ": empty key");
    if (kv.has(key)) {
      fail(ErrorKind::kConfig, source + ":" + std::to_string(number) + ": duplicate key '" + key + "'");
    }
    kv.values_[key] = value;
  }
  return kv;
}

KeyValues KeyValues::load(const std::filesystem::path& path) {
  std::string text;
  try {
    text = read_text_file(path);
  } catch (const Error& e) {
    fail(ErrorKind::kConfig, e.what());
  }
  return parse(text, path.string());
}

const std::string& KeyValues::raw(const std::string& key) const {
  auto it = values_.find(key);
  if (it == values_.end()) fail(ErrorKind::kConfig, "missing key '" + key + "'");
  return it->second;
}

void KeyValues::require_known(const std::set<std::string>& known, const std::string& what) const {
  std::string unknown;
  for (const auto& [key, value] : values_) {
    if (!known.count(key)) unknown += (unknown.empty() ? "" : ", ") + key;
  }
  if (!unknown.empty()) fail(ErrorKind::kConfig, what + ": unknown key(s): " + unknown);
}

std::string KeyValues::get_string(const std::string& key, const std::string& fallback) const {
  return has(key) ? raw(key) : fallback;
}

double KeyValues::get_double(const std::string& key, double fallback) const {
  if (!has(key)) return fallback;
  const std::string& s = raw(key);
  double v = 0.0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorKind::kConfig, "key '" + key + "': not a number: '" + s + "'");
  }
  return v;
}

std::int64_t KeyValues::get_int(const std::string& key, std::int64_t fallback) const {
  if (!has(key)) return fallback;
  const std::string& s = raw(key);
  std::int64_t v = 0;
  auto [ptr, ec] = std::from_chars(s.data(), s.data() + s.size(), v);
  if (ec != std::errc() || ptr != s.data() + s.size()) {
    fail(ErrorKind::kConfig, "key '" + key + "': not an integer: '" + s + "'");
  }
  return v;
}

std::uint64_t KeyValues::get_uint(const std::string& key, std::uint64_t fallback) const {
  if (!has(key)) return fallback;
  const std::int64_t v = get_int(key, 0);
  if (v < 0) fail(ErrorKind::kConfig, "key '" + key + "': must be non-negative");
  return static_cast<std::uint64_t>(v);
}

bool KeyValues::get_bool(const std::string& key, bool fallback) const {
  if (!has(key)) return fallback;
  const std::string& s = raw(key);
  if (s == "true" || s == "1") return true;
  if (s == "false" || s == "0") return false;
  fail(ErrorKind::kConfig, "key '" + key + "': expected true/false, got '" + s + "'");
}

std::string KeyValues::to_string() const {
  std::string out;
  for (const auto& [key, value] : values_) out += key + " = " + value + "\n";
  return out;
}

std::string format_double(double value) {
  char buf[64];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), value);
  return std::string(buf, ptr);
}

}  // namespace dlm
