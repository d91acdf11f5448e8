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


#include <string>

#include "doctest.h"
#include "dlm/config.hpp"
#include "dlm/error.hpp"
#include "dlm/pipeline.hpp"
#include "test_util.hpp"

using namespace dlm;
using dlm::testing::error_of;
using dlm::testing::is_marker;

TEST_CASE("key = value parsing") {
  const auto kv = KeyValues::parse("# comment\n\n  alpha = 0.7  \nname=x y\r\nempty =\n");
  CHECK(kv.raw("alpha") == "0.7");
  CHECK(kv.raw("name") == "x y");
  CHECK(kv.raw("empty").empty());
  CHECK(kv.get_double("alpha", 0) == 0.7);
  CHECK(kv.get_double("missing", 2.5) == 2.5);
  CHECK(kv.to_string() == "alpha = 0.7\nempty = \nname = x y\n");
}

TEST_CASE("key = value errors name the line or key") {
  CHECK(error_of(ErrorKind::kConfig, [] { KeyValues::parse("a = 1\nnonsense\n", "f.cfg"); }).find("f.cfg:2") !=
        std::string::npos);
  CHECK(error_of(ErrorKind::kConfig, [] { KeyValues::parse("a = 1\na = 2\n"); }).find("duplicate key 'a'") !=
        std::string::npos);
  CHECK_FALSE(is_marker(error_of(ErrorKind::kConfig, [] { KeyValues::parse(" = 3\n"); })));

  const auto kv = KeyValues::parse("n = 1.5\nb = maybe\nneg = -2\nx = 3abc\n");
  CHECK(error_of(ErrorKind::kConfig, [&] { kv.get_int("n", 0); }).find("'n'") != std::string::npos);
  CHECK(error_of(ErrorKind::kConfig, [&] { kv.get_bool("b", false); }).find("'b'") != std::string::npos);
  CHECK(error_of(ErrorKind::kConfig, [&] { kv.get_uint("neg", 0); }).find("'neg'") != std::string::npos);
  CHECK(error_of(ErrorKind::kConfig, [&] { kv.get_double("x", 0); }).find("'x'") != std::string::npos);
  CHECK(kv.get_int("neg", 0) == -2);
  CHECK(error_of(ErrorKind::kConfig, [&] { kv.require_known({"n", "b"}, "test"); }).find("neg, x") !=
        std::string::npos);
  CHECK_FALSE(is_marker(error_of(ErrorKind::kConfig, [] { KeyValues::load("/nonexistent/dlm.cfg"); })));
}

TEST_CASE("double formatting round trips") {
  for (double v : {0.7, 0.1, 1e-6, 3.0, 0.95, 1.0 / 3.0}) CHECK(std::stod(format_double(v)) == v);
  CHECK(format_double(0.7) == "0.7");
}

TEST_CASE("run config defaults") {
  const RunConfig c = RunConfig::from_config(KeyValues{});
  CHECK(c.model.arch == Architecture::kA2);
  CHECK(c.train.strategy == Strategy::kNone);
  CHECK(c.train.alpha == 0.7);
  CHECK(c.train.optimizer.rho == 0.95);
  CHECK(c.train.optimizer.epsilon == 1e-6);
  CHECK(c.train.optimizer.clip == 5.0);
  CHECK(c.beam.beam == 4);
  CHECK(c.beam.beta == 0.3);
  CHECK(c.beam.max_length_ratio == 2.0);
  CHECK_FALSE(c.beam.length_normalize);
}

TEST_CASE("run config round trip") {
  KeyValues kv = KeyValues::parse(
      "arch = A1\nstrategy = 2\nalpha = 0.3\nepochs = 4\nepochs_phase2 = 9\nbeam = 7\nbeta = 0.1\n"
      "decoder_units = 12\nseed = 42\ndata_dir = data\nlength_normalize = true\n");
  const RunConfig c = RunConfig::from_config(kv, "/base");
  CHECK(c.model.arch == Architecture::kA1);
  CHECK(c.train.strategy == Strategy::kTwo);
  CHECK(c.train.epochs_for(1) == 4);
  CHECK(c.train.epochs_for(2) == 9);
  CHECK(c.model.decoder_units == 12);
  CHECK(c.beam.length_normalize);
  CHECK(c.resolve("", "vocab.txt") == std::filesystem::path("/base/data/vocab.txt"));
  CHECK(c.resolve("/abs/v.txt", "vocab.txt") == std::filesystem::path("/abs/v.txt"));

  const KeyValues dumped = c.to_config();
  const RunConfig again = RunConfig::from_config(dumped, "/base");
  CHECK(again.to_config().to_string() == dumped.to_string());
  for (const auto& [key, value] : dumped.entries()) {
    const auto& keys = run_config_keys();
    CHECK(std::find(keys.begin(), keys.end(), key) != keys.end());
  }
}

TEST_CASE("run config rejects bad values") {
  auto bad = [](const std::string& text) {
    return error_of(ErrorKind::kConfig, [&] { RunConfig::from_config(KeyValues::parse(text)); });
  };
  CHECK(bad("colour = red\n").find("colour") != std::string::npos);
  CHECK_FALSE(is_marker(bad("arch = LM\n")));
  CHECK_FALSE(is_marker(bad("arch = A3\n")));
  CHECK_FALSE(is_marker(bad("strategy = 4\n")));
  CHECK(bad("alpha = 1.5\n").find("alpha") != std::string::npos);
  CHECK_FALSE(is_marker(bad("location_width = 4\n")));
  CHECK_FALSE(is_marker(bad("beam = 0\n")));
  CHECK_FALSE(is_marker(bad("beta = -1\n")));
  CHECK_FALSE(is_marker(bad("encoder_units = 0\n")));
  CHECK_FALSE(is_marker(bad("batch_size = 0\n")));
  CHECK_FALSE(is_marker(bad("rho = 1\n")));
}
