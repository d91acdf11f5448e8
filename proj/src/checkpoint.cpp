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

#include <cstring>

#include "dlm/binary_io.hpp"
#include "dlm/error.hpp"
#include "dlm/model.hpp"

namespace dlm {

namespace {
constexpr char kMagic[4] = {'D', 'L', 'M', '1'};
}  // namespace

std::vector<std::uint8_t> serialize_checkpoint(const Model& model) {
  ByteWriter out;
  out.bytes(kMagic, 4);
  out.u32(kCheckpointVersion);
  out.u8(static_cast<std::uint8_t>(model.arch()));
  out.u32(static_cast<std::uint32_t>(model.vocab_size()));
  const ParamStore& params = model.params();
  out.u32(static_cast<std::uint32_t>(params.size()));
  for (const auto& name : params.names()) {
    const Tensor& t = params.get(name);
    out.u16(static_cast<std::uint16_t>(name.size()));
    out.bytes(name.data(), name.size());
    out.u8(static_cast<std::uint8_t>(t.rank()));
    for (auto d : t.shape()) out.u32(static_cast<std::uint32_t>(d));
    for (float v : t.data()) out.f32(v);
  }
  return out.take();
}

Model deserialize_checkpoint(std::span<const std::uint8_t> bytes) {
  ByteReader in(bytes, "checkpoint");
  char magic[4];
  in.bytes(magic, 4);
  if (std::memcmp(magic, kMagic, 4) != 0) fail(ErrorKind::kFormat, "checkpoint: bad magic");
  const std::uint32_t version = in.u32();
  if (version != kCheckpointVersion) {
    fail(ErrorKind::kCompatibility, "checkpoint: unsupported format version " +
                                        std::to_string(version));
  }
  const std::uint8_t tag = in.u8();
  if (tag > static_cast<std::uint8_t>(Architecture::kLm)) {
    fail(ErrorKind::kFormat, "checkpoint: unknown architecture tag " + std::to_string(tag));
  }
  const std::uint32_t vocab = in.u32();
  const std::uint32_t count = in.u32();
  ParamStore params;
  for (std::uint32_t i = 0; i < count; ++i) {
    const std::uint16_t name_len = in.u16();
    std::string name(name_len, '\0');
    in.bytes(name.data(), name_len);
    const std::uint8_t rank = in.u8();
    if (rank == 0 || rank > 2) {
      fail(ErrorKind::kValidation, "checkpoint: parameter " + name + " has rank " +
                                       std::to_string(rank));
    }
    Shape shape(rank);
    for (auto& d : shape) {
      d = in.u32();
      if (d == 0) fail(ErrorKind::kValidation, "checkpoint: zero dimension in " + name);
    }
    if (params.contains(name)) fail(ErrorKind::kValidation, "checkpoint: duplicate parameter " + name);
    Tensor& t = params.add(name, shape);
    for (auto& v : t.mutable_data()) v = in.f32();
  }
  if (!in.at_end()) fail(ErrorKind::kFormat, "checkpoint: trailing bytes after parameters");
  Model model(static_cast<Architecture>(tag), std::move(params));
  if (model.vocab_size() != vocab) {
    fail(ErrorKind::kValidation, "checkpoint: header vocab " + std::to_string(vocab) +
                                     " does not match embedding rows " +
                                     std::to_string(model.vocab_size()));
  }
  return model;
}

void save_checkpoint(const Model& model, const std::filesystem::path& path) {
  write_file(path, serialize_checkpoint(model));
}

Model load_checkpoint(const std::filesystem::path& path) {
  const auto bytes = read_file(path);
  return deserialize_checkpoint(bytes);
}

}  // namespace dlm
