//==============================================================================
// Copyright (c) 2026 The saev Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//==============================================================================
#include "saev/sae.hpp"
//==============================================================================
#include <bit>
#include <cstring>
#include <fstream>
#include <istream>
#include <ostream>
#include <vector>

#include "little_endian.hpp"
//==============================================================================
namespace saev {
//==============================================================================
namespace {

using namespace le;

void put_floats(std::vector<char>& buf, const float* data, Eigen::Index count) {
  for (Eigen::Index i = 0; i < count; ++i) {
    put_f32(buf, data[i]);
  }
}

void read_exact(std::istream& in, char* dst, std::size_t bytes,
                std::uint64_t offset) {
  in.read(dst, static_cast<std::streamsize>(bytes));
  if (static_cast<std::size_t>(in.gcount()) != bytes) {
    throw CorruptionError("truncated model file", offset);
  }
}

void get_floats(std::istream& in, float* dst, Eigen::Index count,
                std::uint64_t& offset) {
  std::vector<char> raw(static_cast<std::size_t>(count) * 4);
  read_exact(in, raw.data(), raw.size(), offset);
  for (Eigen::Index i = 0; i < count; ++i) {
    dst[i] = get_f32(raw.data() + 4 * i);
    if (!std::isfinite(dst[i])) {
      throw CorruptionError("non-finite model parameter",
                            offset + 4ULL * static_cast<std::uint64_t>(i));
    }
  }
  offset += raw.size();
}

}  // namespace
//==============================================================================
void save_model(const SaeModel& model, std::ostream& out) {
  validate(model);
  std::vector<char> buf;
  const auto n = model.n();
  const auto m = model.m();
  buf.reserve(16 + 4 * static_cast<std::size_t>(2 * n * m + n));
  buf.insert(buf.end(), std::begin(kModelMagic), std::end(kModelMagic));
  put_u32(buf, kModelVersion);
  put_u32(buf, static_cast<std::uint32_t>(m));
  put_u32(buf, static_cast<std::uint32_t>(n));
  put_floats(buf, model.w_enc.data(), n * m);
  put_floats(buf, model.b_enc.data(), n);
  put_floats(buf, model.dictionary.data(), n * m);
  out.write(buf.data(), static_cast<std::streamsize>(buf.size()));
  if (!out) {
    throw IoError("failed writing model stream");
  }
}

void save_model(const SaeModel& model, const std::filesystem::path& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) {
    throw IoError("cannot open model for writing: " + path.string());
  }
  save_model(model, out);
  out.close();
  if (!out) {
    throw IoError("failed writing model: " + path.string());
  }
}

SaeModel load_model(std::istream& in) {
  char header[16];
  in.read(header, sizeof(header));
  const auto got = static_cast<std::size_t>(in.gcount());
  if (got < 4 || std::memcmp(header, kModelMagic, 4) != 0) {
    throw FormatError("bad magic, not a model file");
  }
  if (got < sizeof(header)) {
    throw FormatError("truncated model header");
  }
  const std::uint32_t version = get_u32(header + 4);
  if (version != kModelVersion) {
    throw FormatError("unsupported model version " + std::to_string(version));
  }
  const std::uint32_t m = get_u32(header + 8);
  const std::uint32_t n = get_u32(header + 12);
  if (m == 0 || n == 0) {
    throw FormatError("model dimensions must be positive");
  }
  SaeModel model(n, m);
  std::uint64_t offset = sizeof(header);
  get_floats(in, model.w_enc.data(), model.w_enc.size(), offset);
  get_floats(in, model.b_enc.data(), model.b_enc.size(), offset);
  get_floats(in, model.dictionary.data(), model.dictionary.size(), offset);
  if (in.peek() != std::char_traits<char>::eof()) {
    throw CorruptionError("trailing bytes after model payload", offset);
  }
  return model;
}

SaeModel load_model(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw IoError("cannot open model: " + path.string());
  }
  return load_model(in);
}
//==============================================================================
}  // namespace saev
//==============================================================================
