// Copyright 2026 The DCG Authors.
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

// Checkpoint layout (all integers and floats little-endian):
//   char[8]  magic "DCGPARAM"
//   u32      version
//   u64      config hash
//   u32      dim
//   u8       similarity mode (0 inner product, 1 cosine)
//   u8       tied towers
//   f64      temperature, decay, init_scale
//   u32      number of fields, then u64 vocab size per field
//   f64[]    tables, item tower first, each row-major

#include <array>
#include <bit>
#include <cstring>
#include <fstream>

#include "dcg/encoder.h"

namespace dcg {
namespace {

constexpr std::array<char, 8> kMagic = {'D', 'C', 'G', 'P', 'A', 'R', 'A', 'M'};
constexpr std::uint32_t kVersion = 1;

class Writer {
 public:
  explicit Writer(std::ofstream& out) : out_(out) {}

  template <typename T>
  void Uint(T value) {
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      out_.put(static_cast<char>((static_cast<std::uint64_t>(value) >> (8 * i)) &
                                 0xff));
    }
  }
  void Double(double value) { Uint(std::bit_cast<std::uint64_t>(value)); }

 private:
  std::ofstream& out_;
};

class Reader {
 public:
  Reader(std::ifstream& in, const std::string& path) : in_(in), path_(path) {}

  template <typename T>
  T Uint() {
    std::uint64_t value = 0;
    for (std::size_t i = 0; i < sizeof(T); ++i) {
      const int c = in_.get();
      if (c == std::char_traits<char>::eof()) {
        throw Error("truncated checkpoint: " + path_);
      }
      value |= static_cast<std::uint64_t>(static_cast<unsigned char>(c))
               << (8 * i);
    }
    return static_cast<T>(value);
  }
  double Double() { return std::bit_cast<double>(Uint<std::uint64_t>()); }

 private:
  std::ifstream& in_;
  const std::string& path_;
};

}  // namespace

void SaveCheckpoint(const Parameters& params, const std::string& path,
                    std::uint64_t config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  Writer w(out);
  out.write(kMagic.data(), kMagic.size());
  const auto& config = params.config();
  w.Uint<std::uint32_t>(kVersion);
  w.Uint<std::uint64_t>(config_hash);
  w.Uint<std::uint32_t>(static_cast<std::uint32_t>(config.dim));
  w.Uint<std::uint8_t>(static_cast<std::uint8_t>(config.similarity));
  w.Uint<std::uint8_t>(config.tied ? 1 : 0);
  w.Double(config.temperature);
  w.Double(config.decay);
  w.Double(config.init_scale);
  w.Uint<std::uint32_t>(static_cast<std::uint32_t>(params.num_fields()));
  for (std::size_t v : params.vocab_sizes()) w.Uint<std::uint64_t>(v);
  for (std::size_t t = 0; t < params.num_tables(); ++t) {
    for (double x : params.table(t)) w.Double(x);
  }
  if (!out) throw Error("failed writing " + path);
}

Parameters LoadCheckpoint(const std::string& path, std::uint64_t* config_hash) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw Error("cannot open " + path);
  std::array<char, 8> magic{};
  in.read(magic.data(), magic.size());
  if (!in || magic != kMagic) throw Error("not a checkpoint: " + path);
  Reader r(in, path);
  const auto version = r.Uint<std::uint32_t>();
  if (version != kVersion) {
    throw Error("unsupported checkpoint version " + std::to_string(version));
  }
  const auto hash = r.Uint<std::uint64_t>();
  if (config_hash) *config_hash = hash;
  EncoderConfig config;
  config.dim = r.Uint<std::uint32_t>();
  const auto mode = r.Uint<std::uint8_t>();
  if (mode > 1) throw Error("bad similarity mode in checkpoint: " + path);
  config.similarity = static_cast<SimilarityMode>(mode);
  config.tied = r.Uint<std::uint8_t>() != 0;
  config.temperature = r.Double();
  config.decay = r.Double();
  config.init_scale = r.Double();
  const auto num_fields = r.Uint<std::uint32_t>();
  std::vector<std::size_t> vocab(num_fields);
  for (auto& v : vocab) v = r.Uint<std::uint64_t>();
  Parameters params(config, vocab);
  for (std::size_t t = 0; t < params.num_tables(); ++t) {
    for (double& x : params.table(t)) x = r.Double();
  }
  if (in.peek() != std::char_traits<char>::eof()) {
    throw Error("trailing bytes in checkpoint: " + path);
  }
  return params;
}

}  // namespace dcg
