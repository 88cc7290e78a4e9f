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

#ifndef DCG_COMMON_H_
#define DCG_COMMON_H_

#include <cstdint>
#include <random>
#include <stdexcept>
#include <string>
#include <vector>

namespace dcg {

// Dense item index in [0, |Y|).
using ItemId = std::int32_t;

// Ordered item clicks, most recent last.
using ClickSequence = std::vector<ItemId>;

using Rng = std::mt19937_64;

// Generic failure raised by the library. Parse and configuration problems use
// the subclasses below so callers can map them to distinct exit codes.
class Error : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

class ParseError : public Error {
 public:
  ParseError(const std::string& source, std::size_t line,
             const std::string& what)
      : Error(source + ":" + std::to_string(line) + ": " + what),
        line_(line) {}

  std::size_t line() const { return line_; }

 private:
  std::size_t line_;
};

class ConfigError : public Error {
 public:
  using Error::Error;
};

// Uniform double in [0, 1) built from the raw engine output, so sampled
// sequences do not depend on the standard library's distribution code.
inline double UniformUnit(Rng& rng) {
  return static_cast<double>(rng() >> 11) * 0x1.0p-53;
}

// Uniform integer in [0, n). Uses rejection to stay unbiased.
inline std::uint64_t UniformIndex(Rng& rng, std::uint64_t n) {
  const std::uint64_t limit = ~std::uint64_t{0} - (~std::uint64_t{0} % n);
  std::uint64_t x;
  do {
    x = rng();
  } while (x >= limit);
  return x % n;
}

// Standard normal deviate (Marsaglia polar method) on top of UniformUnit.
double StandardNormal(Rng& rng);

// 64-bit FNV-1a, used to fingerprint configurations in output files.
std::uint64_t Fnv1a64(const std::string& text);

std::string HexDigest(std::uint64_t value);

}  // namespace dcg

#endif  // DCG_COMMON_H_
