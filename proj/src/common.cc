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

#include "dcg/common.h"

#include <cmath>

#include <fmt/format.h>

namespace dcg {

double StandardNormal(Rng& rng) {
  double u, v, s;
  do {
    u = 2.0 * UniformUnit(rng) - 1.0;
    v = 2.0 * UniformUnit(rng) - 1.0;
    s = u * u + v * v;
  } while (s >= 1.0 || s == 0.0);
  // Only the first deviate of each pair is used.
  return u * std::sqrt(-2.0 * std::log(s) / s);
}

std::uint64_t Fnv1a64(const std::string& text) {
  std::uint64_t hash = 0xcbf29ce484222325ULL;
  for (unsigned char c : text) {
    hash ^= c;
    hash *= 0x100000001b3ULL;
  }
  return hash;
}

std::string HexDigest(std::uint64_t value) {
  return fmt::format("{:016x}", value);
}

}  // namespace dcg
