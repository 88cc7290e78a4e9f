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

// Flat "key = value" configuration files. '#' starts a comment. Keys are
// dotted names such as queue.capacity; unknown keys are rejected.

#ifndef DCG_CONFIG_H_
#define DCG_CONFIG_H_

#include <cstdint>
#include <map>
#include <set>
#include <string>

namespace dcg {

class KeyValueConfig {
 public:
  KeyValueConfig() = default;

  static KeyValueConfig Load(const std::string& path);
  static KeyValueConfig Parse(const std::string& text,
                              const std::string& source = "<config>");

  void Set(const std::string& key, const std::string& value);
  bool Has(const std::string& key) const { return values_.count(key) > 0; }

  std::string GetString(const std::string& key,
                        const std::string& fallback) const;
  double GetDouble(const std::string& key, double fallback) const;
  std::int64_t GetInt(const std::string& key, std::int64_t fallback) const;
  std::uint64_t GetUint(const std::string& key, std::uint64_t fallback) const;
  bool GetBool(const std::string& key, bool fallback) const;

  const std::map<std::string, std::string>& values() const { return values_; }

  // Throws ConfigError naming any key outside `known`.
  void RequireKnown(const std::set<std::string>& known) const;

  // Sorted "key=value" lines; stable input for config hashes.
  std::string Canonical() const;
  std::uint64_t Hash() const;

 private:
  std::map<std::string, std::string> values_;
};

}  // namespace dcg

#endif  // DCG_CONFIG_H_
