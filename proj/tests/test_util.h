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

// Shared fixtures for the unit tests.

#ifndef DCG_TESTS_TEST_UTIL_H_
#define DCG_TESTS_TEST_UTIL_H_

#include <unistd.h>

#include <algorithm>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <string>
#include <utility>
#include <vector>

#include "dcg/corpus.h"

namespace dcg::testing {

// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  explicit TempDir(const std::string& name) {
    path_ = std::filesystem::temp_directory_path() /
            ("dcg_test_" + name + "_" + std::to_string(::getpid()));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;

  std::string File(const std::string& name) const {
    return (path_ / name).string();
  }
  const std::filesystem::path& path() const { return path_; }

 private:
  std::filesystem::path path_;
};

inline void WriteText(const std::string& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary);
  out << text;
}

inline std::string ReadText(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
}

// Items "i0".."i{n-1}" with a category field cycling through `categories`.
inline ItemCatalog MakeCatalog(std::size_t n, std::size_t categories = 3) {
  ItemCatalog catalog;
  for (std::size_t i = 0; i < n; ++i) {
    catalog.AddItem("i" + std::to_string(i),
                    {{"cat", "c" + std::to_string(i % categories)}});
  }
  return catalog;
}

// One user per sequence, timestamps 0, 1, 2, ...
inline Dataset MakeDataset(const std::vector<ClickSequence>& users,
                           std::size_t num_items) {
  std::vector<ClickRecord> records;
  for (std::size_t u = 0; u < users.size(); ++u) {
    for (std::size_t t = 0; t < users[u].size(); ++t) {
      records.push_back({static_cast<std::int64_t>(u), users[u][t],
                         static_cast<std::int64_t>(t)});
    }
  }
  return Dataset(std::move(records), num_items);
}

inline WorldConfig SmallWorld(std::size_t items, std::size_t users,
                              std::uint64_t seed) {
  WorldConfig w;
  w.num_items = items;
  w.num_users = users;
  w.slate_size = std::min<std::size_t>(10, items);
  w.interactions_per_user = 20;
  w.relevance_rank = 4;
  w.seed = seed;
  return w;
}

}  // namespace dcg::testing

#endif  // DCG_TESTS_TEST_UTIL_H_
