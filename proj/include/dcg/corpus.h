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

// Click-log data model: item catalog, per-user click records, training
// instances, empirical item distribution and a synthetic logging simulator
// whose exposure policy is popularity-driven.

#ifndef DCG_CORPUS_H_
#define DCG_CORPUS_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <unordered_map>
#include <utility>
#include <vector>

#include "dcg/common.h"

namespace dcg {

struct Feature {
  int field = 0;
  std::int32_t id = 0;

  bool operator==(const Feature&) const = default;
};

struct Item {
  ItemId id = 0;
  // Sorted by field. Field 0 always holds the item's own dense id.
  std::vector<Feature> features;
};

class ItemCatalog {
 public:
  static constexpr int kIdField = 0;
  static constexpr const char* kIdFieldName = "item";

  ItemCatalog();

  // Appends an item with categorical features given as (field, value) string
  // pairs. Unknown fields and values are added to the vocabularies. Throws
  // Error on a duplicate external id or a repeated field.
  ItemId AddItem(const std::string& external_id,
                 const std::vector<std::pair<std::string, std::string>>&
                     fields);

  std::size_t size() const { return items_.size(); }
  bool empty() const { return items_.empty(); }
  const Item& item(ItemId id) const { return items_.at(id); }
  const std::vector<Item>& items() const { return items_; }
  const std::string& external_id(ItemId id) const {
    return external_ids_.at(id);
  }
  std::optional<ItemId> Find(const std::string& external_id) const;

  std::size_t num_fields() const { return field_names_.size(); }
  const std::vector<std::string>& field_names() const { return field_names_; }
  // Vocabulary size per field; entry 0 equals size().
  std::vector<std::size_t> FeatureVocabSizes() const;
  const std::string& FeatureValue(int field, std::int32_t id) const;

 private:
  std::vector<Item> items_;
  std::vector<std::string> external_ids_;
  std::unordered_map<std::string, ItemId> by_external_id_;
  std::vector<std::string> field_names_;
  std::unordered_map<std::string, int> field_index_;
  std::vector<std::vector<std::string>> values_;
  std::vector<std::unordered_map<std::string, std::int32_t>> value_index_;
};

struct ClickRecord {
  std::int64_t user = 0;
  ItemId item = 0;
  std::int64_t timestamp = 0;

  bool operator==(const ClickRecord&) const = default;
};

// Click records grouped by user (ascending user id) and sorted by timestamp.
// Users are addressed by a dense index in [0, num_users()).
class Dataset {
 public:
  Dataset() = default;
  // Sorts the records. Throws Error if an item is outside [0, num_items) or
  // if two clicks of the same user share a timestamp.
  Dataset(std::vector<ClickRecord> records, std::size_t num_items);

  std::size_t num_users() const { return user_ids_.size(); }
  std::size_t num_items() const { return num_items_; }
  std::size_t num_records() const { return records_.size(); }
  bool empty() const { return records_.empty(); }
  const std::vector<ClickRecord>& records() const { return records_; }

  std::int64_t user_id(std::size_t user) const { return user_ids_.at(user); }
  std::size_t length(std::size_t user) const {
    return offsets_.at(user + 1) - offsets_.at(user);
  }
  std::span<const ClickRecord> clicks(std::size_t user) const;
  ClickSequence Items(std::size_t user) const;

 private:
  std::vector<ClickRecord> records_;
  std::vector<std::int64_t> user_ids_;
  std::vector<std::size_t> offsets_{0};
  std::size_t num_items_ = 0;
};

// One next-click prediction example: prefix -> target for a dense user.
struct Instance {
  std::size_t user = 0;
  ClickSequence prefix;
  ItemId target = 0;

  bool operator==(const Instance&) const = default;
};

ItemCatalog LoadCatalog(const std::string& path);
Dataset LoadInteractions(const std::string& path, const ItemCatalog& catalog);

// Writers emit an optional '#'-prefixed comment line first. Loaders skip
// comment and blank lines.
void WriteCatalog(const ItemCatalog& catalog, const std::string& path,
                  const std::string& comment = "");
void WriteInteractions(const Dataset& dataset, const ItemCatalog& catalog,
                       const std::string& path,
                       const std::string& comment = "");

// One instance per click with t >= 2, prefix truncated to the most recent
// max_prefix_len clicks.
std::vector<Instance> BuildInstances(const Dataset& dataset,
                                     std::size_t max_prefix_len);

// Keeps the last max_len items of seq.
ClickSequence TruncatePrefix(std::span<const ItemId> seq, std::size_t max_len);

// count(y) / |records| over all catalog items.
std::vector<double> EmpiricalItemDistribution(const Dataset& dataset);

std::vector<std::size_t> ItemClickCounts(const Dataset& dataset);

struct Split {
  Dataset train;
  // Prefixes are untruncated; callers truncate at use.
  std::vector<Instance> valid;
  std::vector<Instance> test;
  std::size_t dropped_users = 0;
};

// Last click of each user is the test target, the second to last the
// validation target. Users with fewer than three clicks are dropped. Dense
// user indices in valid/test refer to `train`.
Split LeaveLastSplit(const Dataset& dataset);

struct WorldConfig {
  std::size_t num_items = 500;
  std::size_t num_users = 1000;
  std::size_t relevance_rank = 8;
  double exposure_skew = 1.2;
  std::size_t slate_size = 10;
  std::size_t interactions_per_user = 30;
  std::uint64_t seed = 1;
  // Standard deviation of the true relevance logits.
  double relevance_scale = 2.0;
  // Total warm-start popularity mass, as a multiple of num_items.
  double prior_popularity_mass = 20.0;

  // Throws ConfigError on invariant violations.
  void Validate() const;
};

struct GroundTruth {
  std::size_t rank = 0;
  double relevance_scale = 1.0;
  std::vector<double> user_factors;  // num_users x rank
  std::vector<double> item_factors;  // num_items x rank
  std::vector<double> initial_popularity;
  std::vector<std::uint64_t> exposure_counts;

  std::size_t num_users() const { return rank ? user_factors.size() / rank : 0; }
  std::size_t num_items() const { return rank ? item_factors.size() / rank : 0; }
  // Softmax over all items of the true relevance logits for a user.
  std::vector<double> TrueRelevance(std::size_t user) const;
  // Average of TrueRelevance over users.
  std::vector<double> MarginalRelevance() const;
};

struct SimulatedWorld {
  ItemCatalog catalog;
  Dataset dataset;
  GroundTruth truth;
};

// Deterministic in world.seed. Each step a slate is drawn without replacement
// with weights popularity^skew; the user clicks one slate item with
// probability proportional to true relevance; the clicked item's popularity
// grows by one.
SimulatedWorld SimulateBiasedLogs(const WorldConfig& world);

// One click per user drawn from the user's true relevance over the whole
// catalog, i.e. under uniform exposure.
std::vector<ItemId> SampleUniformExposureClicks(const GroundTruth& truth,
                                                std::uint64_t seed);

void WriteGroundTruth(const GroundTruth& truth, const ItemCatalog& catalog,
                      const std::string& path,
                      const std::string& config_hash = "");
GroundTruth LoadGroundTruth(const std::string& path,
                            const ItemCatalog& catalog);

// Gini coefficient of non-negative counts; 0 for perfectly even counts.
double GiniCoefficient(std::span<const std::uint64_t> counts);

double TotalVariation(std::span<const double> p, std::span<const double> q);

}  // namespace dcg

#endif  // DCG_CORPUS_H_
