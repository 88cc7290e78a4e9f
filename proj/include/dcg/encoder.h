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

// Two-tower encoder. The item tower averages the embedding rows of an item's
// categorical features; the user tower is a decayed weighted mean of the item
// vectors of a click sequence (weight gamma^age, newest click has age 0).
// Scores are inner products or temperature-scaled cosine similarities.
//
// BatchForward records every intermediate vector on a Tape so BatchBackward
// can produce exact gradients without re-running the towers.

#ifndef DCG_ENCODER_H_
#define DCG_ENCODER_H_

#include <cstddef>
#include <cstdint>
#include <map>
#include <memory>
#include <span>
#include <string>
#include <vector>

#include "dcg/common.h"
#include "dcg/corpus.h"

namespace dcg {

enum class SimilarityMode : std::uint8_t { kInnerProduct = 0, kCosine = 1 };

std::string SimilarityName(SimilarityMode s);
SimilarityMode ParseSimilarity(const std::string& name);

struct EncoderConfig {
  std::size_t dim = 32;
  SimilarityMode similarity = SimilarityMode::kCosine;
  double temperature = 0.1;
  // Per-step decay of older clicks in the user tower, in (0, 1].
  double decay = 1.0;
  // When true both towers read the same embedding tables.
  bool tied = false;
  double init_scale = 0.1;

  void Validate() const;
  bool operator==(const EncoderConfig&) const = default;
};

enum class Tower : int { kItem = 0, kUser = 1 };

// Embedding tables, one per (tower, feature field). With tied towers there is
// a single set of tables.
class Parameters {
 public:
  Parameters() = default;
  Parameters(const EncoderConfig& config, std::vector<std::size_t> vocab_sizes);

  // Entries drawn i.i.d. from N(0, init_scale^2) in table order.
  static Parameters Random(const EncoderConfig& config,
                           std::vector<std::size_t> vocab_sizes,
                           std::uint64_t seed);

  const EncoderConfig& config() const { return config_; }
  std::size_t dim() const { return config_.dim; }
  std::size_t num_fields() const { return vocab_sizes_.size(); }
  const std::vector<std::size_t>& vocab_sizes() const { return vocab_sizes_; }
  std::size_t num_table_sets() const { return config_.tied ? 1 : 2; }
  std::size_t num_tables() const { return tables_.size(); }

  std::size_t TableIndex(Tower tower, int field) const {
    const std::size_t set = config_.tied ? 0 : static_cast<std::size_t>(tower);
    return set * num_fields() + static_cast<std::size_t>(field);
  }
  std::size_t table_rows(std::size_t table) const {
    return vocab_sizes_[table % num_fields()];
  }
  std::span<double> table(std::size_t t) { return tables_.at(t); }
  std::span<const double> table(std::size_t t) const { return tables_.at(t); }
  std::span<const double> row(std::size_t t, std::size_t r) const {
    return table(t).subspan(r * dim(), dim());
  }
  std::span<double> row(std::size_t t, std::size_t r) {
    return table(t).subspan(r * dim(), dim());
  }

  void ScaleAll(double factor);

  bool operator==(const Parameters& other) const = default;

 private:
  EncoderConfig config_;
  std::vector<std::size_t> vocab_sizes_;
  std::vector<std::vector<double>> tables_;
};

// Sparse gradient rows keyed by (table, row). Rows not touched by a forward
// pass never appear. Iteration order is ascending, so accumulation is
// deterministic.
class Gradients {
 public:
  Gradients() = default;
  Gradients(std::size_t num_tables, std::size_t dim)
      : dim_(dim), rows_(num_tables) {}

  std::size_t dim() const { return dim_; }
  std::size_t num_tables() const { return rows_.size(); }
  const std::map<std::size_t, std::vector<double>>& table(std::size_t t) const {
    return rows_.at(t);
  }
  std::span<double> Row(std::size_t t, std::size_t r);
  const std::vector<double>* Find(std::size_t t, std::size_t r) const;
  std::size_t num_rows() const;
  bool empty() const { return num_rows() == 0; }

  void Add(const Gradients& other, double scale = 1.0);
  void Scale(double factor);

 private:
  std::size_t dim_ = 0;
  std::vector<std::map<std::size_t, std::vector<double>>> rows_;
};

std::vector<double> EncodeItem(const Parameters& params, const Item& item,
                               Tower tower = Tower::kItem);
std::vector<double> EncodeUser(const Parameters& params,
                               const ItemCatalog& catalog,
                               std::span<const ItemId> sequence);

// Inner product, or cosine / temperature. Throws on a zero vector in cosine
// mode.
double Similarity(std::span<const double> u, std::span<const double> v,
                  SimilarityMode mode, double temperature);

enum class CandidateKind : std::uint8_t {
  kItem,      // encoded live by the item tower
  kSequence,  // encoded live by the user tower (index into target_sequences)
  kCached,    // fixed vector (row of cached_vectors); no gradient
};

struct Candidate {
  CandidateKind kind = CandidateKind::kItem;
  std::int64_t index = 0;

  static Candidate ItemRef(ItemId id) { return {CandidateKind::kItem, id}; }
  static Candidate SequenceRef(std::size_t i) {
    return {CandidateKind::kSequence, static_cast<std::int64_t>(i)};
  }
  static Candidate CachedRef(std::size_t row) {
    return {CandidateKind::kCached, static_cast<std::int64_t>(row)};
  }
  bool operator==(const Candidate&) const = default;
};

using CandidatePool = std::vector<Candidate>;

// A multiset of candidates with one position marked positive. Instances of a
// batch may share a pool.
struct CandidateSet {
  std::shared_ptr<const CandidatePool> pool;
  std::size_t pos_index = 0;

  std::size_t size() const { return pool ? pool->size() : 0; }
};

struct BatchInput {
  std::span<const ClickSequence> queries;
  std::span<const CandidateSet> candidates;  // one per query
  std::span<const ClickSequence> target_sequences = {};
  std::span<const double> cached_vectors = {};  // row-major, dim columns
};

using Logits = std::vector<std::vector<double>>;

// Activation record of one BatchForward call.
struct Tape {
  enum class NodeKind : std::uint8_t { kItem, kSequence, kConstant };
  struct Node {
    NodeKind kind = NodeKind::kItem;
    ItemId item = 0;
    std::size_t table_set = 0;
    std::vector<Feature> features;
    // Sequence nodes: (item node, normalized weight).
    std::vector<std::pair<std::size_t, double>> terms;
  };

  std::size_t dim = 0;
  std::size_t num_fields = 0;
  std::size_t num_tables = 0;
  SimilarityMode similarity = SimilarityMode::kCosine;
  double temperature = 1.0;
  std::vector<Node> nodes;
  std::vector<double> values;      // nodes x dim, raw encoder outputs
  std::vector<double> unit;        // nodes x dim, normalized (cosine only)
  std::vector<double> norms;       // per node
  std::vector<std::size_t> query_nodes;
  std::vector<std::vector<std::size_t>> pools;  // candidate node per entry
  std::vector<std::size_t> query_pool;
};

struct ForwardStats {
  // Distinct (tower, item) encodings, including prefix items.
  std::size_t item_encodes = 0;
  // Distinct items scored live as candidates.
  std::size_t candidate_item_encodes = 0;
  std::size_t sequence_encodes = 0;
};

struct ForwardResult {
  Logits logits;
  Tape tape;
  ForwardStats stats;
};

// logits[b][j] = similarity(f(query_b), candidate_{b,j}). Every distinct item
// and sequence is encoded once per call.
ForwardResult BatchForward(const Parameters& params, const ItemCatalog& catalog,
                           const BatchInput& input);

// Exact gradient of sum_{b,j} dlogits[b][j] * logits[b][j].
Gradients BatchBackward(const Tape& tape, const Logits& dlogits);

// Binary checkpoint: magic, version, config, vocab sizes, then row-major
// little-endian float64 tables.
void SaveCheckpoint(const Parameters& params, const std::string& path,
                    std::uint64_t config_hash = 0);
Parameters LoadCheckpoint(const std::string& path,
                          std::uint64_t* config_hash = nullptr);

}  // namespace dcg

#endif  // DCG_ENCODER_H_
