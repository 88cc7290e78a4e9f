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

// Exact brute-force top-k retrieval plus accuracy (HR, NDCG, MRR) and
// exposure-fairness metrics (aggregate diversity, popularity index, degree
// histogram).

#ifndef DCG_RETRIEVAL_EVAL_H_
#define DCG_RETRIEVAL_EVAL_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <span>
#include <string>
#include <vector>

#include "dcg/corpus.h"
#include "dcg/encoder.h"

namespace dcg {

// |Y| x d item vectors. In cosine mode rows are unit length, so ranking by
// inner product equals ranking by cosine.
class ItemIndex {
 public:
  ItemIndex(std::vector<double> vectors, std::size_t dim, bool normalized);
  static ItemIndex Build(const Parameters& params, const ItemCatalog& catalog);

  std::size_t size() const { return dim_ ? vectors_.size() / dim_ : 0; }
  std::size_t dim() const { return dim_; }
  bool normalized() const { return normalized_; }
  std::span<const double> row(std::size_t i) const {
    return std::span<const double>(vectors_).subspan(i * dim_, dim_);
  }
  // Scores of every item against a user vector, in the index's metric.
  std::vector<double> Scores(std::span<const double> user_vec) const;

 private:
  std::vector<double> vectors_;
  std::size_t dim_;
  bool normalized_;
};

// Highest scores first; equal scores ordered by ascending item id.
std::vector<ItemId> TopK(std::span<const double> user_vec,
                         const ItemIndex& index, std::size_t k);

// 1-based position of target, if present.
std::optional<std::size_t> RankOf(std::span<const ItemId> ranked,
                                  ItemId target);
int HitAtK(std::span<const ItemId> ranked, ItemId target, std::size_t k);
double NdcgAtK(std::span<const ItemId> ranked, ItemId target, std::size_t k);
double MrrAtK(std::span<const ItemId> ranked, ItemId target, std::size_t k);

using RecommendationLog = std::vector<std::vector<ItemId>>;

std::size_t AggregateDiversity(const RecommendationLog& log);

// Mean over all recommended slots of the item's popularity percentile
// (mid-rank of its count among all items, divided by |Y|; 1.0 for a unique
// most popular item).
double PopularityIndex(const RecommendationLog& log,
                       std::span<const double> popularity);
std::vector<double> PopularityPercentiles(std::span<const double> popularity);

struct HistogramBucket {
  double degree_low = 0.0;
  double degree_high = 0.0;
  std::size_t item_count = 0;
  std::size_t rec_mass = 0;
};

// Equal-width buckets over log(degree + 1) in [0, log(max_degree + 1)].
std::vector<HistogramBucket> DegreeHistogram(const RecommendationLog& log,
                                             std::span<const double> degrees,
                                             std::size_t num_buckets);

enum class EvalProtocol { kFull, kSampled };
std::string EvalProtocolName(EvalProtocol p);
EvalProtocol ParseEvalProtocol(const std::string& name);

struct RankingMetrics {
  double hit_rate = 0.0;
  double ndcg = 0.0;
  double mrr = 0.0;
  std::size_t count = 0;
};

struct RankingResult {
  RankingMetrics metrics;
  // Full protocol only: top-k per instance.
  RecommendationLog recommendations;
};

struct EvalOptions {
  std::size_t k = 50;
  EvalProtocol protocol = EvalProtocol::kFull;
  // Sampled protocol: negatives drawn uniformly without replacement from the
  // items other than the target.
  std::size_t sampled_negatives = 100;
  std::size_t max_prefix_len = 20;
  std::uint64_t seed = 1;
};

RankingResult EvaluateRanking(const Parameters& params,
                              const ItemCatalog& catalog,
                              std::span<const Instance> instances,
                              const EvalOptions& options);

// Top-k per query prefix (truncated to max_prefix_len).
RecommendationLog Recommend(const Parameters& params,
                            const ItemCatalog& catalog,
                            std::span<const ClickSequence> queries,
                            std::size_t k, std::size_t max_prefix_len);

void WriteHistogramCsv(const std::vector<HistogramBucket>& buckets,
                       const std::string& path,
                       const std::string& config_hash = "");

}  // namespace dcg

#endif  // DCG_RETRIEVAL_EVAL_H_
