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

#include "dcg/retrieval_eval.h"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <numeric>
#include <unordered_set>

#include <fmt/format.h>

namespace dcg {
namespace {

double Dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) s += a[k] * b[k];
  return s;
}

std::vector<double> Normalized(std::span<const double> v) {
  const double n = std::sqrt(Dot(v, v));
  if (n == 0.0) throw Error("cannot normalize a zero vector");
  std::vector<double> out(v.begin(), v.end());
  for (auto& x : out) x /= n;
  return out;
}

bool Ahead(const std::vector<double>& scores, ItemId a, ItemId b) {
  if (scores[a] != scores[b]) return scores[a] > scores[b];
  return a < b;
}

}  // namespace

ItemIndex::ItemIndex(std::vector<double> vectors, std::size_t dim,
                     bool normalized)
    : vectors_(std::move(vectors)), dim_(dim), normalized_(normalized) {
  if (dim_ == 0 || vectors_.size() % dim_ != 0) {
    throw Error("item index: bad matrix shape");
  }
}

ItemIndex ItemIndex::Build(const Parameters& params,
                           const ItemCatalog& catalog) {
  const bool cosine = params.config().similarity == SimilarityMode::kCosine;
  std::vector<double> vectors;
  vectors.reserve(catalog.size() * params.dim());
  for (const auto& item : catalog.items()) {
    auto v = EncodeItem(params, item);
    if (cosine) v = Normalized(v);
    vectors.insert(vectors.end(), v.begin(), v.end());
  }
  return ItemIndex(std::move(vectors), params.dim(), cosine);
}

std::vector<double> ItemIndex::Scores(std::span<const double> user_vec) const {
  if (user_vec.size() != dim_) throw Error("item index: dimension mismatch");
  std::vector<double> query(user_vec.begin(), user_vec.end());
  if (normalized_) query = Normalized(query);
  std::vector<double> scores(size());
  for (std::size_t i = 0; i < scores.size(); ++i) {
    scores[i] = Dot(query, row(i));
  }
  return scores;
}

std::vector<ItemId> TopK(std::span<const double> user_vec,
                         const ItemIndex& index, std::size_t k) {
  if (k > index.size()) throw Error("top_k: k exceeds the number of items");
  const auto scores = index.Scores(user_vec);
  std::vector<ItemId> ids(index.size());
  std::iota(ids.begin(), ids.end(), 0);
  std::partial_sort(
      ids.begin(), ids.begin() + k, ids.end(),
      [&](ItemId a, ItemId b) { return Ahead(scores, a, b); });
  ids.resize(k);
  return ids;
}

std::optional<std::size_t> RankOf(std::span<const ItemId> ranked,
                                  ItemId target) {
  auto it = std::find(ranked.begin(), ranked.end(), target);
  if (it == ranked.end()) return std::nullopt;
  return static_cast<std::size_t>(it - ranked.begin()) + 1;
}

int HitAtK(std::span<const ItemId> ranked, ItemId target, std::size_t k) {
  if (k == 0) throw Error("hit rate needs k >= 1");
  const auto rank = RankOf(ranked, target);
  return rank && *rank <= k ? 1 : 0;
}

double NdcgAtK(std::span<const ItemId> ranked, ItemId target, std::size_t k) {
  const auto rank = RankOf(ranked, target);
  if (!rank || *rank > k) return 0.0;
  return 1.0 / std::log2(static_cast<double>(*rank) + 1.0);
}

double MrrAtK(std::span<const ItemId> ranked, ItemId target, std::size_t k) {
  const auto rank = RankOf(ranked, target);
  if (!rank || *rank > k) return 0.0;
  return 1.0 / static_cast<double>(*rank);
}

std::size_t AggregateDiversity(const RecommendationLog& log) {
  if (log.empty()) throw Error("aggregate diversity of an empty log");
  std::unordered_set<ItemId> distinct;
  for (const auto& list : log) distinct.insert(list.begin(), list.end());
  return distinct.size();
}

std::vector<double> PopularityPercentiles(std::span<const double> popularity) {
  const std::size_t n = popularity.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return popularity[a] < popularity[b];
  });
  std::vector<double> pct(n);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j < n && popularity[order[j]] == popularity[order[i]]) ++j;
    // Tied items share the mean of their 1-based ranks i+1 .. j.
    const double mid = (static_cast<double>(i + 1) + static_cast<double>(j)) / 2.0;
    for (std::size_t t = i; t < j; ++t) pct[order[t]] = mid / n;
    i = j;
  }
  return pct;
}

double PopularityIndex(const RecommendationLog& log,
                       std::span<const double> popularity) {
  const auto pct = PopularityPercentiles(popularity);
  double sum = 0.0;
  std::size_t slots = 0;
  for (const auto& list : log) {
    for (ItemId y : list) {
      sum += pct.at(y);
      ++slots;
    }
  }
  if (slots == 0) throw Error("popularity index of an empty log");
  return sum / static_cast<double>(slots);
}

std::vector<HistogramBucket> DegreeHistogram(const RecommendationLog& log,
                                             std::span<const double> degrees,
                                             std::size_t num_buckets) {
  if (num_buckets == 0) throw Error("histogram needs at least one bucket");
  double max_degree = 0.0;
  for (double d : degrees) {
    if (!(d >= 0.0)) throw Error("degrees must be non-negative");
    max_degree = std::max(max_degree, d);
  }
  const double top = std::log(max_degree + 1.0);
  const double width = top / static_cast<double>(num_buckets);
  auto bucket_of = [&](double degree) -> std::size_t {
    if (width == 0.0) return num_buckets - 1;
    const auto b = static_cast<std::size_t>(std::log(degree + 1.0) / width);
    return std::min(b, num_buckets - 1);
  };
  std::vector<HistogramBucket> buckets(num_buckets);
  for (std::size_t b = 0; b < num_buckets; ++b) {
    buckets[b].degree_low = std::exp(width * b) - 1.0;
    buckets[b].degree_high = std::exp(width * (b + 1)) - 1.0;
  }
  std::vector<std::size_t> item_bucket(degrees.size());
  for (std::size_t i = 0; i < degrees.size(); ++i) {
    item_bucket[i] = bucket_of(degrees[i]);
    ++buckets[item_bucket[i]].item_count;
  }
  for (const auto& list : log) {
    for (ItemId y : list) ++buckets[item_bucket.at(y)].rec_mass;
  }
  return buckets;
}

std::string EvalProtocolName(EvalProtocol p) {
  return p == EvalProtocol::kFull ? "full" : "sampled";
}

EvalProtocol ParseEvalProtocol(const std::string& name) {
  if (name == "full") return EvalProtocol::kFull;
  if (name == "sampled") return EvalProtocol::kSampled;
  throw ConfigError("unknown eval protocol '" + name + "'");
}

RecommendationLog Recommend(const Parameters& params,
                            const ItemCatalog& catalog,
                            std::span<const ClickSequence> queries,
                            std::size_t k, std::size_t max_prefix_len) {
  const ItemIndex index = ItemIndex::Build(params, catalog);
  RecommendationLog log;
  log.reserve(queries.size());
  for (const auto& q : queries) {
    const auto prefix = TruncatePrefix(q, max_prefix_len);
    log.push_back(TopK(EncodeUser(params, catalog, prefix), index, k));
  }
  return log;
}

RankingResult EvaluateRanking(const Parameters& params,
                              const ItemCatalog& catalog,
                              std::span<const Instance> instances,
                              const EvalOptions& options) {
  if (options.k == 0) throw Error("evaluation needs k >= 1");
  const ItemIndex index = ItemIndex::Build(params, catalog);
  RankingResult result;
  Rng rng(options.seed);
  for (const auto& inst : instances) {
    const auto prefix = TruncatePrefix(inst.prefix, options.max_prefix_len);
    const auto user = EncodeUser(params, catalog, prefix);
    std::vector<ItemId> ranked;
    if (options.protocol == EvalProtocol::kFull) {
      ranked = TopK(user, index, std::min(options.k, index.size()));
      result.recommendations.push_back(ranked);
    } else {
      // Partial Fisher-Yates over the non-target items.
      std::vector<ItemId> pool;
      pool.reserve(index.size() - 1);
      for (std::size_t i = 0; i < index.size(); ++i) {
        if (static_cast<ItemId>(i) != inst.target) {
          pool.push_back(static_cast<ItemId>(i));
        }
      }
      const std::size_t m = std::min(options.sampled_negatives, pool.size());
      for (std::size_t i = 0; i < m; ++i) {
        std::swap(pool[i], pool[i + UniformIndex(rng, pool.size() - i)]);
      }
      std::vector<ItemId> candidates(pool.begin(), pool.begin() + m);
      candidates.push_back(inst.target);
      const auto scores = index.Scores(user);
      std::sort(candidates.begin(), candidates.end(),
                [&](ItemId a, ItemId b) { return Ahead(scores, a, b); });
      ranked = std::move(candidates);
    }
    result.metrics.hit_rate += HitAtK(ranked, inst.target, options.k);
    result.metrics.ndcg += NdcgAtK(ranked, inst.target, options.k);
    result.metrics.mrr += MrrAtK(ranked, inst.target, options.k);
    ++result.metrics.count;
  }
  if (result.metrics.count > 0) {
    const double n = static_cast<double>(result.metrics.count);
    result.metrics.hit_rate /= n;
    result.metrics.ndcg /= n;
    result.metrics.mrr /= n;
  }
  return result;
}

void WriteHistogramCsv(const std::vector<HistogramBucket>& buckets,
                       const std::string& path,
                       const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  if (!config_hash.empty()) out << "# config_hash=" << config_hash << '\n';
  out << "bucket_low,bucket_high,item_count,rec_mass\n";
  for (const auto& b : buckets) {
    out << fmt::format("{:.6f},{:.6f},{},{}\n", b.degree_low, b.degree_high,
                       b.item_count, b.rec_mass);
  }
}

}  // namespace dcg
