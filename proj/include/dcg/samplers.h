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

// Negative sampling: explicit proposals (alias method), in-batch sharing and
// FIFO queues of recent positives, either as raw items or as cached vectors.

#ifndef DCG_SAMPLERS_H_
#define DCG_SAMPLERS_H_

#include <cstddef>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include "dcg/common.h"
#include "dcg/encoder.h"

namespace dcg {

enum class ProposalKind { kUniform, kUnigram, kPopularityAlpha };

std::string ProposalKindName(ProposalKind kind);
ProposalKind ParseProposalKind(const std::string& name);

// Immutable distribution over items with O(1) sampling.
class Proposal {
 public:
  Proposal() = default;

  // uniform: 1/|Y|; unigram: p_data; popularity_alpha: p_data^alpha
  // renormalized. |Y| is p_data.size().
  static Proposal Make(ProposalKind kind, std::span<const double> p_data,
                       double alpha = 1.0);
  static Proposal FromProbabilities(std::vector<double> probabilities);

  ProposalKind kind() const { return kind_; }
  std::size_t size() const { return probs_.size(); }
  const std::vector<double>& probabilities() const { return probs_; }
  double prob(ItemId item) const { return probs_.at(item); }
  double log_prob(ItemId item) const;

  ItemId Sample(Rng& rng) const;
  // L i.i.d. draws.
  std::vector<ItemId> SampleNegatives(std::size_t count, Rng& rng) const;

 private:
  void BuildAlias();

  ProposalKind kind_ = ProposalKind::kUniform;
  std::vector<double> probs_;
  std::vector<double> accept_;
  std::vector<std::uint32_t> alias_;
};

// Fixed-capacity first-in first-out store. Raw mode keeps keys only; cached
// mode also keeps one vector per entry, stored in a ring of capacity rows.
class FifoQueue {
 public:
  enum class Mode { kRaw, kCached };

  FifoQueue(std::size_t capacity, Mode mode, std::size_t dim = 0);

  std::size_t capacity() const { return capacity_; }
  std::size_t size() const { return size_; }
  Mode mode() const { return mode_; }
  std::size_t dim() const { return dim_; }
  std::uint64_t total_enqueued() const { return total_; }

  // Appends in order, evicting the oldest entries beyond capacity. Cached mode
  // needs keys.size() * dim vector values.
  void EnqueueBatch(std::span<const std::int64_t> keys,
                    std::span<const double> vectors = {});

  // Logical index 0 is the oldest entry.
  std::int64_t key(std::size_t i) const { return keys_[Slot(i)]; }
  std::size_t Slot(std::size_t i) const {
    return (head_ + i) % capacity_;
  }
  std::span<const double> vector(std::size_t i) const {
    return std::span<const double>(vectors_).subspan(Slot(i) * dim_, dim_);
  }
  // capacity x dim ring storage, addressed by Slot().
  std::span<const double> storage() const { return vectors_; }
  std::vector<std::int64_t> Keys() const;

 private:
  std::size_t capacity_;
  Mode mode_;
  std::size_t dim_;
  std::size_t head_ = 0;
  std::size_t size_ = 0;
  std::uint64_t total_ = 0;
  std::vector<std::int64_t> keys_;
  std::vector<double> vectors_;
};

// Every instance shares the multiset of the batch positives; instance b's
// positive is entry b.
std::vector<CandidateSet> InBatchCandidates(std::span<const ItemId> positives);

// Candidate sets over the whole queue content (oldest first) after the
// current batch of batch_size positives was enqueued. Instance b's positive
// is its own just-enqueued entry. In cached mode, entries from earlier
// batches become kCached references to storage() rows; the current batch
// stays live. With live_sequences the live entries are kSequence references
// to the batch position instead of kItem references to the key.
std::vector<CandidateSet> QueueCandidates(const FifoQueue& queue,
                                          std::size_t batch_size,
                                          bool live_sequences = false);

struct ExplicitCandidates {
  std::vector<CandidateSet> sets;
  std::vector<std::vector<double>> logq;
};

// Per-instance candidates [positive, L draws from the proposal] with the log
// proposal of every entry.
ExplicitCandidates SampleExplicitCandidates(std::span<const ItemId> positives,
                                            const Proposal& proposal,
                                            std::size_t num_negatives,
                                            Rng& rng);

}  // namespace dcg

#endif  // DCG_SAMPLERS_H_
