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

#include "dcg/samplers.h"

#include <cmath>
#include <memory>

#include <fmt/format.h>

namespace dcg {

std::string ProposalKindName(ProposalKind kind) {
  switch (kind) {
    case ProposalKind::kUniform:
      return "uniform";
    case ProposalKind::kUnigram:
      return "unigram";
    case ProposalKind::kPopularityAlpha:
      return "popularity_alpha";
  }
  return "unknown";
}

ProposalKind ParseProposalKind(const std::string& name) {
  if (name == "uniform") return ProposalKind::kUniform;
  if (name == "unigram") return ProposalKind::kUnigram;
  if (name == "popularity_alpha") return ProposalKind::kPopularityAlpha;
  throw ConfigError("unknown sampler kind '" + name + "'");
}

Proposal Proposal::Make(ProposalKind kind, std::span<const double> p_data,
                        double alpha) {
  if (p_data.empty()) throw Error("proposal over an empty catalog");
  std::vector<double> probs(p_data.size());
  switch (kind) {
    case ProposalKind::kUniform:
      std::fill(probs.begin(), probs.end(), 1.0 / p_data.size());
      break;
    case ProposalKind::kUnigram:
      probs.assign(p_data.begin(), p_data.end());
      break;
    case ProposalKind::kPopularityAlpha: {
      double total = 0.0;
      for (std::size_t i = 0; i < p_data.size(); ++i) {
        probs[i] = p_data[i] > 0.0 ? std::pow(p_data[i], alpha) : 0.0;
        total += probs[i];
      }
      if (!(total > 0.0)) {
        throw Error("popularity proposal from an all-zero distribution");
      }
      for (auto& p : probs) p /= total;
      break;
    }
  }
  Proposal proposal = FromProbabilities(std::move(probs));
  proposal.kind_ = kind;
  return proposal;
}

Proposal Proposal::FromProbabilities(std::vector<double> probabilities) {
  double total = 0.0;
  for (double p : probabilities) {
    if (!(p >= 0.0) || !std::isfinite(p)) {
      throw Error("proposal probabilities must be finite and non-negative");
    }
    total += p;
  }
  if (std::abs(total - 1.0) > 1e-9) {
    throw Error(fmt::format("proposal probabilities sum to {}", total));
  }
  Proposal proposal;
  proposal.kind_ = ProposalKind::kUnigram;
  proposal.probs_ = std::move(probabilities);
  proposal.BuildAlias();
  return proposal;
}

double Proposal::log_prob(ItemId item) const { return std::log(prob(item)); }

void Proposal::BuildAlias() {
  // Vose's alias method.
  const std::size_t n = probs_.size();
  accept_.assign(n, 0.0);
  alias_.assign(n, 0);
  std::vector<double> scaled(n);
  std::vector<std::uint32_t> small, large;
  for (std::size_t i = 0; i < n; ++i) {
    scaled[i] = probs_[i] * static_cast<double>(n);
    (scaled[i] < 1.0 ? small : large).push_back(static_cast<std::uint32_t>(i));
  }
  while (!small.empty() && !large.empty()) {
    const auto s = small.back();
    small.pop_back();
    const auto l = large.back();
    accept_[s] = scaled[s];
    alias_[s] = l;
    scaled[l] = (scaled[l] + scaled[s]) - 1.0;
    if (scaled[l] < 1.0) {
      large.pop_back();
      small.push_back(l);
    }
  }
  for (auto l : large) {
    accept_[l] = 1.0;
    alias_[l] = l;
  }
  // Leftovers here come from rounding; zero-probability items never qualify.
  for (auto s : small) {
    accept_[s] = probs_[s] > 0.0 ? 1.0 : 0.0;
    alias_[s] = s;
  }
}

ItemId Proposal::Sample(Rng& rng) const {
  const auto column = UniformIndex(rng, probs_.size());
  const double coin = UniformUnit(rng);
  return static_cast<ItemId>(coin < accept_[column] ? column : alias_[column]);
}

std::vector<ItemId> Proposal::SampleNegatives(std::size_t count,
                                              Rng& rng) const {
  std::vector<ItemId> out(count);
  for (auto& x : out) x = Sample(rng);
  return out;
}

FifoQueue::FifoQueue(std::size_t capacity, Mode mode, std::size_t dim)
    : capacity_(capacity), mode_(mode), dim_(mode == Mode::kCached ? dim : 0) {
  if (capacity == 0) throw Error("queue capacity must be positive");
  if (mode == Mode::kCached && dim == 0) {
    throw Error("cached queue needs a positive vector dimension");
  }
  keys_.resize(capacity);
  vectors_.resize(capacity * dim_);
}

void FifoQueue::EnqueueBatch(std::span<const std::int64_t> keys,
                             std::span<const double> vectors) {
  if (mode_ == Mode::kCached && vectors.size() != keys.size() * dim_) {
    throw Error(fmt::format("cached enqueue needs {} vector values, got {}",
                            keys.size() * dim_, vectors.size()));
  }
  for (std::size_t i = 0; i < keys.size(); ++i) {
    std::size_t slot;
    if (size_ < capacity_) {
      slot = (head_ + size_) % capacity_;
      ++size_;
    } else {
      slot = head_;
      head_ = (head_ + 1) % capacity_;
    }
    keys_[slot] = keys[i];
    if (mode_ == Mode::kCached) {
      std::copy_n(vectors.begin() + i * dim_, dim_,
                  vectors_.begin() + slot * dim_);
    }
    ++total_;
  }
}

std::vector<std::int64_t> FifoQueue::Keys() const {
  std::vector<std::int64_t> out(size_);
  for (std::size_t i = 0; i < size_; ++i) out[i] = key(i);
  return out;
}

std::vector<CandidateSet> InBatchCandidates(std::span<const ItemId> positives) {
  auto pool = std::make_shared<CandidatePool>();
  pool->reserve(positives.size());
  for (ItemId y : positives) pool->push_back(Candidate::ItemRef(y));
  std::vector<CandidateSet> sets(positives.size());
  for (std::size_t b = 0; b < positives.size(); ++b) sets[b] = {pool, b};
  return sets;
}

std::vector<CandidateSet> QueueCandidates(const FifoQueue& queue,
                                          std::size_t batch_size,
                                          bool live_sequences) {
  if (batch_size > queue.size()) {
    throw Error(fmt::format(
        "queue holds {} entries but the batch has {} positives; capacity {} "
        "is smaller than the batch",
        queue.size(), batch_size, queue.capacity()));
  }
  const std::size_t first_live = queue.size() - batch_size;
  auto pool = std::make_shared<CandidatePool>();
  pool->reserve(queue.size());
  for (std::size_t i = 0; i < queue.size(); ++i) {
    if (i >= first_live) {
      pool->push_back(live_sequences
                          ? Candidate::SequenceRef(i - first_live)
                          : Candidate::ItemRef(static_cast<ItemId>(queue.key(i))));
    } else if (queue.mode() == FifoQueue::Mode::kCached) {
      pool->push_back(Candidate::CachedRef(queue.Slot(i)));
    } else {
      pool->push_back(Candidate::ItemRef(static_cast<ItemId>(queue.key(i))));
    }
  }
  std::vector<CandidateSet> sets(batch_size);
  for (std::size_t b = 0; b < batch_size; ++b) sets[b] = {pool, first_live + b};
  return sets;
}

ExplicitCandidates SampleExplicitCandidates(std::span<const ItemId> positives,
                                            const Proposal& proposal,
                                            std::size_t num_negatives,
                                            Rng& rng) {
  ExplicitCandidates out;
  out.sets.reserve(positives.size());
  out.logq.reserve(positives.size());
  for (ItemId y : positives) {
    auto pool = std::make_shared<CandidatePool>();
    std::vector<double> logq;
    pool->reserve(num_negatives + 1);
    logq.reserve(num_negatives + 1);
    pool->push_back(Candidate::ItemRef(y));
    logq.push_back(proposal.log_prob(y));
    for (ItemId neg : proposal.SampleNegatives(num_negatives, rng)) {
      pool->push_back(Candidate::ItemRef(neg));
      logq.push_back(proposal.log_prob(neg));
    }
    out.sets.push_back({std::move(pool), 0});
    out.logq.push_back(std::move(logq));
  }
  return out;
}

}  // namespace dcg
