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

#include <algorithm>
#include <cmath>
#include <numeric>
#include <vector>

#include "dcg/corpus.h"
#include "dcg/encoder.h"
#include "dcg/losses.h"
#include "doctest.h"
#include "test_util.h"

namespace dcg {
namespace {

using testing::MakeCatalog;
using testing::MakeDataset;

std::vector<std::int64_t> Keys(std::initializer_list<std::int64_t> keys) {
  return keys;
}

TEST_CASE("proposal kinds") {
  const std::vector<double> p{0.5, 0.25, 0.25, 0.0};
  const auto uniform = Proposal::Make(ProposalKind::kUniform, p);
  CHECK(uniform.probabilities() == std::vector<double>(4, 0.25));

  const ItemId a = 0, b = 1, c = 2;
  const auto counts = EmpiricalItemDistribution(MakeDataset({{a, a, b, c}}, 3));
  const auto unigram = Proposal::Make(ProposalKind::kUnigram, counts);
  CHECK(unigram.probabilities() == std::vector<double>{0.5, 0.25, 0.25});

  const std::vector<double> skewed{0.64, 0.16, 0.16, 0.04};
  const auto alpha = Proposal::Make(ProposalKind::kPopularityAlpha, skewed, 0.5);
  const std::vector<double> expected{0.4444444444444445, 0.22222222222222224,
                                     0.22222222222222224, 0.11111111111111112};
  for (std::size_t i = 0; i < 4; ++i) {
    CHECK(alpha.prob(static_cast<ItemId>(i)) ==
          doctest::Approx(expected[i]).epsilon(1e-14));
  }
  CHECK(alpha.log_prob(3) == doctest::Approx(std::log(expected[3])));
  CHECK(unigram.log_prob(0) == doctest::Approx(std::log(0.5)));

  const std::vector<double> zeros(3, 0.0);
  CHECK_THROWS_AS(Proposal::Make(ProposalKind::kPopularityAlpha, zeros, 0.5),
                  Error);
  CHECK_THROWS_AS(Proposal::FromProbabilities({0.5, 0.4}), Error);
  CHECK_THROWS_AS(Proposal::FromProbabilities({1.5, -0.5}), Error);
  CHECK(ParseProposalKind(ProposalKindName(ProposalKind::kPopularityAlpha)) ==
        ProposalKind::kPopularityAlpha);
  CHECK_THROWS_AS(ParseProposalKind("zipf"), ConfigError);
}

TEST_CASE("uniform proposal frequencies over a million draws") {
  const auto uniform =
      Proposal::Make(ProposalKind::kUniform, std::vector<double>(10, 0.1));
  Rng rng(99);
  std::vector<std::size_t> counts(10, 0);
  for (ItemId y : uniform.SampleNegatives(1000000, rng)) ++counts[y];
  for (std::size_t c : counts) {
    const double freq = static_cast<double>(c) / 1e6;
    CHECK(freq >= 0.095);
    CHECK(freq <= 0.105);
  }
}

TEST_CASE("sampling follows a skewed proposal") {
  const std::vector<double> p{0.5, 0.3, 0.15, 0.05, 0.0};
  const auto proposal = Proposal::FromProbabilities(p);
  Rng rng(7);
  const std::size_t n = 400000;
  std::vector<double> counts(5, 0.0);
  for (ItemId y : proposal.SampleNegatives(n, rng)) counts[y] += 1.0;
  // Pearson statistic over the four supported cells, 3 dof; 16.27 is the
  // 0.999 quantile.
  double chi2 = 0.0;
  for (std::size_t i = 0; i < 4; ++i) {
    const double e = p[i] * static_cast<double>(n);
    chi2 += (counts[i] - e) * (counts[i] - e) / e;
  }
  CHECK(chi2 < 16.27);
  CHECK(counts[4] == 0.0);
}

TEST_CASE("sampling edge cases") {
  const auto point = Proposal::FromProbabilities({0.0, 1.0, 0.0});
  Rng rng(1);
  for (ItemId y : point.SampleNegatives(100, rng)) CHECK(y == 1);

  const auto uniform =
      Proposal::Make(ProposalKind::kUniform, std::vector<double>(50, 0.02));
  Rng r1(5), r2(5);
  CHECK(uniform.SampleNegatives(200, r1) == uniform.SampleNegatives(200, r2));
}

TEST_CASE("in-batch candidates") {
  const std::vector<ItemId> positives{4, 8, 2};
  const auto sets = InBatchCandidates(positives);
  REQUIRE(sets.size() == 3);
  for (std::size_t b = 0; b < 3; ++b) {
    REQUIRE(sets[b].size() == 3);
    CHECK(sets[b].pos_index == b);
    for (std::size_t j = 0; j < 3; ++j) {
      CHECK((*sets[b].pool)[j] == Candidate::ItemRef(positives[j]));
    }
  }

  const std::vector<ItemId> single{5};
  const auto one = InBatchCandidates(single);
  REQUIRE(one[0].size() == 1);
  const std::vector<double> logit{0.3};
  CHECK(ContrastiveLoss({logit, one[0].pos_index}).value == 0.0);

  const std::vector<ItemId> dup{1, 1, 3};
  const auto multi = InBatchCandidates(dup);
  CHECK(std::count(multi[0].pool->begin(), multi[0].pool->end(),
                   Candidate::ItemRef(1)) == 2);
}

TEST_CASE("fifo queue") {
  FifoQueue q(4, FifoQueue::Mode::kRaw);
  q.EnqueueBatch(Keys({0, 1, 2}));
  CHECK(q.Keys() == Keys({0, 1, 2}));
  q.EnqueueBatch(Keys({3, 4}));
  CHECK(q.Keys() == Keys({1, 2, 3, 4}));
  CHECK(q.size() == 4);
  CHECK(q.total_enqueued() == 5);

  FifoQueue big(16, FifoQueue::Mode::kRaw);
  std::vector<std::int64_t> all;
  for (std::int64_t k = 0; k < 16; ++k) all.push_back(100 - k);
  big.EnqueueBatch(all);
  CHECK(big.Keys() == all);

  CHECK_THROWS_AS(FifoQueue(0, FifoQueue::Mode::kRaw), Error);
  FifoQueue cached(3, FifoQueue::Mode::kCached, 2);
  CHECK_THROWS_AS(cached.EnqueueBatch(Keys({1})), Error);
  const std::vector<double> v{1, 2, 3, 4, 5, 6, 7, 8};
  cached.EnqueueBatch(Keys({7, 8, 9, 10}), v);
  CHECK(cached.Keys() == Keys({8, 9, 10}));
  CHECK(cached.vector(0)[0] == 3.0);
  CHECK(cached.vector(2)[1] == 8.0);
}

TEST_CASE("queue content is always the last capacity positives") {
  Rng rng(12);
  FifoQueue q(37, FifoQueue::Mode::kCached, 1);
  std::vector<std::int64_t> stream;
  for (int step = 0; step < 200; ++step) {
    const std::size_t b = 1 + UniformIndex(rng, 20);
    std::vector<std::int64_t> keys;
    std::vector<double> vecs;
    for (std::size_t i = 0; i < b; ++i) {
      keys.push_back(static_cast<std::int64_t>(stream.size()));
      vecs.push_back(static_cast<double>(stream.size()));
      stream.push_back(keys.back());
    }
    q.EnqueueBatch(keys, vecs);
    const std::size_t n = std::min<std::size_t>(37, stream.size());
    REQUIRE(q.size() == n);
    for (std::size_t i = 0; i < n; ++i) {
      REQUIRE(q.key(i) == stream[stream.size() - n + i]);
      REQUIRE(q.vector(i)[0] == static_cast<double>(q.key(i)));
    }
  }
}

TEST_CASE("queue candidates") {
  FifoQueue q(2560, FifoQueue::Mode::kRaw);
  std::vector<std::int64_t> keys(256);
  for (int step = 0; step < 10; ++step) {
    std::iota(keys.begin(), keys.end(), step * 256);
    q.EnqueueBatch(keys);
  }
  const auto sets = QueueCandidates(q, 256);
  REQUIRE(sets.size() == 256);
  for (std::size_t b = 0; b < 256; ++b) {
    CHECK(sets[b].size() - 1 == 2559);
    CHECK((*sets[b].pool)[sets[b].pos_index] ==
          Candidate::ItemRef(static_cast<ItemId>(9 * 256 + b)));
  }

  FifoQueue small(4, FifoQueue::Mode::kRaw);
  small.EnqueueBatch(Keys({1, 2, 3}));
  CHECK_THROWS_AS(QueueCandidates(small, 4), Error);

  // An older occurrence of the positive stays a negative.
  FifoQueue repeat(4, FifoQueue::Mode::kRaw);
  repeat.EnqueueBatch(Keys({5, 6}));
  repeat.EnqueueBatch(Keys({5, 7}));
  const auto rs = QueueCandidates(repeat, 2);
  CHECK(rs[0].pos_index == 2);
  CHECK((*rs[0].pool)[0] == Candidate::ItemRef(5));

  FifoQueue cached(4, FifoQueue::Mode::kCached, 1);
  const std::vector<double> v{0.1, 0.2, 0.3};
  cached.EnqueueBatch(Keys({1, 2, 3}), v);
  const auto cs = QueueCandidates(cached, 1);
  CHECK((*cs[0].pool)[0].kind == CandidateKind::kCached);
  CHECK((*cs[0].pool)[1].kind == CandidateKind::kCached);
  CHECK((*cs[0].pool)[2] == Candidate::ItemRef(3));
}

TEST_CASE("a queue the size of the batch matches in-batch candidates") {
  const auto catalog = MakeCatalog(30, 5);
  EncoderConfig config;
  config.dim = 6;
  const auto params =
      Parameters::Random(config, catalog.FeatureVocabSizes(), 3);
  const std::vector<ItemId> positives{3, 17, 3, 29, 11};
  const std::vector<ClickSequence> queries{{1}, {2, 4}, {5, 6, 7}, {8}, {0, 9}};
  FifoQueue q(5, FifoQueue::Mode::kRaw);
  q.EnqueueBatch(Keys({20, 21}));
  q.EnqueueBatch(std::vector<std::int64_t>(positives.begin(), positives.end()));
  const auto queue_sets = QueueCandidates(q, 5);
  const auto batch_sets = InBatchCandidates(positives);
  const auto a = BatchForward(params, catalog, {queries, queue_sets});
  const auto b = BatchForward(params, catalog, {queries, batch_sets});
  for (std::size_t i = 0; i < 5; ++i) {
    const double la =
        ContrastiveLoss({a.logits[i], queue_sets[i].pos_index}).value;
    const double lb =
        ContrastiveLoss({b.logits[i], batch_sets[i].pos_index}).value;
    CHECK(la == lb);
  }
}

TEST_CASE("explicit candidates") {
  const auto proposal = Proposal::FromProbabilities({0.1, 0.2, 0.3, 0.4});
  Rng rng(3);
  const std::vector<ItemId> positives{2, 0};
  const auto ex = SampleExplicitCandidates(positives, proposal, 6, rng);
  REQUIRE(ex.sets.size() == 2);
  for (std::size_t b = 0; b < 2; ++b) {
    CHECK(ex.sets[b].size() == 7);
    CHECK(ex.sets[b].pos_index == 0);
    CHECK((*ex.sets[b].pool)[0] == Candidate::ItemRef(positives[b]));
    for (std::size_t j = 0; j < 7; ++j) {
      const auto y = static_cast<ItemId>((*ex.sets[b].pool)[j].index);
      CHECK(ex.logq[b][j] == proposal.log_prob(y));
    }
  }
}

TEST_CASE("queue entries follow the training positive distribution") {
  const auto world = SimulateBiasedLogs(testing::SmallWorld(20, 600, 4));
  const auto instances = BuildInstances(world.dataset, 5);
  const auto p_data = EmpiricalItemDistribution(world.dataset);
  std::vector<ItemId> stream;
  for (const auto& inst : instances) stream.push_back(inst.target);
  Rng rng(8);
  std::shuffle(stream.begin(), stream.end(), rng);

  // Positives of the training stream, which excludes first clicks.
  std::vector<double> stream_freq(20, 0.0);
  for (ItemId y : stream) stream_freq[y] += 1.0 / stream.size();

  const std::size_t batch = 16;
  FifoQueue q(160, FifoQueue::Mode::kRaw);
  std::vector<double> freq(20, 0.0);
  std::vector<bool> seen(20, false);
  double total = 0.0;
  for (std::size_t start = 0; start + batch <= stream.size(); start += batch) {
    std::vector<std::int64_t> keys(stream.begin() + start,
                                   stream.begin() + start + batch);
    q.EnqueueBatch(keys);
    for (std::size_t i = 0; i < q.size(); ++i) {
      freq[q.key(i)] += 1.0;
      seen[q.key(i)] = true;
    }
    total += static_cast<double>(q.size());
  }
  for (double& f : freq) f /= total;
  CHECK(TotalVariation(freq, stream_freq) <= 0.02);
  CHECK(TotalVariation(freq, p_data) <= 0.02);
  for (std::size_t y = 0; y < 20; ++y) {
    if (stream_freq[y] > 0.0) CHECK(seen[y]);
  }
}

}  // namespace
}  // namespace dcg
