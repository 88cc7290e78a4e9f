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

#include "dcg/encoder.h"

#include <cmath>
#include <fstream>
#include <memory>
#include <set>
#include <vector>

#include "dcg/oracle.h"
#include "dcg/retrieval_eval.h"
#include "dcg/samplers.h"
#include "doctest.h"
#include "test_util.h"

namespace dcg {
namespace {

using testing::MakeCatalog;
using testing::TempDir;

EncoderConfig Config(std::size_t dim, SimilarityMode sim, bool tied = false) {
  EncoderConfig c;
  c.dim = dim;
  c.similarity = sim;
  c.tied = tied;
  return c;
}

void SetRow(Parameters& params, std::size_t table, std::size_t row,
            std::vector<double> values) {
  auto dst = params.row(table, row);
  std::copy(values.begin(), values.end(), dst.begin());
}

std::vector<double> Dlogits(const Logits& logits, Rng& rng) {
  std::vector<double> flat;
  for (const auto& row : logits) {
    for (std::size_t j = 0; j < row.size(); ++j) {
      flat.push_back(StandardNormal(rng));
    }
  }
  return flat;
}

Logits Reshape(const Logits& like, const std::vector<double>& flat) {
  Logits out;
  std::size_t k = 0;
  for (const auto& row : like) {
    out.emplace_back(flat.begin() + static_cast<std::ptrdiff_t>(k),
                     flat.begin() + static_cast<std::ptrdiff_t>(k + row.size()));
    k += row.size();
  }
  return out;
}

TEST_CASE("item tower averages feature rows") {
  ItemCatalog catalog;
  catalog.AddItem("solo", {});
  catalog.AddItem("pair", {{"cat", "x"}});
  Parameters params(Config(2, SimilarityMode::kInnerProduct),
                    catalog.FeatureVocabSizes());
  const std::size_t ids = params.TableIndex(Tower::kItem, 0);
  const std::size_t cats = params.TableIndex(Tower::kItem, 1);
  SetRow(params, ids, 0, {0.3, -0.7});
  SetRow(params, ids, 1, {1.0, 0.0});
  SetRow(params, cats, 0, {0.0, 1.0});
  CHECK(EncodeItem(params, catalog.item(0)) == std::vector<double>{0.3, -0.7});
  CHECK(EncodeItem(params, catalog.item(1)) == std::vector<double>{0.5, 0.5});
}

TEST_CASE("item encoding is deterministic") {
  const auto catalog = MakeCatalog(10);
  const auto params = Parameters::Random(Config(8, SimilarityMode::kCosine),
                                         catalog.FeatureVocabSizes(), 4);
  for (const auto& item : catalog.items()) {
    CHECK(EncodeItem(params, item) == EncodeItem(params, item));
  }
  CHECK(params == Parameters::Random(Config(8, SimilarityMode::kCosine),
                                     catalog.FeatureVocabSizes(), 4));
}

TEST_CASE("feature outside the vocabulary is rejected") {
  const auto catalog = MakeCatalog(5);
  Parameters params(Config(2, SimilarityMode::kInnerProduct), {3, 3});
  CHECK_THROWS_AS(EncodeItem(params, catalog.item(4)), Error);
}

TEST_CASE("user tower decayed mean") {
  ItemCatalog catalog;
  catalog.AddItem("a", {});
  catalog.AddItem("b", {});
  auto config = Config(2, SimilarityMode::kInnerProduct);
  Parameters flat(config, catalog.FeatureVocabSizes());
  const std::size_t user_ids = flat.TableIndex(Tower::kUser, 0);
  SetRow(flat, user_ids, 0, {1.0, 2.0});
  SetRow(flat, user_ids, 1, {4.0, -2.0});
  const ClickSequence seq{0, 1};
  const auto mean = EncodeUser(flat, catalog, seq);
  CHECK(mean[0] == doctest::Approx(2.5));
  CHECK(mean[1] == doctest::Approx(0.0));

  config.decay = 0.5;
  Parameters decayed(config, catalog.FeatureVocabSizes());
  SetRow(decayed, user_ids, 0, {1.0, 2.0});
  SetRow(decayed, user_ids, 1, {4.0, -2.0});
  const auto weighted = EncodeUser(decayed, catalog, seq);
  CHECK(weighted[0] == doctest::Approx((0.5 * 1.0 + 4.0) / 1.5));
  CHECK(weighted[1] == doctest::Approx((0.5 * 2.0 - 2.0) / 1.5));

  const ClickSequence one{1};
  CHECK(EncodeUser(decayed, catalog, one) == std::vector<double>{4.0, -2.0});
  CHECK_THROWS_AS(EncodeUser(decayed, catalog, ClickSequence{}), Error);

  // Untied towers read different tables.
  const std::size_t item_ids = flat.TableIndex(Tower::kItem, 0);
  CHECK(item_ids != user_ids);
  CHECK(EncodeItem(flat, catalog.item(0)) == std::vector<double>{0.0, 0.0});
  CHECK(EncodeItem(flat, catalog.item(0), Tower::kUser) ==
        std::vector<double>{1.0, 2.0});
}

TEST_CASE("similarity") {
  using V = std::vector<double>;
  CHECK(Similarity(V{2, 1}, V{1, 0}, SimilarityMode::kInnerProduct, 0.1) ==
        2.0);
  CHECK(Similarity(V{1, 0}, V{1, 0}, SimilarityMode::kCosine, 0.1) ==
        doctest::Approx(10.0).epsilon(1e-15));
  for (double tau : {0.05, 0.1, 1.0, 7.0}) {
    CHECK(Similarity(V{3, 0}, V{0, -2}, SimilarityMode::kCosine, tau) == 0.0);
  }
  CHECK_THROWS_AS(Similarity(V{0, 0}, V{1, 0}, SimilarityMode::kCosine, 0.1),
                  Error);
  CHECK(ParseSimilarity(SimilarityName(SimilarityMode::kCosine)) ==
        SimilarityMode::kCosine);
  CHECK_THROWS_AS(ParseSimilarity("euclid"), ConfigError);
}

TEST_CASE("encoder config validation") {
  EncoderConfig c;
  c.temperature = 0.0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = EncoderConfig();
  c.decay = 1.5;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
  c = EncoderConfig();
  c.dim = 0;
  CHECK_THROWS_AS(c.Validate(), ConfigError);
}

CandidateSet Pool(std::vector<Candidate> entries, std::size_t pos) {
  return {std::make_shared<const CandidatePool>(std::move(entries)), pos};
}

TEST_CASE("batch forward matches the standalone encoders") {
  const auto catalog = MakeCatalog(12, 4);
  for (bool tied : {false, true}) {
    for (auto sim : {SimilarityMode::kCosine, SimilarityMode::kInnerProduct}) {
      auto config = Config(6, sim, tied);
      config.decay = 0.7;
      const auto params =
          Parameters::Random(config, catalog.FeatureVocabSizes(), 8);
      const std::vector<ClickSequence> queries{{0, 1, 2}, {5}};
      const std::vector<CandidateSet> sets{
          Pool({Candidate::ItemRef(4), Candidate::ItemRef(7),
                Candidate::ItemRef(4)},
               0),
          Pool({Candidate::ItemRef(9), Candidate::ItemRef(1)}, 1)};
      const auto fwd = BatchForward(params, catalog, {queries, sets});
      REQUIRE(fwd.logits.size() == 2);
      for (std::size_t q = 0; q < 2; ++q) {
        const auto u = EncodeUser(params, catalog, queries[q]);
        REQUIRE(fwd.logits[q].size() == sets[q].size());
        for (std::size_t j = 0; j < sets[q].size(); ++j) {
          const auto id = static_cast<ItemId>((*sets[q].pool)[j].index);
          const auto v = EncodeItem(params, catalog.item(id));
          CHECK(fwd.logits[q][j] ==
                doctest::Approx(Similarity(u, v, sim, config.temperature))
                    .epsilon(1e-13));
        }
      }
    }
  }
}

TEST_CASE("shared encoding counts distinct items once per tower") {
  const auto catalog = MakeCatalog(12, 4);
  const std::vector<ClickSequence> queries{{0, 1, 2}, {2, 5}};
  const std::vector<CandidateSet> sets{
      Pool({Candidate::ItemRef(1), Candidate::ItemRef(7),
            Candidate::ItemRef(7)},
           0),
      Pool({Candidate::ItemRef(5), Candidate::ItemRef(1),
            Candidate::CachedRef(0)},
           0)};
  const std::vector<double> cached(4, 0.5);
  // Items: prefixes {0,1,2,5}, candidates {1,5,7}.
  const auto tied = Parameters::Random(
      Config(4, SimilarityMode::kCosine, true), catalog.FeatureVocabSizes(), 1);
  const auto shared =
      BatchForward(tied, catalog, {queries, sets, {}, cached}).stats;
  CHECK(shared.item_encodes == 5);
  CHECK(shared.candidate_item_encodes == 3);
  CHECK(shared.sequence_encodes == 2);

  const auto untied = Parameters::Random(
      Config(4, SimilarityMode::kCosine, false), catalog.FeatureVocabSizes(), 1);
  const auto split =
      BatchForward(untied, catalog, {queries, sets, {}, cached}).stats;
  CHECK(split.item_encodes == 7);
  CHECK(split.candidate_item_encodes == 3);
}

TEST_CASE("zero dlogits give empty gradients") {
  const auto catalog = MakeCatalog(8);
  const auto params = Parameters::Random(
      Config(4, SimilarityMode::kCosine), catalog.FeatureVocabSizes(), 2);
  const std::vector<ClickSequence> queries{{0, 1}, {3}};
  const std::vector<CandidateSet> sets{
      Pool({Candidate::ItemRef(2), Candidate::ItemRef(4)}, 0),
      Pool({Candidate::ItemRef(5), Candidate::ItemRef(6)}, 1)};
  const auto fwd = BatchForward(params, catalog, {queries, sets});
  Logits zero = fwd.logits;
  for (auto& row : zero) std::fill(row.begin(), row.end(), 0.0);
  CHECK(BatchBackward(fwd.tape, zero).empty());

  Logits bad = fwd.logits;
  bad.pop_back();
  CHECK_THROWS_AS(BatchBackward(fwd.tape, bad), Error);
  bad = fwd.logits;
  bad[0].push_back(1.0);
  CHECK_THROWS_AS(BatchBackward(fwd.tape, bad), Error);
}

TEST_CASE("cached candidates receive no gradient") {
  const auto catalog = MakeCatalog(10);
  const auto params = Parameters::Random(
      Config(4, SimilarityMode::kCosine), catalog.FeatureVocabSizes(), 3);
  Rng rng(6);
  std::vector<double> cached(3 * 4);
  for (double& x : cached) x = StandardNormal(rng);
  const std::vector<ClickSequence> queries{{0, 1}, {2}};
  const std::vector<CandidateSet> sets{
      Pool({Candidate::ItemRef(5), Candidate::CachedRef(0),
            Candidate::CachedRef(1), Candidate::CachedRef(2)},
           0),
      Pool({Candidate::CachedRef(2), Candidate::ItemRef(6),
            Candidate::CachedRef(0)},
           1)};
  const auto fwd = BatchForward(params, catalog, {queries, sets, {}, cached});
  const auto grads = BatchBackward(fwd.tape, Reshape(fwd.logits,
                                                     Dlogits(fwd.logits, rng)));
  const auto& item_ids = grads.table(params.TableIndex(Tower::kItem, 0));
  std::set<std::size_t> rows;
  for (const auto& [row, g] : item_ids) rows.insert(row);
  CHECK(rows == std::set<std::size_t>{5, 6});
  const auto& user_ids = grads.table(params.TableIndex(Tower::kUser, 0));
  rows.clear();
  for (const auto& [row, g] : user_ids) rows.insert(row);
  CHECK(rows == std::set<std::size_t>{0, 1, 2});
}

TEST_CASE("gradient matches central differences") {
  for (auto loss : {CheckedLoss::kContrastiveInBatch,
                    CheckedLoss::kContrastiveCachedQueue}) {
    GradCheckCase c;
    c.loss = loss;
    c.seed = 17;
    const auto report = RunGradientCheck(c);
    CHECK(report.coordinates >= 100);
    CHECK(report.max_relative_error <= 1e-4);
  }
}

TEST_CASE("cosine logits are bounded by the inverse temperature") {
  const auto catalog = MakeCatalog(40, 5);
  for (std::uint64_t seed = 1; seed <= 5; ++seed) {
    auto config = Config(3, SimilarityMode::kCosine);
    config.temperature = 0.05 * static_cast<double>(seed);
    config.init_scale = 2.0;
    const auto params =
        Parameters::Random(config, catalog.FeatureVocabSizes(), seed);
    CandidatePool pool;
    for (ItemId i = 0; i < 40; ++i) pool.push_back(Candidate::ItemRef(i));
    const std::vector<ClickSequence> queries{{1, 2, 3}, {39}, {7, 7}};
    const auto shared = std::make_shared<const CandidatePool>(pool);
    const std::vector<CandidateSet> sets(3, CandidateSet{shared, 0});
    const auto fwd = BatchForward(params, catalog, {queries, sets});
    for (const auto& row : fwd.logits) {
      for (double z : row) {
        CHECK(std::abs(z) <= 1.0 / config.temperature + 1e-12);
      }
    }
  }
}

TEST_CASE("scaling all tables keeps the cosine ranking") {
  const auto catalog = MakeCatalog(60, 6);
  auto params = Parameters::Random(Config(8, SimilarityMode::kCosine),
                                   catalog.FeatureVocabSizes(), 21);
  const std::vector<ClickSequence> queries{{0, 4, 9}, {33}, {12, 50}};
  std::vector<std::vector<ItemId>> before;
  for (const auto& q : queries) {
    before.push_back(TopK(EncodeUser(params, catalog, q),
                          ItemIndex::Build(params, catalog), 20));
  }
  for (double factor : {0.01, 3.7, 250.0}) {
    auto scaled = params;
    scaled.ScaleAll(factor);
    for (std::size_t i = 0; i < queries.size(); ++i) {
      CHECK(TopK(EncodeUser(scaled, catalog, queries[i]),
                 ItemIndex::Build(scaled, catalog), 20) == before[i]);
    }
  }
}

TEST_CASE("gradients accumulate") {
  Gradients a(2, 2), b(2, 2);
  a.Row(0, 3)[0] = 1.0;
  b.Row(0, 3)[1] = 2.0;
  b.Row(1, 0)[0] = -1.0;
  a.Add(b, 0.5);
  REQUIRE(a.Find(0, 3) != nullptr);
  CHECK(*a.Find(0, 3) == std::vector<double>{1.0, 1.0});
  CHECK(*a.Find(1, 0) == std::vector<double>{-0.5, 0.0});
  CHECK(a.Find(1, 1) == nullptr);
  CHECK(a.num_rows() == 2);
  a.Scale(2.0);
  CHECK(*a.Find(0, 3) == std::vector<double>{2.0, 2.0});
}

TEST_CASE("checkpoint round trip") {
  TempDir dir("checkpoint");
  const auto catalog = MakeCatalog(9, 2);
  for (bool tied : {false, true}) {
    auto config = Config(5, SimilarityMode::kInnerProduct, tied);
    config.temperature = 0.3;
    config.decay = 0.6;
    const auto params =
        Parameters::Random(config, catalog.FeatureVocabSizes(), 12);
    const auto path = dir.File(tied ? "tied.ckpt" : "untied.ckpt");
    SaveCheckpoint(params, path, 0x1234abcdULL);
    std::uint64_t hash = 0;
    const auto loaded = LoadCheckpoint(path, &hash);
    CHECK(hash == 0x1234abcdULL);
    CHECK(loaded == params);
  }
  const auto junk = dir.File("junk.ckpt");
  testing::WriteText(junk, "not a checkpoint");
  CHECK_THROWS_AS(LoadCheckpoint(junk), Error);
  const auto params = Parameters::Random(Config(4, SimilarityMode::kCosine),
                                         catalog.FeatureVocabSizes(), 1);
  const auto cut = dir.File("cut.ckpt");
  SaveCheckpoint(params, cut);
  const auto bytes = testing::ReadText(cut);
  testing::WriteText(cut, bytes.substr(0, bytes.size() - 8));
  CHECK_THROWS_AS(LoadCheckpoint(cut), Error);
}

}  // namespace
}  // namespace dcg
