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

#include "dcg/oracle.h"

#include <algorithm>
#include <cmath>
#include <numeric>

#include <fmt/format.h>

#include "dcg/corpus.h"
#include "dcg/losses.h"
#include "dcg/samplers.h"

namespace dcg {
namespace {

std::vector<double> Softmax(std::span<const double> logits) {
  const double m = *std::max_element(logits.begin(), logits.end());
  std::vector<double> p(logits.size());
  double z = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    p[i] = std::exp(logits[i] - m);
    z += p[i];
  }
  for (auto& x : p) x /= z;
  return p;
}

void CheckSameShape(const ProbTable& a, const ProbTable& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw Error("probability tables differ in shape");
  }
}

}  // namespace

ProbTable::ProbTable(std::vector<std::vector<double>> rows)
    : rows_(std::move(rows)) {
  if (rows_.empty()) throw Error("probability table without rows");
  for (std::size_t x = 0; x < rows_.size(); ++x) {
    if (rows_[x].size() != rows_[0].size() || rows_[x].empty()) {
      throw Error("probability table rows must share a non-zero width");
    }
    double total = 0.0;
    for (double v : rows_[x]) {
      if (!(v >= 0.0) || !std::isfinite(v)) {
        throw Error(fmt::format("row {} has a negative or non-finite entry", x));
      }
      total += v;
    }
    if (std::abs(total - 1.0) > 1e-12) {
      throw Error(fmt::format("row {} sums to {:.17g}", x, total));
    }
  }
}

ProbTable ProbTable::Random(std::size_t rows, std::size_t cols,
                            double min_prob, Rng& rng) {
  if (cols == 0 || !(min_prob >= 0.0) || min_prob * cols >= 1.0) {
    throw Error("cannot draw rows with that floor");
  }
  std::vector<std::vector<double>> out(rows, std::vector<double>(cols));
  for (auto& row : out) {
    // Exponential spacings give a uniform draw from the simplex.
    double total = 0.0;
    for (auto& v : row) {
      v = -std::log(1.0 - UniformUnit(rng));
      total += v;
    }
    const double free_mass = 1.0 - min_prob * static_cast<double>(cols);
    for (auto& v : row) v = min_prob + free_mass * v / total;
    // Put the rounding residue on the largest entry.
    const double sum = std::accumulate(row.begin(), row.end(), 0.0);
    *std::max_element(row.begin(), row.end()) += 1.0 - sum;
  }
  return ProbTable(std::move(out));
}

std::vector<double> TargetDistributionR(std::span<const double> p_data,
                                        std::span<const double> q) {
  if (p_data.size() != q.size() || p_data.empty()) {
    throw Error("target distribution: rows differ in length");
  }
  std::vector<double> r(p_data.size(), 0.0);
  double z = 0.0;
  for (std::size_t y = 0; y < r.size(); ++y) {
    if (p_data[y] == 0.0) continue;
    if (!(q[y] > 0.0)) {
      throw Error(fmt::format(
          "item {} has data mass {} but zero propensity", y, p_data[y]));
    }
    r[y] = p_data[y] / q[y];
    z += r[y];
  }
  if (!(z > 0.0)) throw Error("target distribution of an all-zero row");
  for (auto& v : r) v /= z;
  return r;
}

ProbTable TargetDistributionR(const ProbTable& p_data, const ProbTable& q) {
  CheckSameShape(p_data, q);
  std::vector<std::vector<double>> rows;
  for (std::size_t x = 0; x < p_data.rows(); ++x) {
    rows.push_back(TargetDistributionR(p_data.row(x), q.row(x)));
  }
  return ProbTable(std::move(rows));
}

double KlDivergence(std::span<const double> p, std::span<const double> q) {
  if (p.size() != q.size()) throw Error("kl divergence: length mismatch");
  double kl = 0.0;
  for (std::size_t i = 0; i < p.size(); ++i) {
    if (p[i] == 0.0) continue;
    if (!(q[i] > 0.0)) {
      throw Error(fmt::format("kl divergence: q[{}] = 0 where p > 0", i));
    }
    kl += p[i] * std::log(p[i] / q[i]);
  }
  return std::max(kl, 0.0);
}

double MaxRowTotalVariation(const ProbTable& a, const ProbTable& b) {
  CheckSameShape(a, b);
  double worst = 0.0;
  for (std::size_t x = 0; x < a.rows(); ++x) {
    worst = std::max(worst, TotalVariation(a.row(x), b.row(x)));
  }
  return worst;
}

IpwFit FitTabularIpw(const ProbTable& p_data, const ProbTable& q,
                     const IpwFitOptions& options) {
  IpwFit fit{TargetDistributionR(p_data, q), {}, 0.0, 0};
  std::vector<std::vector<double>> rows;
  for (std::size_t x = 0; x < p_data.rows(); ++x) {
    const auto r = fit.analytic.row(x);
    // Gradient of sum_y w_y (-log p_theta(y)) with w = p_data / q, divided by
    // the total weight, is p_theta - r.
    std::vector<double> theta(r.size(), 0.0);
    std::vector<double> p = Softmax(theta);
    std::size_t it = 0;
    double kl = KlDivergence(r, p);
    while (kl > options.kl_tolerance && it < options.max_iterations) {
      for (std::size_t y = 0; y < theta.size(); ++y) {
        theta[y] -= options.learning_rate * (p[y] - r[y]);
      }
      p = Softmax(theta);
      kl = KlDivergence(r, p);
      ++it;
    }
    fit.max_kl = std::max(fit.max_kl, kl);
    fit.iterations = std::max(fit.iterations, it);
    // Renormalize so the row passes the table's sum check exactly enough.
    const double sum = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) v /= sum;
    rows.push_back(std::move(p));
  }
  fit.descent = ProbTable(std::move(rows));
  return fit;
}

ContrastiveFit FitTabularContrastive(const ProbTable& p_data,
                                     const ProbTable& q,
                                     const ContrastiveFitOptions& options) {
  CheckSameShape(p_data, q);
  if (options.steps == 0) throw Error("contrastive fit needs steps");
  if (!options.exhaustive && options.negatives == 0) {
    throw Error("contrastive fit needs at least one negative");
  }
  if (!(options.tail_average > 0.0 && options.tail_average <= 1.0)) {
    throw Error("tail_average must be in (0, 1]");
  }
  const ProbTable r = TargetDistributionR(p_data, q);
  const std::size_t nx = p_data.rows(), ny = p_data.cols();
  std::vector<Proposal> data, proposals;
  for (std::size_t x = 0; x < nx; ++x) {
    data.push_back(Proposal::FromProbabilities(
        {p_data.row(x).begin(), p_data.row(x).end()}));
    proposals.push_back(
        Proposal::FromProbabilities({q.row(x).begin(), q.row(x).end()}));
  }
  Rng rng(options.seed);
  std::vector<std::vector<double>> theta(nx, std::vector<double>(ny, 0.0));
  std::vector<std::vector<double>> average(nx, std::vector<double>(ny, 0.0));
  const auto tail_begin = static_cast<std::size_t>(
      std::floor(static_cast<double>(options.steps) * (1.0 - options.tail_average)));
  const double decay =
      options.steps > 1
          ? std::log(options.lr_end / options.lr_start) /
                static_cast<double>(options.steps - 1)
          : 0.0;
  std::vector<ItemId> candidates;
  std::vector<double> logits;
  for (std::size_t step = 0; step < options.steps; ++step) {
    const double lr = options.lr_start * std::exp(decay * step);
    for (std::size_t x = 0; x < nx; ++x) {
      auto& th = theta[x];
      const ItemId y = data[x].Sample(rng);
      candidates.clear();
      if (options.exhaustive) {
        for (std::size_t i = 0; i < ny; ++i) {
          candidates.push_back(static_cast<ItemId>(i));
        }
      } else {
        candidates.push_back(y);
        for (std::size_t l = 0; l < options.negatives; ++l) {
          candidates.push_back(proposals[x].Sample(rng));
        }
      }
      logits.resize(candidates.size());
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        logits[j] = th[candidates[j]];
      }
      const auto soft = Softmax(logits);
      for (std::size_t j = 0; j < candidates.size(); ++j) {
        th[candidates[j]] -= lr * soft[j];
      }
      th[y] += lr;
      if (step >= tail_begin) {
        for (std::size_t i = 0; i < ny; ++i) average[x][i] += th[i];
      }
    }
  }
  ContrastiveFit fit;
  std::vector<std::vector<double>> rows;
  const double averaged = static_cast<double>(options.steps - tail_begin);
  for (std::size_t x = 0; x < nx; ++x) {
    for (auto& v : average[x]) v /= averaged;
    auto p = Softmax(average[x]);
    const double sum = std::accumulate(p.begin(), p.end(), 0.0);
    for (auto& v : p) v /= sum;
    fit.row_tv.push_back(TotalVariation(p, r.row(x)));
    fit.row_kl.push_back(KlDivergence(r.row(x), p));
    rows.push_back(std::move(p));
  }
  fit.fitted = ProbTable(std::move(rows));
  fit.converged = std::all_of(fit.row_tv.begin(), fit.row_tv.end(), [&](double tv) {
    return tv <= options.tv_tolerance;
  });
  return fit;
}

TheoremReport VerifyTheorem(const TheoremOptions& options) {
  TheoremReport report;
  report.passed = true;
  for (std::size_t i = 0; i < options.instances; ++i) {
    Rng rng(options.seed * 1000003ULL + i);
    const ProbTable p_data =
        ProbTable::Random(options.contexts, options.items, options.min_prob, rng);
    const ProbTable q =
        ProbTable::Random(options.contexts, options.items, options.min_prob, rng);
    ContrastiveFitOptions fit_options = options.fit;
    fit_options.seed = options.fit.seed + i;
    const ContrastiveFit contrastive =
        FitTabularContrastive(p_data, q, fit_options);
    const IpwFit ipw = FitTabularIpw(p_data, q);
    const ProbTable r = TargetDistributionR(p_data, q);

    TheoremInstanceReport inst;
    inst.row_tv = contrastive.row_tv;
    inst.row_kl = contrastive.row_kl;
    inst.ipw_descent_kl = ipw.max_kl;
    inst.ipw_analytic_exact = true;
    for (std::size_t x = 0; x < r.rows(); ++x) {
      for (std::size_t y = 0; y < r.cols(); ++y) {
        if (ipw.analytic.at(x, y) != r.at(x, y)) inst.ipw_analytic_exact = false;
      }
    }
    inst.agreement_tv = MaxRowTotalVariation(contrastive.fitted, ipw.descent);
    inst.passed = contrastive.converged && inst.ipw_analytic_exact &&
                  inst.ipw_descent_kl <= options.kl_tolerance &&
                  inst.agreement_tv <= options.agreement_tolerance;
    report.passed = report.passed && inst.passed;
    report.instances.push_back(std::move(inst));
  }
  return report;
}

GradCheckReport FiniteDifferenceCheck(const std::function<double()>& loss,
                                      std::span<double* const> coords,
                                      std::span<const double> analytic,
                                      double eps) {
  if (!(eps >= 1e-7 && eps <= 1e-3)) {
    throw Error("finite-difference step must be in [1e-7, 1e-3]");
  }
  if (coords.size() != analytic.size()) {
    throw Error("one analytic value per coordinate required");
  }
  GradCheckReport report;
  report.coordinates = coords.size();
  for (std::size_t i = 0; i < coords.size(); ++i) {
    double& w = *coords[i];
    const double saved = w;
    w = saved + eps;
    const double up = loss();
    w = saved - eps;
    const double down = loss();
    w = saved;
    const double numeric = (up - down) / (2.0 * eps);
    const double denom = std::max(std::abs(analytic[i]), std::abs(numeric));
    const double err =
        denom < 1e-8 ? 0.0 : std::abs(analytic[i] - numeric) / denom;
    report.errors.push_back(err);
    report.max_relative_error = std::max(report.max_relative_error, err);
  }
  return report;
}

std::string CheckedLossName(CheckedLoss loss) {
  switch (loss) {
    case CheckedLoss::kFullSoftmax:
      return "full_softmax";
    case CheckedLoss::kSampledSoftmax:
      return "sampled_softmax";
    case CheckedLoss::kContrastiveInBatch:
      return "contrastive_inbatch";
    case CheckedLoss::kContrastiveCachedQueue:
      return "contrastive_cached_queue";
    case CheckedLoss::kContrastiveUserToUser:
      return "contrastive_u2u";
    case CheckedLoss::kIpw:
      return "ipw";
  }
  return "unknown";
}

std::vector<CheckedLoss> AllCheckedLosses() {
  return {CheckedLoss::kFullSoftmax,          CheckedLoss::kSampledSoftmax,
          CheckedLoss::kContrastiveInBatch,   CheckedLoss::kContrastiveCachedQueue,
          CheckedLoss::kContrastiveUserToUser, CheckedLoss::kIpw};
}

GradCheckReport RunGradientCheck(const GradCheckCase& c) {
  constexpr std::size_t kItems = 30;
  constexpr std::size_t kCategories = 6;
  constexpr std::size_t kBatch = 4;
  constexpr std::size_t kNegatives = 6;
  constexpr std::size_t kOlderEntries = 6;

  ItemCatalog catalog;
  for (std::size_t i = 0; i < kItems; ++i) {
    catalog.AddItem(fmt::format("i{}", i),
                    {{"cat", fmt::format("c{}", i % kCategories)}});
  }
  EncoderConfig config;
  config.dim = c.dim;
  config.similarity = c.similarity;
  config.temperature = 0.2;
  config.decay = 0.8;
  config.tied = c.tied;
  config.init_scale = 0.5;
  Parameters params =
      Parameters::Random(config, catalog.FeatureVocabSizes(), c.seed);

  Rng rng(c.seed ^ 0x6772616463686b21ULL);
  auto random_item = [&] {
    return static_cast<ItemId>(UniformIndex(rng, kItems));
  };
  auto random_sequence = [&] {
    ClickSequence s(1 + UniformIndex(rng, 4));
    for (auto& y : s) y = random_item();
    return s;
  };
  auto random_probs = [&] {
    std::vector<double> p(kItems);
    double total = 0.0;
    for (auto& v : p) {
      v = 0.2 + UniformUnit(rng);
      total += v;
    }
    for (auto& v : p) v /= total;
    return p;
  };

  std::vector<ClickSequence> queries, targets;
  std::vector<ItemId> positives;
  for (std::size_t b = 0; b < kBatch; ++b) {
    queries.push_back(random_sequence());
    positives.push_back(random_item());
    targets.push_back(random_sequence());
  }

  std::vector<CandidateSet> sets;
  std::vector<std::vector<double>> logq;
  std::vector<double> propensity;
  FifoQueue queue(kOlderEntries + kBatch, FifoQueue::Mode::kCached, c.dim);
  auto fill_older = [&] {
    std::vector<std::int64_t> keys(kOlderEntries, -1);
    std::vector<double> vectors(kOlderEntries * c.dim);
    for (auto& v : vectors) v = StandardNormal(rng);
    queue.EnqueueBatch(keys, vectors);
  };
  switch (c.loss) {
    case CheckedLoss::kFullSoftmax:
    case CheckedLoss::kIpw: {
      auto pool = std::make_shared<CandidatePool>();
      for (std::size_t i = 0; i < kItems; ++i) {
        pool->push_back(Candidate::ItemRef(static_cast<ItemId>(i)));
      }
      for (ItemId y : positives) sets.push_back({pool, static_cast<std::size_t>(y)});
      propensity = random_probs();
      break;
    }
    case CheckedLoss::kSampledSoftmax: {
      const Proposal proposal = Proposal::FromProbabilities(random_probs());
      auto ex = SampleExplicitCandidates(positives, proposal, kNegatives, rng);
      sets = std::move(ex.sets);
      logq = std::move(ex.logq);
      break;
    }
    case CheckedLoss::kContrastiveInBatch:
      sets = InBatchCandidates(positives);
      break;
    case CheckedLoss::kContrastiveCachedQueue: {
      fill_older();
      std::vector<std::int64_t> keys(positives.begin(), positives.end());
      std::vector<double> vectors;
      for (ItemId y : positives) {
        const auto v = EncodeItem(params, catalog.item(y));
        vectors.insert(vectors.end(), v.begin(), v.end());
      }
      queue.EnqueueBatch(keys, vectors);
      sets = QueueCandidates(queue, kBatch);
      break;
    }
    case CheckedLoss::kContrastiveUserToUser: {
      fill_older();
      std::vector<std::int64_t> keys(kBatch, 0);
      std::vector<double> vectors;
      for (const auto& s : targets) {
        const auto v = EncodeUser(params, catalog, s);
        vectors.insert(vectors.end(), v.begin(), v.end());
      }
      queue.EnqueueBatch(keys, vectors);
      sets = QueueCandidates(queue, kBatch, /*live_sequences=*/true);
      break;
    }
  }

  BatchInput input;
  input.queries = queries;
  input.candidates = sets;
  input.target_sequences = targets;
  input.cached_vectors = queue.storage();

  auto evaluate = [&](Logits* dlogits) {
    const ForwardResult fwd = BatchForward(params, catalog, input);
    double total = 0.0;
    const double inv_b = 1.0 / static_cast<double>(kBatch);
    for (std::size_t b = 0; b < kBatch; ++b) {
      const auto& logits = fwd.logits[b];
      LossOutput out;
      switch (c.loss) {
        case CheckedLoss::kFullSoftmax:
          out = FullSoftmaxLoss(logits, sets[b].pos_index);
          break;
        case CheckedLoss::kIpw: {
          out = FullSoftmaxLoss(logits, sets[b].pos_index);
          const IpwTerm term = IpwLoss(out.value, propensity[positives[b]], 0.01);
          out.value = term.value;
          for (auto& g : out.dlogits) g *= term.weight;
          break;
        }
        case CheckedLoss::kSampledSoftmax:
          out = SampledSoftmaxLoss(
              {logits, sets[b].pos_index, std::span<const double>(logq[b])});
          break;
        default:
          out = ContrastiveLoss({logits, sets[b].pos_index, std::nullopt});
          break;
      }
      total += out.value * inv_b;
      if (dlogits) {
        for (auto& g : out.dlogits) g *= inv_b;
        dlogits->push_back(std::move(out.dlogits));
      }
    }
    if (dlogits) {
      const Gradients grads = BatchBackward(fwd.tape, *dlogits);
      return std::make_pair(total, grads);
    }
    return std::make_pair(total, Gradients());
  };

  Logits dlogits;
  const Gradients grads = evaluate(&dlogits).second;

  struct Coord {
    std::size_t table, index;
    bool touched;
  };
  std::vector<Coord> all;
  for (std::size_t t = 0; t < params.num_tables(); ++t) {
    for (std::size_t i = 0; i < params.table(t).size(); ++i) {
      all.push_back({t, i, grads.Find(t, i / c.dim) != nullptr});
    }
  }
  for (std::size_t i = all.size(); i > 1; --i) {
    std::swap(all[i - 1], all[UniformIndex(rng, i)]);
  }
  std::stable_partition(all.begin(), all.end(),
                        [](const Coord& x) { return x.touched; });
  const auto touched = static_cast<std::size_t>(
      std::count_if(all.begin(), all.end(), [](const Coord& x) { return x.touched; }));
  all.resize(std::min(all.size(), std::max(touched, c.min_coordinates)));

  std::vector<double*> pointers;
  std::vector<double> analytic;
  for (const auto& x : all) {
    pointers.push_back(&params.table(x.table)[x.index]);
    const auto* row = grads.Find(x.table, x.index / c.dim);
    analytic.push_back(row ? (*row)[x.index % c.dim] : 0.0);
  }
  return FiniteDifferenceCheck([&] { return evaluate(nullptr).first; },
                               pointers, analytic, c.eps);
}

}  // namespace dcg
