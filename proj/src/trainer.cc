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

#include "dcg/trainer.h"

#include <algorithm>
#include <cmath>
#include <exception>
#include <fstream>
#include <numeric>
#include <thread>
#include <unordered_map>
#include <unordered_set>

#include <fmt/format.h>
#include <spdlog/spdlog.h>

#include "dcg/losses.h"
#include "dcg/retrieval_eval.h"
#include "json.hpp"

namespace dcg {
namespace {

constexpr std::uint64_t kU2uStream = 0x7532752d73747265ULL;
constexpr std::uint64_t kShuffleStream = 0x73687566666c6521ULL;

std::uint64_t WorkerSeed(std::uint64_t seed, std::size_t worker) {
  return seed + 0x9e3779b97f4a7c15ULL * static_cast<std::uint64_t>(worker);
}

// Marks every pool entry that is a negative for at least one instance.
void MarkNegatives(std::span<const CandidateSet> sets,
                   const std::vector<ItemId>* entry_items,
                   std::vector<std::uint8_t>& seen) {
  std::unordered_map<const CandidatePool*, std::vector<std::size_t>> users;
  for (const auto& s : sets) users[s.pool.get()].push_back(s.pos_index);
  for (const auto& [pool, positives] : users) {
    for (std::size_t j = 0; j < pool->size(); ++j) {
      if (positives.size() == 1 && positives[0] == j) continue;
      const ItemId item = entry_items ? (*entry_items)[j]
                                      : static_cast<ItemId>((*pool)[j].index);
      seen[item] = 1;
    }
  }
}

// Live candidate items outside the batch positives, with their encoder
// forwards and embedding bytes.
void CountCandidates(std::span<const CandidateSet> sets,
                     std::span<const ItemId> positives,
                     const ItemCatalog& catalog, std::size_t dim,
                     StepCounters& counters) {
  std::unordered_set<ItemId> own(positives.begin(), positives.end());
  std::unordered_set<ItemId> negatives;
  std::unordered_set<const CandidatePool*> visited;
  for (const auto& s : sets) {
    if (!visited.insert(s.pool.get()).second) continue;
    for (const auto& c : *s.pool) {
      if (c.kind != CandidateKind::kItem) continue;
      const auto item = static_cast<ItemId>(c.index);
      if (!own.count(item)) negatives.insert(item);
    }
  }
  counters.item_encoder_forwards += positives.size() + negatives.size();
  for (ItemId y : negatives) {
    counters.candidate_bytes_moved +=
        catalog.item(y).features.size() * dim * sizeof(double);
  }
}

std::vector<CandidateSet> FullCatalogCandidates(
    std::span<const ItemId> positives, std::size_t num_items) {
  auto pool = std::make_shared<CandidatePool>();
  pool->reserve(num_items);
  for (std::size_t i = 0; i < num_items; ++i) {
    pool->push_back(Candidate::ItemRef(static_cast<ItemId>(i)));
  }
  std::vector<CandidateSet> sets;
  sets.reserve(positives.size());
  for (ItemId y : positives) sets.push_back({pool, static_cast<std::size_t>(y)});
  return sets;
}

}  // namespace

std::string TrainModeName(TrainMode mode) {
  switch (mode) {
    case TrainMode::kFullMle:
      return "full_mle";
    case TrainMode::kSampledSoftmax:
      return "sampled_softmax";
    case TrainMode::kClrecInBatch:
      return "clrec_inbatch";
    case TrainMode::kClrecQueue:
      return "clrec_queue";
    case TrainMode::kClrecQueueCached:
      return "clrec_queue_cached";
    case TrainMode::kIpw:
      return "ipw";
  }
  return "unknown";
}

TrainMode ParseTrainMode(const std::string& name) {
  for (auto mode : {TrainMode::kFullMle, TrainMode::kSampledSoftmax,
                    TrainMode::kClrecInBatch, TrainMode::kClrecQueue,
                    TrainMode::kClrecQueueCached, TrainMode::kIpw}) {
    if (TrainModeName(mode) == name) return mode;
  }
  throw ConfigError("unknown training mode '" + name + "'");
}

bool IsQueueMode(TrainMode mode) {
  return mode == TrainMode::kClrecQueue || mode == TrainMode::kClrecQueueCached;
}

std::string OptimizerKindName(OptimizerKind kind) {
  switch (kind) {
    case OptimizerKind::kSgd:
      return "sgd";
    case OptimizerKind::kAdagrad:
      return "adagrad";
    case OptimizerKind::kAdam:
      return "adam";
  }
  return "unknown";
}

OptimizerKind ParseOptimizerKind(const std::string& name) {
  if (name == "sgd") return OptimizerKind::kSgd;
  if (name == "adagrad") return OptimizerKind::kAdagrad;
  if (name == "adam") return OptimizerKind::kAdam;
  throw ConfigError("unknown optimizer '" + name + "'");
}

void TrainConfig::Validate() const {
  encoder.Validate();
  if (batch_size == 0) throw ConfigError("train.batch_size must be positive");
  if (epochs == 0) throw ConfigError("train.epochs must be positive");
  if (max_prefix_len == 0) {
    throw ConfigError("train.max_prefix_len must be positive");
  }
  if (eval_k == 0) throw ConfigError("eval.k must be positive");
  const bool needs_queue = IsQueueMode(mode) || u2u.enabled;
  if (needs_queue && queue_capacity < batch_size) {
    throw ConfigError(fmt::format(
        "queue.capacity ({}) must be at least train.batch_size ({})",
        queue_capacity, batch_size));
  }
  if (mode == TrainMode::kSampledSoftmax && negatives == 0) {
    throw ConfigError("train.negatives must be positive for sampled_softmax");
  }
  if (!(ipw_clip_floor >= 0.0 && ipw_clip_floor <= 1.0)) {
    throw ConfigError("ipw.clip_floor must be in [0, 1]");
  }
  if (!std::isfinite(sampler_alpha)) {
    throw ConfigError("sampler.alpha must be finite");
  }
  if (!(optimizer.learning_rate > 0.0)) {
    throw ConfigError("optimizer.lr must be positive");
  }
  if (!(optimizer.beta1 >= 0.0 && optimizer.beta1 < 1.0) ||
      !(optimizer.beta2 >= 0.0 && optimizer.beta2 < 1.0)) {
    throw ConfigError("optimizer betas must be in [0, 1)");
  }
  if (!(optimizer.epsilon > 0.0)) {
    throw ConfigError("optimizer.eps must be positive");
  }
  if (u2u.enabled) {
    if (!(u2u.weight >= 0.0)) throw ConfigError("u2u.weight must be >= 0");
    if (u2u.min_prefix == 0 || u2u.min_suffix == 0) {
      throw ConfigError("u2u.min_prefix and u2u.min_suffix must be >= 1");
    }
  }
}

const std::set<std::string>& TrainConfig::Keys() {
  static const std::set<std::string> keys = {
      "train.mode",         "train.batch_size",    "train.negatives",
      "train.epochs",       "train.seed",          "train.max_prefix_len",
      "queue.capacity",     "queue.cached",        "sampler.kind",
      "sampler.alpha",      "ipw.clip_floor",      "optimizer.kind",
      "optimizer.lr",       "optimizer.beta1",     "optimizer.beta2",
      "optimizer.eps",      "u2u.enabled",         "u2u.weight",
      "u2u.min_prefix",     "u2u.min_suffix",      "encoder.dim",
      "encoder.similarity", "encoder.temperature", "encoder.decay",
      "encoder.tied",       "encoder.init_scale",  "eval.k",
  };
  return keys;
}

TrainConfig TrainConfig::FromKeyValue(const KeyValueConfig& kv) {
  TrainConfig c;
  c.mode = ParseTrainMode(kv.GetString("train.mode", TrainModeName(c.mode)));
  if (kv.Has("queue.cached")) {
    const bool cached = kv.GetBool("queue.cached", false);
    if (cached && c.mode == TrainMode::kClrecQueue) {
      c.mode = TrainMode::kClrecQueueCached;
    } else if (!cached && c.mode == TrainMode::kClrecQueueCached) {
      throw ConfigError(
          "queue.cached = false contradicts train.mode = clrec_queue_cached");
    }
  }
  c.batch_size = kv.GetUint("train.batch_size", c.batch_size);
  c.negatives = kv.GetUint("train.negatives", c.negatives);
  c.epochs = kv.GetUint("train.epochs", c.epochs);
  c.seed = kv.GetUint("train.seed", c.seed);
  c.max_prefix_len = kv.GetUint("train.max_prefix_len", c.max_prefix_len);
  c.queue_capacity = kv.GetUint("queue.capacity", c.queue_capacity);
  c.sampler = ParseProposalKind(
      kv.GetString("sampler.kind", ProposalKindName(c.sampler)));
  c.sampler_alpha = kv.GetDouble("sampler.alpha", c.sampler_alpha);
  c.ipw_clip_floor = kv.GetDouble("ipw.clip_floor", c.ipw_clip_floor);
  c.optimizer.kind = ParseOptimizerKind(
      kv.GetString("optimizer.kind", OptimizerKindName(c.optimizer.kind)));
  c.optimizer.learning_rate = kv.GetDouble("optimizer.lr",
                                           c.optimizer.learning_rate);
  c.optimizer.beta1 = kv.GetDouble("optimizer.beta1", c.optimizer.beta1);
  c.optimizer.beta2 = kv.GetDouble("optimizer.beta2", c.optimizer.beta2);
  c.optimizer.epsilon = kv.GetDouble("optimizer.eps", c.optimizer.epsilon);
  c.u2u.enabled = kv.GetBool("u2u.enabled", c.u2u.enabled);
  c.u2u.weight = kv.GetDouble("u2u.weight", c.u2u.weight);
  c.u2u.min_prefix = kv.GetUint("u2u.min_prefix", c.u2u.min_prefix);
  c.u2u.min_suffix = kv.GetUint("u2u.min_suffix", c.u2u.min_suffix);
  c.encoder.dim = kv.GetUint("encoder.dim", c.encoder.dim);
  c.encoder.similarity = ParseSimilarity(
      kv.GetString("encoder.similarity", SimilarityName(c.encoder.similarity)));
  c.encoder.temperature = kv.GetDouble("encoder.temperature",
                                       c.encoder.temperature);
  c.encoder.decay = kv.GetDouble("encoder.decay", c.encoder.decay);
  c.encoder.tied = kv.GetBool("encoder.tied", c.encoder.tied);
  c.encoder.init_scale = kv.GetDouble("encoder.init_scale",
                                      c.encoder.init_scale);
  c.eval_k = kv.GetUint("eval.k", c.eval_k);
  return c;
}

StepCounters& StepCounters::operator+=(const StepCounters& o) {
  item_encoder_forwards += o.item_encoder_forwards;
  user_encoder_forwards += o.user_encoder_forwards;
  candidate_bytes_moved += o.candidate_bytes_moved;
  return *this;
}

TrainState TrainState::Create(const TrainConfig& config,
                              const ItemCatalog& catalog,
                              const Proposal& proposal, std::uint64_t seed) {
  TrainState state;
  state.proposal = proposal;
  if (config.mode == TrainMode::kClrecQueue) {
    state.queue.emplace(config.queue_capacity, FifoQueue::Mode::kRaw);
  } else if (config.mode == TrainMode::kClrecQueueCached) {
    state.queue.emplace(config.queue_capacity, FifoQueue::Mode::kCached,
                        config.encoder.dim);
  }
  if (config.u2u.enabled) {
    state.u2u_queue.emplace(config.queue_capacity, FifoQueue::Mode::kCached,
                            config.encoder.dim);
  }
  state.rng.seed(seed);
  state.u2u_rng.seed(seed ^ kU2uStream);
  state.negative_seen.assign(catalog.size(), 0);
  return state;
}

void TrainState::ResetEpoch() {
  std::fill(negative_seen.begin(), negative_seen.end(), 0);
}

std::size_t SampleSplitPoint(std::size_t length, std::size_t min_prefix,
                             std::size_t min_suffix, Rng& rng) {
  if (min_prefix == 0 || min_suffix == 0) {
    throw Error("split bounds must be >= 1");
  }
  if (length < min_prefix + min_suffix) return 0;
  const std::size_t choices = length - min_suffix - min_prefix + 1;
  return min_prefix + UniformIndex(rng, choices);
}

StepResult TrainStep(const TrainConfig& config, const Parameters& params,
                     const ItemCatalog& catalog,
                     std::span<const Instance> batch, TrainState& state,
                     const Dataset* dataset) {
  if (batch.empty()) throw Error("empty training batch");
  const std::size_t B = batch.size();
  std::vector<ClickSequence> queries;
  std::vector<ItemId> positives;
  queries.reserve(B);
  positives.reserve(B);
  for (const auto& inst : batch) {
    queries.push_back(inst.prefix);
    positives.push_back(inst.target);
  }

  std::vector<CandidateSet> sets;
  std::vector<std::vector<double>> logq;
  std::vector<ItemId> queue_items;
  std::span<const double> cached;
  switch (config.mode) {
    case TrainMode::kFullMle:
    case TrainMode::kIpw:
      sets = FullCatalogCandidates(positives, catalog.size());
      break;
    case TrainMode::kSampledSoftmax: {
      auto explicit_sets = SampleExplicitCandidates(
          positives, state.proposal, config.negatives, state.rng);
      sets = std::move(explicit_sets.sets);
      logq = std::move(explicit_sets.logq);
      break;
    }
    case TrainMode::kClrecInBatch:
      sets = InBatchCandidates(positives);
      break;
    case TrainMode::kClrecQueue:
    case TrainMode::kClrecQueueCached: {
      if (!state.queue) throw Error("queue mode without a queue");
      FifoQueue& queue = *state.queue;
      std::vector<std::int64_t> keys(positives.begin(), positives.end());
      if (queue.mode() == FifoQueue::Mode::kCached) {
        std::vector<double> vectors;
        vectors.reserve(B * params.dim());
        for (ItemId y : positives) {
          const auto v = EncodeItem(params, catalog.item(y));
          vectors.insert(vectors.end(), v.begin(), v.end());
        }
        queue.EnqueueBatch(keys, vectors);
        cached = queue.storage();
      } else {
        queue.EnqueueBatch(keys);
      }
      sets = QueueCandidates(queue, B);
      queue_items.reserve(queue.size());
      for (std::size_t i = 0; i < queue.size(); ++i) {
        queue_items.push_back(static_cast<ItemId>(queue.key(i)));
      }
      break;
    }
  }

  BatchInput input;
  input.queries = queries;
  input.candidates = sets;
  input.cached_vectors = cached;
  const ForwardResult fwd = BatchForward(params, catalog, input);

  StepResult result;
  Logits dlogits(B);
  const double inv_b = 1.0 / static_cast<double>(B);
  for (std::size_t b = 0; b < B; ++b) {
    const auto& logits = fwd.logits[b];
    LossOutput out;
    switch (config.mode) {
      case TrainMode::kFullMle:
        out = FullSoftmaxLoss(logits, sets[b].pos_index);
        break;
      case TrainMode::kIpw: {
        out = FullSoftmaxLoss(logits, sets[b].pos_index);
        const IpwTerm term = IpwLoss(
            out.value, state.proposal.prob(positives[b]), config.ipw_clip_floor);
        out.value = term.value;
        for (auto& g : out.dlogits) g *= term.weight;
        break;
      }
      case TrainMode::kSampledSoftmax:
        out = SampledSoftmaxLoss(
            {logits, sets[b].pos_index, std::span<const double>(logq[b])});
        break;
      default:
        out = ContrastiveLoss({logits, sets[b].pos_index, std::nullopt});
        break;
    }
    result.u2i_loss += out.value * inv_b;
    for (auto& g : out.dlogits) g *= inv_b;
    dlogits[b] = std::move(out.dlogits);
  }
  result.gradients = BatchBackward(fwd.tape, dlogits);

  CountCandidates(sets, positives, catalog, params.dim(), result.counters);
  result.counters.user_encoder_forwards += B;
  MarkNegatives(sets, queue_items.empty() ? nullptr : &queue_items,
                state.negative_seen);

  result.loss = result.u2i_loss;
  if (config.u2u.enabled && dataset != nullptr) {
    std::vector<std::size_t> users;
    std::unordered_set<std::size_t> seen;
    for (const auto& inst : batch) {
      if (seen.insert(inst.user).second) users.push_back(inst.user);
    }
    U2uResult aux = U2uStep(config, params, catalog, *dataset, users, state);
    result.u2u_loss = aux.loss;
    result.counters += aux.counters;
    if (config.u2u.weight != 0.0) {
      result.loss += config.u2u.weight * aux.loss;
      result.gradients.Add(aux.gradients, config.u2u.weight);
    }
  }
  return result;
}

U2uResult U2uStep(const TrainConfig& config, const Parameters& params,
                  const ItemCatalog& catalog, const Dataset& dataset,
                  std::span<const std::size_t> users, TrainState& state) {
  if (!state.u2u_queue) throw Error("u2u step without a cached queue");
  U2uResult result;
  std::vector<ClickSequence> prefixes, suffixes;
  std::vector<std::int64_t> keys;
  for (std::size_t u : users) {
    const std::size_t split = u < state.u2u_split.size() ? state.u2u_split[u] : 0;
    if (split == 0) continue;
    const ClickSequence clicks = dataset.Items(u);
    const std::size_t lo =
        split > config.max_prefix_len ? split - config.max_prefix_len : 0;
    const std::size_t hi = std::min(clicks.size(), split + config.max_prefix_len);
    prefixes.emplace_back(clicks.begin() + lo, clicks.begin() + split);
    suffixes.emplace_back(clicks.begin() + split, clicks.begin() + hi);
    keys.push_back(dataset.user_id(u));
  }
  const std::size_t n = prefixes.size();
  if (n == 0) return result;

  FifoQueue& queue = *state.u2u_queue;
  std::vector<double> vectors;
  vectors.reserve(n * params.dim());
  for (const auto& s : suffixes) {
    const auto v = EncodeUser(params, catalog, s);
    vectors.insert(vectors.end(), v.begin(), v.end());
  }
  queue.EnqueueBatch(keys, vectors);
  const auto sets = QueueCandidates(queue, n, /*live_sequences=*/true);

  BatchInput input;
  input.queries = prefixes;
  input.candidates = sets;
  input.target_sequences = suffixes;
  input.cached_vectors = queue.storage();
  const ForwardResult fwd = BatchForward(params, catalog, input);

  Logits dlogits(n);
  const double inv_n = 1.0 / static_cast<double>(n);
  for (std::size_t b = 0; b < n; ++b) {
    LossOutput out =
        ContrastiveLoss({fwd.logits[b], sets[b].pos_index, std::nullopt});
    result.loss += out.value * inv_n;
    for (auto& g : out.dlogits) g *= inv_n;
    dlogits[b] = std::move(out.dlogits);
  }
  result.gradients = BatchBackward(fwd.tape, dlogits);
  result.instances = n;
  // Suffixes are encoded once for the queue; the tape reuses the same values.
  result.counters.user_encoder_forwards += 2 * n;
  return result;
}

Optimizer::Optimizer(const OptimizerConfig& config, const Parameters& params)
    : config_(config) {
  if (config_.kind == OptimizerKind::kSgd) return;
  for (std::size_t t = 0; t < params.num_tables(); ++t) {
    first_.emplace_back(params.table(t).size(), 0.0);
    if (config_.kind == OptimizerKind::kAdam) {
      second_.emplace_back(params.table(t).size(), 0.0);
    }
  }
}

void Optimizer::Apply(Parameters& params, const Gradients& grads) {
  if (grads.num_tables() == 0) return;
  if (grads.num_tables() != params.num_tables() ||
      grads.dim() != params.dim()) {
    throw Error("optimizer: gradient shape does not match parameters");
  }
  ++steps_;
  const std::size_t d = params.dim();
  const double lr = config_.learning_rate;
  const double b1 = config_.beta1, b2 = config_.beta2, eps = config_.epsilon;
  const double c1 = 1.0 - std::pow(b1, static_cast<double>(steps_));
  const double c2 = 1.0 - std::pow(b2, static_cast<double>(steps_));
  for (std::size_t t = 0; t < grads.num_tables(); ++t) {
    auto table = params.table(t);
    for (const auto& [r, g] : grads.table(t)) {
      if (r >= params.table_rows(t)) throw Error("optimizer: row out of range");
      const std::size_t base = r * d;
      for (std::size_t k = 0; k < d; ++k) {
        double& p = table[base + k];
        switch (config_.kind) {
          case OptimizerKind::kSgd:
            p -= lr * g[k];
            break;
          case OptimizerKind::kAdagrad: {
            double& acc = first_[t][base + k];
            acc += g[k] * g[k];
            p -= lr * g[k] / (std::sqrt(acc) + eps);
            break;
          }
          case OptimizerKind::kAdam: {
            double& m = first_[t][base + k];
            double& v = second_[t][base + k];
            m = b1 * m + (1.0 - b1) * g[k];
            v = b2 * v + (1.0 - b2) * g[k] * g[k];
            p -= lr * (m / c1) / (std::sqrt(v / c2) + eps);
            break;
          }
        }
      }
    }
  }
}

TrainResult RunWorkers(const TrainConfig& config, const ItemCatalog& catalog,
                       const Dataset& train, std::size_t num_workers,
                       std::span<const Instance> valid) {
  config.Validate();
  if (num_workers == 0) throw ConfigError("need at least one worker");
  if (train.num_items() != catalog.size()) {
    throw Error("dataset and catalog disagree on the number of items");
  }
  const std::vector<Instance> instances =
      BuildInstances(train, config.max_prefix_len);
  if (instances.empty()) throw Error("dataset yields no training instances");

  const Proposal proposal = Proposal::Make(
      config.sampler, EmpiricalItemDistribution(train), config.sampler_alpha);

  TrainResult result;
  result.params = Parameters::Random(config.encoder,
                                     catalog.FeatureVocabSizes(), config.seed);
  Optimizer optimizer(config.optimizer, result.params);
  std::vector<TrainState> states;
  for (std::size_t w = 0; w < num_workers; ++w) {
    states.push_back(TrainState::Create(config, catalog, proposal,
                                        WorkerSeed(config.seed, w)));
  }
  result.worker_counters.assign(num_workers, {});

  std::vector<std::uint8_t> is_target(catalog.size(), 0);
  for (const auto& inst : instances) is_target[inst.target] = 1;
  const auto target_items = static_cast<std::size_t>(
      std::count(is_target.begin(), is_target.end(), 1));

  std::vector<std::size_t> order(instances.size());
  std::iota(order.begin(), order.end(), 0);
  Rng shuffle_rng(config.seed ^ kShuffleStream);
  const std::size_t B = config.batch_size;
  const std::size_t global_batch = B * num_workers;
  std::size_t global_step = 0;

  for (std::size_t epoch = 0; epoch < config.epochs; ++epoch) {
    for (std::size_t i = order.size(); i > 1; --i) {
      std::swap(order[i - 1], order[UniformIndex(shuffle_rng, i)]);
    }
    for (auto& state : states) {
      state.ResetEpoch();
      if (config.u2u.enabled) {
        state.u2u_split.resize(train.num_users());
        for (std::size_t u = 0; u < train.num_users(); ++u) {
          state.u2u_split[u] =
              SampleSplitPoint(train.length(u), config.u2u.min_prefix,
                               config.u2u.min_suffix, state.u2u_rng);
        }
      }
    }

    double loss_sum = 0.0, u2u_sum = 0.0;
    std::size_t seen = 0, steps = 0;
    for (std::size_t start = 0; start < order.size(); start += global_batch) {
      std::vector<std::vector<Instance>> shards(num_workers);
      for (std::size_t w = 0; w < num_workers; ++w) {
        const std::size_t lo = std::min(order.size(), start + w * B);
        const std::size_t hi = std::min(order.size(), lo + B);
        for (std::size_t i = lo; i < hi; ++i) {
          shards[w].push_back(instances[order[i]]);
        }
      }
      std::vector<StepResult> results(num_workers);
      std::vector<std::exception_ptr> errors(num_workers);
      auto run = [&](std::size_t w) {
        if (shards[w].empty()) return;
        try {
          results[w] = TrainStep(config, result.params, catalog, shards[w],
                                 states[w], &train);
        } catch (...) {
          errors[w] = std::current_exception();
        }
      };
      if (num_workers == 1) {
        run(0);
      } else {
        std::vector<std::thread> threads;
        for (std::size_t w = 0; w < num_workers; ++w) threads.emplace_back(run, w);
        for (auto& t : threads) t.join();
      }

      Gradients total;
      for (std::size_t w = 0; w < num_workers; ++w) {
        if (errors[w]) {
          try {
            std::rethrow_exception(errors[w]);
          } catch (const std::exception& e) {
            throw Error(fmt::format("step {} (epoch {}, worker {}, mode {}): {}",
                                    global_step, epoch, w,
                                    TrainModeName(config.mode), e.what()));
          }
        }
        if (shards[w].empty()) continue;
        const StepResult& r = results[w];
        if (!std::isfinite(r.loss)) {
          throw Error(fmt::format(
              "non-finite loss at step {} (epoch {}, worker {}, mode {})",
              global_step, epoch, w, TrainModeName(config.mode)));
        }
        total.Add(r.gradients);
        result.worker_counters[w] += r.counters;
        loss_sum += r.loss * shards[w].size();
        u2u_sum += r.u2u_loss * shards[w].size();
        seen += shards[w].size();
      }
      optimizer.Apply(result.params, total);
      ++global_step;
      ++steps;
    }

    EpochRecord record;
    record.epoch = epoch + 1;
    record.steps = steps;
    record.mean_loss = loss_sum / static_cast<double>(seen);
    record.mean_u2u_loss = u2u_sum / static_cast<double>(seen);
    for (const auto& c : result.worker_counters) record.counters += c;
    record.target_items = target_items;
    for (std::size_t i = 0; i < catalog.size(); ++i) {
      if (!is_target[i]) continue;
      const bool covered =
          std::any_of(states.begin(), states.end(),
                      [i](const TrainState& s) { return s.negative_seen[i]; });
      record.negatives_covered += covered ? 1 : 0;
    }
    record.all_targets_covered = record.negatives_covered == target_items;
    if (!valid.empty()) {
      EvalOptions options;
      options.k = config.eval_k;
      options.max_prefix_len = config.max_prefix_len;
      options.seed = config.seed;
      record.valid_hit_rate =
          EvaluateRanking(result.params, catalog, valid, options)
              .metrics.hit_rate;
    }
    spdlog::info("epoch {} mode {} loss {:.6f} valid_hr@{} {}", record.epoch,
                 TrainModeName(config.mode), record.mean_loss, config.eval_k,
                 record.valid_hit_rate
                     ? fmt::format("{:.4f}", *record.valid_hit_rate)
                     : std::string("n/a"));
    result.history.push_back(record);
  }
  return result;
}

TrainResult Train(const TrainConfig& config, const ItemCatalog& catalog,
                  const Dataset& train, std::span<const Instance> valid) {
  return RunWorkers(config, catalog, train, 1, valid);
}

void WriteHistory(const std::vector<EpochRecord>& history,
                  const TrainConfig& config, const std::string& path,
                  const std::string& config_hash) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw Error("cannot write " + path);
  for (const auto& r : history) {
    nlohmann::ordered_json j;
    j["epoch"] = r.epoch;
    j["mode"] = TrainModeName(config.mode);
    j["mean_loss"] = r.mean_loss;
    j["mean_u2u_loss"] = r.mean_u2u_loss;
    j["steps"] = r.steps;
    j["item_encoder_forwards"] = r.counters.item_encoder_forwards;
    j["user_encoder_forwards"] = r.counters.user_encoder_forwards;
    j["candidate_bytes_moved"] = r.counters.candidate_bytes_moved;
    j["valid_k"] = config.eval_k;
    if (r.valid_hit_rate) {
      j["valid_hit_rate"] = *r.valid_hit_rate;
    } else {
      j["valid_hit_rate"] = nullptr;
    }
    j["negatives_covered"] = r.negatives_covered;
    j["target_items"] = r.target_items;
    if (!config_hash.empty()) j["config_hash"] = config_hash;
    out << j.dump() << '\n';
  }
}

}  // namespace dcg
