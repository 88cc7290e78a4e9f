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

// Training loop: six objectives over the two-tower encoder, the user-to-user
// auxiliary task, encoder-work counters and synchronous data-parallel
// workers with private queues.

#ifndef DCG_TRAINER_H_
#define DCG_TRAINER_H_

#include <cstddef>
#include <cstdint>
#include <optional>
#include <set>
#include <span>
#include <string>
#include <vector>

#include "dcg/config.h"
#include "dcg/corpus.h"
#include "dcg/encoder.h"
#include "dcg/samplers.h"

namespace dcg {

enum class TrainMode {
  kFullMle,
  kSampledSoftmax,
  kClrecInBatch,
  kClrecQueue,
  kClrecQueueCached,
  kIpw,
};

std::string TrainModeName(TrainMode mode);
TrainMode ParseTrainMode(const std::string& name);
bool IsQueueMode(TrainMode mode);

enum class OptimizerKind { kSgd, kAdagrad, kAdam };

std::string OptimizerKindName(OptimizerKind kind);
OptimizerKind ParseOptimizerKind(const std::string& name);

struct OptimizerConfig {
  OptimizerKind kind = OptimizerKind::kAdagrad;
  double learning_rate = 0.1;
  double beta1 = 0.9;
  double beta2 = 0.999;
  double epsilon = 1e-8;
};

struct U2uConfig {
  bool enabled = false;
  double weight = 0.0;
  std::size_t min_prefix = 2;
  std::size_t min_suffix = 2;
};

struct TrainConfig {
  TrainMode mode = TrainMode::kClrecQueueCached;
  std::size_t batch_size = 256;
  std::size_t queue_capacity = 2560;
  // Negatives per instance in sampled_softmax.
  std::size_t negatives = 2560;
  std::size_t epochs = 5;
  std::uint64_t seed = 1;
  std::size_t max_prefix_len = 20;
  ProposalKind sampler = ProposalKind::kUnigram;
  double sampler_alpha = 1.0;
  double ipw_clip_floor = 0.01;
  OptimizerConfig optimizer;
  U2uConfig u2u;
  EncoderConfig encoder;
  // Validation hit rate cutoff.
  std::size_t eval_k = 50;

  void Validate() const;

  // Keys understood by FromKeyValue (all optional).
  static const std::set<std::string>& Keys();
  // Reads the keys it knows and ignores the rest.
  static TrainConfig FromKeyValue(const KeyValueConfig& kv);
};

struct StepCounters {
  // Item-tower encodings: one per batch positive plus one per distinct
  // negative item that is not a batch positive and is encoded live.
  std::uint64_t item_encoder_forwards = 0;
  // User-tower sequence encodings (queries, plus u2u prefixes and suffixes).
  std::uint64_t user_encoder_forwards = 0;
  // Embedding rows of live negatives that are not among the worker's own
  // positives, in bytes. Cached vectors are local and cost nothing.
  std::uint64_t candidate_bytes_moved = 0;

  StepCounters& operator+=(const StepCounters& o);
  bool operator==(const StepCounters&) const = default;
};

// Per-worker mutable state: queues, random streams and coverage tracking.
struct TrainState {
  Proposal proposal;
  std::optional<FifoQueue> queue;
  // Cached suffix representations for the u2u task, keyed by user.
  std::optional<FifoQueue> u2u_queue;
  Rng rng;
  // Separate stream so enabling the u2u task never perturbs the main one.
  Rng u2u_rng;
  // Split point per dense user for the current epoch; 0 marks unsplittable.
  std::vector<std::size_t> u2u_split;
  // Items that served as a negative for some instance this epoch.
  std::vector<std::uint8_t> negative_seen;

  static TrainState Create(const TrainConfig& config,
                           const ItemCatalog& catalog, const Proposal& proposal,
                           std::uint64_t seed);
  void ResetEpoch();
};

struct StepResult {
  // u2i_loss + weight * u2u_loss.
  double loss = 0.0;
  double u2i_loss = 0.0;
  double u2u_loss = 0.0;
  Gradients gradients;
  StepCounters counters;
};

// One shard: batch-mean loss and its gradient. Queue modes enqueue the batch
// positives before reading the queue. `users` (dense ids, parallel to the
// instances) and `dataset` are only needed when the u2u task is enabled.
StepResult TrainStep(const TrainConfig& config, const Parameters& params,
                     const ItemCatalog& catalog,
                     std::span<const Instance> batch, TrainState& state,
                     const Dataset* dataset = nullptr);

struct U2uResult {
  double loss = 0.0;
  std::size_t instances = 0;
  Gradients gradients;
  StepCounters counters;
};

// User-to-user contrastive step. Each distinct user of the batch with a split
// point contributes (clicks before the split) -> (clicks after the split),
// scored against a queue of cached suffix vectors. Users without a split
// point are skipped.
U2uResult U2uStep(const TrainConfig& config, const Parameters& params,
                  const ItemCatalog& catalog, const Dataset& dataset,
                  std::span<const std::size_t> users, TrainState& state);

// Uniform split point s with min_prefix <= s <= n - min_suffix, or 0 when
// none exists.
std::size_t SampleSplitPoint(std::size_t length, std::size_t min_prefix,
                             std::size_t min_suffix, Rng& rng);

class Optimizer {
 public:
  Optimizer(const OptimizerConfig& config, const Parameters& params);

  // Updates only the rows present in grads, in table then row order.
  void Apply(Parameters& params, const Gradients& grads);

 private:
  OptimizerConfig config_;
  std::uint64_t steps_ = 0;
  std::vector<std::vector<double>> first_;
  std::vector<std::vector<double>> second_;
};

struct EpochRecord {
  std::size_t epoch = 0;
  double mean_loss = 0.0;
  double mean_u2u_loss = 0.0;
  std::size_t steps = 0;
  // Cumulative since training started.
  StepCounters counters;
  std::optional<double> valid_hit_rate;
  // Queue modes: distinct training targets that served as negatives.
  std::size_t negatives_covered = 0;
  std::size_t target_items = 0;
  bool all_targets_covered = false;
};

struct TrainResult {
  Parameters params;
  std::vector<EpochRecord> history;
  // Cumulative counters per worker.
  std::vector<StepCounters> worker_counters;
};

// Synchronous data parallelism. Instances are shuffled once per epoch; at
// every global step worker w takes the w-th slice of batch_size instances and
// the shard gradients are summed in worker order and applied once.
TrainResult RunWorkers(const TrainConfig& config, const ItemCatalog& catalog,
                       const Dataset& train, std::size_t num_workers,
                       std::span<const Instance> valid = {});

TrainResult Train(const TrainConfig& config, const ItemCatalog& catalog,
                  const Dataset& train, std::span<const Instance> valid = {});

void WriteHistory(const std::vector<EpochRecord>& history,
                  const TrainConfig& config, const std::string& path,
                  const std::string& config_hash = "");

}  // namespace dcg

#endif  // DCG_TRAINER_H_
