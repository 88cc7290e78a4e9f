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

// Command-line driver: simulate, train, eval, verify-theorem, gradcheck and
// bench. Exit codes: 0 success, 1 runtime failure, 2 configuration error,
// 3 acceptance threshold missed.

#ifndef DCG_CLI_H_
#define DCG_CLI_H_

#include <cstddef>
#include <cstdint>
#include <set>
#include <string>
#include <vector>

#include "dcg/config.h"
#include "dcg/corpus.h"
#include "dcg/trainer.h"

namespace dcg {

inline constexpr int kExitOk = 0;
inline constexpr int kExitRuntime = 1;
inline constexpr int kExitConfig = 2;
inline constexpr int kExitAcceptance = 3;

// Every key any subcommand reads, so one file can drive the whole pipeline.
const std::set<std::string>& KnownConfigKeys();

WorldConfig WorldConfigFromKeyValue(const KeyValueConfig& kv);

struct BenchOptions {
  std::size_t num_items = 5000;
  std::size_t batch_size = 256;
  std::size_t queue_capacity = 2560;
  std::size_t negatives = 2560;
  std::size_t dim = 16;
  std::uint64_t seed = 1;
};

struct BenchRow {
  TrainMode mode = TrainMode::kSampledSoftmax;
  StepCounters counters;  // of one step with a full queue
};

struct BenchResult {
  BenchOptions options;
  std::vector<BenchRow> rows;
  // cached-queue item forwards / explicit-sampling item forwards.
  double forward_ratio = 0.0;
  double bound = 0.0;  // B / (B + |Q|)
  bool passed = false;

  const StepCounters& Counters(TrainMode mode) const;
};

// One step per mode on a synthetic catalog whose batches hold distinct
// positives. Queue modes are warmed up until the queue is full; explicit
// sampling draws uniform negatives.
BenchResult RunCounterBench(const BenchOptions& options);

// argv-style entry point; returns the process exit code.
int RunCli(int argc, char** argv);

}  // namespace dcg

#endif  // DCG_CLI_H_
