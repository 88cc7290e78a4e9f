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

#ifndef DCG_LOSSES_H_
#define DCG_LOSSES_H_

#include <cstddef>
#include <optional>
#include <span>
#include <vector>

namespace dcg {

// Scores of one positive plus L negatives. logq holds the natural log of the
// proposal probability of each candidate when the loss needs it.
struct CandidateLogits {
  std::span<const double> logits;
  std::size_t pos_index = 0;
  std::optional<std::span<const double>> logq;
};

struct LossOutput {
  double value = 0.0;
  std::vector<double> dlogits;
};

// -log softmax(all_logits)[target] over the whole catalog.
LossOutput FullSoftmaxLoss(std::span<const double> all_logits,
                           std::size_t target);

// Softmax cross-entropy on logits - logq (logQ-corrected sampled softmax).
LossOutput SampledSoftmaxLoss(const CandidateLogits& c);

// Softmax cross-entropy on the raw candidate logits; no proposal correction.
// The candidates are a multiset, duplicates included.
LossOutput ContrastiveLoss(const CandidateLogits& c);

struct IpwTerm {
  double value = 0.0;
  double weight = 0.0;
};

// weight = 1 / max(propensity, clip_floor); value = weight * neg_log_prob.
IpwTerm IpwLoss(double neg_log_prob, double propensity, double clip_floor);

}  // namespace dcg

#endif  // DCG_LOSSES_H_
