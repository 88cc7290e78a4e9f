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

#include "dcg/losses.h"

#include <algorithm>
#include <cmath>

#include "dcg/common.h"

namespace dcg {
namespace {

// Cross-entropy of softmax(z) against a one-hot target, computed with
// max-subtraction. Summation runs in index order.
LossOutput SoftmaxCrossEntropy(std::span<const double> z, std::size_t target) {
  if (z.empty() || target >= z.size()) {
    throw Error("softmax loss: positive index out of range");
  }
  double m = -INFINITY;
  for (double x : z) {
    if (!std::isfinite(x)) throw Error("softmax loss: non-finite logit");
    m = std::max(m, x);
  }
  LossOutput out;
  out.dlogits.resize(z.size());
  double sum = 0.0;
  for (std::size_t i = 0; i < z.size(); ++i) {
    out.dlogits[i] = std::exp(z[i] - m);
    sum += out.dlogits[i];
  }
  const double log_z = m + std::log(sum);
  out.value = log_z - z[target];
  // Rounding can push a saturated loss a hair below zero.
  if (out.value < 0.0) out.value = 0.0;
  for (auto& g : out.dlogits) g /= sum;
  out.dlogits[target] -= 1.0;
  return out;
}

}  // namespace

LossOutput FullSoftmaxLoss(std::span<const double> all_logits,
                           std::size_t target) {
  return SoftmaxCrossEntropy(all_logits, target);
}

LossOutput SampledSoftmaxLoss(const CandidateLogits& c) {
  if (!c.logq) throw Error("sampled softmax requires log proposal values");
  const auto logq = *c.logq;
  if (logq.size() != c.logits.size()) {
    throw Error("sampled softmax: logq size mismatch");
  }
  std::vector<double> corrected(c.logits.size());
  for (std::size_t i = 0; i < corrected.size(); ++i) {
    if (!std::isfinite(logq[i])) {
      throw Error("sampled softmax: non-finite log proposal");
    }
    corrected[i] = c.logits[i] - logq[i];
  }
  // d(logits - logq)/d logits is the identity.
  return SoftmaxCrossEntropy(corrected, c.pos_index);
}

LossOutput ContrastiveLoss(const CandidateLogits& c) {
  return SoftmaxCrossEntropy(c.logits, c.pos_index);
}

IpwTerm IpwLoss(double neg_log_prob, double propensity, double clip_floor) {
  if (!(propensity > 0.0) || propensity > 1.0) {
    throw Error("ipw loss: propensity must be in (0, 1]");
  }
  if (!(clip_floor >= 0.0 && clip_floor <= 1.0)) {
    throw Error("ipw loss: clip floor must be in [0, 1]");
  }
  if (!(neg_log_prob >= 0.0)) {
    throw Error("ipw loss: negative log probability must be >= 0");
  }
  IpwTerm term;
  term.weight = 1.0 / std::max(propensity, clip_floor);
  term.value = term.weight * neg_log_prob;
  return term;
}

}  // namespace dcg
