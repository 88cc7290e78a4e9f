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

// Reference computations on small explicit distributions: the common optimum
// r = (p_data / q) / Z of the contrastive and inverse-propensity losses,
// tabular fits of both losses, KL divergence and a central-difference
// gradient checker.

#ifndef DCG_ORACLE_H_
#define DCG_ORACLE_H_

#include <cstddef>
#include <cstdint>
#include <functional>
#include <span>
#include <string>
#include <vector>

#include "dcg/common.h"
#include "dcg/encoder.h"

namespace dcg {

// Row-stochastic matrix: rows are contexts, columns are items.
class ProbTable {
 public:
  ProbTable() = default;
  // Throws Error unless every row is non-negative and sums to 1 +- 1e-12.
  explicit ProbTable(std::vector<std::vector<double>> rows);

  std::size_t rows() const { return rows_.size(); }
  std::size_t cols() const { return rows_.empty() ? 0 : rows_[0].size(); }
  std::span<const double> row(std::size_t x) const { return rows_.at(x); }
  double at(std::size_t x, std::size_t y) const { return rows_.at(x).at(y); }

  // Random rows with every entry >= min_prob.
  static ProbTable Random(std::size_t rows, std::size_t cols, double min_prob,
                          Rng& rng);

 private:
  std::vector<std::vector<double>> rows_;
};

// r(y) = (p(y) / q(y)) / Z. Throws Error if q(y) = 0 where p(y) > 0.
std::vector<double> TargetDistributionR(std::span<const double> p_data,
                                        std::span<const double> q);
ProbTable TargetDistributionR(const ProbTable& p_data, const ProbTable& q);

// sum p ln(p / q) with 0 ln 0 = 0. Throws Error if q = 0 where p > 0.
double KlDivergence(std::span<const double> p, std::span<const double> q);

double MaxRowTotalVariation(const ProbTable& a, const ProbTable& b);

struct IpwFitOptions {
  std::size_t max_iterations = 100000;
  // Stop once KL(r || p_theta) is below this in every row.
  double kl_tolerance = 1e-12;
  double learning_rate = 1.0;
};

struct IpwFit {
  // Closed-form minimizer, row-wise r.
  ProbTable analytic;
  // Full-batch gradient descent on the weighted log loss over free logits.
  ProbTable descent;
  double max_kl = 0.0;
  std::size_t iterations = 0;
};

IpwFit FitTabularIpw(const ProbTable& p_data, const ProbTable& q,
                     const IpwFitOptions& options = {});

struct ContrastiveFitOptions {
  std::size_t negatives = 7;
  std::size_t steps = 200000;
  // Geometric decay from lr_start to lr_end over the run.
  double lr_start = 0.5;
  double lr_end = 0.01;
  std::uint64_t seed = 1;
  // Candidates are every item exactly once instead of sampled negatives.
  bool exhaustive = false;
  // Average the logits over this trailing fraction of the steps.
  double tail_average = 0.5;
  double tv_tolerance = 0.02;
};

struct ContrastiveFit {
  ProbTable fitted;
  std::vector<double> row_tv;  // against r
  std::vector<double> row_kl;  // KL(r || fitted)
  bool converged = false;
};

// Stochastic minimization of the contrastive loss on free logits: each step
// and context draws y ~ p_data(.|x) and the negatives ~ q(.|x).
ContrastiveFit FitTabularContrastive(const ProbTable& p_data,
                                     const ProbTable& q,
                                     const ContrastiveFitOptions& options);

struct TheoremOptions {
  std::size_t instances = 10;
  std::size_t contexts = 4;
  std::size_t items = 8;
  double min_prob = 0.02;
  ContrastiveFitOptions fit;
  double agreement_tolerance = 0.03;
  double kl_tolerance = 1e-8;
  std::uint64_t seed = 1;
};

struct TheoremInstanceReport {
  std::vector<double> row_tv;  // contrastive fit against r
  std::vector<double> row_kl;
  double ipw_descent_kl = 0.0;
  bool ipw_analytic_exact = false;
  // Largest row TV between the contrastive and the descent IPW fits.
  double agreement_tv = 0.0;
  bool passed = false;
};

struct TheoremReport {
  std::vector<TheoremInstanceReport> instances;
  bool passed = false;
};

// Random (p_data, q) pairs with entries >= min_prob; fits both losses and
// compares them with r and with each other.
TheoremReport VerifyTheorem(const TheoremOptions& options);

struct GradCheckReport {
  double max_relative_error = 0.0;
  std::size_t coordinates = 0;
  std::vector<double> errors;
};

// Central differences (f(w + eps) - f(w - eps)) / 2 eps at each coordinate
// against analytic[i]. Relative error uses max(|a|, |n|) as denominator and
// counts as 0 when that is below 1e-8. Coordinates are restored afterwards.
GradCheckReport FiniteDifferenceCheck(const std::function<double()>& loss,
                                      std::span<double* const> coords,
                                      std::span<const double> analytic,
                                      double eps = 1e-5);

enum class CheckedLoss {
  kFullSoftmax,
  kSampledSoftmax,
  kContrastiveInBatch,
  kContrastiveCachedQueue,
  kContrastiveUserToUser,
  kIpw,
};

std::string CheckedLossName(CheckedLoss loss);
std::vector<CheckedLoss> AllCheckedLosses();

struct GradCheckCase {
  CheckedLoss loss = CheckedLoss::kContrastiveInBatch;
  bool tied = false;
  SimilarityMode similarity = SimilarityMode::kCosine;
  std::size_t dim = 4;
  std::size_t min_coordinates = 100;
  std::uint64_t seed = 1;
  double eps = 1e-5;
};

// Random small catalog, batch and candidates for the case; compares the
// encoder's manual backward pass with central differences of the batch loss.
GradCheckReport RunGradientCheck(const GradCheckCase& c);

}  // namespace dcg

#endif  // DCG_ORACLE_H_
