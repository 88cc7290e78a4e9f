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

#include <cmath>
#include <limits>
#include <numeric>
#include <vector>

#include "dcg/common.h"
#include "doctest.h"

namespace dcg {
namespace {

// -log(exp(z[t]) / sum exp(z)) by direct summation, no max shift.
double NaiveCrossEntropy(const std::vector<double>& z, std::size_t t) {
  double total = 0.0;
  for (double v : z) total += std::exp(v);
  return std::log(total) - z[t];
}

std::vector<double> RandomLogits(std::size_t n, Rng& rng, double scale = 2.0) {
  std::vector<double> z(n);
  for (double& v : z) v = scale * StandardNormal(rng);
  return z;
}

double Sum(const std::vector<double>& v) {
  return std::accumulate(v.begin(), v.end(), 0.0);
}

TEST_CASE("full softmax") {
  const std::vector<double> flat{0.0, 0.0, 0.0};
  for (std::size_t t = 0; t < 3; ++t) {
    CHECK(FullSoftmaxLoss(flat, t).value ==
          doctest::Approx(std::log(3.0)).epsilon(1e-15));
  }
  const std::vector<double> saturated{50.0, 0.0, 0.0};
  CHECK(FullSoftmaxLoss(saturated, 0).value < 1e-20);

  Rng rng(1);
  for (int trial = 0; trial < 50; ++trial) {
    const auto z = RandomLogits(6, rng);
    const std::size_t t = UniformIndex(rng, 6);
    CHECK(std::abs(FullSoftmaxLoss(z, t).value - NaiveCrossEntropy(z, t)) <=
          1e-12);
  }

  const std::vector<double> bad{0.0, std::numeric_limits<double>::infinity()};
  CHECK_THROWS_AS(FullSoftmaxLoss(bad, 0), Error);
  CHECK_THROWS_AS(FullSoftmaxLoss(flat, 3), Error);
}

TEST_CASE("sampled softmax with log proposal correction") {
  const std::vector<double> equal{0.7, 0.7, 0.7, 0.7};
  const std::vector<double> uniform(4, std::log(0.25));
  CHECK(SampledSoftmaxLoss({equal, 0, uniform}).value ==
        doctest::Approx(std::log(4.0)).epsilon(1e-15));

  const std::vector<double> z{1.0, 0.5};
  const std::vector<double> logq{std::log(0.8), std::log(0.2)};
  // Corrected logits 1.2231435513142097, 2.1094379124341005.
  CHECK(SampledSoftmaxLoss({z, 0, logq}).value ==
        doctest::Approx(1.2314291957733716).epsilon(1e-14));

  CHECK_THROWS_AS(SampledSoftmaxLoss({z, 0, std::nullopt}), Error);
  const std::vector<double> short_logq{0.0};
  CHECK_THROWS_AS(SampledSoftmaxLoss({z, 0, short_logq}), Error);
}

TEST_CASE("contrastive loss") {
  const std::vector<double> alone{3.0};
  CHECK(ContrastiveLoss({alone, 0}).value == 0.0);
  const std::vector<double> tie{1.0, 1.0};
  CHECK(ContrastiveLoss({tie, 0}).value ==
        doctest::Approx(std::log(2.0)).epsilon(1e-15));
  const std::vector<double> z{2.0, 0.0, 1.0};
  CHECK(ContrastiveLoss({z, 0}).value ==
        doctest::Approx(0.4076059644443804).epsilon(1e-14));
}

TEST_CASE("ipw loss") {
  const auto plain = IpwLoss(1.0, 0.25, 0.0);
  CHECK(plain.value == 4.0);
  CHECK(plain.weight == 4.0);
  const auto clipped = IpwLoss(1.0, 1e-9, 0.01);
  CHECK(clipped.value == doctest::Approx(100.0).epsilon(1e-15));
  CHECK(IpwLoss(2.5, 1.0, 0.01).value == 2.5);
  CHECK_THROWS_AS(IpwLoss(1.0, 0.0, 0.01), Error);
  CHECK_THROWS_AS(IpwLoss(1.0, -0.5, 0.01), Error);
  CHECK_THROWS_AS(IpwLoss(1.0, 0.5, 1.5), Error);
}

TEST_CASE("unit propensities reduce to the unweighted objective") {
  Rng rng(2);
  for (int trial = 0; trial < 20; ++trial) {
    const auto z = RandomLogits(5, rng);
    const std::size_t t = UniformIndex(rng, 5);
    const auto full = FullSoftmaxLoss(z, t);
    CHECK(IpwLoss(full.value, 1.0, 0.01).value == full.value);
  }
}

TEST_CASE("uniform log proposal equals the contrastive loss") {
  Rng rng(3);
  for (int trial = 0; trial < 1000; ++trial) {
    const std::size_t n = 1 + UniformIndex(rng, 40);
    const auto z = RandomLogits(n, rng, 5.0);
    const std::size_t pos = UniformIndex(rng, n);
    const std::vector<double> logq(n, std::log(1.0 / (1.0 + trial % 97)));
    const auto a = SampledSoftmaxLoss({z, pos, logq});
    const auto b = ContrastiveLoss({z, pos});
    CHECK(std::abs(a.value - b.value) <= 1e-12);
    for (std::size_t i = 0; i < n; ++i) {
      CHECK(std::abs(a.dlogits[i] - b.dlogits[i]) <= 1e-12);
    }
  }
}

TEST_CASE("softmax-family properties") {
  Rng rng(4);
  for (int trial = 0; trial < 200; ++trial) {
    const std::size_t n = 2 + UniformIndex(rng, 10);
    const auto z = RandomLogits(n, rng, 3.0);
    const auto logq = RandomLogits(n, rng, 1.0);
    const std::size_t pos = UniformIndex(rng, n);
    const double shift = 20.0 * StandardNormal(rng);
    auto shifted = z;
    for (double& v : shifted) v += shift;

    const LossOutput outputs[] = {FullSoftmaxLoss(z, pos),
                                  SampledSoftmaxLoss({z, pos, logq}),
                                  ContrastiveLoss({z, pos})};
    const LossOutput shifted_outputs[] = {
        FullSoftmaxLoss(shifted, pos), SampledSoftmaxLoss({shifted, pos, logq}),
        ContrastiveLoss({shifted, pos})};
    for (int k = 0; k < 3; ++k) {
      const auto& out = outputs[k];
      CHECK(std::isfinite(out.value));
      CHECK(std::abs(out.value - shifted_outputs[k].value) <= 1e-12);
      CHECK(std::abs(Sum(out.dlogits)) <= 1e-12);
      for (std::size_t i = 0; i < n; ++i) {
        if (i == pos) {
          CHECK(out.dlogits[i] <= 0.0);
        } else {
          CHECK(out.dlogits[i] >= 0.0);
        }
      }
    }
  }
}

TEST_CASE("loss gradients match finite differences on logits") {
  // Fourth-order central stencil refined once by Richardson extrapolation.
  // Below |g| = 1e-2 the double rounding of the loss values (a few 1e-12
  // after division by h) dominates, so those entries get an absolute bound.
  Rng rng(5);
  const double h = 2e-3;
  double worst = 0.0;
  for (int trial = 0; trial < 100; ++trial) {
    const std::size_t n = 2 + UniformIndex(rng, 8);
    auto z = RandomLogits(n, rng);
    const auto logq = RandomLogits(n, rng, 1.0);
    const std::size_t pos = UniformIndex(rng, n);
    auto check = [&](auto&& loss) {
      const auto analytic = loss(z).dlogits;
      for (std::size_t i = 0; i < n; ++i) {
        const double keep = z[i];
        auto at = [&](double offset) {
          z[i] = keep + offset;
          return loss(z).value;
        };
        auto stencil = [&](double step) {
          return (-at(2 * step) + 8 * at(step) - 8 * at(-step) +
                  at(-2 * step)) /
                 (12 * step);
        };
        const double numeric = (16 * stencil(h / 2) - stencil(h)) / 15;
        z[i] = keep;
        const double err = std::abs(numeric - analytic[i]);
        const double scale = std::abs(analytic[i]);
        if (scale >= 1e-2) {
          worst = std::max(worst, err / scale);
          CHECK(err / scale <= 1e-10);
        } else {
          CHECK(err <= 5e-12);
        }
      }
    };
    check([&](const std::vector<double>& v) { return FullSoftmaxLoss(v, pos); });
    check([&](const std::vector<double>& v) {
      return SampledSoftmaxLoss({v, pos, logq});
    });
    check([&](const std::vector<double>& v) { return ContrastiveLoss({v, pos}); });
  }
  MESSAGE("worst relative error ", worst);
}

TEST_CASE("losses are reproducible bit for bit") {
  Rng rng(6);
  const auto z = RandomLogits(30, rng);
  const auto logq = RandomLogits(30, rng);
  const auto a = SampledSoftmaxLoss({z, 7, logq});
  const auto b = SampledSoftmaxLoss({z, 7, logq});
  CHECK(a.value == b.value);
  CHECK(a.dlogits == b.dlogits);
}

}  // namespace
}  // namespace dcg
