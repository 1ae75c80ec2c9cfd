// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "semvox/dualflow/losses.hpp"

using namespace semvox;
using namespace semvox::dualflow;

namespace {

Tensor random_logits(int n, int c, std::mt19937_64& eng, double scale = 2.0) {
  Tensor t({n, c});
  std::uniform_real_distribution<double> u(-scale, scale);
  for (double& v : t.values()) v = u(eng);
  return t;
}

template <typename F>
Tensor central_difference(const Tensor& x, F f, double step = 1e-5) {
  Tensor g(x.dims());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = probe.values()[i];
    probe.values()[i] = v + step;
    const double up = f(probe);
    probe.values()[i] = v - step;
    const double down = f(probe);
    probe.values()[i] = v;
    g.values()[i] = (up - down) / (2.0 * step);
  }
  return g;
}

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

}  // namespace

TEST_CASE("cross entropy closed forms") {
  SUBCASE("uniform logits cost ln C") {
    for (int c : {2, 4, 7, 19}) {
      const Tensor logits({3, c});  // all zero
      const LossResult res = ce_loss(logits, std::vector<ClassId>(3, 0));
      CHECK(res.value == doctest::Approx(std::log(double(c))).epsilon(1e-12));
    }
  }
  SUBCASE("a huge margin on the true class drives the loss to zero") {
    Tensor logits({1, 4});
    logits(0, 2) = 200.0;
    const LossResult res = ce_loss(logits, std::vector<ClassId>{2});
    CHECK(res.value < 1e-12);
  }
  SUBCASE("masked voxels are excluded from the mean") {
    Tensor logits({2, 3});
    logits(1, 0) = 50.0;  // would dominate if counted
    const LossResult res = ce_loss(logits, std::vector<ClassId>{1, kInvalidClass});
    CHECK(res.value == doctest::Approx(std::log(3.0)).epsilon(1e-12));
    for (int j = 0; j < 3; ++j) CHECK(res.grad(1, j) == 0.0);
  }
  SUBCASE("an all-masked batch is undefined") {
    const Tensor logits({2, 3});
    CHECK_THROWS_AS(ce_loss(logits, std::vector<ClassId>(2, kInvalidClass)), std::runtime_error);
  }
  SUBCASE("labels beyond the class columns are rejected") {
    const Tensor logits({1, 3});
    CHECK_THROWS_AS(ce_loss(logits, std::vector<ClassId>{3}), std::invalid_argument);
  }
}

TEST_CASE("cross entropy gradient matches finite differences") {
  std::mt19937_64 eng(7);
  double worst = 0.0;
  for (int trial = 0; trial < 40; ++trial) {
    const int n = 2 + trial % 5, c = 2 + trial % 4;
    const Tensor logits = random_logits(n, c, eng);
    std::vector<ClassId> gt(n);
    for (int i = 0; i < n; ++i) gt[i] = static_cast<ClassId>(eng() % c);
    if (trial % 3 == 0) gt[0] = kInvalidClass;
    const LossResult res = ce_loss(logits, gt);
    const Tensor fd =
        central_difference(logits, [&](const Tensor& t) { return ce_loss(t, gt).value; });
    for (std::size_t k = 0; k < fd.size(); ++k) {
      worst = std::max(worst, rel_err(res.grad.values()[k], fd.values()[k]));
    }
  }
  CHECK(worst <= 1e-6);
}

TEST_CASE("lovasz closed forms") {
  SUBCASE("perfect one-hot probabilities cost zero") {
    Tensor probs({4, 3});
    std::vector<ClassId> gt{0, 1, 2, 1};
    for (int i = 0; i < 4; ++i) probs(i, gt[i]) = 1.0;
    CHECK(lovasz_loss(probs, gt).value == 0.0);
  }
  SUBCASE("a single voxel reduces to the hinge 1 - p") {
    for (double p : {0.1, 0.45, 0.9}) {
      Tensor probs({1, 2});
      probs(0, 0) = p;
      probs(0, 1) = 1.0 - p;
      const LossResult res = lovasz_loss(probs, std::vector<ClassId>{0});
      CHECK(res.value == doctest::Approx(1.0 - p).epsilon(1e-12));
      CHECK(res.grad(0, 0) == doctest::Approx(-1.0).epsilon(1e-12));
    }
  }
  SUBCASE("absent classes are skipped, empty ground truth is an error") {
    Tensor probs({2, 4});
    probs(0, 1) = 1.0;
    probs(1, 1) = 1.0;
    const LossResult res = lovasz_loss(probs, std::vector<ClassId>{1, 1});
    CHECK(res.value == 0.0);  // only class 1 present and predicted perfectly
    CHECK_THROWS_AS(lovasz_loss(probs, std::vector<ClassId>(2, kInvalidClass)),
                    std::runtime_error);
  }
  SUBCASE("the loss is invariant to masked rows") {
    std::mt19937_64 eng(11);
    const Tensor logits = random_logits(4, 3, eng);
    const Tensor probs = softmax_rows(logits);
    Tensor wide({5, 3});
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 3; ++j) wide(i, j) = probs(i, j);
    }
    wide(4, 0) = 1.0;  // masked row, contents irrelevant
    const std::vector<ClassId> gt{0, 1, 2, 1};
    std::vector<ClassId> gt_wide = gt;
    gt_wide.push_back(kInvalidClass);
    CHECK(lovasz_loss(probs, gt).value ==
          doctest::Approx(lovasz_loss(wide, gt_wide).value).epsilon(1e-15));
  }
}

TEST_CASE("lovasz subgradient matches finite differences away from ties") {
  std::mt19937_64 eng(13);
  double worst = 0.0;
  int done = 0;
  while (done < 40) {
    const int n = 3 + static_cast<int>(eng() % 5), c = 2 + static_cast<int>(eng() % 4);
    const Tensor probs = softmax_rows(random_logits(n, c, eng));
    std::vector<ClassId> gt(n);
    for (int i = 0; i < n; ++i) gt[i] = static_cast<ClassId>(eng() % c);

    bool tied = false;
    for (int cls = 0; cls < c && !tied; ++cls) {
      bool present = false;
      std::vector<double> errors;
      for (int i = 0; i < n; ++i) {
        if (gt[i] == cls) present = true;
        errors.push_back(gt[i] == cls ? 1.0 - probs(i, cls) : probs(i, cls));
      }
      if (!present) continue;
      std::sort(errors.begin(), errors.end());
      for (std::size_t k = 1; k < errors.size(); ++k) {
        if (errors[k] - errors[k - 1] < 1e-3) tied = true;
      }
    }
    if (tied) continue;
    ++done;

    const LossResult res = lovasz_loss(probs, gt);
    const Tensor fd =
        central_difference(probs, [&](const Tensor& t) { return lovasz_loss(t, gt).value; });
    for (std::size_t k = 0; k < fd.size(); ++k) {
      worst = std::max(worst, rel_err(res.grad.values()[k], fd.values()[k]));
    }
  }
  CHECK(worst <= 1e-5);
}

TEST_CASE("total supervision sums the two terms exactly") {
  std::mt19937_64 eng(17);
  for (int trial = 0; trial < 10; ++trial) {
    const int n = 3 + trial % 4, c = 3 + trial % 3;
    const Tensor logits = random_logits(n, c, eng);
    std::vector<ClassId> gt(n);
    for (int i = 0; i < n; ++i) gt[i] = static_cast<ClassId>(eng() % c);

    const double ce = ce_loss(logits, gt).value;
    const double lv = lovasz_loss(softmax_rows(logits), gt).value;
    const LossResult total = ssc_loss(logits, gt);
    CHECK(total.value == ce + lv);

    const Tensor fd =
        central_difference(logits, [&](const Tensor& t) { return ssc_loss(t, gt).value; });
    for (std::size_t k = 0; k < fd.size(); ++k) {
      CHECK(rel_err(total.grad.values()[k], fd.values()[k]) <= 1e-4);
    }
  }
}
