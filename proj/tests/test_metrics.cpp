// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <random>

#include "semvox/metrics.hpp"
#include "test_support.hpp"

using namespace semvox;

namespace {

// independent reference: plain double loop over voxels, then direct formulas
struct NaiveMetrics {
  std::vector<std::uint64_t> joint;  // (C+1)^2
  std::uint64_t excluded = 0;
  int num_classes = 0;

  static NaiveMetrics compute(const VoxelGrid& pred, const VoxelGrid& gt, bool mask_invalid,
                              int num_classes) {
    NaiveMetrics n;
    n.num_classes = num_classes;
    n.joint.assign(static_cast<std::size_t>(num_classes + 1) * (num_classes + 1), 0);
    for (std::size_t k = 0; k < pred.labels().size(); ++k) {
      const ClassId g = gt.labels()[k];
      const ClassId p = pred.labels()[k];
      if (mask_invalid && g == kInvalidClass) {
        ++n.excluded;
        continue;
      }
      n.joint[static_cast<std::size_t>(g) * (num_classes + 1) + p] += 1;
    }
    return n;
  }

  double geometric_iou() const {
    std::uint64_t tp = 0, fp = 0, fn = 0;
    for (int g = 0; g <= num_classes; ++g) {
      for (int p = 0; p <= num_classes; ++p) {
        const std::uint64_t c = joint[static_cast<std::size_t>(g) * (num_classes + 1) + p];
        if (g > 0 && p > 0) tp += c;
        if (g == 0 && p > 0) fp += c;
        if (g > 0 && p == 0) fn += c;
      }
    }
    return 100.0 * static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
  }

  double class_iou(int c) const {
    std::uint64_t tp = joint[static_cast<std::size_t>(c) * (num_classes + 1) + c];
    std::uint64_t row = 0, col = 0;
    for (int j = 0; j <= num_classes; ++j) {
      row += joint[static_cast<std::size_t>(c) * (num_classes + 1) + j];
      col += joint[static_cast<std::size_t>(j) * (num_classes + 1) + c];
    }
    const std::uint64_t denom = row + col - tp;
    return denom == 0 ? 0.0 : 100.0 * static_cast<double>(tp) / static_cast<double>(denom);
  }

  double mean_iou() const {
    double s = 0.0;
    for (int c = 1; c <= num_classes; ++c) s += class_iou(c);
    return s / num_classes;
  }
};

}  // namespace

TEST_CASE("confusion accumulation handles identity, disjoint, and masked cases") {
  GridSpec spec;
  spec.dims = {4, 4, 4};

  SUBCASE("perfect prediction is diagonal") {
    std::mt19937_64 eng(3);
    const VoxelGrid g = semvox::testing::random_grid(eng, spec, 5, 0.5);
    const ConfusionMatrix cm = accumulate_confusion(g, g, false, 5);
    for (int a = 0; a <= 5; ++a) {
      for (int b = 0; b <= 5; ++b) {
        if (a != b) CHECK(cm.count(a, b) == 0);
      }
    }
    CHECK(iou(cm).value_or(-1.0) == 100.0);
    CHECK(cm.total() == spec.volume());
  }
  SUBCASE("all-free prediction against all-class-1 truth") {
    const VoxelGrid pred(spec);
    const VoxelGrid gt(spec, std::vector<ClassId>(spec.volume(), 1));
    const ConfusionMatrix cm = accumulate_confusion(pred, gt, false, 5);
    CHECK(cm.count(1, 0) == spec.volume());
    CHECK(iou(cm).value_or(-1.0) == 0.0);
  }
  SUBCASE("masked voxels are excluded and tallied") {
    std::vector<ClassId> gl(spec.volume(), 1);
    gl[0] = kInvalidClass;
    gl[7] = kInvalidClass;
    const VoxelGrid gt(spec, std::move(gl));
    const VoxelGrid pred(spec, std::vector<ClassId>(spec.volume(), 1));
    const ConfusionMatrix cm = accumulate_confusion(pred, gt, true, 5);
    CHECK(cm.excluded() == 2);
    CHECK(cm.total() == spec.volume() - 2);
    CHECK_THROWS_AS(accumulate_confusion(pred, gt, false, 5), std::invalid_argument);
  }
  SUBCASE("spec mismatch is rejected") {
    GridSpec other = spec;
    other.dims = {4, 4, 5};
    CHECK_THROWS_AS(accumulate_confusion(VoxelGrid(spec), VoxelGrid(other), true, 5),
                    std::invalid_argument);
  }
  SUBCASE("undefined geometric IoU is distinct from zero") {
    const ConfusionMatrix cm = accumulate_confusion(VoxelGrid(spec), VoxelGrid(spec), false, 5);
    CHECK(!iou(cm).has_value());
  }
}

TEST_CASE("iou formula on hand counts") {
  ConfusionMatrix cm(2);
  cm.add(1, 1, 50);  // TP
  cm.add(0, 1, 25);  // FP
  cm.add(1, 0, 25);  // FN
  CHECK(iou(cm).value_or(-1.0) == doctest::Approx(50.0));
}

TEST_CASE("miou follows the absent-as-zero benchmark convention") {
  SUBCASE("one perfect class among nineteen") {
    ConfusionMatrix cm(19);
    cm.add(1, 1, 10);
    const MiouResult r = miou(cm);
    CHECK(r.per_class[0] == 100.0);
    CHECK(r.miou == doctest::Approx(100.0 / 19.0));
    CHECK(miou(cm, /*skip_absent=*/true).miou == doctest::Approx(100.0));
  }
  SUBCASE("perfect prediction with every class present") {
    ConfusionMatrix cm(4);
    for (int c = 0; c <= 4; ++c) cm.add(c, c, 3);
    CHECK(miou(cm).miou == doctest::Approx(100.0));
  }
  SUBCASE("permutation equivariance under simultaneous relabeling") {
    std::mt19937_64 eng(9);
    GridSpec spec;
    spec.dims = {6, 6, 4};
    const VoxelGrid pred = semvox::testing::random_grid(eng, spec, 4, 0.4);
    const VoxelGrid gt = semvox::testing::random_grid(eng, spec, 4, 0.4);
    const MiouResult base = miou(accumulate_confusion(pred, gt, false, 4));

    const std::array<ClassId, 5> perm{0, 3, 1, 4, 2};  // relabel occupied classes
    auto relabel = [&](const VoxelGrid& g) {
      std::vector<ClassId> l = g.labels();
      for (ClassId& c : l) c = perm[c];
      return VoxelGrid(g.spec(), std::move(l));
    };
    const MiouResult mixed = miou(accumulate_confusion(relabel(pred), relabel(gt), false, 4));
    CHECK(mixed.miou == doctest::Approx(base.miou).epsilon(1e-12));
  }
}

TEST_CASE("metrics agree with the naive double-loop reference") {
  std::mt19937_64 eng(17);
  GridSpec spec;
  spec.dims = {8, 8, 8};
  for (int trial = 0; trial < 30; ++trial) {
    const VoxelGrid pred = semvox::testing::random_grid(eng, spec, 6, 0.5);
    VoxelGrid gt = semvox::testing::random_grid(eng, spec, 6, 0.5);
    if (trial % 2 == 0) {  // sprinkle invalid voxels into the truth
      std::vector<ClassId> gl = gt.labels();
      for (std::size_t k = 0; k < gl.size(); k += 7) gl[k] = kInvalidClass;
      gt = VoxelGrid(spec, std::move(gl));
    }
    const ConfusionMatrix cm = accumulate_confusion(pred, gt, true, 6);
    const NaiveMetrics ref = NaiveMetrics::compute(pred, gt, true, 6);
    for (int a = 0; a <= 6; ++a) {
      for (int b = 0; b <= 6; ++b) {
        REQUIRE(cm.count(a, b) == ref.joint[static_cast<std::size_t>(a) * 7 + b]);
      }
    }
    REQUIRE(cm.excluded() == ref.excluded);
    CHECK(iou(cm).value_or(-1.0) == doctest::Approx(ref.geometric_iou()).epsilon(1e-12));
    const MiouResult m = miou(cm);
    CHECK(m.miou == doctest::Approx(ref.mean_iou()).epsilon(1e-12));
    for (int c = 1; c <= 6; ++c) {
      CHECK(m.per_class[c - 1] == doctest::Approx(ref.class_iou(c)).epsilon(1e-12));
    }
  }
}

TEST_CASE("confusion matrices add over disjoint partitions") {
  std::mt19937_64 eng(23);
  GridSpec whole;
  whole.dims = {8, 4, 4};
  const VoxelGrid pred = semvox::testing::random_grid(eng, whole, 5, 0.5);
  const VoxelGrid gt = semvox::testing::random_grid(eng, whole, 5, 0.5);
  const ConfusionMatrix full = accumulate_confusion(pred, gt, false, 5);

  auto half = [&](const VoxelGrid& g, int x0) {
    GridSpec h = whole;
    h.dims[0] = 4;
    h.origin[0] = whole.origin[0] + x0 * whole.voxel_size[0];
    std::vector<ClassId> labels;
    for (int x = x0; x < x0 + 4; ++x) {
      for (int y = 0; y < 4; ++y) {
        for (int z = 0; z < 4; ++z) labels.push_back(g.label({x, y, z}));
      }
    }
    return VoxelGrid(h, std::move(labels));
  };
  ConfusionMatrix sum = accumulate_confusion(half(pred, 0), half(gt, 0), false, 5);
  sum += accumulate_confusion(half(pred, 4), half(gt, 4), false, 5);
  CHECK(sum == full);
}

TEST_CASE("banded evaluation crops the forward square footprint") {
  GridSpec spec;  // default SemanticKITTI volume

  SUBCASE("band sizes") {
    std::mt19937_64 eng(31);
    GridSpec small;  // keep runtime down, same geometry contract
    small.dims = {64, 64, 8};
    small.origin = {0.0, -6.4, -2.0};
    const VoxelGrid g = semvox::testing::random_grid(eng, small, 5, 0.8);
    const VoxelGrid crop = crop_band(g, 6.4);
    CHECK(crop.spec().dims[0] == 32);
    CHECK(crop.spec().dims[1] == 32);
    CHECK(crop.spec().dims[2] == 8);
    CHECK(crop.spec().origin[0] == doctest::Approx(0.0));
    CHECK(crop.spec().origin[1] == doctest::Approx(-3.2));
    CHECK_THROWS_AS(crop_band(g, 25.6), std::invalid_argument);
    CHECK_THROWS_AS(crop_band(g, 1.23), std::invalid_argument);  // off-lattice
  }
  SUBCASE("the 12.8 m band of the default volume is 64x64x32") {
    const VoxelGrid g(spec);
    const VoxelGrid crop = crop_band(g, 12.8);
    CHECK(crop.spec().dims[0] == 64);
    CHECK(crop.spec().dims[1] == 64);
    CHECK(crop.spec().dims[2] == 32);
  }
  SUBCASE("the full band reproduces whole-grid metrics, perfect prediction scores 100") {
    std::mt19937_64 eng(37);
    GridSpec small;
    small.dims = {32, 32, 8};
    small.origin = {0.0, -3.2, -2.0};
    const VoxelGrid pred = semvox::testing::random_grid(eng, small, 5, 0.6);
    const VoxelGrid gt = semvox::testing::random_grid(eng, small, 5, 0.6);
    const auto bands = banded_eval(pred, gt, {3.2, 6.4}, false, 5);
    REQUIRE(bands.size() == 2);
    const ConfusionMatrix whole = accumulate_confusion(pred, gt, false, 5);
    CHECK(bands[1].semantic.miou == doctest::Approx(miou(whole).miou).epsilon(1e-12));
    CHECK(bands[1].iou.value_or(-1.0) == doctest::Approx(iou(whole).value_or(-2.0)).epsilon(1e-12));

    const auto perfect = banded_eval(gt, gt, {3.2, 6.4}, false, 5);
    for (const BandMetrics& bm : perfect) {
      CHECK(bm.iou.value_or(-1.0) == 100.0);
    }
  }
}
