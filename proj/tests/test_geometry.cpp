// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cmath>
#include <random>

#include "semvox/geometry.hpp"

using namespace semvox;

namespace {

Pose random_pose(std::mt19937_64& eng, double translation_scale = 5.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  // random unit axis + angle via exponential map
  double ax = u(eng), ay = u(eng), az = u(eng);
  const double norm = std::sqrt(ax * ax + ay * ay + az * az) + 1e-12;
  ax /= norm, ay /= norm, az /= norm;
  const double angle = u(eng) * M_PI;
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  Pose::Matrix m{t * ax * ax + c,      t * ax * ay - s * az, t * ax * az + s * ay, u(eng) * translation_scale,
                 t * ax * ay + s * az, t * ay * ay + c,      t * ay * az - s * ax, u(eng) * translation_scale,
                 t * ax * az - s * ay, t * ay * az + s * ax, t * az * az + c,      u(eng) * translation_scale,
                 0, 0, 0, 1};
  return Pose(m);
}

}  // namespace

TEST_CASE("compose and invert satisfy the group laws") {
  std::mt19937_64 eng(7);
  const Pose id;
  for (int trial = 0; trial < 50; ++trial) {
    const Pose p = random_pose(eng);
    CHECK(compose(id, p).approx_equal(p, 1e-12));
    CHECK(compose(p, id).approx_equal(p, 1e-12));
    CHECK(compose(p, invert(p)).approx_equal(id, 1e-9));
    CHECK(compose(invert(p), p).approx_equal(id, 1e-9));

    const Pose a = random_pose(eng), b = random_pose(eng), c = random_pose(eng);
    CHECK(compose(compose(a, b), c).approx_equal(compose(a, compose(b, c)), 1e-9));
  }
}

TEST_CASE("rotation composition matches the analytic product") {
  const Pose quarter = Pose::rot_z(M_PI / 2.0);
  const Pose half = compose(quarter, quarter);
  CHECK(half.approx_equal(Pose::rot_z(M_PI), 1e-12));

  const Pose t = Pose::translation(1, 2, 3);
  CHECK(invert(t).approx_equal(Pose::translation(-1, -2, -3), 1e-15));

  const Vec3 p = Pose::rot_z(M_PI / 2.0).apply({1.0, 0.0, 0.0});
  CHECK(p[0] == doctest::Approx(0.0).epsilon(1e-12));
  CHECK(p[1] == doctest::Approx(1.0).epsilon(1e-12));
}

TEST_CASE("pose validation rejects corrupted matrices and repairs drifted ones") {
  Pose::Matrix bad{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 2, 0, 0, 0, 0, 1};  // det 2
  CHECK_THROWS_AS((Pose(bad)), std::invalid_argument);

  Pose::Matrix skew{1, 0.5, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1};
  CHECK_THROWS_AS((Pose(skew)), std::invalid_argument);

  Pose::Matrix row{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 1e-6, 0, 1};
  CHECK_THROWS_AS((Pose(row)), std::invalid_argument);

  // float32-grade drift gets re-orthonormalized
  std::mt19937_64 eng(3);
  const Pose clean = random_pose(eng);
  Pose::Matrix drifted = clean.matrix();
  for (int k = 0; k < 12; ++k) drifted[k] += (k % 2 ? 1.0 : -1.0) * 2e-6;
  const Pose repaired(drifted);
  double defect = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += repaired.at(k, i) * repaired.at(k, j);
      defect = std::max(defect, std::abs(dot - (i == j ? 1.0 : 0.0)));
    }
  }
  CHECK(defect <= 1e-9);
}

TEST_CASE("relative_pose implements the four-factor conjugation") {
  FrameCalib calib;  // identity extrinsic by default
  SUBCASE("self-relative is the identity") {
    std::mt19937_64 eng(11);
    const Pose p = random_pose(eng);
    CHECK(relative_pose(p, p, calib).approx_equal(Pose(), 1e-9));
  }
  SUBCASE("pure camera translation with identity extrinsic") {
    const Pose pivot;  // identity
    const Pose cam = Pose::translation(3.0, -1.0, 0.5);
    const Pose rel = relative_pose(cam, pivot, calib);
    CHECK(rel.approx_equal(Pose::translation(3.0, -1.0, 0.5), 1e-12));
  }
  SUBCASE("forward/backward relative poses invert each other") {
    std::mt19937_64 eng(13);
    for (int trial = 0; trial < 25; ++trial) {
      calib.t_li_cam = random_pose(eng, 0.5);
      const Pose a = random_pose(eng), b = random_pose(eng);
      const Pose ab = relative_pose(a, b, calib);
      const Pose ba = relative_pose(b, a, calib);
      CHECK(compose(ab, ba).approx_equal(Pose(), 1e-9));
      CHECK(ab.approx_equal(invert(ba), 1e-9));
      // agrees with the direct LiDAR-pose form
      const Pose la = compose(invert(calib.t_li_cam), compose(a, calib.t_li_cam));
      const Pose lb = compose(invert(calib.t_li_cam), compose(b, calib.t_li_cam));
      CHECK(relative_pose_lidar(la, lb).approx_equal(ab, 1e-9));
    }
  }
}

TEST_CASE("relative_coordinates transforms every voxel center") {
  GridSpec spec;
  spec.dims = {2, 2, 1};
  spec.origin = {-1.0, -1.0, -0.5};
  spec.voxel_size = {1.0, 1.0, 1.0};

  SUBCASE("identity gives the center field") {
    const auto coords = relative_coordinates(spec, Pose());
    CHECK(coords.size() == 2 * 2 * 1 * 3);
    CHECK(coords[0] == doctest::Approx(-0.5));
    CHECK(coords[1] == doctest::Approx(-0.5));
    CHECK(coords[2] == doctest::Approx(0.0));
  }
  SUBCASE("translation shifts all coordinates") {
    const auto coords = relative_coordinates(spec, Pose::translation(1.0, 0.0, 0.0));
    for (std::size_t v = 0; v < 4; ++v) {
      const Vec3 c = voxel_center(linear_to_index(v, spec), spec);
      CHECK(coords[3 * v + 0] == doctest::Approx(c[0] + 1.0));
      CHECK(coords[3 * v + 1] == doctest::Approx(c[1]));
    }
  }
  SUBCASE("half-turn about z negates x and y on the 4-voxel fixture") {
    const auto coords = relative_coordinates(spec, Pose::rot_z(M_PI));
    for (std::size_t v = 0; v < 4; ++v) {
      const Vec3 c = voxel_center(linear_to_index(v, spec), spec);
      CHECK(coords[3 * v + 0] == doctest::Approx(-c[0]).epsilon(1e-12));
      CHECK(coords[3 * v + 1] == doctest::Approx(-c[1]).epsilon(1e-12));
      CHECK(coords[3 * v + 2] == doctest::Approx(c[2]).epsilon(1e-12));
    }
  }
  SUBCASE("equivariance under composition") {
    std::mt19937_64 eng(17);
    const Pose a = random_pose(eng), b = random_pose(eng);
    const auto lhs = relative_coordinates(spec, compose(a, b));
    const auto rhs = relative_coordinates(spec, b);
    for (std::size_t v = 0; v < 4; ++v) {
      const Vec3 moved = a.apply({rhs[3 * v], rhs[3 * v + 1], rhs[3 * v + 2]});
      for (int k = 0; k < 3; ++k) {
        CHECK(lhs[3 * v + k] == doctest::Approx(moved[k]).epsilon(1e-9));
      }
    }
  }
}

TEST_CASE("calibration field of view follows the pinhole model") {
  FrameCalib calib;
  CHECK(calib.fov_w() == doctest::Approx(2.0 * std::atan(1241.0 / (2.0 * 718.856))));
  CHECK(calib.fov_h() == doctest::Approx(2.0 * std::atan(376.0 / (2.0 * 718.856))));
  calib.fx = -1.0;
  CHECK_THROWS_AS(calib.validate(), std::invalid_argument);
}
