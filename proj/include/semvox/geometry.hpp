// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <vector>

#include "semvox/voxel_core.hpp"

namespace semvox {

/// Rigid SE(3) transform stored as a 4x4 row-major homogeneous matrix.
/// Construction validates rigidity: bottom row (0,0,0,1) within 1e-9,
/// ||R^T R - I||_max <= 1e-6 and |det R - 1| <= 1e-6. Rotations off by up
/// to 1e-4 are re-orthonormalized; anything worse is rejected so corrupted
/// pose files surface as errors instead of being silently fixed.
class Pose {
 public:
  using Matrix = std::array<double, 16>;

  /// Identity transform.
  Pose();

  /// Throws std::invalid_argument when the matrix is not a rigid transform.
  explicit Pose(const Matrix& m);

  static Pose identity() { return Pose(); }
  static Pose translation(double x, double y, double z);
  /// Rotation about +z by `rad`, then translation. Convenience for tests.
  static Pose rot_z(double rad, const Vec3& t = {0.0, 0.0, 0.0});
  static Pose rot_x(double rad, const Vec3& t = {0.0, 0.0, 0.0});
  static Pose rot_y(double rad, const Vec3& t = {0.0, 0.0, 0.0});
  /// Builds from a 3x4 row-major block (rotation + translation), as stored
  /// in KITTI pose and calibration files.
  static Pose from_3x4(const std::array<double, 12>& m);

  const Matrix& matrix() const { return m_; }
  double at(int r, int c) const { return m_[r * 4 + c]; }

  Vec3 apply(const Vec3& p) const {
    return Vec3{m_[0] * p[0] + m_[1] * p[1] + m_[2] * p[2] + m_[3],
                m_[4] * p[0] + m_[5] * p[1] + m_[6] * p[2] + m_[7],
                m_[8] * p[0] + m_[9] * p[1] + m_[10] * p[2] + m_[11]};
  }

  Vec3 translation_part() const { return Vec3{m_[3], m_[7], m_[11]}; }

  bool approx_equal(const Pose& other, double tol) const;

 private:
  Matrix m_;
};

/// result = a * b (apply b first, then a).
Pose compose(const Pose& a, const Pose& b);

/// Closed-form rigid inverse [R^T, -R^T t; 0 1].
Pose invert(const Pose& p);

/// Camera intrinsics and the LiDAR->camera extrinsic of one sequence.
struct FrameCalib {
  Pose t_li_cam;  // LiDAR -> camera
  double fx = 718.856;
  double fy = 718.856;
  double cx = 607.1928;
  double cy = 185.2157;
  int image_w = 1241;
  int image_h = 376;

  void validate() const;  // throws std::invalid_argument

  /// Horizontal/vertical field of view derived from the pinhole model:
  /// 2 * atan(image_w / (2 fx)) and 2 * atan(image_h / (2 fy)).
  double fov_w() const;
  double fov_h() const;
};

/// Relative pose mapping LiDAR-frame points of frame i into the LiDAR frame
/// of the pivot frame t, built from camera->world poses conjugated by the
/// LiDAR->camera extrinsic:
///   (T_li_cam)^-1 (T_cam_t_world)^-1 (T_cam_i_world) (T_li_cam)
Pose relative_pose(const Pose& cam_i_world, const Pose& cam_pivot_world, const FrameCalib& calib);

/// Direct LiDAR-pose form: both poses map LiDAR frames into a common world
/// frame; the result maps frame i LiDAR coords into frame t LiDAR coords.
Pose relative_pose_lidar(const Pose& li_i_world, const Pose& li_pivot_world);

/// Per-voxel coordinate volume: for every voxel of `spec`, the voxel center
/// transformed by `rel`. Layout (nx, ny, nz, 3), z fastest, row-major.
std::vector<double> relative_coordinates(const GridSpec& spec, const Pose& rel);

}  // namespace semvox
