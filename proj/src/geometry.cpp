// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#include "semvox/geometry.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace semvox {

namespace {

constexpr double kBottomRowTol = 1e-9;
constexpr double kOrthoTol = 1e-6;
constexpr double kRepairBand = 1e-4;

double rotation_defect(const std::array<double, 9>& r) {
  // max |(R^T R - I)_ij|
  double worst = 0.0;
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double dot = 0.0;
      for (int k = 0; k < 3; ++k) dot += r[k * 3 + i] * r[k * 3 + j];
      const double target = (i == j) ? 1.0 : 0.0;
      worst = std::max(worst, std::abs(dot - target));
    }
  }
  return worst;
}

double det3(const std::array<double, 9>& r) {
  return r[0] * (r[4] * r[8] - r[5] * r[7]) - r[1] * (r[3] * r[8] - r[5] * r[6]) +
         r[2] * (r[3] * r[7] - r[4] * r[6]);
}

// One step of the iterative polar correction R <- (3 R - R R^T R) / 2,
// which converges quadratically to the nearest orthonormal matrix for
// inputs already close to one.
std::array<double, 9> polar_step(const std::array<double, 9>& r) {
  std::array<double, 9> rrt_r{};
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 3; ++k) {
        double rtr_kj = 0.0;
        for (int l = 0; l < 3; ++l) rtr_kj += r[l * 3 + k] * r[l * 3 + j];
        acc += r[i * 3 + k] * rtr_kj;
      }
      rrt_r[i * 3 + j] = acc;
    }
  }
  std::array<double, 9> out{};
  for (int n = 0; n < 9; ++n) out[n] = (3.0 * r[n] - rrt_r[n]) / 2.0;
  return out;
}

}  // namespace

Pose::Pose() : m_{1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1, 0, 0, 0, 0, 1} {}

Pose::Pose(const Matrix& m) : m_(m) {
  for (int c = 0; c < 3; ++c) {
    if (std::abs(m_[12 + c]) > kBottomRowTol) {
      throw std::invalid_argument("Pose: bottom row not (0,0,0,1)");
    }
  }
  if (std::abs(m_[15] - 1.0) > kBottomRowTol) {
    throw std::invalid_argument("Pose: bottom row not (0,0,0,1)");
  }
  m_[12] = m_[13] = m_[14] = 0.0;
  m_[15] = 1.0;

  std::array<double, 9> r{m_[0], m_[1], m_[2], m_[4], m_[5], m_[6], m_[8], m_[9], m_[10]};
  double defect = rotation_defect(r);
  if (defect > kRepairBand) {
    throw std::invalid_argument("Pose: rotation block not orthonormal (defect " +
                                std::to_string(defect) + ")");
  }
  if (defect > kOrthoTol) {
    // Mildly drifted rotations (float32 pose files) get repaired; harder
    // failures were rejected above.
    for (int iter = 0; iter < 4 && defect > 1e-14; ++iter) {
      r = polar_step(r);
      defect = rotation_defect(r);
    }
    m_[0] = r[0], m_[1] = r[1], m_[2] = r[2];
    m_[4] = r[3], m_[5] = r[4], m_[6] = r[5];
    m_[8] = r[6], m_[9] = r[7], m_[10] = r[8];
  }
  const double d = det3(r);
  if (std::abs(d - 1.0) > kOrthoTol) {
    throw std::invalid_argument("Pose: rotation determinant " + std::to_string(d) + " != 1");
  }
}

Pose Pose::translation(double x, double y, double z) {
  return Pose(Matrix{1, 0, 0, x, 0, 1, 0, y, 0, 0, 1, z, 0, 0, 0, 1});
}

Pose Pose::rot_z(double rad, const Vec3& t) {
  const double c = std::cos(rad), s = std::sin(rad);
  return Pose(Matrix{c, -s, 0, t[0], s, c, 0, t[1], 0, 0, 1, t[2], 0, 0, 0, 1});
}

Pose Pose::rot_x(double rad, const Vec3& t) {
  const double c = std::cos(rad), s = std::sin(rad);
  return Pose(Matrix{1, 0, 0, t[0], 0, c, -s, t[1], 0, s, c, t[2], 0, 0, 0, 1});
}

Pose Pose::rot_y(double rad, const Vec3& t) {
  const double c = std::cos(rad), s = std::sin(rad);
  return Pose(Matrix{c, 0, s, t[0], 0, 1, 0, t[1], -s, 0, c, t[2], 0, 0, 0, 1});
}

Pose Pose::from_3x4(const std::array<double, 12>& m) {
  return Pose(Matrix{m[0], m[1], m[2], m[3], m[4], m[5], m[6], m[7], m[8], m[9], m[10], m[11], 0,
                     0, 0, 1});
}

bool Pose::approx_equal(const Pose& other, double tol) const {
  for (int i = 0; i < 16; ++i) {
    if (std::abs(m_[i] - other.m_[i]) > tol) return false;
  }
  return true;
}

Pose compose(const Pose& a, const Pose& b) {
  Pose::Matrix out{};
  const auto& ma = a.matrix();
  const auto& mb = b.matrix();
  for (int i = 0; i < 4; ++i) {
    for (int j = 0; j < 4; ++j) {
      double acc = 0.0;
      for (int k = 0; k < 4; ++k) acc += ma[i * 4 + k] * mb[k * 4 + j];
      out[i * 4 + j] = acc;
    }
  }
  return Pose(out);
}

Pose invert(const Pose& p) {
  const auto& m = p.matrix();
  Pose::Matrix out{};
  // R^T block
  for (int i = 0; i < 3; ++i) {
    for (int j = 0; j < 3; ++j) out[i * 4 + j] = m[j * 4 + i];
  }
  // -R^T t
  for (int i = 0; i < 3; ++i) {
    out[i * 4 + 3] = -(m[0 * 4 + i] * m[3] + m[1 * 4 + i] * m[7] + m[2 * 4 + i] * m[11]);
  }
  out[15] = 1.0;
  return Pose(out);
}

void FrameCalib::validate() const {
  if (!(fx > 0.0) || !(fy > 0.0)) {
    throw std::invalid_argument("FrameCalib: focal lengths must be positive");
  }
  if (image_w < 1 || image_h < 1) {
    throw std::invalid_argument("FrameCalib: image dimensions must be >= 1");
  }
}

double FrameCalib::fov_w() const { return 2.0 * std::atan(image_w / (2.0 * fx)); }
double FrameCalib::fov_h() const { return 2.0 * std::atan(image_h / (2.0 * fy)); }

Pose relative_pose(const Pose& cam_i_world, const Pose& cam_pivot_world,
                   const FrameCalib& calib) {
  const Pose lidar_to_cam = calib.t_li_cam;
  return compose(invert(lidar_to_cam),
                 compose(invert(cam_pivot_world), compose(cam_i_world, lidar_to_cam)));
}

Pose relative_pose_lidar(const Pose& li_i_world, const Pose& li_pivot_world) {
  return compose(invert(li_pivot_world), li_i_world);
}

std::vector<double> relative_coordinates(const GridSpec& spec, const Pose& rel) {
  spec.validate();
  std::vector<double> out(spec.volume() * 3);
  const auto& m = rel.matrix();
  const int nx = spec.dims[0], ny = spec.dims[1], nz = spec.dims[2];
#pragma omp parallel for schedule(static)
  for (int ix = 0; ix < nx; ++ix) {
    const double cx = spec.origin[0] + (ix + 0.5) * spec.voxel_size[0];
    for (int iy = 0; iy < ny; ++iy) {
      const double cy = spec.origin[1] + (iy + 0.5) * spec.voxel_size[1];
      std::size_t base = ((static_cast<std::size_t>(ix) * ny + iy) * nz) * 3;
      for (int iz = 0; iz < nz; ++iz, base += 3) {
        const double cz = spec.origin[2] + (iz + 0.5) * spec.voxel_size[2];
        out[base + 0] = m[0] * cx + m[1] * cy + m[2] * cz + m[3];
        out[base + 1] = m[4] * cx + m[5] * cy + m[6] * cz + m[7];
        out[base + 2] = m[8] * cx + m[9] * cy + m[10] * cz + m[11];
      }
    }
  }
  return out;
}

}  // namespace semvox
