// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0
//
// Shared randomized-fixture helpers for the unit and acceptance suites.

#pragma once

#include <cmath>
#include <random>
#include <vector>

#include "semvox/fusion.hpp"
#include "semvox/geometry.hpp"
#include "semvox/voxel_core.hpp"

namespace semvox::testing {

inline Pose random_rigid_pose(std::mt19937_64& eng, double max_angle = M_PI,
                              double translation_scale = 2.0) {
  std::uniform_real_distribution<double> u(-1.0, 1.0);
  double ax = u(eng), ay = u(eng), az = u(eng);
  const double norm = std::sqrt(ax * ax + ay * ay + az * az) + 1e-12;
  ax /= norm, ay /= norm, az /= norm;
  const double angle = u(eng) * max_angle;
  const double c = std::cos(angle), s = std::sin(angle), t = 1.0 - c;
  Pose::Matrix m{t * ax * ax + c,      t * ax * ay - s * az, t * ax * az + s * ay,
                 u(eng) * translation_scale,
                 t * ax * ay + s * az, t * ay * ay + c,      t * ay * az - s * ax,
                 u(eng) * translation_scale,
                 t * ax * az - s * ay, t * ay * az + s * ax, t * az * az + c,
                 u(eng) * translation_scale,
                 0, 0, 0, 1};
  return Pose(m);
}

inline GridSpec random_small_spec(std::mt19937_64& eng, int max_dim = 16) {
  std::uniform_int_distribution<int> d(2, max_dim);
  std::uniform_real_distribution<double> o(-3.0, 3.0);
  GridSpec spec;
  spec.dims = {d(eng), d(eng), std::max(2, d(eng) / 2)};
  spec.origin = {o(eng), o(eng), o(eng)};
  spec.voxel_size = {0.25, 0.25, 0.25};
  return spec;
}

/// Random predicted grid: every voxel free with probability `free_rate`,
/// otherwise a uniformly random occupied class.
inline VoxelGrid random_grid(std::mt19937_64& eng, const GridSpec& spec, int num_classes,
                             double free_rate = 0.7, int frame_id = 0) {
  std::uniform_real_distribution<double> u01(0.0, 1.0);
  std::uniform_int_distribution<int> cls(1, num_classes);
  std::vector<ClassId> labels(spec.volume(), kFreeClass);
  for (ClassId& l : labels) {
    if (u01(eng) >= free_rate) l = static_cast<ClassId>(cls(eng));
  }
  return VoxelGrid(spec, std::move(labels), frame_id);
}

/// Random fusion window: frames share one grid spec, poses wander near the
/// identity so the volumes keep overlapping.
struct WindowFixture {
  std::vector<VoxelGrid> grids;
  std::vector<Pose> poses;
  std::vector<FrameRef> refs;  // valid while grids/poses live
  int target_frame_id = 0;
};

inline WindowFixture random_window(std::mt19937_64& eng, int max_frames = 11, int num_classes = 19,
                                   int max_dim = 16) {
  std::uniform_int_distribution<int> nf(1, max_frames);
  const GridSpec spec = random_small_spec(eng, max_dim);
  const int frames = nf(eng);
  WindowFixture fx;
  fx.grids.reserve(frames);
  fx.poses.reserve(frames);
  for (int f = 0; f < frames; ++f) {
    fx.grids.push_back(random_grid(eng, spec, num_classes, 0.7, f));
    fx.poses.push_back(random_rigid_pose(eng, 0.5, 1.0));
  }
  for (int f = 0; f < frames; ++f) fx.refs.push_back(FrameRef{&fx.grids[f], fx.poses[f]});
  fx.target_frame_id = static_cast<int>(eng() % frames);
  return fx;
}

inline WeightProfile profile_by_index(int i) {
  switch (i % 3) {
    case 0: return WeightProfile::uniform();
    case 1: return WeightProfile::camera();
    default: return WeightProfile::lidar();
  }
}

}  // namespace semvox::testing
