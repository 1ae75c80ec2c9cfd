// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "semvox/fusion.hpp"
#include "semvox/geometry.hpp"
#include "semvox/voxel_core.hpp"

namespace semvox {

/// Scene primitive rasterized into the synthetic world grid. Extents are in
/// voxel units of the world grid so occupancy counts are exact.
struct Primitive {
  enum class Kind { kGround, kBox, kCylinder, kRibbon };

  Kind kind = Kind::kBox;
  ClassId cls = 1;
  Index3 lo{0, 0, 0};  // box/ribbon: half-open index range; ground/ribbon use lo[2]/hi[2] for z
  Index3 hi{0, 0, 0};
  double center_x = 0.0;  // cylinder axis, voxel units
  double center_y = 0.0;
  double radius = 0.0;

  static Primitive ground(int z0, int z1, ClassId cls);
  static Primitive box(const Index3& lo, const Index3& hi, ClassId cls);
  static Primitive cylinder(double cx, double cy, double radius, int z0, int z1, ClassId cls);
  static Primitive ribbon(int y0, int y1, int z0, int z1, ClassId cls);
};

struct SceneConfig {
  std::uint64_t seed = 0;
  GridSpec world_spec;
  GridSpec frame_spec;
  std::vector<Primitive> primitives;
  std::vector<Pose> trajectory;  // LiDAR -> world, one per frame
};

struct NoiseModel {
  double flip_rate = 0.0;           // occupied -> uniformly different class
  double deletion_rate = 0.0;       // occupied -> free
  double hallucination_rate = 0.0;  // free -> uniformly random class
};

struct FrustumSpec {
  double fov_w = 1.425;
  double fov_h = 0.511;
  Pose cam_extrinsic = default_camera_axes();
};

/// Rasterizes the primitive list into the world grid, in order (later
/// primitives overwrite earlier ones). Deterministic per config.
VoxelGrid generate_world(const SceneConfig& cfg);

/// Crops the world to the frame volume at `pose` (nearest-voxel sampling),
/// then applies onboard-style noise: deletion, class flips, optional frustum
/// masking (labels outside the camera fov zeroed), and finally hallucination
/// over the whole free space. Hallucination runs after masking because
/// onboard models fill the full volume whether or not the camera saw it.
/// Draws come from an engine seeded by (seed, frame_id), one voxel at a time
/// in scan order.
VoxelGrid render_frame(const VoxelGrid& world, const Pose& pose, const GridSpec& frame_spec,
                       const NoiseModel& noise, std::uint64_t seed, int frame_id,
                       const std::optional<FrustumSpec>& frustum = std::nullopt,
                       int num_classes = kSemanticKittiClasses);

/// Noise-free, unmasked crop of the world at `pose`: the per-frame ground
/// truth matching render_frame geometry.
VoxelGrid ground_truth_frame(const VoxelGrid& world, const Pose& pose, const GridSpec& frame_spec,
                             int frame_id);

/// Brute-force reference for fuse_window: a plain serial triple loop over
/// window frames and voxels with no staging, binning, or threads. Intended
/// for small instances; used to validate the production kernel voxelwise.
VoxelGrid oracle_vote(const std::vector<FrameRef>& frames, int target_frame_id, int radius,
                      const WeightProfile& profile, int num_classes = kSemanticKittiClasses);

/// Randomized small scene (ground plane, road ribbon, boxes, cylinders) with
/// a forward trajectory; deterministic per seed.
SceneConfig make_random_scene(std::uint64_t seed, int num_frames, const GridSpec& frame_spec,
                              int num_classes = kSemanticKittiClasses);

/// Dense street scene: ground slab and road flanked by building rows, with
/// scattered blocks and trunks/poles in the corridor. The trajectory sweeps
/// its heading by +-yaw_sweep so camera frustums cover different sectors per
/// frame. Roughly 60% of the volume is occupied.
SceneConfig make_street_scene(std::uint64_t seed, int num_frames, const GridSpec& frame_spec,
                              double yaw_sweep = 0.15);

}  // namespace semvox
