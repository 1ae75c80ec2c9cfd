// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <string>
#include <vector>

#include "semvox/geometry.hpp"
#include "semvox/voxel_core.hpp"

namespace semvox {

/// One devoxelized vote: a point with its semantic class and vote weight.
struct SemanticPoint {
  double x = 0.0;
  double y = 0.0;
  double z = 0.0;
  ClassId cls = kFreeClass;
  float weight = 1.0f;
};

/// Flat point list produced by devoxelization. Only occupied classes appear;
/// free and invalid labels never vote.
struct SemanticPointCloud {
  std::vector<SemanticPoint> points;

  std::size_t size() const { return points.size(); }
  bool empty() const { return points.empty(); }
};

enum class WeightMode { kUniform, kCamera, kLidar };

struct Box3 {
  Vec3 lo{0.0, 0.0, 0.0};
  Vec3 hi{0.0, 0.0, 0.0};

  bool contains(const Vec3& p) const {
    return p[0] >= lo[0] && p[0] <= hi[0] && p[1] >= lo[1] && p[1] <= hi[1] && p[2] >= lo[2] &&
           p[2] <= hi[2];
  }
};

/// Standard LiDAR->camera axis permutation (x_cam = -y, y_cam = -z,
/// z_cam = x) used when no calibrated extrinsic is supplied.
Pose default_camera_axes();

/// Sensor-bias voting configuration. Weights are evaluated in the voting
/// sensor's own coordinates: the frustum test in its camera frame, the
/// priority box and radial range in its LiDAR frame.
struct WeightProfile {
  WeightMode mode = WeightMode::kUniform;

  // camera: frustum membership and near-region priority box
  double fov_w = 1.425;  // 2*atan(1241 / (2*718.856))
  double fov_h = 0.511;  // 2*atan(376 / (2*718.856))
  Box3 bbox;             // defaulted in make-functions: x [0, 25.6], y [-12.8, 12.8], full height
  double w_high = 1.0;
  double w_med = 0.1;
  double w_low = 0.01;
  Pose cam_extrinsic = default_camera_axes();  // LiDAR -> camera

  // lidar: linear range attenuation
  double w_max = 10.0;
  double w_min = 0.1;
  double max_range = 51.2;

  void validate() const;  // throws std::invalid_argument

  static WeightProfile uniform();
  static WeightProfile camera();
  static WeightProfile lidar();
};

/// Parses a key=value profile file (see README for the schema).
WeightProfile load_weight_profile(const std::string& path);

/// Frustum membership in camera coordinates:
/// |atan2(x,z)| <= fov_w/2 and |atan2(y,z)| <= fov_h/2 and z > 0.
bool frustum_contains(const Vec3& p_cam, double fov_w, double fov_h);

/// Piecewise camera weight for a point given in the voting camera's frame.
/// The box term is evaluated on the same point expressed in the voting
/// LiDAR frame (via the profile extrinsic): w_high inside frustum and box,
/// w_med inside frustum only, w_low otherwise.
double camera_weight(const Vec3& p_cam, const WeightProfile& profile);

/// Linear range attenuation w_max - (w_max - w_min) * r / R, clamped to
/// [w_min, w_max] beyond R. Throws std::invalid_argument for r < 0.
double lidar_weight(double r, const WeightProfile& profile);

/// Weight of a point expressed in the voting sensor's LiDAR frame, under
/// any profile mode.
double sensor_weight(const Vec3& p_lidar, const WeightProfile& profile);

/// Per-voxel per-class vote totals over a target volume. Only occupied
/// classes have slots; sums are float32 as in the full-precision (non-city)
/// pipeline.
class VoteAccumulator {
 public:
  VoteAccumulator(GridSpec spec, int num_classes);

  const GridSpec& spec() const { return spec_; }
  int num_classes() const { return num_classes_; }

  float sum(std::size_t voxel, ClassId cls) const {
    return sums_[voxel * num_classes_ + (cls - 1)];
  }
  void add(std::size_t voxel, ClassId cls, float w) {
    sums_[voxel * num_classes_ + (cls - 1)] += w;
  }

  const std::vector<float>& sums() const { return sums_; }
  std::vector<float>& sums() { return sums_; }

 private:
  GridSpec spec_;
  int num_classes_;
  std::vector<float> sums_;
};

/// One point per occupied voxel, placed at the voxel center with weight 1.
/// Throws std::invalid_argument if the grid contains invalid (255) labels.
SemanticPointCloud devoxelize(const VoxelGrid& grid);

/// Rigid transform of every point; classes and weights unchanged.
SemanticPointCloud transform_cloud(const SemanticPointCloud& cloud, const Pose& rel);

/// Multiplies every point weight by the sensor weight evaluated at the
/// point's coordinates, which must be in the voting sensor's LiDAR frame.
SemanticPointCloud apply_sensor_weights(const SemanticPointCloud& cloud,
                                        const WeightProfile& profile);

/// Accumulates cloud votes into the target volume: each point lands in the
/// voxel floor((p - origin) / voxel_size); out-of-volume points are dropped.
/// `to_sensor` maps cloud coordinates into the voting sensor's LiDAR frame
/// for the weighting terms; pass identity when the cloud is already there or
/// the profile is uniform. Returns the number of dropped points. Throws
/// std::invalid_argument on non-finite coordinates.
std::size_t voxelize_into(VoteAccumulator& acc, const SemanticPointCloud& cloud,
                          const WeightProfile& profile, const Pose& to_sensor = Pose());

/// Per-voxel argmax over occupied classes; all-zero sums stay free; ties
/// break to the lowest class id. Throws std::runtime_error on NaN sums.
VoxelGrid vote(const VoteAccumulator& acc, int frame_id = 0);

/// A frame volume plus its LiDAR->world pose.
struct FrameRef {
  const VoxelGrid* grid = nullptr;
  Pose lidar_to_world;
};

struct FuseStats {
  std::size_t points_voted = 0;
  std::size_t points_dropped = 0;
  int window_first = 0;
  int window_last = 0;
};

/// Full voting pipeline over a temporal window of `radius` frames either
/// side of the target: devoxelize each source frame, weight its votes in the
/// source sensor frame, transform into the target frame, accumulate, argmax.
/// Frames are matched by VoxelGrid::frame_id and processed in ascending id
/// order regardless of list order or thread count, so the output is
/// bit-reproducible. Throws std::invalid_argument when the target id is
/// missing or frame specs disagree.
VoxelGrid fuse_window(const std::vector<FrameRef>& frames, int target_frame_id, int radius,
                      const WeightProfile& profile, int num_classes = kSemanticKittiClasses,
                      FuseStats* stats = nullptr);

}  // namespace semvox
