// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <functional>
#include <unordered_map>
#include <vector>

#include "semvox/fusion.hpp"
#include "semvox/geometry.hpp"
#include "semvox/kitti_io.hpp"
#include "semvox/voxel_core.hpp"

namespace semvox {

/// World-map geometry: an axis-aligned grid covering every frame volume of a
/// trajectory, split into fixed-size chunks, accumulating only the retained
/// (static) classes.
struct CityMapSpec {
  GridSpec world_spec;
  Index3 chunk_dims{256, 256, 32};
  std::vector<ClassId> static_classes;  // ascending original ids
  int num_classes = kSemanticKittiClasses;

  Index3 chunk_grid() const;
  std::size_t chunk_count() const;
  void validate() const;

  /// SemanticKITTI static classes: everything but vehicles and people
  /// (train ids 9..19).
  static std::vector<ClassId> default_static_classes();
  static std::vector<ClassId> all_classes(int num_classes);
};

/// Tight world volume: the axis-aligned union of each frame volume's eight
/// corners under its pose, padded up to whole voxels. Chunk dims default to
/// one frame volume. Throws std::invalid_argument on an empty pose list.
CityMapSpec compute_world_bounds(const std::vector<Pose>& poses, const GridSpec& frame_spec);

struct CityStats {
  std::size_t points_seen = 0;
  std::size_t points_voted = 0;
  std::size_t dropped_out_of_world = 0;
  std::size_t dropped_dynamic = 0;
  std::size_t frames = 0;
};

/// Chunked uint8 vote counters with saturating arithmetic: each vote adds
/// round(weight * scale) clamped so counters never wrap past 255. Chunks are
/// allocated on first touch; exceeding the active-chunk ceiling is an error
/// rather than an unbounded allocation.
class QuantizedAccumulator {
 public:
  explicit QuantizedAccumulator(CityMapSpec spec, double scale = 100.0,
                                int max_active_chunks = 512);

  const CityMapSpec& spec() const { return spec_; }
  double scale() const { return scale_; }
  const CityStats& stats() const { return stats_; }
  int active_chunks() const { return static_cast<int>(chunks_.size()); }
  int max_active_chunks() const { return max_active_chunks_; }

  /// Streams one frame: devoxelize, weight in the frame's own sensor frame,
  /// transform by the LiDAR->world pose, drop dynamic classes, saturating
  /// quantized accumulation. Throws std::runtime_error when a new chunk
  /// would exceed the active-chunk ceiling.
  void accumulate(const VoxelGrid& frame, const Pose& lidar_to_world,
                  const WeightProfile& profile);

  std::vector<Index3> touched_chunks() const;  // ascending linear order
  const std::uint8_t* chunk_counters(const Index3& chunk) const;  // nullptr if untouched

  /// Counter value for one world voxel and class (test helper).
  std::uint8_t counter(const Index3& world_voxel, ClassId cls) const;

 private:
  CityMapSpec spec_;
  double scale_;
  int max_active_chunks_;
  CityStats stats_;
  std::unordered_map<std::size_t, std::vector<std::uint8_t>> chunks_;
};

/// Per-chunk argmax with the fusion tie-break (lowest class id wins ties,
/// all-zero counters stay free). Emits full-size chunk grids in ascending
/// chunk order; assembling them reproduces a monolithic argmax voxelwise.
void city_argmax(const QuantizedAccumulator& acc,
                 const std::function<void(const Index3& chunk, const VoxelGrid&)>& emit);

/// Monolithic assembly of the whole map; intended for tests and small maps.
VoxelGrid assemble_city(const QuantizedAccumulator& acc);

/// Writes one label file per touched chunk plus a plain-text manifest
/// (world geometry, chunk grid, class palette, chunk file list).
std::filesystem::path write_citymap(const QuantizedAccumulator& acc,
                                    const std::filesystem::path& out_dir,
                                    const ClassMap& map = ClassMap::semantic_kitti());

/// Colored point cloud of occupied voxel centers (ASCII PLY).
void write_city_ply(const QuantizedAccumulator& acc, const std::filesystem::path& path,
                    const ClassMap& map = ClassMap::semantic_kitti());

/// RGB palette for train ids 0..19 (SemanticKITTI colors).
std::array<std::uint8_t, 3> class_color(ClassId cls);

}  // namespace semvox
