// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <stdexcept>
#include <string>
#include <unordered_map>
#include <vector>

#include "semvox/geometry.hpp"
#include "semvox/voxel_core.hpp"

namespace semvox {

/// File or on-disk format problem. CLI maps these to exit code 2.
class IoError : public std::runtime_error {
  using std::runtime_error::runtime_error;
};

/// Raw label <-> train id mapping plus class names. The built-in table is
/// the standard SemanticKITTI 19-class learning map; alternative taxonomies
/// (e.g. the 18-class KITTI-360 split) load from a config file.
struct ClassMap {
  int num_classes = 0;
  std::unordered_map<std::uint16_t, ClassId> raw_to_train;
  std::vector<std::uint16_t> train_to_raw;  // size num_classes + 1
  std::vector<std::string> names;           // size num_classes + 1, names[0] = "free"

  void validate() const;  // throws std::invalid_argument

  static const ClassMap& semantic_kitti();

  /// Parses the remap config format (see configs/semantic-kitti-remap.cfg):
  ///   classes = N
  ///   map <raw> <train>
  ///   inv <train> <raw>
  ///   name <train> <name>
  static ClassMap load(const std::filesystem::path& path);
};

/// Reads a SemanticKITTI voxel label file: little-endian uint16 per voxel,
/// x-major z-fastest, remapped through the class map. Throws IoError on
/// length mismatch or unknown raw labels.
VoxelGrid read_label_grid(const std::filesystem::path& path, const GridSpec& spec = GridSpec{},
                          const ClassMap& map = ClassMap::semantic_kitti(), int frame_id = 0);

/// Inverse remap and write; byte-exact round trip with read_label_grid on
/// files containing canonical raw ids. Throws std::invalid_argument when the
/// grid contains 255 or unmappable classes.
void write_label_grid(const VoxelGrid& grid, const std::filesystem::path& path,
                      const ClassMap& map = ClassMap::semantic_kitti());

/// Reads the packed invalid-voxel bitmask (MSB-first within each byte).
/// Returns one byte per voxel (0/1). Throws IoError on length mismatch.
std::vector<std::uint8_t> read_invalid_mask(const std::filesystem::path& path,
                                            const GridSpec& spec = GridSpec{});

void write_invalid_mask(const std::vector<std::uint8_t>& mask, const GridSpec& spec,
                        const std::filesystem::path& path);

/// Ground-truth grid with masked voxels forced to 255.
VoxelGrid apply_invalid_mask(const VoxelGrid& gt, const std::vector<std::uint8_t>& mask);

/// Parses a KITTI odometry calib.txt ("Tr:" extrinsic, "P2:" intrinsics).
FrameCalib read_calib(const std::filesystem::path& path);

/// Reads poses.txt (12 floats per line, camera->world) and returns per-scan
/// LiDAR poses Tr^-1 * P * Tr. Throws IoError with the line number on
/// malformed input.
std::vector<Pose> read_poses(const std::filesystem::path& poses_path,
                             const std::filesystem::path& calib_path);

/// One sequence directory in the SemanticKITTI layout:
///   <seq_dir>/{<labels_subdir>/NNNNNN.label, poses.txt, calib.txt}
/// Voxel frames occur every 5th scan; frame ids index poses.txt rows.
struct SequenceManifest {
  std::filesystem::path seq_dir;
  std::string labels_subdir;
  std::vector<int> frame_ids;  // ascending
  std::vector<Pose> lidar_poses;
  FrameCalib calib;

  std::filesystem::path label_path(int frame_id) const;
  std::filesystem::path invalid_path(int frame_id) const;

  /// Throws IoError naming the frame when its pose is missing.
  const Pose& pose(int frame_id) const;
};

SequenceManifest load_sequence(const std::filesystem::path& seq_dir,
                               const std::string& labels_subdir = "voxels");

/// Frame id -> zero-padded file stem ("000005").
std::string frame_stem(int frame_id);

/// Optional per-sequence grid geometry sidecar (grid.cfg with dims, origin,
/// voxel_size, num_classes); returns false when the file does not exist.
bool load_grid_config(const std::filesystem::path& path, GridSpec& spec, int& num_classes);
void write_grid_config(const std::filesystem::path& path, const GridSpec& spec, int num_classes);

}  // namespace semvox
