// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <array>
#include <cstddef>
#include <cstdint>
#include <vector>

namespace semvox {

/// Semantic label of a single voxel. 0 is free space, 1..num_classes are
/// occupied semantic classes, 255 marks invalid/unobserved ground truth.
using ClassId = std::uint8_t;

inline constexpr ClassId kFreeClass = 0;
inline constexpr ClassId kInvalidClass = 255;

inline constexpr int kSemanticKittiClasses = 19;
inline constexpr int kKitti360Classes = 18;

using Index3 = std::array<int, 3>;
using Vec3 = std::array<double, 3>;

/// Geometry of a dense voxel volume: voxel counts, metric origin of the
/// grid's minimum corner, and voxel edge lengths.
struct GridSpec {
  Index3 dims{256, 256, 32};
  Vec3 origin{0.0, -25.6, -2.0};
  Vec3 voxel_size{0.2, 0.2, 0.2};

  std::size_t volume() const {
    return static_cast<std::size_t>(dims[0]) * static_cast<std::size_t>(dims[1]) *
           static_cast<std::size_t>(dims[2]);
  }

  bool contains(const Index3& i) const {
    return i[0] >= 0 && i[0] < dims[0] && i[1] >= 0 && i[1] < dims[1] && i[2] >= 0 &&
           i[2] < dims[2];
  }

  /// Throws std::invalid_argument if any dim < 1 or voxel size <= 0.
  void validate() const;

  bool operator==(const GridSpec&) const = default;
};

/// Row-major linear offset with x major and z fastest, matching the
/// SemanticKITTI voxel file ordering. Throws std::out_of_range.
std::size_t index_to_linear(const Index3& i, const GridSpec& spec);

/// Inverse of index_to_linear. Throws std::out_of_range.
Index3 linear_to_index(std::size_t offset, const GridSpec& spec);

/// Metric center of voxel i: origin + (i + 0.5) * voxel_size, componentwise.
/// Throws std::out_of_range for indices outside the grid.
Vec3 voxel_center(const Index3& i, const GridSpec& spec);

/// Dense semantic label volume. Immutable after construction; build the
/// label buffer first and move it in.
class VoxelGrid {
 public:
  VoxelGrid() : labels_(spec_.volume(), kFreeClass) {}

  explicit VoxelGrid(GridSpec spec, int frame_id = 0)
      : spec_(spec), frame_id_(frame_id), labels_(spec.volume(), kFreeClass) {
    spec_.validate();
  }

  /// Takes ownership of a prefilled label buffer. Throws std::invalid_argument
  /// if the buffer length does not match the grid volume.
  VoxelGrid(GridSpec spec, std::vector<ClassId> labels, int frame_id = 0);

  const GridSpec& spec() const { return spec_; }
  int frame_id() const { return frame_id_; }
  const std::vector<ClassId>& labels() const { return labels_; }

  ClassId label(const Index3& i) const { return labels_[index_to_linear(i, spec_)]; }
  ClassId label_at(std::size_t offset) const { return labels_[offset]; }

  bool operator==(const VoxelGrid& other) const {
    return spec_ == other.spec_ && labels_ == other.labels_;
  }

 private:
  GridSpec spec_;
  int frame_id_ = 0;
  std::vector<ClassId> labels_;
};

/// Checks that every label is 0, in 1..num_classes, or (when allowed) 255.
/// Throws std::invalid_argument naming the first offending value.
void validate_labels(const std::vector<ClassId>& labels, int num_classes, bool allow_invalid);

}  // namespace semvox
