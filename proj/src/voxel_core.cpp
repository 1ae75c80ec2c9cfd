// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#include "semvox/voxel_core.hpp"

#include <stdexcept>
#include <string>

namespace semvox {

void GridSpec::validate() const {
  for (int k = 0; k < 3; ++k) {
    if (dims[k] < 1) {
      throw std::invalid_argument("GridSpec: dims[" + std::to_string(k) +
                                  "] = " + std::to_string(dims[k]) + " must be >= 1");
    }
    if (!(voxel_size[k] > 0.0)) {
      throw std::invalid_argument("GridSpec: voxel_size[" + std::to_string(k) +
                                  "] = " + std::to_string(voxel_size[k]) + " must be > 0");
    }
  }
}

std::size_t index_to_linear(const Index3& i, const GridSpec& spec) {
  if (!spec.contains(i)) {
    throw std::out_of_range("voxel index (" + std::to_string(i[0]) + ", " + std::to_string(i[1]) +
                            ", " + std::to_string(i[2]) + ") outside grid");
  }
  return (static_cast<std::size_t>(i[0]) * spec.dims[1] + i[1]) * spec.dims[2] + i[2];
}

Index3 linear_to_index(std::size_t offset, const GridSpec& spec) {
  if (offset >= spec.volume()) {
    throw std::out_of_range("linear offset " + std::to_string(offset) + " outside grid");
  }
  const std::size_t nz = spec.dims[2];
  const std::size_t ny = spec.dims[1];
  return Index3{static_cast<int>(offset / (ny * nz)), static_cast<int>((offset / nz) % ny),
                static_cast<int>(offset % nz)};
}

Vec3 voxel_center(const Index3& i, const GridSpec& spec) {
  if (!spec.contains(i)) {
    throw std::out_of_range("voxel index (" + std::to_string(i[0]) + ", " + std::to_string(i[1]) +
                            ", " + std::to_string(i[2]) + ") outside grid");
  }
  return Vec3{spec.origin[0] + (i[0] + 0.5) * spec.voxel_size[0],
              spec.origin[1] + (i[1] + 0.5) * spec.voxel_size[1],
              spec.origin[2] + (i[2] + 0.5) * spec.voxel_size[2]};
}

VoxelGrid::VoxelGrid(GridSpec spec, std::vector<ClassId> labels, int frame_id)
    : spec_(spec), frame_id_(frame_id), labels_(std::move(labels)) {
  spec_.validate();
  if (labels_.size() != spec_.volume()) {
    throw std::invalid_argument("VoxelGrid: label buffer length " +
                                std::to_string(labels_.size()) + " != grid volume " +
                                std::to_string(spec_.volume()));
  }
}

void validate_labels(const std::vector<ClassId>& labels, int num_classes, bool allow_invalid) {
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const ClassId c = labels[k];
    if (c == kFreeClass) continue;
    if (c >= 1 && c <= num_classes) continue;
    if (allow_invalid && c == kInvalidClass) continue;
    throw std::invalid_argument("label " + std::to_string(int(c)) + " at offset " +
                                std::to_string(k) + " outside class range 1.." +
                                std::to_string(num_classes));
  }
}

}  // namespace semvox
