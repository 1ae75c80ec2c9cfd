// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <optional>
#include <vector>

#include "semvox/voxel_core.hpp"

namespace semvox {

/// Joint (gt, pred) counts over {free} plus the occupied classes, with a
/// separate tally of voxels excluded by the 255 invalid mask.
class ConfusionMatrix {
 public:
  explicit ConfusionMatrix(int num_classes);

  int num_classes() const { return num_classes_; }
  std::uint64_t count(int gt, int pred) const {
    return counts_[static_cast<std::size_t>(gt) * (num_classes_ + 1) + pred];
  }
  void add(int gt, int pred, std::uint64_t n = 1) {
    counts_[static_cast<std::size_t>(gt) * (num_classes_ + 1) + pred] += n;
  }
  std::uint64_t excluded() const { return excluded_; }
  void add_excluded(std::uint64_t n = 1) { excluded_ += n; }
  std::uint64_t total() const;

  ConfusionMatrix& operator+=(const ConfusionMatrix& other);
  bool operator==(const ConfusionMatrix&) const = default;

 private:
  int num_classes_;
  std::vector<std::uint64_t> counts_;  // (C+1)^2, rows gt, cols pred
  std::uint64_t excluded_ = 0;
};

/// Exact joint counts of pred vs gt labels. With mask_invalid, voxels whose
/// gt label is 255 are excluded (counted separately); without it a 255 gt
/// label is a data error. A 255 in pred at an evaluated voxel is always an
/// error. Throws std::invalid_argument on spec mismatch.
ConfusionMatrix accumulate_confusion(const VoxelGrid& pred, const VoxelGrid& gt, bool mask_invalid,
                                     int num_classes = kSemanticKittiClasses);

/// Geometric occupied-vs-free IoU in percent: TP / (TP + FP + FN) * 100 where
/// occupancy ignores the class. Returns nullopt when the denominator is zero
/// (undefined, distinct from 0).
std::optional<double> iou(const ConfusionMatrix& cm);

struct MiouResult {
  double miou = 0.0;                    // percent
  std::vector<double> per_class;        // percent, index 0 = class 1
  std::vector<bool> present;            // class seen in gt or pred
};

/// Per-class semantic IoU and its unweighted mean over occupied classes.
/// Classes absent from both gt and pred score 0 by default (benchmark
/// convention); with skip_absent they are dropped from the mean instead.
MiouResult miou(const ConfusionMatrix& cm, bool skip_absent = false);

struct BandMetrics {
  double band = 0.0;  // meters
  std::optional<double> iou;
  MiouResult semantic;
};

/// Crops the forward subvolume x in [0, band], y in [-band/2, band/2], full
/// height. Throws std::invalid_argument when the band does not lie on the
/// voxel lattice inside the grid.
VoxelGrid crop_band(const VoxelGrid& grid, double band);

/// Metrics over distance-banded crops of the same grid pair.
std::vector<BandMetrics> banded_eval(const VoxelGrid& pred, const VoxelGrid& gt,
                                     const std::vector<double>& bands, bool mask_invalid,
                                     int num_classes = kSemanticKittiClasses);

}  // namespace semvox
