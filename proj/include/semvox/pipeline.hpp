// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <filesystem>
#include <iosfwd>
#include <optional>
#include <string>
#include <vector>

#include "semvox/citymap.hpp"
#include "semvox/fusion.hpp"
#include "semvox/kitti_io.hpp"
#include "semvox/metrics.hpp"
#include "semvox/synth.hpp"

namespace semvox {

/// Applies the thread-count setting (flag > SEMVOX_THREADS > library default).
void set_worker_threads(int threads);

struct FuseOptions {
  std::filesystem::path seq_dir;
  std::string labels_subdir = "voxels";
  std::filesystem::path out_dir;
  int radius = 25;
  WeightProfile profile = WeightProfile::uniform();
  bool extrinsic_from_calib = true;  // camera mode: fov + extrinsic from calib.txt
  GridSpec grid;
  int num_classes = kSemanticKittiClasses;
  bool use_sidecar = true;  // pick up <seq_dir>/grid.cfg when present
  std::filesystem::path class_map_path;
  int threads = 0;
};

struct FuseReport {
  int frames = 0;
  std::size_t points_voted = 0;
  std::size_t points_dropped = 0;
  double seconds = 0.0;
};

FuseReport run_fuse(const FuseOptions& opt, std::ostream& log);

struct EvalOptions {
  std::filesystem::path pred_dir;
  std::filesystem::path gt_dir;
  std::vector<double> bands;  // additional banded columns, e.g. {12.8, 25.6, 51.2}
  bool mask_invalid = true;
  std::filesystem::path csv_path;
  GridSpec grid;
  int num_classes = kSemanticKittiClasses;
  bool use_sidecar = true;
  std::filesystem::path class_map_path;
  int threads = 0;
};

struct EvalBand {
  double band = 0.0;  // 0 = full volume
  std::optional<double> geometric_iou;
  MiouResult semantic;
};

struct EvalReport {
  int frames = 0;
  std::vector<EvalBand> bands;  // bands[0] is always the full volume
  std::vector<std::string> class_names;
};

EvalReport run_eval(const EvalOptions& opt, std::ostream& log);

struct CitymapOptions {
  std::filesystem::path seq_dir;
  std::string labels_subdir = "voxels";
  std::filesystem::path out_dir;
  Index3 chunk_dims{0, 0, 0};  // zero = one frame volume per chunk
  WeightProfile profile = WeightProfile::camera();
  bool uniform = false;       // override the sensor profile with uniform votes
  bool static_only = true;    // drop dynamic classes (the default map contract)
  bool extrinsic_from_calib = true;
  double scale = 100.0;       // weight -> uint8 counter multiplier
  int max_active_chunks = 512;
  std::filesystem::path ply_path;
  GridSpec grid;
  int num_classes = kSemanticKittiClasses;
  bool use_sidecar = true;
  std::filesystem::path class_map_path;
  int threads = 0;
};

struct CitymapReport {
  CityMapSpec spec;
  CityStats stats;
  int chunks_written = 0;
  std::filesystem::path manifest;
  double seconds = 0.0;
};

CitymapReport run_citymap(const CitymapOptions& opt, std::ostream& log);

struct SynthOptions {
  std::filesystem::path out_root;
  std::string sequence = "00";
  std::uint64_t seed = 0;
  int frames = 20;
  GridSpec grid;  // per-frame volume
  int num_classes = kSemanticKittiClasses;
  NoiseModel noise{0.3, 0.1, 0.02};
  bool frustum = false;
};

struct SynthReport {
  std::filesystem::path seq_dir;
  int frames = 0;
};

/// Writes a synthetic sequence in the on-disk layout the other subcommands
/// consume: ground truth under voxels/, noisy onboard-style predictions
/// under preds/, poses.txt and calib.txt at scan granularity (voxel frames
/// every 5th scan), plus a grid.cfg geometry sidecar.
SynthReport run_synth(const SynthOptions& opt, std::ostream& log);

/// Runs the numeric-kernel invariant and gradient suite; prints one
/// PASS/FAIL line per check. Returns 0 when everything passes, 1 otherwise.
int run_kernel_check(std::uint64_t seed, std::ostream& out);

}  // namespace semvox
