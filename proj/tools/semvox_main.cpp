// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#include <CLI11.hpp>
#include <iostream>
#include <string>
#include <vector>

#include "semvox/pipeline.hpp"

namespace {

using namespace semvox;

void add_grid_flags(CLI::App* cmd, std::vector<int>& dims, std::vector<double>& origin,
                    std::vector<double>& voxel, int& num_classes) {
  cmd->add_option("--dims", dims, "Grid voxel counts nx ny nz")->expected(3);
  cmd->add_option("--origin", origin, "Grid origin meters ox oy oz")->expected(3);
  cmd->add_option("--voxel-size", voxel, "Voxel edge lengths meters")->expected(3);
  cmd->add_option("--classes", num_classes, "Number of occupied classes");
}

bool apply_grid_flags(const std::vector<int>& dims, const std::vector<double>& origin,
                      const std::vector<double>& voxel, GridSpec& spec) {
  bool touched = false;
  if (dims.size() == 3) {
    spec.dims = {dims[0], dims[1], dims[2]};
    touched = true;
  }
  if (origin.size() == 3) {
    spec.origin = {origin[0], origin[1], origin[2]};
    touched = true;
  }
  if (voxel.size() == 3) {
    spec.voxel_size = {voxel[0], voxel[1], voxel[2]};
    touched = true;
  }
  return touched;
}

WeightProfile profile_from_flag(const std::string& name) {
  if (name == "uniform") return WeightProfile::uniform();
  if (name == "camera") return WeightProfile::camera();
  if (name == "lidar") return WeightProfile::lidar();
  return load_weight_profile(name);  // treat as a config file path
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"semvox: offboard semantic occupancy fusion, mapping, and evaluation"};
  app.require_subcommand(1);

  // fuse
  auto* fuse = app.add_subcommand("fuse", "Refine a sequence by temporal weighted voting");
  FuseOptions fuse_opt;
  std::string fuse_profile = "uniform";
  std::vector<int> fuse_dims;
  std::vector<double> fuse_origin, fuse_voxel;
  fuse->add_option("--seq", fuse_opt.seq_dir, "Sequence directory (with poses.txt, calib.txt)")
      ->required();
  fuse->add_option("--labels", fuse_opt.labels_subdir, "Label subdirectory (default voxels)");
  fuse->add_option("--out", fuse_opt.out_dir, "Output directory")->required();
  fuse->add_option("-n,--radius", fuse_opt.radius, "Temporal window radius (default 25)");
  fuse->add_option("--profile", fuse_profile, "uniform|camera|lidar or a profile file");
  fuse->add_option("--class-map", fuse_opt.class_map_path, "Custom raw<->train class map file");
  fuse->add_option("-j,--threads", fuse_opt.threads, "Worker threads (0 = SEMVOX_THREADS or OpenMP default)");
  add_grid_flags(fuse, fuse_dims, fuse_origin, fuse_voxel, fuse_opt.num_classes);

  // eval
  auto* eval = app.add_subcommand("eval", "IoU/mIoU evaluation against ground truth");
  EvalOptions eval_opt;
  std::vector<int> eval_dims;
  std::vector<double> eval_origin, eval_voxel;
  bool no_mask = false;
  eval->add_option("--pred", eval_opt.pred_dir, "Prediction label directory")->required();
  eval->add_option("--gt", eval_opt.gt_dir, "Ground-truth label directory")->required();
  eval->add_option("--bands", eval_opt.bands, "Distance bands in meters (e.g. 12.8 25.6 51.2)");
  eval->add_flag("--no-invalid-mask", no_mask, "Ignore .invalid masks next to the ground truth");
  eval->add_option("--csv", eval_opt.csv_path, "Write the metric table as CSV");
  eval->add_option("--class-map", eval_opt.class_map_path, "Custom raw<->train class map file");
  eval->add_option("-j,--threads", eval_opt.threads, "Worker threads (0 = SEMVOX_THREADS or OpenMP default)");
  add_grid_flags(eval, eval_dims, eval_origin, eval_voxel, eval_opt.num_classes);

  // citymap
  auto* city = app.add_subcommand("citymap", "Build a chunked world-frame semantic map");
  CitymapOptions city_opt;
  std::string city_profile = "camera";
  std::vector<int> city_dims, city_chunk;
  std::vector<double> city_origin, city_voxel;
  bool all_classes = false;
  city->add_option("--seq", city_opt.seq_dir, "Sequence directory")->required();
  city->add_option("--labels", city_opt.labels_subdir, "Label subdirectory (default voxels)");
  city->add_option("--out", city_opt.out_dir, "Output directory")->required();
  city->add_option("--chunk", city_chunk, "Chunk dims in voxels (default: one frame volume)")
      ->expected(3);
  city->add_option("--profile", city_profile, "uniform|camera|lidar or a profile file");
  city->add_flag("--uniform", city_opt.uniform, "Force uniform voting weights");
  city->add_flag("--all-classes", all_classes, "Keep dynamic classes too");
  city->add_option("--scale", city_opt.scale, "Weight->counter multiplier (default 100)");
  city->add_option("--max-chunks", city_opt.max_active_chunks, "Active-chunk ceiling");
  city->add_option("--ply", city_opt.ply_path, "Also export a colored point cloud");
  city->add_option("--class-map", city_opt.class_map_path, "Custom raw<->train class map file");
  city->add_option("-j,--threads", city_opt.threads, "Worker threads (0 = SEMVOX_THREADS or OpenMP default)");
  add_grid_flags(city, city_dims, city_origin, city_voxel, city_opt.num_classes);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic sequence on disk");
  SynthOptions synth_opt;
  std::vector<int> synth_dims;
  std::vector<double> synth_origin, synth_voxel;
  int synth_classes = kSemanticKittiClasses;
  synth->add_option("--out", synth_opt.out_root, "Output dataset root")->required();
  synth->add_option("--sequence", synth_opt.sequence, "Sequence id (default 00)");
  synth->add_option("--seed", synth_opt.seed, "Generator seed");
  synth->add_option("--frames", synth_opt.frames, "Number of voxel frames");
  synth->add_option("--flip", synth_opt.noise.flip_rate, "Class flip rate");
  synth->add_option("--delete", synth_opt.noise.deletion_rate, "Deletion rate");
  synth->add_option("--hallucinate", synth_opt.noise.hallucination_rate, "Hallucination rate");
  synth->add_flag("--frustum", synth_opt.frustum, "Mask predictions to the camera frustum");
  add_grid_flags(synth, synth_dims, synth_origin, synth_voxel, synth_classes);

  // kernel-check
  auto* kernel = app.add_subcommand("kernel-check", "Run the numeric kernel invariant suite");
  std::uint64_t kernel_seed = 20260810;
  kernel->add_option("--seed", kernel_seed, "Seed for the randomized checks");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*fuse) {
      fuse_opt.profile = profile_from_flag(fuse_profile);
      if (apply_grid_flags(fuse_dims, fuse_origin, fuse_voxel, fuse_opt.grid)) {
        fuse_opt.use_sidecar = false;
      }
      run_fuse(fuse_opt, std::cout);
    } else if (*eval) {
      eval_opt.mask_invalid = !no_mask;
      if (apply_grid_flags(eval_dims, eval_origin, eval_voxel, eval_opt.grid)) {
        eval_opt.use_sidecar = false;
      }
      run_eval(eval_opt, std::cout);
    } else if (*city) {
      city_opt.profile = profile_from_flag(city_profile);
      city_opt.static_only = !all_classes;
      if (city_chunk.size() == 3) city_opt.chunk_dims = {city_chunk[0], city_chunk[1], city_chunk[2]};
      if (apply_grid_flags(city_dims, city_origin, city_voxel, city_opt.grid)) {
        city_opt.use_sidecar = false;
      }
      run_citymap(city_opt, std::cout);
    } else if (*synth) {
      apply_grid_flags(synth_dims, synth_origin, synth_voxel, synth_opt.grid);
      synth_opt.num_classes = synth_classes;
      run_synth(synth_opt, std::cout);
    } else if (*kernel) {
      return run_kernel_check(kernel_seed, std::cout);
    }
  } catch (const IoError& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 2;
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << '\n';
    return 1;
  }
  return 0;
}
