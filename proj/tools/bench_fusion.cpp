// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0
//
// Times the OpenMP fusion kernel against the serial reference voter on the
// same synthetic window and verifies they agree voxelwise.

#include <chrono>
#include <cstdio>
#include <vector>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "semvox/fusion.hpp"
#include "semvox/synth.hpp"

using namespace semvox;

namespace {

double time_once(const std::vector<FrameRef>& refs, int target, int radius,
                 const WeightProfile& profile) {
  const auto t0 = std::chrono::steady_clock::now();
  const VoxelGrid out = fuse_window(refs, target, radius, profile);
  const auto dt = std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  (void)out;
  return dt;
}

}  // namespace

int main(int argc, char** argv) {
  int frames = 11;
  GridSpec frame_spec;
  frame_spec.dims = {128, 128, 32};
  frame_spec.origin = {0.0, -12.8, -2.0};
  if (argc > 1) frames = std::atoi(argv[1]);

  const SceneConfig scene = make_random_scene(42, frames, frame_spec);
  const VoxelGrid world = generate_world(scene);

  std::vector<VoxelGrid> grids;
  grids.reserve(frames);
  NoiseModel noise{0.2, 0.05, 0.01};
  for (int f = 0; f < frames; ++f) {
    grids.push_back(render_frame(world, scene.trajectory[f], frame_spec, noise, scene.seed, f));
  }
  std::vector<FrameRef> refs;
  for (int f = 0; f < frames; ++f) refs.push_back(FrameRef{&grids[f], scene.trajectory[f]});
  const int target = frames / 2;
  const int radius = frames;
  const WeightProfile profile = WeightProfile::lidar();

  std::size_t points = 0;
  for (const auto& g : grids) {
    for (ClassId c : g.labels()) points += c != kFreeClass;
  }
  std::printf("window: %d frames of %dx%dx%d voxels, %zu votes\n", frames, frame_spec.dims[0],
              frame_spec.dims[1], frame_spec.dims[2], points);

  const auto t0 = std::chrono::steady_clock::now();
  const VoxelGrid reference = oracle_vote(refs, target, radius, profile);
  const double serial_s =
      std::chrono::duration<double>(std::chrono::steady_clock::now() - t0).count();
  std::printf("%-28s %8.3f s\n", "serial reference voter", serial_s);

#ifdef _OPENMP
  const int max_threads = omp_get_max_threads();
#else
  const int max_threads = 1;
#endif
  for (int threads = 1; threads <= max_threads; threads *= 2) {
#ifdef _OPENMP
    omp_set_num_threads(threads);
#endif
    double best = 1e300;
    for (int rep = 0; rep < 3; ++rep) best = std::min(best, time_once(refs, target, radius, profile));
    const VoxelGrid fused = fuse_window(refs, target, radius, profile);
    const bool equal = fused == reference;
    std::printf("fuse_window, %2d thread(s)   %8.3f s   speedup %5.2fx   %s\n", threads, best,
                serial_s / best, equal ? "matches reference" : "MISMATCH");
    if (!equal) return 1;
  }
  return 0;
}
