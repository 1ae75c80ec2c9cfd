// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#include "semvox/synth.hpp"

#include <algorithm>
#include <cmath>
#include <random>
#include <stdexcept>
#include <string>

namespace semvox {

Primitive Primitive::ground(int z0, int z1, ClassId cls) {
  Primitive p;
  p.kind = Kind::kGround;
  p.cls = cls;
  p.lo[2] = z0;
  p.hi[2] = z1;
  return p;
}

Primitive Primitive::box(const Index3& lo, const Index3& hi, ClassId cls) {
  Primitive p;
  p.kind = Kind::kBox;
  p.cls = cls;
  p.lo = lo;
  p.hi = hi;
  return p;
}

Primitive Primitive::cylinder(double cx, double cy, double radius, int z0, int z1, ClassId cls) {
  Primitive p;
  p.kind = Kind::kCylinder;
  p.cls = cls;
  p.center_x = cx;
  p.center_y = cy;
  p.radius = radius;
  p.lo[2] = z0;
  p.hi[2] = z1;
  return p;
}

Primitive Primitive::ribbon(int y0, int y1, int z0, int z1, ClassId cls) {
  Primitive p;
  p.kind = Kind::kRibbon;
  p.cls = cls;
  p.lo[1] = y0;
  p.hi[1] = y1;
  p.lo[2] = z0;
  p.hi[2] = z1;
  return p;
}

VoxelGrid generate_world(const SceneConfig& cfg) {
  const GridSpec& spec = cfg.world_spec;
  spec.validate();
  std::vector<ClassId> labels(spec.volume(), kFreeClass);
  const int nx = spec.dims[0], ny = spec.dims[1], nz = spec.dims[2];
  auto clamp_range = [](int lo, int hi, int n) {
    return std::pair<int, int>{std::max(0, lo), std::min(n, hi)};
  };
  auto fill_box = [&](int x0, int x1, int y0, int y1, int z0, int z1, ClassId cls) {
    const auto [ax0, ax1] = clamp_range(x0, x1, nx);
    const auto [ay0, ay1] = clamp_range(y0, y1, ny);
    const auto [az0, az1] = clamp_range(z0, z1, nz);
    for (int ix = ax0; ix < ax1; ++ix) {
      for (int iy = ay0; iy < ay1; ++iy) {
        const std::size_t base = (static_cast<std::size_t>(ix) * ny + iy) * nz;
        for (int iz = az0; iz < az1; ++iz) labels[base + iz] = cls;
      }
    }
  };
  for (const Primitive& p : cfg.primitives) {
    switch (p.kind) {
      case Primitive::Kind::kGround:
        fill_box(0, nx, 0, ny, p.lo[2], p.hi[2], p.cls);
        break;
      case Primitive::Kind::kBox:
        fill_box(p.lo[0], p.hi[0], p.lo[1], p.hi[1], p.lo[2], p.hi[2], p.cls);
        break;
      case Primitive::Kind::kRibbon:
        fill_box(0, nx, p.lo[1], p.hi[1], p.lo[2], p.hi[2], p.cls);
        break;
      case Primitive::Kind::kCylinder: {
        const auto [az0, az1] = clamp_range(p.lo[2], p.hi[2], nz);
        const int x0 = std::max(0, static_cast<int>(std::floor(p.center_x - p.radius)));
        const int x1 = std::min(nx, static_cast<int>(std::ceil(p.center_x + p.radius)) + 1);
        const int y0 = std::max(0, static_cast<int>(std::floor(p.center_y - p.radius)));
        const int y1 = std::min(ny, static_cast<int>(std::ceil(p.center_y + p.radius)) + 1);
        for (int ix = x0; ix < x1; ++ix) {
          for (int iy = y0; iy < y1; ++iy) {
            const double dx = (ix + 0.5) - p.center_x;
            const double dy = (iy + 0.5) - p.center_y;
            if (dx * dx + dy * dy > p.radius * p.radius) continue;
            const std::size_t base = (static_cast<std::size_t>(ix) * ny + iy) * nz;
            for (int iz = az0; iz < az1; ++iz) labels[base + iz] = p.cls;
          }
        }
        break;
      }
    }
  }
  return VoxelGrid(spec, std::move(labels));
}

namespace {

std::mt19937_64 frame_engine(std::uint64_t seed, int frame_id) {
  return std::mt19937_64(seed ^ (0x9E3779B97F4A7C15ULL * static_cast<std::uint64_t>(frame_id + 1)));
}

std::vector<ClassId> crop_world(const VoxelGrid& world, const Pose& pose,
                                const GridSpec& frame_spec) {
  const GridSpec& wspec = world.spec();
  std::vector<ClassId> labels(frame_spec.volume(), kFreeClass);
  const int nx = frame_spec.dims[0], ny = frame_spec.dims[1], nz = frame_spec.dims[2];
  const auto& m = pose.matrix();
  std::size_t k = 0;
  for (int ix = 0; ix < nx; ++ix) {
    const double cx = frame_spec.origin[0] + (ix + 0.5) * frame_spec.voxel_size[0];
    for (int iy = 0; iy < ny; ++iy) {
      const double cy = frame_spec.origin[1] + (iy + 0.5) * frame_spec.voxel_size[1];
      for (int iz = 0; iz < nz; ++iz, ++k) {
        const double cz = frame_spec.origin[2] + (iz + 0.5) * frame_spec.voxel_size[2];
        const double wx = m[0] * cx + m[1] * cy + m[2] * cz + m[3];
        const double wy = m[4] * cx + m[5] * cy + m[6] * cz + m[7];
        const double wz = m[8] * cx + m[9] * cy + m[10] * cz + m[11];
        const double fx = std::floor((wx - wspec.origin[0]) / wspec.voxel_size[0]);
        const double fy = std::floor((wy - wspec.origin[1]) / wspec.voxel_size[1]);
        const double fz = std::floor((wz - wspec.origin[2]) / wspec.voxel_size[2]);
        if (fx < 0.0 || fx >= wspec.dims[0] || fy < 0.0 || fy >= wspec.dims[1] || fz < 0.0 ||
            fz >= wspec.dims[2]) {
          continue;
        }
        const std::size_t lin =
            (static_cast<std::size_t>(fx) * wspec.dims[1] + static_cast<std::size_t>(fy)) *
                wspec.dims[2] +
            static_cast<std::size_t>(fz);
        labels[k] = world.label_at(lin);
      }
    }
  }
  return labels;
}

}  // namespace

VoxelGrid ground_truth_frame(const VoxelGrid& world, const Pose& pose, const GridSpec& frame_spec,
                             int frame_id) {
  return VoxelGrid(frame_spec, crop_world(world, pose, frame_spec), frame_id);
}

VoxelGrid render_frame(const VoxelGrid& world, const Pose& pose, const GridSpec& frame_spec,
                       const NoiseModel& noise, std::uint64_t seed, int frame_id,
                       const std::optional<FrustumSpec>& frustum, int num_classes) {
  if (noise.flip_rate < 0.0 || noise.flip_rate > 1.0 || noise.deletion_rate < 0.0 ||
      noise.deletion_rate > 1.0 || noise.hallucination_rate < 0.0 ||
      noise.hallucination_rate > 1.0) {
    throw std::invalid_argument("render_frame: noise rates must be in [0, 1]");
  }
  std::vector<ClassId> labels = crop_world(world, pose, frame_spec);
  std::mt19937_64 eng = frame_engine(seed, frame_id);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  if (noise.deletion_rate > 0.0 || noise.flip_rate > 0.0) {
    std::uniform_int_distribution<int> other(1, num_classes - 1);
    for (ClassId& l : labels) {
      if (l == kFreeClass) continue;
      if (noise.deletion_rate > 0.0 && u01(eng) < noise.deletion_rate) {
        l = kFreeClass;
        continue;
      }
      if (noise.flip_rate > 0.0 && u01(eng) < noise.flip_rate) {
        const int draw = other(eng);
        l = static_cast<ClassId>(draw >= l ? draw + 1 : draw);
      }
    }
  }

  if (frustum) {
    const auto& e = frustum->cam_extrinsic.matrix();
    std::size_t k = 0;
    for (int ix = 0; ix < frame_spec.dims[0]; ++ix) {
      const double cx = frame_spec.origin[0] + (ix + 0.5) * frame_spec.voxel_size[0];
      for (int iy = 0; iy < frame_spec.dims[1]; ++iy) {
        const double cy = frame_spec.origin[1] + (iy + 0.5) * frame_spec.voxel_size[1];
        for (int iz = 0; iz < frame_spec.dims[2]; ++iz, ++k) {
          if (labels[k] == kFreeClass) continue;
          const double cz = frame_spec.origin[2] + (iz + 0.5) * frame_spec.voxel_size[2];
          const Vec3 p_cam{e[0] * cx + e[1] * cy + e[2] * cz + e[3],
                           e[4] * cx + e[5] * cy + e[6] * cz + e[7],
                           e[8] * cx + e[9] * cy + e[10] * cz + e[11]};
          if (!frustum_contains(p_cam, frustum->fov_w, frustum->fov_h)) labels[k] = kFreeClass;
        }
      }
    }
  }

  if (noise.hallucination_rate > 0.0) {
    std::uniform_int_distribution<int> any(1, num_classes);
    for (ClassId& l : labels) {
      if (l != kFreeClass) continue;
      if (u01(eng) < noise.hallucination_rate) l = static_cast<ClassId>(any(eng));
    }
  }
  return VoxelGrid(frame_spec, std::move(labels), frame_id);
}

// The reference implementation below deliberately repeats the voting math
// (closed-form pose inverse/product, voxel centers, sensor weights, floor
// quantization, float32 sums) as straight-line serial code. The expressions
// mirror the production kernel term for term; exact-equality acceptance
// depends on both sides computing identical IEEE values.
VoxelGrid oracle_vote(const std::vector<FrameRef>& frames, int target_frame_id, int radius,
                      const WeightProfile& profile, int num_classes) {
  profile.validate();
  if (frames.empty()) throw std::invalid_argument("oracle_vote: empty frame list");

  std::vector<const FrameRef*> sorted;
  sorted.reserve(frames.size());
  for (const FrameRef& f : frames) sorted.push_back(&f);
  std::sort(sorted.begin(), sorted.end(), [](const FrameRef* a, const FrameRef* b) {
    return a->grid->frame_id() < b->grid->frame_id();
  });
  int target_pos = -1;
  for (std::size_t i = 0; i < sorted.size(); ++i) {
    if (sorted[i]->grid->frame_id() == target_frame_id) target_pos = static_cast<int>(i);
  }
  if (target_pos < 0) throw std::invalid_argument("oracle_vote: target frame not found");
  const int first = std::max(0, target_pos - radius);
  const int last = std::min(static_cast<int>(sorted.size()) - 1, target_pos + radius);

  const GridSpec spec = sorted[target_pos]->grid->spec();
  std::vector<float> sums(spec.volume() * static_cast<std::size_t>(num_classes), 0.0f);

  auto mat_mul = [](const std::array<double, 16>& a, const std::array<double, 16>& b) {
    std::array<double, 16> out{};
    for (int i = 0; i < 4; ++i) {
      for (int j = 0; j < 4; ++j) {
        double acc = 0.0;
        for (int k = 0; k < 4; ++k) acc += a[i * 4 + k] * b[k * 4 + j];
        out[i * 4 + j] = acc;
      }
    }
    return out;
  };
  auto rigid_inv = [](const std::array<double, 16>& m) {
    std::array<double, 16> out{};
    for (int i = 0; i < 3; ++i) {
      for (int j = 0; j < 3; ++j) out[i * 4 + j] = m[j * 4 + i];
    }
    for (int i = 0; i < 3; ++i) {
      out[i * 4 + 3] = -(m[0 * 4 + i] * m[3] + m[1 * 4 + i] * m[7] + m[2 * 4 + i] * m[11]);
    }
    out[15] = 1.0;
    return out;
  };

  const std::array<double, 16> target_from_world = rigid_inv(sorted[target_pos]->lidar_to_world.matrix());
  const auto& e = profile.cam_extrinsic.matrix();

  for (int wi = first; wi <= last; ++wi) {
    const VoxelGrid& grid = *sorted[wi]->grid;
    const std::array<double, 16> rel = mat_mul(target_from_world, sorted[wi]->lidar_to_world.matrix());
    const GridSpec& sspec = grid.spec();
    std::size_t k = 0;
    for (int ix = 0; ix < sspec.dims[0]; ++ix) {
      const double sx = sspec.origin[0] + (ix + 0.5) * sspec.voxel_size[0];
      for (int iy = 0; iy < sspec.dims[1]; ++iy) {
        const double sy = sspec.origin[1] + (iy + 0.5) * sspec.voxel_size[1];
        for (int iz = 0; iz < sspec.dims[2]; ++iz, ++k) {
          const ClassId cls = grid.label_at(k);
          if (cls == kFreeClass) continue;
          const double sz = sspec.origin[2] + (iz + 0.5) * sspec.voxel_size[2];

          double w = 1.0;
          if (profile.mode == WeightMode::kCamera) {
            const double px = e[0] * sx + e[1] * sy + e[2] * sz + e[3];
            const double py = e[4] * sx + e[5] * sy + e[6] * sz + e[7];
            const double pz = e[8] * sx + e[9] * sy + e[10] * sz + e[11];
            const bool in_fov = pz > 0.0 && std::abs(std::atan2(px, pz)) <= profile.fov_w / 2.0 &&
                                std::abs(std::atan2(py, pz)) <= profile.fov_h / 2.0;
            if (!in_fov) {
              w = profile.w_low;
            } else {
              const bool in_box = sx >= profile.bbox.lo[0] && sx <= profile.bbox.hi[0] &&
                                  sy >= profile.bbox.lo[1] && sy <= profile.bbox.hi[1] &&
                                  sz >= profile.bbox.lo[2] && sz <= profile.bbox.hi[2];
              w = in_box ? profile.w_high : profile.w_med;
            }
          } else if (profile.mode == WeightMode::kLidar) {
            const double r = std::sqrt(sx * sx + sy * sy + sz * sz);
            w = profile.w_max - (profile.w_max - profile.w_min) * (r / profile.max_range);
            if (w < profile.w_min) w = profile.w_min;
            if (w > profile.w_max) w = profile.w_max;
          }

          const double tx = rel[0] * sx + rel[1] * sy + rel[2] * sz + rel[3];
          const double ty = rel[4] * sx + rel[5] * sy + rel[6] * sz + rel[7];
          const double tz = rel[8] * sx + rel[9] * sy + rel[10] * sz + rel[11];
          const double fx = std::floor((tx - spec.origin[0]) / spec.voxel_size[0]);
          const double fy = std::floor((ty - spec.origin[1]) / spec.voxel_size[1]);
          const double fz = std::floor((tz - spec.origin[2]) / spec.voxel_size[2]);
          if (fx < 0.0 || fx >= spec.dims[0] || fy < 0.0 || fy >= spec.dims[1] || fz < 0.0 ||
              fz >= spec.dims[2]) {
            continue;
          }
          const std::size_t lin =
              (static_cast<std::size_t>(fx) * spec.dims[1] + static_cast<std::size_t>(fy)) *
                  spec.dims[2] +
              static_cast<std::size_t>(fz);
          sums[lin * num_classes + (cls - 1)] += static_cast<float>(w);
        }
      }
    }
  }

  std::vector<ClassId> labels(spec.volume(), kFreeClass);
  for (std::size_t v = 0; v < spec.volume(); ++v) {
    const float* s = sums.data() + v * num_classes;
    float best = 0.0f;
    int best_cls = 0;
    for (int c = 0; c < num_classes; ++c) {
      if (s[c] > best) {
        best = s[c];
        best_cls = c + 1;
      }
    }
    labels[v] = static_cast<ClassId>(best_cls);
  }
  return VoxelGrid(spec, std::move(labels), target_frame_id);
}

SceneConfig make_random_scene(std::uint64_t seed, int num_frames, const GridSpec& frame_spec,
                              int num_classes) {
  if (num_frames < 1) throw std::invalid_argument("make_random_scene: num_frames < 1");
  frame_spec.validate();
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  SceneConfig cfg;
  cfg.seed = seed;
  cfg.frame_spec = frame_spec;

  const double dvx = frame_spec.voxel_size[0];
  const double frame_extent_x = frame_spec.dims[0] * dvx;
  const double travel = 0.4 * frame_extent_x;
  const double step = num_frames > 1 ? travel / (num_frames - 1) : 0.0;

  // world volume: frame volume swept along the trajectory plus slack
  GridSpec world;
  world.voxel_size = frame_spec.voxel_size;
  world.origin = {frame_spec.origin[0] - 2.0 * dvx, frame_spec.origin[1] - 2.0 * dvx,
                  frame_spec.origin[2]};
  world.dims = {frame_spec.dims[0] + static_cast<int>(std::ceil(travel / dvx)) + 4,
                frame_spec.dims[1] + 4, frame_spec.dims[2]};
  cfg.world_spec = world;

  const int wx = world.dims[0], wy = world.dims[1], wz = world.dims[2];
  const int ground_top = std::max(1, wz / 8);
  cfg.primitives.push_back(Primitive::ground(0, ground_top, 17));  // terrain
  const int road_half = std::max(1, wy / 6);
  cfg.primitives.push_back(
      Primitive::ribbon(wy / 2 - road_half, wy / 2 + road_half, 0, ground_top, 9));  // road

  const int n_boxes = 3 + static_cast<int>(u01(eng) * 4);
  const ClassId box_classes[] = {13, 14, 15};  // building, fence, vegetation
  for (int b = 0; b < n_boxes; ++b) {
    const int sx = 6 + static_cast<int>(u01(eng) * std::max(4, wx / 4));
    const int sy = 6 + static_cast<int>(u01(eng) * std::max(4, wy / 4));
    const int sz = 3 + static_cast<int>(u01(eng) * std::max(2, (wz - ground_top)));
    const int x0 = static_cast<int>(u01(eng) * std::max(1, wx - sx));
    const int y0 = static_cast<int>(u01(eng) * std::max(1, wy - sy));
    cfg.primitives.push_back(Primitive::box(
        {x0, y0, ground_top}, {x0 + sx, y0 + sy, std::min(wz, ground_top + sz)},
        box_classes[b % 3]));
  }
  const int n_cyl = 2 + static_cast<int>(u01(eng) * 3);
  const ClassId cyl_classes[] = {16, 18};  // trunk, pole
  for (int c = 0; c < n_cyl; ++c) {
    const double cx = 3.0 + u01(eng) * (wx - 6);
    const double cy = 3.0 + u01(eng) * (wy - 6);
    const double r = 2.2 + u01(eng) * 2.0;
    cfg.primitives.push_back(
        Primitive::cylinder(cx, cy, r, ground_top, std::min(wz, ground_top + 4 + int(u01(eng) * 8)),
                            cyl_classes[c % 2]));
  }
  // one parked vehicle so dynamic-class filtering has something to drop
  if (num_classes >= 1) {
    const int x0 = wx / 3, y0 = wy / 2;
    cfg.primitives.push_back(
        Primitive::box({x0, y0, ground_top}, {x0 + 6, y0 + 3, ground_top + 3}, 1));
  }

  // forward trajectory with mild lateral and yaw jitter
  for (int f = 0; f < num_frames; ++f) {
    const double x = f * step;
    const double y = (u01(eng) - 0.5) * 1.0 * dvx;
    const double yaw = (u01(eng) - 0.5) * 0.01;
    cfg.trajectory.push_back(Pose::rot_z(yaw, {x, y, 0.0}));
  }
  return cfg;
}

SceneConfig make_street_scene(std::uint64_t seed, int num_frames, const GridSpec& frame_spec,
                              double yaw_sweep) {
  SceneConfig cfg = make_random_scene(seed, num_frames, frame_spec);
  cfg.primitives.clear();
  const int wx = cfg.world_spec.dims[0];
  const int wy = cfg.world_spec.dims[1];
  const int wz = cfg.world_spec.dims[2];
  std::mt19937_64 eng(seed ^ 0xabcdefULL);
  std::uniform_real_distribution<double> u01(0.0, 1.0);

  const int ground_top = std::max(2, wz / 4);
  cfg.primitives.push_back(Primitive::ground(0, ground_top, 17));
  cfg.primitives.push_back(
      Primitive::ribbon(wy / 2 - wy / 6, wy / 2 + wy / 6, 0, ground_top, 9));
  cfg.primitives.push_back(Primitive::box({0, 0, ground_top}, {wx, wy / 4, wz}, 13));
  cfg.primitives.push_back(Primitive::box({0, wy - wy / 4, ground_top}, {wx, wy, wz}, 13));
  for (int b = 0; b < 4; ++b) {
    const int sx = 6 + static_cast<int>(u01(eng) * wx / 4);
    const int sy = 3 + static_cast<int>(u01(eng) * wy / 8);
    const int x0 = static_cast<int>(u01(eng) * (wx - sx));
    const int y0 = wy / 4 + static_cast<int>(u01(eng) * (wy / 2 - sy));
    cfg.primitives.push_back(
        Primitive::box({x0, y0, ground_top},
                       {x0 + sx, y0 + sy, ground_top + 3 + static_cast<int>(u01(eng) * (wz - 6))},
                       b % 2 ? 15 : 14));
  }
  for (int c = 0; c < 3; ++c) {
    cfg.primitives.push_back(Primitive::cylinder(3.0 + u01(eng) * (wx - 6),
                                                 3.0 + u01(eng) * (wy - 6), 2.0 + u01(eng) * 1.5,
                                                 ground_top, wz - 2, c % 2 ? 16 : 18));
  }
  for (int f = 0; f < num_frames; ++f) {
    const double yaw = yaw_sweep * std::sin(2.0 * M_PI * f / std::max(1, num_frames));
    cfg.trajectory[f] = Pose::rot_z(yaw, cfg.trajectory[f].translation_part());
  }
  return cfg;
}

}  // namespace semvox
