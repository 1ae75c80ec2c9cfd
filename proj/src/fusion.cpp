// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#include "semvox/fusion.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <limits>
#include <memory>
#include <numeric>
#include <sstream>
#include <stdexcept>

namespace semvox {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

Box3 default_priority_box() {
  return Box3{{0.0, -12.8, -kInf}, {25.6, 12.8, kInf}};
}

}  // namespace

Pose default_camera_axes() {
  // x_cam = -y_li, y_cam = -z_li, z_cam = x_li
  return Pose(Pose::Matrix{0, -1, 0, 0, 0, 0, -1, 0, 1, 0, 0, 0, 0, 0, 0, 1});
}

void WeightProfile::validate() const {
  if (!(w_high >= w_med && w_med >= w_low && w_low > 0.0)) {
    throw std::invalid_argument("WeightProfile: need w_high >= w_med >= w_low > 0");
  }
  if (!(w_max >= w_min && w_min > 0.0)) {
    throw std::invalid_argument("WeightProfile: need w_max >= w_min > 0");
  }
  if (!(fov_w > 0.0 && fov_w < M_PI && fov_h > 0.0 && fov_h < M_PI)) {
    throw std::invalid_argument("WeightProfile: fov must be in (0, pi)");
  }
  if (!(max_range > 0.0)) {
    throw std::invalid_argument("WeightProfile: max_range must be > 0");
  }
  for (int k = 0; k < 3; ++k) {
    if (!(bbox.lo[k] <= bbox.hi[k])) {
      throw std::invalid_argument("WeightProfile: bbox lo > hi");
    }
  }
}

WeightProfile WeightProfile::uniform() {
  WeightProfile p;
  p.mode = WeightMode::kUniform;
  p.bbox = default_priority_box();
  return p;
}

WeightProfile WeightProfile::camera() {
  WeightProfile p = uniform();
  p.mode = WeightMode::kCamera;
  return p;
}

WeightProfile WeightProfile::lidar() {
  WeightProfile p = uniform();
  p.mode = WeightMode::kLidar;
  return p;
}

WeightProfile load_weight_profile(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw std::runtime_error("cannot open weight profile: " + path);
  WeightProfile p = WeightProfile::uniform();
  std::string line;
  int line_no = 0;
  auto fail = [&](const std::string& why) {
    throw std::runtime_error(path + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    const auto eq = line.find('=');
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    if (eq == std::string::npos) fail("expected key=value");
    auto trim = [](std::string s) {
      const auto b = s.find_first_not_of(" \t\r");
      const auto e = s.find_last_not_of(" \t\r");
      return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
    };
    const std::string key = trim(line.substr(0, eq));
    const std::string value = trim(line.substr(eq + 1));
    std::istringstream vs(value);
    auto num = [&](double& out) {
      if (!(vs >> out)) fail("bad numeric value for " + key);
    };
    if (key == "mode") {
      if (value == "uniform") p.mode = WeightMode::kUniform;
      else if (value == "camera") p.mode = WeightMode::kCamera;
      else if (value == "lidar") p.mode = WeightMode::kLidar;
      else fail("unknown mode '" + value + "'");
    } else if (key == "fov_w") num(p.fov_w);
    else if (key == "fov_h") num(p.fov_h);
    else if (key == "w_high") num(p.w_high);
    else if (key == "w_med") num(p.w_med);
    else if (key == "w_low") num(p.w_low);
    else if (key == "w_max") num(p.w_max);
    else if (key == "w_min") num(p.w_min);
    else if (key == "max_range") num(p.max_range);
    else if (key == "bbox_lo") { num(p.bbox.lo[0]); num(p.bbox.lo[1]); num(p.bbox.lo[2]); }
    else if (key == "bbox_hi") { num(p.bbox.hi[0]); num(p.bbox.hi[1]); num(p.bbox.hi[2]); }
    else if (key == "cam_extrinsic") {
      std::array<double, 12> m{};
      for (double& v : m) num(v);
      p.cam_extrinsic = Pose::from_3x4(m);
    } else {
      fail("unknown key '" + key + "'");
    }
  }
  p.validate();
  return p;
}

bool frustum_contains(const Vec3& p_cam, double fov_w, double fov_h) {
  return p_cam[2] > 0.0 && std::abs(std::atan2(p_cam[0], p_cam[2])) <= fov_w / 2.0 &&
         std::abs(std::atan2(p_cam[1], p_cam[2])) <= fov_h / 2.0;
}

double camera_weight(const Vec3& p_cam, const WeightProfile& profile) {
  if (!frustum_contains(p_cam, profile.fov_w, profile.fov_h)) return profile.w_low;
  const Vec3 p_lidar = invert(profile.cam_extrinsic).apply(p_cam);
  return profile.bbox.contains(p_lidar) ? profile.w_high : profile.w_med;
}

double lidar_weight(double r, const WeightProfile& profile) {
  if (r < 0.0) throw std::invalid_argument("lidar_weight: negative distance");
  double w = profile.w_max - (profile.w_max - profile.w_min) * (r / profile.max_range);
  if (w < profile.w_min) w = profile.w_min;
  if (w > profile.w_max) w = profile.w_max;
  return w;
}

double sensor_weight(const Vec3& p_lidar, const WeightProfile& profile) {
  switch (profile.mode) {
    case WeightMode::kUniform:
      return 1.0;
    case WeightMode::kCamera: {
      const Vec3 p_cam = profile.cam_extrinsic.apply(p_lidar);
      if (!frustum_contains(p_cam, profile.fov_w, profile.fov_h)) return profile.w_low;
      return profile.bbox.contains(p_lidar) ? profile.w_high : profile.w_med;
    }
    case WeightMode::kLidar: {
      const double r = std::sqrt(p_lidar[0] * p_lidar[0] + p_lidar[1] * p_lidar[1] +
                                 p_lidar[2] * p_lidar[2]);
      double w = profile.w_max - (profile.w_max - profile.w_min) * (r / profile.max_range);
      if (w < profile.w_min) w = profile.w_min;
      if (w > profile.w_max) w = profile.w_max;
      return w;
    }
  }
  return 1.0;
}

VoteAccumulator::VoteAccumulator(GridSpec spec, int num_classes)
    : spec_(spec), num_classes_(num_classes) {
  spec_.validate();
  if (num_classes_ < 1) throw std::invalid_argument("VoteAccumulator: num_classes < 1");
  sums_.assign(spec_.volume() * static_cast<std::size_t>(num_classes_), 0.0f);
}

SemanticPointCloud devoxelize(const VoxelGrid& grid) {
  const GridSpec& spec = grid.spec();
  const auto& labels = grid.labels();
  SemanticPointCloud cloud;
  std::size_t occupied = 0;
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (labels[k] == kInvalidClass) {
      throw std::invalid_argument("devoxelize: invalid label 255 at offset " + std::to_string(k));
    }
    if (labels[k] != kFreeClass) ++occupied;
  }
  cloud.points.reserve(occupied);
  const int nx = spec.dims[0], ny = spec.dims[1], nz = spec.dims[2];
  std::size_t k = 0;
  for (int ix = 0; ix < nx; ++ix) {
    const double cx = spec.origin[0] + (ix + 0.5) * spec.voxel_size[0];
    for (int iy = 0; iy < ny; ++iy) {
      const double cy = spec.origin[1] + (iy + 0.5) * spec.voxel_size[1];
      for (int iz = 0; iz < nz; ++iz, ++k) {
        const ClassId cls = labels[k];
        if (cls == kFreeClass) continue;
        const double cz = spec.origin[2] + (iz + 0.5) * spec.voxel_size[2];
        cloud.points.push_back(SemanticPoint{cx, cy, cz, cls, 1.0f});
      }
    }
  }
  return cloud;
}

SemanticPointCloud transform_cloud(const SemanticPointCloud& cloud, const Pose& rel) {
  SemanticPointCloud out;
  out.points.resize(cloud.points.size());
  const auto& m = rel.matrix();
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(cloud.points.size()); ++i) {
    const SemanticPoint& p = cloud.points[i];
    SemanticPoint& q = out.points[i];
    q.x = m[0] * p.x + m[1] * p.y + m[2] * p.z + m[3];
    q.y = m[4] * p.x + m[5] * p.y + m[6] * p.z + m[7];
    q.z = m[8] * p.x + m[9] * p.y + m[10] * p.z + m[11];
    q.cls = p.cls;
    q.weight = p.weight;
  }
  return out;
}

SemanticPointCloud apply_sensor_weights(const SemanticPointCloud& cloud,
                                        const WeightProfile& profile) {
  profile.validate();
  SemanticPointCloud out;
  out.points.resize(cloud.points.size());
#pragma omp parallel for schedule(static)
  for (std::int64_t i = 0; i < static_cast<std::int64_t>(cloud.points.size()); ++i) {
    const SemanticPoint& p = cloud.points[i];
    SemanticPoint& q = out.points[i];
    q = p;
    q.weight = static_cast<float>(static_cast<double>(p.weight) *
                                  sensor_weight(Vec3{p.x, p.y, p.z}, profile));
  }
  return out;
}

std::size_t voxelize_into(VoteAccumulator& acc, const SemanticPointCloud& cloud,
                          const WeightProfile& profile, const Pose& to_sensor) {
  profile.validate();
  const GridSpec& spec = acc.spec();
  std::size_t dropped = 0;
  for (std::size_t i = 0; i < cloud.points.size(); ++i) {
    const SemanticPoint& p = cloud.points[i];
    if (!std::isfinite(p.x) || !std::isfinite(p.y) || !std::isfinite(p.z) ||
        !std::isfinite(p.weight)) {
      throw std::invalid_argument("voxelize_into: non-finite point at index " + std::to_string(i));
    }
    if (p.cls == kFreeClass || p.cls == kInvalidClass || p.cls > acc.num_classes()) {
      throw std::invalid_argument("voxelize_into: class " + std::to_string(int(p.cls)) +
                                  " cannot vote");
    }
    const double w =
        static_cast<double>(p.weight) * sensor_weight(to_sensor.apply(Vec3{p.x, p.y, p.z}), profile);
    const double fx = std::floor((p.x - spec.origin[0]) / spec.voxel_size[0]);
    const double fy = std::floor((p.y - spec.origin[1]) / spec.voxel_size[1]);
    const double fz = std::floor((p.z - spec.origin[2]) / spec.voxel_size[2]);
    if (fx < 0.0 || fx >= spec.dims[0] || fy < 0.0 || fy >= spec.dims[1] || fz < 0.0 ||
        fz >= spec.dims[2]) {
      ++dropped;
      continue;
    }
    const std::size_t lin =
        (static_cast<std::size_t>(fx) * spec.dims[1] + static_cast<std::size_t>(fy)) *
            spec.dims[2] +
        static_cast<std::size_t>(fz);
    acc.add(lin, p.cls, static_cast<float>(w));
  }
  return dropped;
}

VoxelGrid vote(const VoteAccumulator& acc, int frame_id) {
  const std::size_t nvox = acc.spec().volume();
  const int num_classes = acc.num_classes();
  std::vector<ClassId> labels(nvox, kFreeClass);
  const float* sums = acc.sums().data();
  bool has_nan = false;
#pragma omp parallel for schedule(static) reduction(|| : has_nan)
  for (std::int64_t v = 0; v < static_cast<std::int64_t>(nvox); ++v) {
    const float* s = sums + static_cast<std::size_t>(v) * num_classes;
    float best = 0.0f;
    int best_cls = 0;
    for (int c = 0; c < num_classes; ++c) {
      const float w = s[c];
      if (std::isnan(w)) has_nan = true;
      if (w > best) {
        best = w;
        best_cls = c + 1;
      }
    }
    labels[v] = static_cast<ClassId>(best_cls);
  }
  if (has_nan) throw std::runtime_error("vote: NaN in accumulator sums");
  return VoxelGrid(acc.spec(), std::move(labels), frame_id);
}

namespace {

struct StagedVote {
  std::int64_t lin;  // target voxel linear index, -1 when dropped
  float weight;
  ClassId cls;
};

struct FrameTally {
  std::size_t occupied = 0;
  std::size_t dropped = 0;
};

// Streams one source frame's votes into the accumulator. Votes are staged in
// source scan order, bucketed by target row, and added row-parallel; every
// accumulator slot therefore sees its additions in scan order for any thread
// count, which the exact-equality tests against the serial oracle rely on.
FrameTally accumulate_frame(VoteAccumulator& acc, const VoxelGrid& src, const Pose& rel,
                            const WeightProfile& profile) {
  const GridSpec& sspec = src.spec();
  const GridSpec& tspec = acc.spec();
  const auto& labels = src.labels();
  const int nx = sspec.dims[0], ny = sspec.dims[1], nz = sspec.dims[2];
  const std::size_t slab = static_cast<std::size_t>(ny) * nz;
  const int num_classes = acc.num_classes();

  std::vector<std::size_t> slab_offset(nx + 1, 0);
  std::size_t bad = labels.size();  // first invalid label, folded into the counting pass
#pragma omp parallel for schedule(static) reduction(min : bad)
  for (int ix = 0; ix < nx; ++ix) {
    std::size_t c = 0;
    const ClassId* row = labels.data() + static_cast<std::size_t>(ix) * slab;
    for (std::size_t k = 0; k < slab; ++k) {
      const ClassId l = row[k];
      if (l == kFreeClass) continue;
      if (l > num_classes) bad = std::min(bad, static_cast<std::size_t>(ix) * slab + k);
      ++c;
    }
    slab_offset[ix + 1] = c;
  }
  if (bad != labels.size()) {
    throw std::invalid_argument("fuse_window: frame " + std::to_string(src.frame_id()) +
                                " label " + std::to_string(int(labels[bad])) + " at offset " +
                                std::to_string(bad) + " cannot vote");
  }
  for (int ix = 0; ix < nx; ++ix) slab_offset[ix + 1] += slab_offset[ix];
  const std::size_t total = slab_offset[nx];
  if (total == 0) return {};

  // staging buffers are fully overwritten, so skip the value-initialization
  const int tnx = tspec.dims[0];
  const std::size_t trow = static_cast<std::size_t>(tspec.dims[1]) * tspec.dims[2];
  std::unique_ptr<StagedVote[]> staged(new StagedVote[total]);
  std::vector<std::size_t> hist(static_cast<std::size_t>(nx) * tnx, 0);  // slab x target row

  const auto& m = rel.matrix();
#pragma omp parallel for schedule(static)
  for (int ix = 0; ix < nx; ++ix) {
    std::size_t pos = slab_offset[ix];
    std::size_t* hrow = hist.data() + static_cast<std::size_t>(ix) * tnx;
    const double sx = sspec.origin[0] + (ix + 0.5) * sspec.voxel_size[0];
    for (int iy = 0; iy < ny; ++iy) {
      const double sy = sspec.origin[1] + (iy + 0.5) * sspec.voxel_size[1];
      const std::size_t base = (static_cast<std::size_t>(ix) * ny + iy) * nz;
      for (int iz = 0; iz < nz; ++iz) {
        const ClassId cls = labels[base + iz];
        if (cls == kFreeClass) continue;
        const double sz = sspec.origin[2] + (iz + 0.5) * sspec.voxel_size[2];
        const double w = sensor_weight(Vec3{sx, sy, sz}, profile);
        const double tx = m[0] * sx + m[1] * sy + m[2] * sz + m[3];
        const double ty = m[4] * sx + m[5] * sy + m[6] * sz + m[7];
        const double tz = m[8] * sx + m[9] * sy + m[10] * sz + m[11];
        const double fx = std::floor((tx - tspec.origin[0]) / tspec.voxel_size[0]);
        const double fy = std::floor((ty - tspec.origin[1]) / tspec.voxel_size[1]);
        const double fz = std::floor((tz - tspec.origin[2]) / tspec.voxel_size[2]);
        StagedVote& v = staged[pos++];
        if (fx < 0.0 || fx >= tspec.dims[0] || fy < 0.0 || fy >= tspec.dims[1] || fz < 0.0 ||
            fz >= tspec.dims[2]) {
          v.lin = -1;
        } else {
          v.lin = static_cast<std::int64_t>(
              (static_cast<std::size_t>(fx) * tspec.dims[1] + static_cast<std::size_t>(fy)) *
                  tspec.dims[2] +
              static_cast<std::size_t>(fz));
          ++hrow[static_cast<std::size_t>(v.lin) / trow];
        }
        v.weight = static_cast<float>(w);
        v.cls = cls;
      }
    }
  }

  // stable counting sort by target row: reserve, per slab, a sub-range of each
  // row bucket; slab-major order inside a bucket preserves global scan order
  std::vector<std::size_t> row_offset(tnx + 1, 0);
  for (int ix = 0; ix < nx; ++ix) {
    const std::size_t* hrow = hist.data() + static_cast<std::size_t>(ix) * tnx;
    for (int r = 0; r < tnx; ++r) row_offset[r + 1] += hrow[r];
  }
  for (int r = 0; r < tnx; ++r) row_offset[r + 1] += row_offset[r];
  const std::size_t voted = row_offset[tnx];

  std::vector<std::size_t> slab_cursor(static_cast<std::size_t>(nx) * tnx);
  {
    std::vector<std::size_t> cursor(row_offset.begin(), row_offset.end() - 1);
    for (int ix = 0; ix < nx; ++ix) {
      std::size_t* crow = slab_cursor.data() + static_cast<std::size_t>(ix) * tnx;
      const std::size_t* hrow = hist.data() + static_cast<std::size_t>(ix) * tnx;
      for (int r = 0; r < tnx; ++r) {
        crow[r] = cursor[r];
        cursor[r] += hrow[r];
      }
    }
  }

  std::unique_ptr<std::uint32_t[]> bucket(new std::uint32_t[voted]);
#pragma omp parallel for schedule(static)
  for (int ix = 0; ix < nx; ++ix) {
    std::size_t* crow = slab_cursor.data() + static_cast<std::size_t>(ix) * tnx;
    for (std::size_t i = slab_offset[ix]; i < slab_offset[ix + 1]; ++i) {
      if (staged[i].lin >= 0) {
        bucket[crow[static_cast<std::size_t>(staged[i].lin) / trow]++] =
            static_cast<std::uint32_t>(i);
      }
    }
  }

  float* sums = acc.sums().data();
#pragma omp parallel for schedule(static)
  for (int r = 0; r < tnx; ++r) {
    for (std::size_t k = row_offset[r]; k < row_offset[r + 1]; ++k) {
      const StagedVote& v = staged[bucket[k]];
      sums[static_cast<std::size_t>(v.lin) * num_classes + (v.cls - 1)] += v.weight;
    }
  }
  return {total, total - voted};
}

}  // namespace

VoxelGrid fuse_window(const std::vector<FrameRef>& frames, int target_frame_id, int radius,
                      const WeightProfile& profile, int num_classes, FuseStats* stats) {
  profile.validate();
  if (frames.empty()) throw std::invalid_argument("fuse_window: empty frame list");
  if (radius < 0) throw std::invalid_argument("fuse_window: negative radius");

  std::vector<std::size_t> order(frames.size());
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
    return frames[a].grid->frame_id() < frames[b].grid->frame_id();
  });
  int target_pos = -1;
  for (std::size_t i = 0; i < order.size(); ++i) {
    if (i > 0 &&
        frames[order[i]].grid->frame_id() == frames[order[i - 1]].grid->frame_id()) {
      throw std::invalid_argument("fuse_window: duplicate frame id " +
                                  std::to_string(frames[order[i]].grid->frame_id()));
    }
    if (frames[order[i]].grid->frame_id() == target_frame_id) target_pos = static_cast<int>(i);
  }
  if (target_pos < 0) {
    throw std::invalid_argument("fuse_window: target frame " + std::to_string(target_frame_id) +
                                " not in frame list");
  }

  const int first = std::max(0, target_pos - radius);
  const int last = std::min(static_cast<int>(order.size()) - 1, target_pos + radius);
  const FrameRef& target = frames[order[target_pos]];
  const GridSpec& spec = target.grid->spec();

  VoteAccumulator acc(spec, num_classes);
  const Pose target_from_world = invert(target.lidar_to_world);
  std::size_t dropped = 0, occupied = 0;
  for (int w = first; w <= last; ++w) {
    const FrameRef& src = frames[order[w]];
    if (!(src.grid->spec() == spec)) {
      throw std::invalid_argument("fuse_window: frame " + std::to_string(src.grid->frame_id()) +
                                  " grid spec differs from target");
    }
    const Pose rel = compose(target_from_world, src.lidar_to_world);
    const FrameTally tally = accumulate_frame(acc, *src.grid, rel, profile);
    dropped += tally.dropped;
    occupied += tally.occupied;
  }
  if (stats) {
    stats->points_voted = occupied - dropped;
    stats->points_dropped = dropped;
    stats->window_first = frames[order[first]].grid->frame_id();
    stats->window_last = frames[order[last]].grid->frame_id();
  }
  return vote(acc, target_frame_id);
}

}  // namespace semvox
