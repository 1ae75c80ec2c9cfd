// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#include "semvox/citymap.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <stdexcept>
#include <string>

namespace semvox {

Index3 CityMapSpec::chunk_grid() const {
  Index3 g;
  for (int k = 0; k < 3; ++k) {
    g[k] = (world_spec.dims[k] + chunk_dims[k] - 1) / chunk_dims[k];
  }
  return g;
}

std::size_t CityMapSpec::chunk_count() const {
  const Index3 g = chunk_grid();
  return static_cast<std::size_t>(g[0]) * g[1] * g[2];
}

void CityMapSpec::validate() const {
  world_spec.validate();
  for (int k = 0; k < 3; ++k) {
    if (chunk_dims[k] < 1) throw std::invalid_argument("CityMapSpec: chunk_dims must be >= 1");
  }
  if (static_classes.empty()) throw std::invalid_argument("CityMapSpec: no retained classes");
  ClassId prev = 0;
  for (ClassId c : static_classes) {
    if (c == kFreeClass || c == kInvalidClass || c > num_classes) {
      throw std::invalid_argument("CityMapSpec: retained class " + std::to_string(int(c)) +
                                  " out of range");
    }
    if (c <= prev && prev != 0) throw std::invalid_argument("CityMapSpec: classes must ascend");
    prev = c;
  }
}

std::vector<ClassId> CityMapSpec::default_static_classes() {
  return {9, 10, 11, 12, 13, 14, 15, 16, 17, 18, 19};
}

std::vector<ClassId> CityMapSpec::all_classes(int num_classes) {
  std::vector<ClassId> out;
  for (int c = 1; c <= num_classes; ++c) out.push_back(static_cast<ClassId>(c));
  return out;
}

CityMapSpec compute_world_bounds(const std::vector<Pose>& poses, const GridSpec& frame_spec) {
  if (poses.empty()) throw std::invalid_argument("compute_world_bounds: empty pose list");
  frame_spec.validate();

  Vec3 lo{0, 0, 0}, hi{0, 0, 0};
  bool first = true;
  for (const Pose& pose : poses) {
    for (int corner = 0; corner < 8; ++corner) {
      Vec3 p;
      for (int k = 0; k < 3; ++k) {
        p[k] = frame_spec.origin[k] +
               ((corner >> k) & 1 ? frame_spec.dims[k] * frame_spec.voxel_size[k] : 0.0);
      }
      const Vec3 w = pose.apply(p);
      for (int k = 0; k < 3; ++k) {
        lo[k] = first ? w[k] : std::min(lo[k], w[k]);
        hi[k] = first ? w[k] : std::max(hi[k], w[k]);
      }
      first = false;
    }
  }

  CityMapSpec spec;
  spec.world_spec.voxel_size = frame_spec.voxel_size;
  spec.world_spec.origin = lo;
  for (int k = 0; k < 3; ++k) {
    const double span = (hi[k] - lo[k]) / frame_spec.voxel_size[k];
    spec.world_spec.dims[k] = std::max(1, static_cast<int>(std::ceil(span - 1e-6)));
  }
  spec.chunk_dims = frame_spec.dims;
  spec.static_classes = CityMapSpec::default_static_classes();
  spec.num_classes = kSemanticKittiClasses;
  return spec;
}

QuantizedAccumulator::QuantizedAccumulator(CityMapSpec spec, double scale, int max_active_chunks)
    : spec_(std::move(spec)), scale_(scale), max_active_chunks_(max_active_chunks) {
  spec_.validate();
  if (!(scale_ > 0.0)) throw std::invalid_argument("QuantizedAccumulator: scale must be > 0");
  if (max_active_chunks_ < 1) {
    throw std::invalid_argument("QuantizedAccumulator: max_active_chunks must be >= 1");
  }
}

namespace {

struct CityVote {
  std::size_t chunk;
  std::size_t offset;  // within-chunk voxel offset
  std::uint8_t slot;   // static-class slot
  std::uint8_t quantum;
};

}  // namespace

void QuantizedAccumulator::accumulate(const VoxelGrid& frame, const Pose& lidar_to_world,
                                      const WeightProfile& profile) {
  profile.validate();
  validate_labels(frame.labels(), spec_.num_classes, /*allow_invalid=*/false);

  // class -> static slot (-1 filters the vote out)
  std::array<int, 256> slot_of;
  slot_of.fill(-1);
  for (std::size_t s = 0; s < spec_.static_classes.size(); ++s) {
    slot_of[spec_.static_classes[s]] = static_cast<int>(s);
  }

  const GridSpec& fspec = frame.spec();
  const GridSpec& wspec = spec_.world_spec;
  const Index3 cgrid = spec_.chunk_grid();
  const auto& labels = frame.labels();
  const auto& m = lidar_to_world.matrix();
  const int nx = fspec.dims[0], ny = fspec.dims[1], nz = fspec.dims[2];
  const std::size_t slab = static_cast<std::size_t>(ny) * nz;
  const std::size_t n_slots = spec_.static_classes.size();

  std::vector<std::size_t> slab_offset(nx + 1, 0);
  std::size_t seen = 0, dynamic = 0;
#pragma omp parallel for schedule(static) reduction(+ : seen, dynamic)
  for (int ix = 0; ix < nx; ++ix) {
    std::size_t eligible = 0;
    const ClassId* row = labels.data() + static_cast<std::size_t>(ix) * slab;
    for (std::size_t j = 0; j < slab; ++j) {
      const ClassId cls = row[j];
      if (cls == kFreeClass) continue;
      ++seen;
      if (slot_of[cls] < 0) {
        ++dynamic;
      } else {
        ++eligible;
      }
    }
    slab_offset[ix + 1] = eligible;
  }
  for (int ix = 0; ix < nx; ++ix) slab_offset[ix + 1] += slab_offset[ix];

  std::vector<CityVote> votes(slab_offset[nx]);
  std::size_t out_of_world = 0;
#pragma omp parallel for schedule(static) reduction(+ : out_of_world)
  for (int ix = 0; ix < nx; ++ix) {
    std::size_t pos = slab_offset[ix];
    const double sx = fspec.origin[0] + (ix + 0.5) * fspec.voxel_size[0];
    for (int iy = 0; iy < ny; ++iy) {
      const double sy = fspec.origin[1] + (iy + 0.5) * fspec.voxel_size[1];
      const std::size_t base = (static_cast<std::size_t>(ix) * ny + iy) * nz;
      for (int iz = 0; iz < nz; ++iz) {
        const ClassId cls = labels[base + iz];
        if (cls == kFreeClass || slot_of[cls] < 0) continue;
        CityVote& v = votes[pos++];
        const double sz = fspec.origin[2] + (iz + 0.5) * fspec.voxel_size[2];
        const double w = sensor_weight(Vec3{sx, sy, sz}, profile);
        const double tx = m[0] * sx + m[1] * sy + m[2] * sz + m[3];
        const double ty = m[4] * sx + m[5] * sy + m[6] * sz + m[7];
        const double tz = m[8] * sx + m[9] * sy + m[10] * sz + m[11];
        const double fx = std::floor((tx - wspec.origin[0]) / wspec.voxel_size[0]);
        const double fy = std::floor((ty - wspec.origin[1]) / wspec.voxel_size[1]);
        const double fz = std::floor((tz - wspec.origin[2]) / wspec.voxel_size[2]);
        if (fx < 0.0 || fx >= wspec.dims[0] || fy < 0.0 || fy >= wspec.dims[1] || fz < 0.0 ||
            fz >= wspec.dims[2]) {
          ++out_of_world;
          v.quantum = 0;
          continue;
        }
        const int jx = static_cast<int>(fx), jy = static_cast<int>(fy), jz = static_cast<int>(fz);
        const int cx = jx / spec_.chunk_dims[0];
        const int cy = jy / spec_.chunk_dims[1];
        const int cz = jz / spec_.chunk_dims[2];
        v.chunk = (static_cast<std::size_t>(cx) * cgrid[1] + cy) * cgrid[2] + cz;
        const int lx = jx - cx * spec_.chunk_dims[0];
        const int ly = jy - cy * spec_.chunk_dims[1];
        const int lz = jz - cz * spec_.chunk_dims[2];
        v.offset =
            (static_cast<std::size_t>(lx) * spec_.chunk_dims[1] + ly) * spec_.chunk_dims[2] + lz;
        v.slot = static_cast<std::uint8_t>(slot_of[cls]);
        const long q = std::lround(std::min(255.0, w * scale_));
        v.quantum = static_cast<std::uint8_t>(q < 0 ? 0 : q);
      }
    }
  }

  std::size_t voted = 0;
  for (const CityVote& v : votes) {
    if (v.quantum > 0) ++voted;
  }
  stats_.points_seen += seen;
  stats_.dropped_dynamic += dynamic;
  stats_.dropped_out_of_world += out_of_world;
  stats_.points_voted += voted;
  stats_.frames += 1;

  // allocate chunks this frame touches, honoring the ceiling
  const std::size_t chunk_bytes =
      static_cast<std::size_t>(spec_.chunk_dims[0]) * spec_.chunk_dims[1] * spec_.chunk_dims[2] *
      n_slots;
  std::vector<std::size_t> touched;
  for (const CityVote& v : votes) {
    if (v.quantum > 0) touched.push_back(v.chunk);
  }
  std::sort(touched.begin(), touched.end());
  touched.erase(std::unique(touched.begin(), touched.end()), touched.end());
  for (std::size_t chunk : touched) {
    if (chunks_.find(chunk) != chunks_.end()) continue;
    if (static_cast<int>(chunks_.size()) >= max_active_chunks_) {
      throw std::runtime_error("city map accumulator exceeded the active-chunk ceiling (" +
                               std::to_string(max_active_chunks_) +
                               "); re-run with a larger --max-chunks or smaller chunk dims");
    }
    chunks_.emplace(chunk, std::vector<std::uint8_t>(chunk_bytes, 0));
  }

  // saturating adds; order-independent, so chunk-parallel is safe
#pragma omp parallel for schedule(dynamic, 1)
  for (std::int64_t t = 0; t < static_cast<std::int64_t>(touched.size()); ++t) {
    const std::size_t chunk = touched[t];
    std::vector<std::uint8_t>& counters = chunks_.at(chunk);
    for (const CityVote& v : votes) {
      if (v.quantum == 0 || v.chunk != chunk) continue;
      std::uint8_t& c = counters[v.offset * n_slots + v.slot];
      const unsigned sum = static_cast<unsigned>(c) + v.quantum;
      c = static_cast<std::uint8_t>(sum > 255 ? 255 : sum);
    }
  }
}

std::vector<Index3> QuantizedAccumulator::touched_chunks() const {
  std::vector<std::size_t> keys;
  keys.reserve(chunks_.size());
  for (const auto& [key, _] : chunks_) keys.push_back(key);
  std::sort(keys.begin(), keys.end());
  const Index3 g = spec_.chunk_grid();
  std::vector<Index3> out;
  out.reserve(keys.size());
  for (std::size_t key : keys) {
    out.push_back(Index3{static_cast<int>(key / (static_cast<std::size_t>(g[1]) * g[2])),
                         static_cast<int>((key / g[2]) % g[1]), static_cast<int>(key % g[2])});
  }
  return out;
}

const std::uint8_t* QuantizedAccumulator::chunk_counters(const Index3& chunk) const {
  const Index3 g = spec_.chunk_grid();
  const std::size_t key = (static_cast<std::size_t>(chunk[0]) * g[1] + chunk[1]) * g[2] + chunk[2];
  const auto it = chunks_.find(key);
  return it == chunks_.end() ? nullptr : it->second.data();
}

std::uint8_t QuantizedAccumulator::counter(const Index3& world_voxel, ClassId cls) const {
  const Index3 chunk{world_voxel[0] / spec_.chunk_dims[0], world_voxel[1] / spec_.chunk_dims[1],
                     world_voxel[2] / spec_.chunk_dims[2]};
  const std::uint8_t* counters = chunk_counters(chunk);
  if (!counters) return 0;
  int slot = -1;
  for (std::size_t s = 0; s < spec_.static_classes.size(); ++s) {
    if (spec_.static_classes[s] == cls) slot = static_cast<int>(s);
  }
  if (slot < 0) return 0;
  const int lx = world_voxel[0] % spec_.chunk_dims[0];
  const int ly = world_voxel[1] % spec_.chunk_dims[1];
  const int lz = world_voxel[2] % spec_.chunk_dims[2];
  const std::size_t offset =
      (static_cast<std::size_t>(lx) * spec_.chunk_dims[1] + ly) * spec_.chunk_dims[2] + lz;
  return counters[offset * spec_.static_classes.size() + slot];
}

void city_argmax(const QuantizedAccumulator& acc,
                 const std::function<void(const Index3&, const VoxelGrid&)>& emit) {
  const CityMapSpec& spec = acc.spec();
  const std::size_t n_slots = spec.static_classes.size();
  const std::size_t chunk_vol =
      static_cast<std::size_t>(spec.chunk_dims[0]) * spec.chunk_dims[1] * spec.chunk_dims[2];

  for (const Index3& chunk : acc.touched_chunks()) {
    const std::uint8_t* counters = acc.chunk_counters(chunk);
    std::vector<ClassId> labels(chunk_vol, kFreeClass);
#pragma omp parallel for schedule(static)
    for (std::int64_t v = 0; v < static_cast<std::int64_t>(chunk_vol); ++v) {
      const std::uint8_t* s = counters + static_cast<std::size_t>(v) * n_slots;
      std::uint8_t best = 0;
      ClassId best_cls = kFreeClass;
      for (std::size_t c = 0; c < n_slots; ++c) {
        if (s[c] > best) {  // strict: ties keep the lowest class id
          best = s[c];
          best_cls = spec.static_classes[c];
        }
      }
      labels[v] = best_cls;
    }
    GridSpec cspec;
    cspec.dims = spec.chunk_dims;
    cspec.voxel_size = spec.world_spec.voxel_size;
    for (int k = 0; k < 3; ++k) {
      cspec.origin[k] = spec.world_spec.origin[k] +
                        static_cast<double>(chunk[k]) * spec.chunk_dims[k] *
                            spec.world_spec.voxel_size[k];
    }
    emit(chunk, VoxelGrid(cspec, std::move(labels)));
  }
}

VoxelGrid assemble_city(const QuantizedAccumulator& acc) {
  const CityMapSpec& spec = acc.spec();
  std::vector<ClassId> labels(spec.world_spec.volume(), kFreeClass);
  const Index3 wd = spec.world_spec.dims;
  city_argmax(acc, [&](const Index3& chunk, const VoxelGrid& grid) {
    const Index3 base{chunk[0] * spec.chunk_dims[0], chunk[1] * spec.chunk_dims[1],
                      chunk[2] * spec.chunk_dims[2]};
    for (int lx = 0; lx < spec.chunk_dims[0]; ++lx) {
      const int gx = base[0] + lx;
      if (gx >= wd[0]) break;
      for (int ly = 0; ly < spec.chunk_dims[1]; ++ly) {
        const int gy = base[1] + ly;
        if (gy >= wd[1]) break;
        for (int lz = 0; lz < spec.chunk_dims[2]; ++lz) {
          const int gz = base[2] + lz;
          if (gz >= wd[2]) break;
          const std::size_t src =
              (static_cast<std::size_t>(lx) * spec.chunk_dims[1] + ly) * spec.chunk_dims[2] + lz;
          const std::size_t dst = (static_cast<std::size_t>(gx) * wd[1] + gy) * wd[2] + gz;
          labels[dst] = grid.labels()[src];
        }
      }
    }
  });
  return VoxelGrid(spec.world_spec, std::move(labels));
}

std::array<std::uint8_t, 3> class_color(ClassId cls) {
  static constexpr std::array<std::uint8_t, 3> palette[20] = {
      {0, 0, 0},       {100, 150, 245}, {100, 230, 245}, {30, 60, 150},   {80, 30, 180},
      {0, 0, 255},     {255, 30, 30},   {255, 40, 200},  {150, 30, 90},   {255, 0, 255},
      {255, 150, 255}, {75, 0, 75},     {175, 0, 75},    {255, 200, 0},   {255, 120, 50},
      {0, 175, 0},     {135, 60, 0},    {150, 240, 80},  {255, 240, 150}, {255, 0, 0}};
  return cls < 20 ? palette[cls] : std::array<std::uint8_t, 3>{128, 128, 128};
}

std::filesystem::path write_citymap(const QuantizedAccumulator& acc,
                                    const std::filesystem::path& out_dir, const ClassMap& map) {
  namespace fs = std::filesystem;
  fs::create_directories(out_dir);
  const CityMapSpec& spec = acc.spec();

  std::vector<std::pair<Index3, std::string>> written;
  city_argmax(acc, [&](const Index3& chunk, const VoxelGrid& grid) {
    char name[64];
    std::snprintf(name, sizeof name, "chunk_%04d_%04d_%04d.label", chunk[0], chunk[1], chunk[2]);
    write_label_grid(grid, out_dir / name, map);
    written.emplace_back(chunk, name);
  });

  const fs::path manifest_path = out_dir / "citymap.txt";
  std::ofstream out(manifest_path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + manifest_path.string() + " for writing");
  out.precision(17);
  out << "world_origin = " << spec.world_spec.origin[0] << ' ' << spec.world_spec.origin[1] << ' '
      << spec.world_spec.origin[2] << '\n';
  out << "world_dims = " << spec.world_spec.dims[0] << ' ' << spec.world_spec.dims[1] << ' '
      << spec.world_spec.dims[2] << '\n';
  out << "voxel_size = " << spec.world_spec.voxel_size[0] << ' ' << spec.world_spec.voxel_size[1]
      << ' ' << spec.world_spec.voxel_size[2] << '\n';
  out << "chunk_dims = " << spec.chunk_dims[0] << ' ' << spec.chunk_dims[1] << ' '
      << spec.chunk_dims[2] << '\n';
  const Index3 g = spec.chunk_grid();
  out << "chunk_grid = " << g[0] << ' ' << g[1] << ' ' << g[2] << '\n';
  out << "num_classes = " << spec.num_classes << '\n';
  out << "static_classes =";
  for (ClassId c : spec.static_classes) out << ' ' << int(c);
  out << '\n';
  for (ClassId c : spec.static_classes) {
    const auto rgb = class_color(c);
    out << "palette " << int(c) << ' ' << map.names[c] << ' ' << int(rgb[0]) << ' ' << int(rgb[1])
        << ' ' << int(rgb[2]) << '\n';
  }
  out << "chunks = " << written.size() << '\n';
  for (const auto& [chunk, name] : written) {
    out << "chunk " << chunk[0] << ' ' << chunk[1] << ' ' << chunk[2] << ' ' << name << '\n';
  }
  if (!out) throw IoError("short write on " + manifest_path.string());
  return manifest_path;
}

void write_city_ply(const QuantizedAccumulator& acc, const std::filesystem::path& path,
                    const ClassMap& map) {
  (void)map;
  std::size_t occupied = 0;
  city_argmax(acc, [&](const Index3&, const VoxelGrid& grid) {
    for (ClassId c : grid.labels()) {
      if (c != kFreeClass) ++occupied;
    }
  });

  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "ply\nformat ascii 1.0\nelement vertex " << occupied
      << "\nproperty float x\nproperty float y\nproperty float z\n"
         "property uchar red\nproperty uchar green\nproperty uchar blue\nend_header\n";
  city_argmax(acc, [&](const Index3&, const VoxelGrid& grid) {
    const GridSpec& s = grid.spec();
    std::size_t k = 0;
    for (int ix = 0; ix < s.dims[0]; ++ix) {
      for (int iy = 0; iy < s.dims[1]; ++iy) {
        for (int iz = 0; iz < s.dims[2]; ++iz, ++k) {
          const ClassId c = grid.labels()[k];
          if (c == kFreeClass) continue;
          const auto rgb = class_color(c);
          out << static_cast<float>(s.origin[0] + (ix + 0.5) * s.voxel_size[0]) << ' '
              << static_cast<float>(s.origin[1] + (iy + 0.5) * s.voxel_size[1]) << ' '
              << static_cast<float>(s.origin[2] + (iz + 0.5) * s.voxel_size[2]) << ' '
              << int(rgb[0]) << ' ' << int(rgb[1]) << ' ' << int(rgb[2]) << '\n';
        }
      }
    }
  });
  if (!out) throw IoError("short write on " + path.string());
}

}  // namespace semvox
