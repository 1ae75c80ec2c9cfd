// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#include "semvox/kitti_io.hpp"

#include <algorithm>
#include <array>
#include <cstdio>
#include <fstream>
#include <sstream>

namespace semvox {

namespace {

// SemanticKITTI learning map: raw label -> train id. Moving variants fold
// onto their static classes; other-structure/other-object/outlier fold to 0.
constexpr std::pair<std::uint16_t, ClassId> kSemanticKittiRawToTrain[] = {
    {0, 0},   {1, 0},   {10, 1},  {11, 2},  {13, 5},  {15, 3},  {16, 5},  {18, 4},  {20, 5},
    {30, 6},  {31, 7},  {32, 8},  {40, 9},  {44, 10}, {48, 11}, {49, 12}, {50, 13}, {51, 14},
    {52, 0},  {60, 9},  {70, 15}, {71, 16}, {72, 17}, {80, 18}, {81, 19}, {99, 0},  {252, 1},
    {253, 7}, {254, 6}, {255, 8}, {256, 5}, {257, 5}, {258, 4}, {259, 5}};

constexpr std::uint16_t kSemanticKittiTrainToRaw[] = {0,  10, 11, 15, 18, 20, 30, 31, 32, 40,
                                                      44, 48, 49, 50, 51, 70, 71, 72, 80, 81};

constexpr const char* kSemanticKittiNames[] = {
    "free",         "car",   "bicycle",  "motorcycle", "truck",      "other-vehicle", "person",
    "bicyclist",    "motorcyclist", "road", "parking", "sidewalk",   "other-ground",  "building",
    "fence",        "vegetation",   "trunk", "terrain", "pole",      "traffic-sign"};

std::vector<char> read_all(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  in.seekg(0, std::ios::end);
  const std::streamoff len = in.tellg();
  in.seekg(0, std::ios::beg);
  std::vector<char> buf(static_cast<std::size_t>(len));
  if (len > 0) in.read(buf.data(), len);
  if (!in) throw IoError("short read on " + path.string());
  return buf;
}

void write_all(const std::filesystem::path& path, const char* data, std::size_t len) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out.write(data, static_cast<std::streamsize>(len));
  if (!out) throw IoError("short write on " + path.string());
}

}  // namespace

void ClassMap::validate() const {
  if (num_classes < 1) throw std::invalid_argument("ClassMap: num_classes < 1");
  if (train_to_raw.size() != static_cast<std::size_t>(num_classes) + 1 ||
      names.size() != static_cast<std::size_t>(num_classes) + 1) {
    throw std::invalid_argument("ClassMap: inverse map / name table size mismatch");
  }
  for (const auto& [raw, train] : raw_to_train) {
    if (train != 0 && train > num_classes) {
      throw std::invalid_argument("ClassMap: raw " + std::to_string(raw) +
                                  " maps to out-of-range train id " + std::to_string(train));
    }
  }
}

const ClassMap& ClassMap::semantic_kitti() {
  static const ClassMap map = [] {
    ClassMap m;
    m.num_classes = kSemanticKittiClasses;
    for (const auto& [raw, train] : kSemanticKittiRawToTrain) m.raw_to_train.emplace(raw, train);
    m.train_to_raw.assign(std::begin(kSemanticKittiTrainToRaw), std::end(kSemanticKittiTrainToRaw));
    m.names.assign(std::begin(kSemanticKittiNames), std::end(kSemanticKittiNames));
    m.validate();
    return m;
  }();
  return map;
}

ClassMap ClassMap::load(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open class map " + path.string());
  ClassMap m;
  std::string line;
  int line_no = 0;
  std::unordered_map<int, std::uint16_t> inv;
  std::unordered_map<int, std::string> names;
  auto fail = [&](const std::string& why) {
    throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + why);
  };
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string head;
    if (!(ls >> head)) continue;
    if (head == "classes") {
      std::string eq;
      if (!(ls >> eq >> m.num_classes) || eq != "=") fail("expected 'classes = N'");
    } else if (head == "map") {
      int raw = 0, train = 0;
      if (!(ls >> raw >> train)) fail("expected 'map <raw> <train>'");
      m.raw_to_train.emplace(static_cast<std::uint16_t>(raw), static_cast<ClassId>(train));
    } else if (head == "inv") {
      int train = 0, raw = 0;
      if (!(ls >> train >> raw)) fail("expected 'inv <train> <raw>'");
      inv[train] = static_cast<std::uint16_t>(raw);
    } else if (head == "name") {
      int train = 0;
      std::string name;
      if (!(ls >> train >> name)) fail("expected 'name <train> <name>'");
      names[train] = name;
    } else {
      fail("unknown directive '" + head + "'");
    }
  }
  if (m.num_classes < 1) throw IoError(path.string() + ": missing 'classes = N'");
  m.train_to_raw.assign(m.num_classes + 1, 0);
  m.names.assign(m.num_classes + 1, "");
  m.names[0] = "free";
  for (int t = 1; t <= m.num_classes; ++t) {
    const auto it = inv.find(t);
    if (it == inv.end()) throw IoError(path.string() + ": missing 'inv' entry for train id " +
                                       std::to_string(t));
    m.train_to_raw[t] = it->second;
    const auto nt = names.find(t);
    m.names[t] = nt == names.end() ? "class-" + std::to_string(t) : nt->second;
  }
  m.validate();
  return m;
}

VoxelGrid read_label_grid(const std::filesystem::path& path, const GridSpec& spec,
                          const ClassMap& map, int frame_id) {
  const std::vector<char> buf = read_all(path);
  const std::size_t expect = spec.volume() * 2;
  if (buf.size() != expect) {
    throw IoError(path.string() + ": expected " + std::to_string(expect) + " bytes, got " +
                  std::to_string(buf.size()));
  }
  std::vector<ClassId> labels(spec.volume());
  const auto* bytes = reinterpret_cast<const unsigned char*>(buf.data());
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const std::uint16_t raw =
        static_cast<std::uint16_t>(bytes[2 * k]) | (static_cast<std::uint16_t>(bytes[2 * k + 1]) << 8);
    const auto it = map.raw_to_train.find(raw);
    if (it == map.raw_to_train.end()) {
      throw IoError(path.string() + ": unknown raw label " + std::to_string(raw) + " at voxel " +
                    std::to_string(k));
    }
    labels[k] = it->second;
  }
  return VoxelGrid(spec, std::move(labels), frame_id);
}

void write_label_grid(const VoxelGrid& grid, const std::filesystem::path& path,
                      const ClassMap& map) {
  const auto& labels = grid.labels();
  std::vector<char> buf(labels.size() * 2);
  for (std::size_t k = 0; k < labels.size(); ++k) {
    const ClassId c = labels[k];
    if (c > map.num_classes) {
      throw std::invalid_argument("write_label_grid: unmappable class " + std::to_string(int(c)) +
                                  " at offset " + std::to_string(k));
    }
    const std::uint16_t raw = map.train_to_raw[c];
    buf[2 * k] = static_cast<char>(raw & 0xff);
    buf[2 * k + 1] = static_cast<char>(raw >> 8);
  }
  write_all(path, buf.data(), buf.size());
}

std::vector<std::uint8_t> read_invalid_mask(const std::filesystem::path& path,
                                            const GridSpec& spec) {
  if (spec.volume() % 8 != 0) {
    throw IoError("invalid mask requires a grid volume divisible by 8");
  }
  const std::vector<char> buf = read_all(path);
  const std::size_t expect = spec.volume() / 8;
  if (buf.size() != expect) {
    throw IoError(path.string() + ": expected " + std::to_string(expect) + " bytes, got " +
                  std::to_string(buf.size()));
  }
  std::vector<std::uint8_t> mask(spec.volume());
  const auto* bytes = reinterpret_cast<const unsigned char*>(buf.data());
  for (std::size_t k = 0; k < mask.size(); ++k) {
    mask[k] = (bytes[k / 8] >> (7 - (k % 8))) & 1u;  // MSB first
  }
  return mask;
}

void write_invalid_mask(const std::vector<std::uint8_t>& mask, const GridSpec& spec,
                        const std::filesystem::path& path) {
  if (mask.size() != spec.volume() || spec.volume() % 8 != 0) {
    throw std::invalid_argument("write_invalid_mask: mask length mismatch");
  }
  std::vector<char> buf(mask.size() / 8, 0);
  for (std::size_t k = 0; k < mask.size(); ++k) {
    if (mask[k]) buf[k / 8] |= static_cast<char>(1u << (7 - (k % 8)));
  }
  write_all(path, buf.data(), buf.size());
}

VoxelGrid apply_invalid_mask(const VoxelGrid& gt, const std::vector<std::uint8_t>& mask) {
  if (mask.size() != gt.spec().volume()) {
    throw std::invalid_argument("apply_invalid_mask: mask length mismatch");
  }
  std::vector<ClassId> labels = gt.labels();
  for (std::size_t k = 0; k < labels.size(); ++k) {
    if (mask[k]) labels[k] = kInvalidClass;
  }
  return VoxelGrid(gt.spec(), std::move(labels), gt.frame_id());
}

FrameCalib read_calib(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw IoError("cannot open calib file " + path.string());
  FrameCalib calib;
  bool have_tr = false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    std::istringstream ls(line);
    std::string key;
    if (!(ls >> key)) continue;
    if (key == "Tr:" || key == "Tr_velo_to_cam:") {
      std::array<double, 12> m{};
      for (double& v : m) {
        if (!(ls >> v)) {
          throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 12 values");
        }
      }
      try {
        calib.t_li_cam = Pose::from_3x4(m);
      } catch (const std::invalid_argument& e) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": " + e.what());
      }
      have_tr = true;
    } else if (key == "P2:") {
      std::array<double, 12> m{};
      for (double& v : m) {
        if (!(ls >> v)) {
          throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 12 values");
        }
      }
      calib.fx = m[0];
      calib.fy = m[5];
      calib.cx = m[2];
      calib.cy = m[6];
    }
  }
  if (!have_tr) throw IoError(path.string() + ": no 'Tr:' line");
  calib.validate();
  return calib;
}

std::vector<Pose> read_poses(const std::filesystem::path& poses_path,
                             const std::filesystem::path& calib_path) {
  const FrameCalib calib = read_calib(calib_path);
  const Pose tr = calib.t_li_cam;
  const Pose tr_inv = invert(tr);

  std::ifstream in(poses_path);
  if (!in) throw IoError("cannot open poses file " + poses_path.string());
  std::vector<Pose> poses;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    if (line.find_first_not_of(" \t\r") == std::string::npos) continue;
    std::istringstream ls(line);
    std::array<double, 12> m{};
    for (double& v : m) {
      if (!(ls >> v)) {
        throw IoError(poses_path.string() + ":" + std::to_string(line_no) +
                      ": expected 12 floats per pose line");
      }
    }
    double extra = 0.0;
    if (ls >> extra) {
      throw IoError(poses_path.string() + ":" + std::to_string(line_no) +
                    ": trailing values on pose line");
    }
    try {
      const Pose cam = Pose::from_3x4(m);
      poses.push_back(compose(tr_inv, compose(cam, tr)));
    } catch (const std::invalid_argument& e) {
      throw IoError(poses_path.string() + ":" + std::to_string(line_no) + ": " + e.what());
    }
  }
  return poses;
}

std::string frame_stem(int frame_id) {
  char buf[16];
  std::snprintf(buf, sizeof buf, "%06d", frame_id);
  return buf;
}

std::filesystem::path SequenceManifest::label_path(int frame_id) const {
  return seq_dir / labels_subdir / (frame_stem(frame_id) + ".label");
}

std::filesystem::path SequenceManifest::invalid_path(int frame_id) const {
  return seq_dir / labels_subdir / (frame_stem(frame_id) + ".invalid");
}

const Pose& SequenceManifest::pose(int frame_id) const {
  if (frame_id < 0 || static_cast<std::size_t>(frame_id) >= lidar_poses.size()) {
    throw IoError("no pose for frame " + frame_stem(frame_id) + " (poses.txt has " +
                  std::to_string(lidar_poses.size()) + " rows)");
  }
  return lidar_poses[frame_id];
}

SequenceManifest load_sequence(const std::filesystem::path& seq_dir,
                               const std::string& labels_subdir) {
  namespace fs = std::filesystem;
  SequenceManifest m;
  m.seq_dir = seq_dir;
  m.labels_subdir = labels_subdir;

  const fs::path labels_dir = seq_dir / labels_subdir;
  if (!fs::is_directory(labels_dir)) {
    throw IoError("label directory not found: " + labels_dir.string());
  }
  for (const auto& entry : fs::directory_iterator(labels_dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".label") continue;
    const std::string stem = entry.path().stem().string();
    try {
      m.frame_ids.push_back(std::stoi(stem));
    } catch (const std::exception&) {
      throw IoError("unparseable frame id in file name: " + entry.path().string());
    }
  }
  if (m.frame_ids.empty()) throw IoError("no .label files under " + labels_dir.string());
  std::sort(m.frame_ids.begin(), m.frame_ids.end());

  m.lidar_poses = read_poses(seq_dir / "poses.txt", seq_dir / "calib.txt");
  m.calib = read_calib(seq_dir / "calib.txt");

  const int max_frame = m.frame_ids.back();
  if (static_cast<std::size_t>(max_frame) >= m.lidar_poses.size()) {
    throw IoError("no pose for frame " + frame_stem(max_frame) + " (poses.txt has " +
                  std::to_string(m.lidar_poses.size()) + " rows)");
  }
  return m;
}

bool load_grid_config(const std::filesystem::path& path, GridSpec& spec, int& num_classes) {
  std::ifstream in(path);
  if (!in) return false;
  std::string line;
  int line_no = 0;
  while (std::getline(in, line)) {
    ++line_no;
    const auto hash = line.find('#');
    if (hash != std::string::npos) line.erase(hash);
    std::istringstream ls(line);
    std::string key, eq;
    if (!(ls >> key)) continue;
    if (!(ls >> eq) || eq != "=") {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": expected 'key = values'");
    }
    auto need = [&](auto& v) {
      if (!(ls >> v)) {
        throw IoError(path.string() + ":" + std::to_string(line_no) + ": bad value for " + key);
      }
    };
    if (key == "dims") {
      need(spec.dims[0]); need(spec.dims[1]); need(spec.dims[2]);
    } else if (key == "origin") {
      need(spec.origin[0]); need(spec.origin[1]); need(spec.origin[2]);
    } else if (key == "voxel_size") {
      need(spec.voxel_size[0]); need(spec.voxel_size[1]); need(spec.voxel_size[2]);
    } else if (key == "num_classes") {
      need(num_classes);
    } else {
      throw IoError(path.string() + ":" + std::to_string(line_no) + ": unknown key '" + key + "'");
    }
  }
  spec.validate();
  return true;
}

void write_grid_config(const std::filesystem::path& path, const GridSpec& spec, int num_classes) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "dims = " << spec.dims[0] << ' ' << spec.dims[1] << ' ' << spec.dims[2] << '\n';
  out.precision(17);
  out << "origin = " << spec.origin[0] << ' ' << spec.origin[1] << ' ' << spec.origin[2] << '\n';
  out << "voxel_size = " << spec.voxel_size[0] << ' ' << spec.voxel_size[1] << ' '
      << spec.voxel_size[2] << '\n';
  out << "num_classes = " << num_classes << '\n';
  if (!out) throw IoError("short write on " + path.string());
}

}  // namespace semvox
