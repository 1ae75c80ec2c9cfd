// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#include "semvox/pipeline.hpp"

#include <algorithm>
#include <chrono>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <iomanip>
#include <map>
#include <memory>
#include <ostream>
#include <random>
#include <sstream>

#ifdef _OPENMP
#include <omp.h>
#endif

#include "semvox/dualflow/kernel.hpp"
#include "semvox/dualflow/losses.hpp"

namespace semvox {

namespace {

using Clock = std::chrono::steady_clock;

double elapsed_s(Clock::time_point t0) {
  return std::chrono::duration<double>(Clock::now() - t0).count();
}

const ClassMap& resolve_class_map(const std::filesystem::path& path, ClassMap& storage) {
  if (path.empty()) return ClassMap::semantic_kitti();
  storage = ClassMap::load(path);
  return storage;
}

WeightProfile profile_with_calib(WeightProfile profile, const FrameCalib& calib,
                                 bool extrinsic_from_calib) {
  if (profile.mode == WeightMode::kCamera && extrinsic_from_calib) {
    profile.cam_extrinsic = calib.t_li_cam;
    profile.fov_w = calib.fov_w();
    profile.fov_h = calib.fov_h();
  }
  return profile;
}

void echo_config(std::ostream& out, const std::string& subcommand,
                 const std::vector<std::pair<std::string, std::string>>& kv) {
  out << "# effective " << subcommand << " configuration\n";
  for (const auto& [k, v] : kv) out << k << " = " << v << '\n';
}

std::string profile_name(const WeightProfile& p) {
  switch (p.mode) {
    case WeightMode::kUniform: return "uniform";
    case WeightMode::kCamera: return "camera";
    case WeightMode::kLidar: return "lidar";
  }
  return "?";
}

}  // namespace

void set_worker_threads(int threads) {
#ifdef _OPENMP
  if (threads > 0) {
    omp_set_num_threads(threads);
    return;
  }
  if (const char* env = std::getenv("SEMVOX_THREADS")) {
    const int n = std::atoi(env);
    if (n > 0) omp_set_num_threads(n);
  }
#else
  (void)threads;
#endif
}

FuseReport run_fuse(const FuseOptions& opt, std::ostream& log) {
  set_worker_threads(opt.threads);
  const Clock::time_point t0 = Clock::now();

  GridSpec grid = opt.grid;
  int num_classes = opt.num_classes;
  if (opt.use_sidecar) load_grid_config(opt.seq_dir / "grid.cfg", grid, num_classes);
  ClassMap map_storage;
  const ClassMap& map = resolve_class_map(opt.class_map_path, map_storage);

  const SequenceManifest manifest = load_sequence(opt.seq_dir, opt.labels_subdir);
  const WeightProfile profile =
      profile_with_calib(opt.profile, manifest.calib, opt.extrinsic_from_calib);
  profile.validate();

  std::filesystem::create_directories(opt.out_dir);
  write_grid_config(opt.out_dir / "grid.cfg", grid, num_classes);
  {
    std::ofstream cfg(opt.out_dir / "fuse_config.txt", std::ios::trunc);
    echo_config(cfg, "fuse",
                {{"seq_dir", opt.seq_dir.string()},
                 {"labels_subdir", opt.labels_subdir},
                 {"radius", std::to_string(opt.radius)},
                 {"profile", profile_name(profile)},
                 {"num_classes", std::to_string(num_classes)},
                 {"threads", std::to_string(opt.threads)}});
  }

  const std::vector<int>& ids = manifest.frame_ids;
  std::map<int, std::unique_ptr<VoxelGrid>> cache;
  FuseReport report;

  for (std::size_t i = 0; i < ids.size(); ++i) {
    const int lo = static_cast<int>(i) - opt.radius;
    const int hi = static_cast<int>(i) + opt.radius;
    const std::size_t first = static_cast<std::size_t>(std::max(0, lo));
    const std::size_t last = static_cast<std::size_t>(std::min<int>(ids.size() - 1, hi));

    while (!cache.empty() && cache.begin()->first < ids[first]) cache.erase(cache.begin());
    std::vector<FrameRef> refs;
    refs.reserve(last - first + 1);
    for (std::size_t w = first; w <= last; ++w) {
      const int id = ids[w];
      auto it = cache.find(id);
      if (it == cache.end()) {
        it = cache
                 .emplace(id, std::make_unique<VoxelGrid>(
                                  read_label_grid(manifest.label_path(id), grid, map, id)))
                 .first;
      }
      refs.push_back(FrameRef{it->second.get(), manifest.pose(id)});
    }

    const Clock::time_point f0 = Clock::now();
    FuseStats stats;
    const VoxelGrid fused = fuse_window(refs, ids[i], opt.radius, profile, num_classes, &stats);
    write_label_grid(fused, opt.out_dir / (frame_stem(ids[i]) + ".label"), map);

    log << "frame " << frame_stem(ids[i]) << ": window [" << frame_stem(stats.window_first) << ", "
        << frame_stem(stats.window_last) << "], voted " << stats.points_voted << ", dropped "
        << stats.points_dropped << ", " << std::fixed << std::setprecision(1)
        << elapsed_s(f0) * 1e3 << " ms\n";
    report.points_voted += stats.points_voted;
    report.points_dropped += stats.points_dropped;
    ++report.frames;
  }
  report.seconds = elapsed_s(t0);
  log << "fused " << report.frames << " frames in " << std::fixed << std::setprecision(2)
      << report.seconds << " s\n";
  return report;
}

namespace {

std::vector<int> list_label_ids(const std::filesystem::path& dir) {
  namespace fs = std::filesystem;
  if (!fs::is_directory(dir)) throw IoError("label directory not found: " + dir.string());
  std::vector<int> ids;
  for (const auto& entry : fs::directory_iterator(dir)) {
    if (!entry.is_regular_file() || entry.path().extension() != ".label") continue;
    try {
      ids.push_back(std::stoi(entry.path().stem().string()));
    } catch (const std::exception&) {
      throw IoError("unparseable frame id in file name: " + entry.path().string());
    }
  }
  std::sort(ids.begin(), ids.end());
  return ids;
}

void print_eval_table(std::ostream& out, const EvalReport& report) {
  out << "evaluated " << report.frames << " frame(s)\n";
  for (const EvalBand& band : report.bands) {
    if (band.band > 0.0) {
      out << "-- band " << band.band << " m --\n";
    } else {
      out << "-- full volume --\n";
    }
    for (std::size_t c = 0; c < band.semantic.per_class.size(); ++c) {
      out << "  " << std::left << std::setw(16) << report.class_names[c + 1] << std::right
          << std::fixed << std::setprecision(2) << std::setw(8) << band.semantic.per_class[c]
          << '\n';
    }
    out << "  " << std::left << std::setw(16) << "mIoU" << std::right << std::fixed
        << std::setprecision(2) << std::setw(8) << band.semantic.miou << '\n';
    out << "  " << std::left << std::setw(16) << "IoU";
    if (band.geometric_iou) {
      out << std::right << std::fixed << std::setprecision(2) << std::setw(8)
          << *band.geometric_iou << '\n';
    } else {
      out << std::right << std::setw(8) << "undef" << '\n';
    }
  }
}

void write_eval_csv(const std::filesystem::path& path, const EvalReport& report) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw IoError("cannot open " + path.string() + " for writing");
  out << "band";
  for (std::size_t c = 1; c < report.class_names.size(); ++c) out << ',' << report.class_names[c];
  out << ",IoU,mIoU\n";
  out << std::fixed << std::setprecision(4);
  for (const EvalBand& band : report.bands) {
    if (band.band > 0.0) {
      out << band.band;
    } else {
      out << "full";
    }
    for (double v : band.semantic.per_class) out << ',' << v;
    out << ',';
    if (band.geometric_iou) out << *band.geometric_iou;
    out << ',' << band.semantic.miou << '\n';
  }
  if (!out) throw IoError("short write on " + path.string());
}

}  // namespace

EvalReport run_eval(const EvalOptions& opt, std::ostream& log) {
  set_worker_threads(opt.threads);

  GridSpec grid = opt.grid;
  int num_classes = opt.num_classes;
  if (opt.use_sidecar) {
    if (!load_grid_config(opt.gt_dir / "grid.cfg", grid, num_classes)) {
      load_grid_config(opt.gt_dir.parent_path() / "grid.cfg", grid, num_classes);
    }
  }
  ClassMap map_storage;
  const ClassMap& map = resolve_class_map(opt.class_map_path, map_storage);

  const std::vector<int> pred_ids = list_label_ids(opt.pred_dir);
  const std::vector<int> gt_ids = list_label_ids(opt.gt_dir);
  if (pred_ids != gt_ids) {
    throw IoError("frame mismatch: " + std::to_string(pred_ids.size()) + " prediction file(s) vs " +
                  std::to_string(gt_ids.size()) + " ground-truth file(s)");
  }

  std::vector<double> bands = opt.bands;
  std::vector<ConfusionMatrix> cms(bands.size() + 1, ConfusionMatrix(num_classes));

  for (int id : pred_ids) {
    const VoxelGrid pred =
        read_label_grid(opt.pred_dir / (frame_stem(id) + ".label"), grid, map, id);
    VoxelGrid gt = read_label_grid(opt.gt_dir / (frame_stem(id) + ".label"), grid, map, id);
    const std::filesystem::path inv = opt.gt_dir / (frame_stem(id) + ".invalid");
    if (opt.mask_invalid && std::filesystem::exists(inv)) {
      gt = apply_invalid_mask(gt, read_invalid_mask(inv, grid));
    }
    cms[0] += accumulate_confusion(pred, gt, opt.mask_invalid, num_classes);
    for (std::size_t b = 0; b < bands.size(); ++b) {
      cms[b + 1] += accumulate_confusion(crop_band(pred, bands[b]), crop_band(gt, bands[b]),
                                         opt.mask_invalid, num_classes);
    }
  }

  EvalReport report;
  report.frames = static_cast<int>(pred_ids.size());
  report.class_names = map.names;
  for (std::size_t b = 0; b < cms.size(); ++b) {
    EvalBand band;
    band.band = b == 0 ? 0.0 : bands[b - 1];
    band.geometric_iou = iou(cms[b]);
    band.semantic = miou(cms[b]);
    report.bands.push_back(std::move(band));
  }
  print_eval_table(log, report);
  if (!opt.csv_path.empty()) write_eval_csv(opt.csv_path, report);
  return report;
}

CitymapReport run_citymap(const CitymapOptions& opt, std::ostream& log) {
  set_worker_threads(opt.threads);
  const Clock::time_point t0 = Clock::now();

  GridSpec grid = opt.grid;
  int num_classes = opt.num_classes;
  if (opt.use_sidecar) load_grid_config(opt.seq_dir / "grid.cfg", grid, num_classes);
  ClassMap map_storage;
  const ClassMap& map = resolve_class_map(opt.class_map_path, map_storage);

  const SequenceManifest manifest = load_sequence(opt.seq_dir, opt.labels_subdir);
  WeightProfile profile =
      opt.uniform ? WeightProfile::uniform()
                  : profile_with_calib(opt.profile, manifest.calib, opt.extrinsic_from_calib);
  profile.validate();

  std::vector<Pose> poses;
  poses.reserve(manifest.frame_ids.size());
  for (int id : manifest.frame_ids) poses.push_back(manifest.pose(id));

  CityMapSpec spec = compute_world_bounds(poses, grid);
  spec.num_classes = num_classes;
  if (opt.chunk_dims[0] > 0 && opt.chunk_dims[1] > 0 && opt.chunk_dims[2] > 0) {
    spec.chunk_dims = opt.chunk_dims;
  }
  if (opt.static_only && num_classes == kSemanticKittiClasses) {
    spec.static_classes = CityMapSpec::default_static_classes();
  } else {
    spec.static_classes = CityMapSpec::all_classes(num_classes);
  }

  QuantizedAccumulator acc(spec, opt.scale, opt.max_active_chunks);
  for (std::size_t i = 0; i < manifest.frame_ids.size(); ++i) {
    const int id = manifest.frame_ids[i];
    const VoxelGrid frame = read_label_grid(manifest.label_path(id), grid, map, id);
    acc.accumulate(frame, manifest.pose(id), profile);
  }

  std::filesystem::create_directories(opt.out_dir);
  CitymapReport report;
  report.spec = spec;
  report.stats = acc.stats();
  report.manifest = write_citymap(acc, opt.out_dir, map);
  report.chunks_written = acc.active_chunks();
  if (!opt.ply_path.empty()) write_city_ply(acc, opt.ply_path, map);
  report.seconds = elapsed_s(t0);

  {
    std::ofstream cfg(opt.out_dir / "citymap_config.txt", std::ios::trunc);
    echo_config(cfg, "citymap",
                {{"seq_dir", opt.seq_dir.string()},
                 {"labels_subdir", opt.labels_subdir},
                 {"profile", opt.uniform ? "uniform" : profile_name(profile)},
                 {"scale", std::to_string(opt.scale)},
                 {"static_only", opt.static_only ? "true" : "false"},
                 {"max_active_chunks", std::to_string(opt.max_active_chunks)},
                 {"num_classes", std::to_string(num_classes)}});
  }

  log << "city map: world " << spec.world_spec.dims[0] << 'x' << spec.world_spec.dims[1] << 'x'
      << spec.world_spec.dims[2] << " voxels, " << report.chunks_written << " chunk(s), "
      << report.stats.points_voted << " votes (" << report.stats.dropped_dynamic << " dynamic, "
      << report.stats.dropped_out_of_world << " out of bounds dropped), " << std::fixed
      << std::setprecision(2) << report.seconds << " s\n";
  return report;
}

SynthReport run_synth(const SynthOptions& opt, std::ostream& log) {
  namespace fs = std::filesystem;
  if (opt.frames < 1) throw std::invalid_argument("run_synth: frames must be >= 1");

  const fs::path seq_dir = opt.out_root / "sequences" / opt.sequence;
  fs::create_directories(seq_dir / "voxels");
  fs::create_directories(seq_dir / "preds");

  // scan-granularity trajectory; voxel frames land on every 5th scan
  const int scans = (opt.frames - 1) * 5 + 1;
  const SceneConfig scene = make_random_scene(opt.seed, scans, opt.grid, opt.num_classes);
  const VoxelGrid world = generate_world(scene);

  const FrameCalib calib;  // default intrinsics
  const Pose tr = default_camera_axes();
  const Pose tr_inv = invert(tr);

  {
    std::ofstream poses(seq_dir / "poses.txt", std::ios::trunc);
    if (!poses) throw IoError("cannot write poses.txt");
    poses.precision(17);
    for (const Pose& lidar : scene.trajectory) {
      const Pose cam = compose(tr, compose(lidar, tr_inv));
      const auto& m = cam.matrix();
      for (int k = 0; k < 12; ++k) poses << m[k] << (k + 1 < 12 ? ' ' : '\n');
    }
  }
  {
    std::ofstream cal(seq_dir / "calib.txt", std::ios::trunc);
    if (!cal) throw IoError("cannot write calib.txt");
    cal.precision(17);
    cal << "P2: " << calib.fx << " 0 " << calib.cx << " 0 0 " << calib.fy << " " << calib.cy
        << " 0 0 0 1 0\n";
    const auto& m = tr.matrix();
    cal << "Tr:";
    for (int k = 0; k < 12; ++k) cal << ' ' << m[k];
    cal << '\n';
  }
  write_grid_config(seq_dir / "grid.cfg", opt.grid, opt.num_classes);

  std::optional<FrustumSpec> frustum;
  if (opt.frustum) {
    FrustumSpec f;
    f.fov_w = calib.fov_w();
    f.fov_h = calib.fov_h();
    f.cam_extrinsic = tr;
    frustum = f;
  }

  for (int f = 0; f < opt.frames; ++f) {
    const int frame_id = f * 5;
    const Pose& pose = scene.trajectory[frame_id];
    const VoxelGrid gt = ground_truth_frame(world, pose, opt.grid, frame_id);
    const VoxelGrid pred = render_frame(world, pose, opt.grid, opt.noise, opt.seed, frame_id,
                                        frustum, opt.num_classes);
    write_label_grid(gt, seq_dir / "voxels" / (frame_stem(frame_id) + ".label"));
    write_label_grid(pred, seq_dir / "preds" / (frame_stem(frame_id) + ".label"));
  }

  log << "wrote " << opt.frames << " synthetic frame(s) to " << seq_dir.string() << '\n';
  SynthReport report;
  report.seq_dir = seq_dir;
  report.frames = opt.frames;
  return report;
}

// ---------------------------------------------------------------------------
// kernel-check

namespace {

using dualflow::Tensor;

double rel_err(double a, double b) {
  return std::abs(a - b) / std::max({1.0, std::abs(a), std::abs(b)});
}

// central finite differences of a scalar function over tensor entries
template <typename F>
Tensor finite_difference(const Tensor& x, F f, double step = 1e-5) {
  Tensor g(x.dims());
  Tensor probe = x;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double v = probe.values()[i];
    probe.values()[i] = v + step;
    const double up = f(probe);
    probe.values()[i] = v - step;
    const double down = f(probe);
    probe.values()[i] = v;
    g.values()[i] = (up - down) / (2.0 * step);
  }
  return g;
}

}  // namespace

int run_kernel_check(std::uint64_t seed, std::ostream& out) {
  using namespace dualflow;
  int failures = 0;
  auto check = [&](const std::string& name, bool ok, const std::string& detail = "") {
    out << (ok ? "[PASS] " : "[FAIL] ") << name;
    if (!ok && !detail.empty()) out << "  (" << detail << ")";
    out << '\n';
    if (!ok) ++failures;
  };
  std::mt19937_64 eng(seed);
  std::uniform_real_distribution<double> u(-2.0, 2.0);

  {  // softmax rows sum to one, including extreme logits
    Tensor logits({16, 24});
    for (double& v : logits.values()) v = u(eng) * 250.0;
    const Tensor p = softmax_rows(logits);
    double worst = 0.0;
    for (int i = 0; i < 16; ++i) {
      double s = 0.0;
      for (int j = 0; j < 24; ++j) s += p(i, j);
      worst = std::max(worst, std::abs(s - 1.0));
    }
    check("softmax-row-sums", worst <= 1e-9, "max |sum-1| = " + std::to_string(worst));
  }

  {  // soft split / composite identity round trip
    PatchGeometry geom;
    geom.h = 13;
    geom.w = 13;
    geom.c = 2;
    Tensor x({2, 13, 13, 2});
    for (double& v : x.values()) v = u(eng);
    const SoftSplit ss = SoftSplit::identity(geom);
    const Tensor back = soft_composite(ss.apply(x), geom, Linear::identity(geom.patch_elems()));
    const double diff = max_abs_diff(back, x);
    check("soft-split-composite-identity", diff <= 1e-12, "max diff = " + std::to_string(diff));
  }

  {  // zero QKV projection leaves the residual untouched
    Tensor tokens({2, 9, 16});
    for (double& v : tokens.values()) v = u(eng);
    const Tensor z = BevAttention::zeroed(16, 4).apply(tokens);
    check("zero-qkv-residual-identity", max_abs_diff(z, tokens) == 0.0);
  }

  {  // permuting tokens permutes attention outputs identically
    const int n = 12, ce = 16;
    Tensor tokens({1, n, ce});
    for (double& v : tokens.values()) v = u(eng);
    const BevAttention att = BevAttention::make(ce, 4, seed + 7);
    const Tensor y = att.apply(tokens);
    std::vector<int> perm(n);
    std::iota(perm.begin(), perm.end(), 0);
    std::shuffle(perm.begin(), perm.end(), eng);
    Tensor shuffled({1, n, ce});
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < ce; ++d) shuffled(0, i, d) = tokens(0, perm[i], d);
    }
    const Tensor ys = att.apply(shuffled);
    double worst = 0.0;
    for (int i = 0; i < n; ++i) {
      for (int d = 0; d < ce; ++d) {
        worst = std::max(worst, std::abs(ys(0, i, d) - y(0, perm[i], d)));
      }
    }
    check("attention-permutation-equivariance", worst <= 1e-9,
          "max diff = " + std::to_string(worst));
  }

  {  // pillar attention: identity, constant, and closed-form two-token cases
    Tensor one({1, 1, 4});
    for (int k = 0; k < 4; ++k) one(0, 0, k) = u(eng);
    const Tensor idy = pillar_attention(one, 1);
    const bool id_ok = max_abs_diff(idy, one) <= 1e-12;

    Tensor constant({3, 2, 8});
    for (double& v : constant.values()) v = 0.75;
    const Tensor cy = pillar_attention(constant, 4);
    const bool const_ok = max_abs_diff(cy, constant) <= 1e-12;

    // two scalar tokens a=1, b=1+ln3: the first query's logits are [1, 1+ln3],
    // so its weights are exactly [1/4, 3/4]
    const double b = 1.0 + std::log(3.0);
    Tensor two({1, 1, 2});
    two(0, 0, 0) = 1.0;
    two(0, 0, 1) = b;
    const Tensor ty = pillar_attention(two, 2);
    const double expect = 0.25 * 1.0 + 0.75 * b;
    const bool hand_ok = std::abs(ty(0, 0, 0) - expect) <= 1e-12;
    check("pillar-attention-cases", id_ok && const_ok && hand_ok);
  }

  {  // encoder geometry and zero propagation
    BevEncoder enc = BevEncoder::make(6, seed + 11, 16);
    Tensor x({64, 64, 6});
    for (double& v : x.values()) v = u(eng);
    const Tensor y = enc.forward(x);
    const bool shape_ok = y.dim(0) == 4 && y.dim(1) == 4 && y.dim(2) == 16;
    for (auto& blk : enc.blocks) {
      for (double& v : blk.b1.values()) v = 0.0;
      for (double& v : blk.b2.values()) v = 0.0;
    }
    for (double& v : enc.embed.bias.values()) v = 0.0;
    const Tensor zero = enc.forward(Tensor({32, 32, 6}));
    double zmax = 0.0;
    for (double v : zero.values()) zmax = std::max(zmax, std::abs(v));
    check("encoder-shape-and-zero", shape_ok && zmax == 0.0);
  }

  {  // cross-entropy gradient vs central differences
    double worst = 0.0;
    for (int inst = 0; inst < 20; ++inst) {
      const int n = 3 + inst % 4, c = 3 + inst % 3;
      Tensor logits({n, c});
      for (double& v : logits.values()) v = u(eng);
      std::vector<ClassId> gt(n);
      for (int i = 0; i < n; ++i) {
        gt[i] = (inst % 5 == 0 && i == 0) ? kInvalidClass
                                          : static_cast<ClassId>(eng() % c);
      }
      if (std::all_of(gt.begin(), gt.end(), [](ClassId g) { return g == kInvalidClass; })) {
        gt[0] = 0;
      }
      const LossResult res = ce_loss(logits, gt);
      const Tensor fd = finite_difference(
          logits, [&](const Tensor& t) { return ce_loss(t, gt).value; });
      for (std::size_t k = 0; k < fd.size(); ++k) {
        worst = std::max(worst, rel_err(res.grad.values()[k], fd.values()[k]));
      }
    }
    check("ce-gradient-finite-difference", worst <= 1e-4, "max rel err = " + std::to_string(worst));
  }

  {  // Lovasz subgradient vs central differences, away from sorting ties
    double worst = 0.0;
    int done = 0;
    while (done < 20) {
      const int n = 4 + static_cast<int>(eng() % 4), c = 3 + static_cast<int>(eng() % 3);
      Tensor logits({n, c});
      for (double& v : logits.values()) v = u(eng);
      const Tensor probs = softmax_rows(logits);
      std::vector<ClassId> gt(n);
      for (int i = 0; i < n; ++i) gt[i] = static_cast<ClassId>(eng() % c);

      // reject instances whose sorted errors nearly tie for any present class
      bool tied = false;
      for (int cls = 0; cls < c && !tied; ++cls) {
        std::vector<double> errors;
        bool present = false;
        for (int i = 0; i < n; ++i) {
          if (gt[i] == cls) present = true;
          errors.push_back(gt[i] == cls ? 1.0 - probs(i, cls) : probs(i, cls));
        }
        if (!present) continue;
        std::sort(errors.begin(), errors.end());
        for (std::size_t k = 1; k < errors.size(); ++k) {
          if (errors[k] - errors[k - 1] < 1e-3) tied = true;
        }
      }
      if (tied) continue;

      const LossResult res = lovasz_loss(probs, gt);
      const Tensor fd = finite_difference(
          probs, [&](const Tensor& t) { return lovasz_loss(t, gt).value; });
      for (std::size_t k = 0; k < fd.size(); ++k) {
        worst = std::max(worst, rel_err(res.grad.values()[k], fd.values()[k]));
      }
      ++done;
    }
    check("lovasz-subgradient-finite-difference", worst <= 1e-4,
          "max rel err = " + std::to_string(worst));
  }

  {  // total supervision is exactly the sum of its two terms
    Tensor logits({6, 4});
    for (double& v : logits.values()) v = u(eng);
    std::vector<ClassId> gt{0, 1, 2, 3, 1, kInvalidClass};
    const double ce = ce_loss(logits, gt).value;
    const double lv = lovasz_loss(softmax_rows(logits), gt).value;
    const LossResult total = ssc_loss(logits, gt);
    const Tensor fd = finite_difference(
        logits, [&](const Tensor& t) { return ssc_loss(t, gt).value; });
    double gworst = 0.0;
    for (std::size_t k = 0; k < fd.size(); ++k) {
      gworst = std::max(gworst, rel_err(total.grad.values()[k], fd.values()[k]));
    }
    check("total-loss-sum-and-gradient", total.value == ce + lv && gworst <= 1e-4);
  }

  {  // perfect one-hot probabilities give zero Lovasz loss
    Tensor probs({5, 3});
    std::vector<ClassId> gt(5);
    for (int i = 0; i < 5; ++i) {
      gt[i] = static_cast<ClassId>(i % 3);
      probs(i, gt[i]) = 1.0;
    }
    const LossResult res = lovasz_loss(probs, gt);
    const bool zero_ok = res.value == 0.0;
    // single voxel, probability p: the extension reduces to a plain hinge
    Tensor single({1, 2});
    single(0, 0) = 0.3;
    single(0, 1) = 0.7;
    const LossResult hinge = lovasz_loss(single, std::vector<ClassId>{0});
    check("lovasz-closed-forms", zero_ok && std::abs(hinge.value - 0.7) <= 1e-15);
  }

  out << (failures == 0 ? "kernel-check: all checks passed\n"
                        : "kernel-check: " + std::to_string(failures) + " check(s) failed\n");
  return failures == 0 ? 0 : 1;
}

}  // namespace semvox
