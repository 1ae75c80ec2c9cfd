// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <random>
#include <sstream>

#include "semvox/pipeline.hpp"

using namespace semvox;
namespace fs = std::filesystem;

namespace {

struct TempDir {
  fs::path path;
  TempDir() {
    path = fs::temp_directory_path() /
           ("semvox_pipe_test_" + std::to_string(std::random_device{}()));
    fs::create_directories(path);
  }
  ~TempDir() { fs::remove_all(path); }
};

std::vector<char> slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  REQUIRE(in.good());
  return std::vector<char>((std::istreambuf_iterator<char>(in)),
                           std::istreambuf_iterator<char>());
}

GridSpec small_grid() {
  GridSpec g;
  g.dims = {32, 32, 8};
  g.origin = {0.0, -4.0, 0.0};
  g.voxel_size = {0.25, 0.25, 0.25};
  return g;
}

SynthOptions small_synth(const fs::path& root, std::uint64_t seed, int frames) {
  SynthOptions opt;
  opt.out_root = root;
  opt.seed = seed;
  opt.frames = frames;
  opt.grid = small_grid();
  return opt;
}

}  // namespace

TEST_CASE("synth writes the sequence layout the other commands consume") {
  TempDir tmp;
  std::ostringstream log;
  const SynthReport report = run_synth(small_synth(tmp.path, 5, 4), log);
  CHECK(report.frames == 4);
  CHECK(fs::exists(report.seq_dir / "poses.txt"));
  CHECK(fs::exists(report.seq_dir / "calib.txt"));
  CHECK(fs::exists(report.seq_dir / "grid.cfg"));
  for (int id : {0, 5, 10, 15}) {
    CHECK(fs::exists(report.seq_dir / "voxels" / (frame_stem(id) + ".label")));
    CHECK(fs::exists(report.seq_dir / "preds" / (frame_stem(id) + ".label")));
  }
  // poses cover every scan up to the last frame
  std::ifstream poses(report.seq_dir / "poses.txt");
  int lines = 0;
  std::string line;
  while (std::getline(poses, line)) ++lines;
  CHECK(lines == 16);
}

TEST_CASE("fuse with radius zero and uniform weights copies the inputs byte for byte") {
  TempDir tmp;
  std::ostringstream log;
  const SynthReport synth = run_synth(small_synth(tmp.path, 11, 3), log);

  FuseOptions fuse;
  fuse.seq_dir = synth.seq_dir;
  fuse.labels_subdir = "preds";
  fuse.out_dir = tmp.path / "fused";
  fuse.radius = 0;
  fuse.profile = WeightProfile::uniform();
  run_fuse(fuse, log);

  for (int id : {0, 5, 10}) {
    const auto in_bytes = slurp(synth.seq_dir / "preds" / (frame_stem(id) + ".label"));
    const auto out_bytes = slurp(fuse.out_dir / (frame_stem(id) + ".label"));
    REQUIRE(in_bytes == out_bytes);
  }
}

TEST_CASE("eval scores identical directories at 100 and enforces frame pairing") {
  TempDir tmp;
  std::ostringstream log;
  const SynthReport synth = run_synth(small_synth(tmp.path, 17, 3), log);

  EvalOptions eval;
  eval.pred_dir = synth.seq_dir / "voxels";
  eval.gt_dir = synth.seq_dir / "voxels";
  const EvalReport report = run_eval(eval, log);
  CHECK(report.frames == 3);
  REQUIRE(!report.bands.empty());
  CHECK(report.bands[0].geometric_iou.value_or(-1.0) == 100.0);
  for (std::size_t c = 0; c < report.bands[0].semantic.per_class.size(); ++c) {
    if (report.bands[0].semantic.present[c]) {
      CHECK(report.bands[0].semantic.per_class[c] == 100.0);
    }
  }

  SUBCASE("missing prediction file is a named mismatch") {
    fs::remove(synth.seq_dir / "preds" / "000010.label");
    EvalOptions bad = eval;
    bad.pred_dir = synth.seq_dir / "preds";
    CHECK_THROWS_AS(run_eval(bad, log), IoError);
  }
}

TEST_CASE("the full synth -> fuse -> eval loop improves the noisy predictions") {
  TempDir tmp;
  std::ostringstream log;
  SynthOptions synth_opt = small_synth(tmp.path, 23, 9);
  synth_opt.noise = NoiseModel{0.3, 0.1, 0.0};
  const SynthReport synth = run_synth(synth_opt, log);

  FuseOptions fuse;
  fuse.seq_dir = synth.seq_dir;
  fuse.labels_subdir = "preds";
  fuse.out_dir = tmp.path / "fused";
  fuse.radius = 4;
  fuse.profile = WeightProfile::uniform();
  run_fuse(fuse, log);

  EvalOptions eval;
  eval.gt_dir = synth.seq_dir / "voxels";
  eval.pred_dir = synth.seq_dir / "preds";
  const double before = run_eval(eval, log).bands[0].semantic.miou;
  eval.pred_dir = fuse.out_dir;
  const double after = run_eval(eval, log).bands[0].semantic.miou;
  CHECK(after > before);
}

TEST_CASE("eval emits the csv table with banded rows") {
  TempDir tmp;
  std::ostringstream log;
  SynthOptions synth_opt = small_synth(tmp.path, 31, 2);
  const SynthReport synth = run_synth(synth_opt, log);

  EvalOptions eval;
  eval.pred_dir = synth.seq_dir / "voxels";
  eval.gt_dir = synth.seq_dir / "voxels";
  eval.bands = {4.0, 8.0};
  eval.csv_path = tmp.path / "metrics.csv";
  const EvalReport report = run_eval(eval, log);
  REQUIRE(report.bands.size() == 3);
  // full-band metrics equal the unbanded full-volume row
  CHECK(report.bands[2].semantic.miou == doctest::Approx(report.bands[0].semantic.miou));

  std::ifstream csv(eval.csv_path);
  std::string header;
  std::getline(csv, header);
  CHECK(header.rfind("band,car,bicycle,", 0) == 0);
  CHECK(header.find("traffic-sign,IoU,mIoU") != std::string::npos);
  int rows = 0;
  std::string line;
  while (std::getline(csv, line)) ++rows;
  CHECK(rows == 3);
}

TEST_CASE("citymap builds a manifest and honors the chunk ceiling") {
  TempDir tmp;
  std::ostringstream log;
  const SynthReport synth = run_synth(small_synth(tmp.path, 37, 4), log);

  CitymapOptions city;
  city.seq_dir = synth.seq_dir;
  city.labels_subdir = "voxels";
  city.out_dir = tmp.path / "map";
  city.uniform = true;
  city.max_active_chunks = 64;
  const CitymapReport report = run_citymap(city, log);
  CHECK(fs::exists(report.manifest));
  CHECK(report.chunks_written >= 1);
  CHECK(report.chunks_written <= city.max_active_chunks);
  CHECK(report.stats.frames == 4);
  CHECK(report.stats.dropped_dynamic > 0);  // the parked vehicle is filtered

  SUBCASE("an impossible ceiling fails with advice") {
    CitymapOptions strict = city;
    strict.out_dir = tmp.path / "map2";
    strict.chunk_dims = {4, 4, 4};
    strict.max_active_chunks = 1;
    CHECK_THROWS_WITH_AS(run_citymap(strict, log), doctest::Contains("ceiling"),
                         std::runtime_error);
  }
}

TEST_CASE("the cli maps error classes to exit codes") {
  TempDir tmp;
  const std::string cli = SEMVOX_CLI_PATH;
  std::ostringstream log;
  const SynthReport synth = run_synth(small_synth(tmp.path, 41, 2), log);

  SUBCASE("success is exit 0") {
    const std::string cmd = cli + " eval --pred " + (synth.seq_dir / "voxels").string() +
                            " --gt " + (synth.seq_dir / "voxels").string() + " > /dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  }
  SUBCASE("missing poses.txt is exit 2") {
    fs::remove(synth.seq_dir / "poses.txt");
    const std::string cmd = cli + " fuse --seq " + synth.seq_dir.string() + " --out " +
                            (tmp.path / "out").string() + " > /dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 2);
  }
  SUBCASE("kernel-check reports success") {
    const std::string cmd = cli + " kernel-check > /dev/null 2>&1";
    CHECK(WEXITSTATUS(std::system(cmd.c_str())) == 0);
  }
}
