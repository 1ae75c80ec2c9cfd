// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#include "semvox/metrics.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

#ifdef _OPENMP
#include <omp.h>
#endif

namespace semvox {

ConfusionMatrix::ConfusionMatrix(int num_classes) : num_classes_(num_classes) {
  if (num_classes < 1) throw std::invalid_argument("ConfusionMatrix: num_classes < 1");
  counts_.assign(static_cast<std::size_t>(num_classes + 1) * (num_classes + 1), 0);
}

std::uint64_t ConfusionMatrix::total() const {
  return std::accumulate(counts_.begin(), counts_.end(), std::uint64_t{0});
}

ConfusionMatrix& ConfusionMatrix::operator+=(const ConfusionMatrix& other) {
  if (other.num_classes_ != num_classes_) {
    throw std::invalid_argument("ConfusionMatrix: class count mismatch");
  }
  for (std::size_t i = 0; i < counts_.size(); ++i) counts_[i] += other.counts_[i];
  excluded_ += other.excluded_;
  return *this;
}

ConfusionMatrix accumulate_confusion(const VoxelGrid& pred, const VoxelGrid& gt, bool mask_invalid,
                                     int num_classes) {
  if (!(pred.spec() == gt.spec())) {
    throw std::invalid_argument("accumulate_confusion: pred/gt grid specs differ");
  }
  const auto& pl = pred.labels();
  const auto& gl = gt.labels();
  const std::size_t n = pl.size();

  ConfusionMatrix cm(num_classes);
  std::size_t bad_offset = n;  // first invalid voxel, if any

#pragma omp parallel
  {
    ConfusionMatrix local(num_classes);
    std::size_t local_bad = n;
#pragma omp for schedule(static) nowait
    for (std::int64_t k = 0; k < static_cast<std::int64_t>(n); ++k) {
      const ClassId g = gl[k];
      const ClassId p = pl[k];
      if (g == kInvalidClass) {
        if (mask_invalid) {
          local.add_excluded();
          continue;
        }
        if (local_bad == n) local_bad = static_cast<std::size_t>(k);
        continue;
      }
      if (p == kInvalidClass || p > num_classes || g > num_classes) {
        if (local_bad == n) local_bad = static_cast<std::size_t>(k);
        continue;
      }
      local.add(g, p);
    }
#pragma omp critical
    {
      cm += local;
      bad_offset = std::min(bad_offset, local_bad);
    }
  }
  if (bad_offset != n) {
    throw std::invalid_argument("accumulate_confusion: label outside 0.." +
                                std::to_string(num_classes) + " at offset " +
                                std::to_string(bad_offset));
  }
  return cm;
}

std::optional<double> iou(const ConfusionMatrix& cm) {
  const int c = cm.num_classes();
  std::uint64_t tp = 0, fp = 0, fn = 0;
  for (int g = 1; g <= c; ++g) {
    for (int p = 1; p <= c; ++p) tp += cm.count(g, p);
    fn += cm.count(g, 0);
  }
  for (int p = 1; p <= c; ++p) fp += cm.count(0, p);
  const std::uint64_t denom = tp + fp + fn;
  if (denom == 0) return std::nullopt;
  return 100.0 * static_cast<double>(tp) / static_cast<double>(denom);
}

MiouResult miou(const ConfusionMatrix& cm, bool skip_absent) {
  const int c = cm.num_classes();
  MiouResult out;
  out.per_class.assign(c, 0.0);
  out.present.assign(c, false);
  double sum = 0.0;
  int counted = 0;
  for (int k = 1; k <= c; ++k) {
    std::uint64_t row = 0, col = 0;
    for (int j = 0; j <= c; ++j) {
      row += cm.count(k, j);
      col += cm.count(j, k);
    }
    const std::uint64_t diag = cm.count(k, k);
    const std::uint64_t denom = row + col - diag;
    out.present[k - 1] = denom > 0;
    if (denom > 0) {
      out.per_class[k - 1] = 100.0 * static_cast<double>(diag) / static_cast<double>(denom);
    }
    if (denom > 0 || !skip_absent) {
      sum += out.per_class[k - 1];
      ++counted;
    }
  }
  out.miou = counted > 0 ? sum / counted : 0.0;
  return out;
}

VoxelGrid crop_band(const VoxelGrid& grid, double band) {
  const GridSpec& spec = grid.spec();
  if (!(band > 0.0)) throw std::invalid_argument("crop_band: band must be > 0");
  auto to_index = [](double meters, double origin, double dv) {
    const double f = (meters - origin) / dv;
    const long long r = std::llround(f);
    if (std::abs(f - static_cast<double>(r)) > 1e-6) {
      throw std::invalid_argument("crop_band: band edge not on the voxel lattice");
    }
    return r;
  };
  const long long x0 = to_index(0.0, spec.origin[0], spec.voxel_size[0]);
  const long long x1 = to_index(band, spec.origin[0], spec.voxel_size[0]);
  const long long y0 = to_index(-band / 2.0, spec.origin[1], spec.voxel_size[1]);
  const long long y1 = to_index(band / 2.0, spec.origin[1], spec.voxel_size[1]);
  if (x0 < 0 || x1 > spec.dims[0] || y0 < 0 || y1 > spec.dims[1] || x0 >= x1 || y0 >= y1) {
    throw std::invalid_argument("crop_band: band " + std::to_string(band) +
                                " exceeds the grid extent");
  }
  GridSpec sub;
  sub.dims = {static_cast<int>(x1 - x0), static_cast<int>(y1 - y0), spec.dims[2]};
  sub.origin = {spec.origin[0] + x0 * spec.voxel_size[0], spec.origin[1] + y0 * spec.voxel_size[1],
                spec.origin[2]};
  sub.voxel_size = spec.voxel_size;

  std::vector<ClassId> labels(sub.volume());
  const int nz = spec.dims[2];
  std::size_t k = 0;
  for (long long ix = x0; ix < x1; ++ix) {
    for (long long iy = y0; iy < y1; ++iy) {
      const std::size_t base =
          (static_cast<std::size_t>(ix) * spec.dims[1] + static_cast<std::size_t>(iy)) * nz;
      for (int iz = 0; iz < nz; ++iz) labels[k++] = grid.labels()[base + iz];
    }
  }
  return VoxelGrid(sub, std::move(labels), grid.frame_id());
}

std::vector<BandMetrics> banded_eval(const VoxelGrid& pred, const VoxelGrid& gt,
                                     const std::vector<double>& bands, bool mask_invalid,
                                     int num_classes) {
  std::vector<BandMetrics> out;
  out.reserve(bands.size());
  for (double band : bands) {
    const VoxelGrid pc = crop_band(pred, band);
    const VoxelGrid gc = crop_band(gt, band);
    const ConfusionMatrix cm = accumulate_confusion(pc, gc, mask_invalid, num_classes);
    BandMetrics bm;
    bm.band = band;
    bm.iou = iou(cm);
    bm.semantic = miou(cm);
    out.push_back(std::move(bm));
  }
  return out;
}

}  // namespace semvox
