// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#include "semvox/dualflow/kernel.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>
#include <string>

namespace semvox::dualflow {

void KernelConfig::validate() const {
  if (patch_h < 1 || patch_w < 1 || stride_h < 1 || stride_w < 1) {
    throw std::invalid_argument("KernelConfig: patch/stride must be >= 1");
  }
  if (stride_h > patch_h || stride_w > patch_w) {
    throw std::invalid_argument("KernelConfig: stride must not exceed patch size");
  }
  if (local_frames < 1 || reference_frames < 0 || reference_radius < 0 || blocks < 1) {
    throw std::invalid_argument("KernelConfig: bad frame/block counts");
  }
  if (embed_dim < 1 || heads < 1 || embed_dim % heads != 0) {
    throw std::invalid_argument("KernelConfig: embed_dim must divide by heads");
  }
  if (height_tokens < 1 || embed_dim % height_tokens != 0) {
    throw std::invalid_argument("KernelConfig: embed_dim must divide by height_tokens");
  }
}

Linear Linear::random(int in, int out, std::mt19937_64& eng) {
  Linear l;
  l.weight = Tensor({in, out});
  l.bias = Tensor({out});
  const double bound = 1.0 / std::sqrt(static_cast<double>(in));
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& v : l.weight.values()) v = u(eng);
  for (double& v : l.bias.values()) v = u(eng);
  return l;
}

Linear Linear::identity(int n) {
  Linear l;
  l.weight = Tensor({n, n});
  l.bias = Tensor({n});
  for (int i = 0; i < n; ++i) l.weight(i, i) = 1.0;
  return l;
}

Tensor Linear::apply(const Tensor& x) const {
  const int in = in_dim(), out = out_dim();
  if (x.rank() < 1 || x.dim(x.rank() - 1) != in) {
    throw std::invalid_argument("Linear: last dim " +
                                std::to_string(x.dim(x.rank() - 1)) + " != " + std::to_string(in));
  }
  std::vector<int> odims = x.dims();
  odims.back() = out;
  Tensor y(odims);
  const std::size_t rows = x.size() / in;
  const double* xd = x.data();
  const double* wd = weight.data();
  const double* bd = bias.data();
  double* yd = y.data();
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(rows); ++r) {
    const double* xr = xd + static_cast<std::size_t>(r) * in;
    double* yr = yd + static_cast<std::size_t>(r) * out;
    for (int o = 0; o < out; ++o) yr[o] = bd[o];
    for (int i = 0; i < in; ++i) {
      const double xv = xr[i];
      if (xv == 0.0) continue;
      const double* wrow = wd + static_cast<std::size_t>(i) * out;
      for (int o = 0; o < out; ++o) yr[o] += xv * wrow[o];
    }
  }
  return y;
}

LayerNorm LayerNorm::unit(int n) {
  LayerNorm ln;
  ln.gamma = Tensor::full({n}, 1.0);
  ln.beta = Tensor({n});
  return ln;
}

Tensor LayerNorm::apply(const Tensor& x) const {
  const int n = gamma.dim(0);
  if (x.dim(x.rank() - 1) != n) throw std::invalid_argument("LayerNorm: last dim mismatch");
  Tensor y = x;
  const std::size_t rows = x.size() / n;
#pragma omp parallel for schedule(static)
  for (std::int64_t r = 0; r < static_cast<std::int64_t>(rows); ++r) {
    double* row = y.data() + static_cast<std::size_t>(r) * n;
    double mean = 0.0;
    for (int i = 0; i < n; ++i) mean += row[i];
    mean /= n;
    double var = 0.0;
    for (int i = 0; i < n; ++i) var += (row[i] - mean) * (row[i] - mean);
    var /= n;
    const double inv = 1.0 / std::sqrt(var + eps);
    for (int i = 0; i < n; ++i) {
      row[i] = (row[i] - mean) * inv * gamma(i) + beta(i);
    }
  }
  return y;
}

Tensor softmax_last(const Tensor& x) {
  const int n = x.dim(x.rank() - 1);
  Tensor y = x;
  const std::size_t rows = x.size() / n;
  for (std::size_t r = 0; r < rows; ++r) {
    double* row = y.data() + r * n;
    double m = row[0];
    for (int i = 1; i < n; ++i) m = std::max(m, row[i]);
    double z = 0.0;
    for (int i = 0; i < n; ++i) {
      row[i] = std::exp(row[i] - m);
      z += row[i];
    }
    for (int i = 0; i < n; ++i) row[i] /= z;
  }
  return y;
}

namespace {

Tensor conv3x3_relu(const Tensor& x, const Tensor& w, const Tensor& b) {
  // x (h, w, cin), w (3, 3, cin, cout), zero padding, fused ReLU
  const int h = x.dim(0), wd = x.dim(1), cin = x.dim(2), cout = w.dim(3);
  Tensor y({h, wd, cout});
#pragma omp parallel for schedule(static)
  for (int i = 0; i < h; ++i) {
    for (int j = 0; j < wd; ++j) {
      for (int o = 0; o < cout; ++o) {
        double acc = b(o);
        for (int di = -1; di <= 1; ++di) {
          const int si = i + di;
          if (si < 0 || si >= h) continue;
          for (int dj = -1; dj <= 1; ++dj) {
            const int sj = j + dj;
            if (sj < 0 || sj >= wd) continue;
            for (int c = 0; c < cin; ++c) {
              acc += x(si, sj, c) * w(di + 1, dj + 1, c, o);
            }
          }
        }
        y(i, j, o) = acc > 0.0 ? acc : 0.0;
      }
    }
  }
  return y;
}

Tensor maxpool2(const Tensor& x) {
  const int h = x.dim(0), w = x.dim(1), c = x.dim(2);
  Tensor y({h / 2, w / 2, c});
#pragma omp parallel for schedule(static)
  for (int i = 0; i < h / 2; ++i) {
    for (int j = 0; j < w / 2; ++j) {
      for (int k = 0; k < c; ++k) {
        const double a = x(2 * i, 2 * j, k), b = x(2 * i, 2 * j + 1, k);
        const double cc = x(2 * i + 1, 2 * j, k), d = x(2 * i + 1, 2 * j + 1, k);
        y(i, j, k) = std::max(std::max(a, b), std::max(cc, d));
      }
    }
  }
  return y;
}

Tensor random_conv(int cin, int cout, std::mt19937_64& eng) {
  Tensor w({3, 3, cin, cout});
  const double bound = 1.0 / std::sqrt(9.0 * cin);
  std::uniform_real_distribution<double> u(-bound, bound);
  for (double& v : w.values()) v = u(eng);
  return w;
}

}  // namespace

BevEncoder BevEncoder::make(int in_channels, std::uint64_t seed, int channels) {
  std::mt19937_64 eng(seed);
  BevEncoder enc;
  enc.channels = channels;
  enc.embed = Linear::random(in_channels, channels, eng);
  enc.norm = LayerNorm::unit(channels);
  std::uniform_real_distribution<double> u(-1.0 / std::sqrt(double(channels)),
                                           1.0 / std::sqrt(double(channels)));
  for (int blk = 0; blk < 4; ++blk) {
    ConvBlock cb;
    cb.w1 = random_conv(channels, channels, eng);
    cb.b1 = Tensor({channels});
    for (double& v : cb.b1.values()) v = u(eng);
    cb.w2 = random_conv(channels, channels, eng);
    cb.b2 = Tensor({channels});
    for (double& v : cb.b2.values()) v = u(eng);
    enc.blocks.push_back(std::move(cb));
  }
  return enc;
}

Tensor BevEncoder::forward(const Tensor& volume) const {
  if (volume.rank() != 3) throw std::invalid_argument("BevEncoder: expected (h, w, c) input");
  if (volume.dim(0) % 16 != 0 || volume.dim(1) % 16 != 0) {
    throw std::invalid_argument("BevEncoder: spatial dims must be divisible by 16");
  }
  Tensor x = norm.apply(embed.apply(volume));
  for (const ConvBlock& blk : blocks) {
    x = conv3x3_relu(x, blk.w1, blk.b1);
    x = conv3x3_relu(x, blk.w2, blk.b2);
    x = maxpool2(x);
  }
  x.ensure_finite("BevEncoder::forward");
  return x;
}

void PatchGeometry::validate() const {
  if (h < patch_h || w < patch_w) {
    throw std::invalid_argument("PatchGeometry: input smaller than the patch");
  }
  if (stride_h < 1 || stride_w < 1 || stride_h > patch_h || stride_w > patch_w) {
    throw std::invalid_argument("PatchGeometry: stride must be in [1, patch]");
  }
  if (c < 1) throw std::invalid_argument("PatchGeometry: channels must be >= 1");
}

std::vector<int> coverage_counts(const PatchGeometry& geom) {
  geom.validate();
  std::vector<int> counts(static_cast<std::size_t>(geom.h) * geom.w, 0);
  for (int ti = 0; ti < geom.tokens_h(); ++ti) {
    for (int tj = 0; tj < geom.tokens_w(); ++tj) {
      for (int pi = 0; pi < geom.patch_h; ++pi) {
        for (int pj = 0; pj < geom.patch_w; ++pj) {
          counts[static_cast<std::size_t>(ti * geom.stride_h + pi) * geom.w +
                 (tj * geom.stride_w + pj)] += 1;
        }
      }
    }
  }
  return counts;
}

SoftSplit SoftSplit::make(const PatchGeometry& geom, int embed_dim, std::uint64_t seed) {
  geom.validate();
  std::mt19937_64 eng(seed);
  SoftSplit ss;
  ss.geom = geom;
  ss.proj = Linear::random(geom.patch_elems(), embed_dim, eng);
  return ss;
}

SoftSplit SoftSplit::identity(const PatchGeometry& geom) {
  geom.validate();
  SoftSplit ss;
  ss.geom = geom;
  ss.proj = Linear::identity(geom.patch_elems());
  return ss;
}

Tensor SoftSplit::apply(const Tensor& x) const {
  if (x.rank() != 4 || x.dim(1) != geom.h || x.dim(2) != geom.w || x.dim(3) != geom.c) {
    throw std::invalid_argument("SoftSplit: input shape does not match the patch geometry");
  }
  const int frames = x.dim(0);
  const int th = geom.tokens_h(), tw = geom.tokens_w();
  Tensor patches({frames, th * tw, geom.patch_elems()});
#pragma omp parallel for schedule(static)
  for (int t = 0; t < frames; ++t) {
    for (int ti = 0; ti < th; ++ti) {
      for (int tj = 0; tj < tw; ++tj) {
        double* dst = patches.data() +
                      ((static_cast<std::size_t>(t) * th * tw) + ti * tw + tj) *
                          geom.patch_elems();
        std::size_t p = 0;
        for (int pi = 0; pi < geom.patch_h; ++pi) {
          for (int pj = 0; pj < geom.patch_w; ++pj) {
            for (int ch = 0; ch < geom.c; ++ch) {
              dst[p++] = x(t, ti * geom.stride_h + pi, tj * geom.stride_w + pj, ch);
            }
          }
        }
      }
    }
  }
  return proj.apply(patches);
}

Tensor soft_composite(const Tensor& tokens, const PatchGeometry& geom, const Linear& unproj) {
  geom.validate();
  const int th = geom.tokens_h(), tw = geom.tokens_w();
  if (tokens.rank() != 3 || tokens.dim(1) != th * tw) {
    throw std::invalid_argument("soft_composite: token grid does not match the geometry");
  }
  if (unproj.out_dim() != geom.patch_elems()) {
    throw std::invalid_argument("soft_composite: unprojection must produce patch_elems values");
  }
  const Tensor patches = unproj.apply(tokens);
  const int frames = tokens.dim(0);
  Tensor out({frames, geom.h, geom.w, geom.c});
  const std::vector<int> counts = coverage_counts(geom);
#pragma omp parallel for schedule(static)
  for (int t = 0; t < frames; ++t) {
    for (int ti = 0; ti < th; ++ti) {
      for (int tj = 0; tj < tw; ++tj) {
        const double* src = patches.data() +
                            ((static_cast<std::size_t>(t) * th * tw) + ti * tw + tj) *
                                geom.patch_elems();
        std::size_t p = 0;
        for (int pi = 0; pi < geom.patch_h; ++pi) {
          for (int pj = 0; pj < geom.patch_w; ++pj) {
            for (int ch = 0; ch < geom.c; ++ch) {
              out(t, ti * geom.stride_h + pi, tj * geom.stride_w + pj, ch) += src[p++];
            }
          }
        }
      }
    }
  }
#pragma omp parallel for schedule(static)
  for (int t = 0; t < frames; ++t) {
    for (int i = 0; i < geom.h; ++i) {
      for (int j = 0; j < geom.w; ++j) {
        const int n = counts[static_cast<std::size_t>(i) * geom.w + j];
        if (n <= 1) continue;  // uncovered pixels stay zero
        for (int ch = 0; ch < geom.c; ++ch) out(t, i, j, ch) /= n;
      }
    }
  }
  return out;
}

BevAttention BevAttention::make(int embed_dim, int heads, std::uint64_t seed) {
  if (embed_dim % heads != 0) throw std::invalid_argument("BevAttention: heads must divide embed");
  std::mt19937_64 eng(seed);
  BevAttention att;
  att.ln = LayerNorm::unit(embed_dim);
  att.qkv = Linear::random(embed_dim, 3 * embed_dim, eng);
  att.heads = heads;
  return att;
}

BevAttention BevAttention::zeroed(int embed_dim, int heads) {
  BevAttention att;
  att.ln = LayerNorm::unit(embed_dim);
  att.qkv.weight = Tensor({embed_dim, 3 * embed_dim});
  att.qkv.bias = Tensor({3 * embed_dim});
  att.heads = heads;
  return att;
}

Tensor BevAttention::apply(const Tensor& tokens) const {
  if (tokens.rank() != 3) throw std::invalid_argument("BevAttention: expected (T, N, embed)");
  const int embed = qkv.in_dim();
  if (tokens.dim(2) != embed) throw std::invalid_argument("BevAttention: embed dim mismatch");
  const int m = tokens.dim(0) * tokens.dim(1);  // all spatio-temporal tokens attend jointly
  const int dh = embed / heads;
  const double scale = 1.0 / std::sqrt(static_cast<double>(dh));

  const Tensor qkv_out = qkv.apply(ln.apply(tokens));
  const double* qkv_d = qkv_out.data();
  Tensor out = tokens;  // residual
  double* out_d = out.data();

#pragma omp parallel for schedule(static) collapse(2)
  for (int h = 0; h < heads; ++h) {
    for (int qi = 0; qi < m; ++qi) {
      const double* q = qkv_d + static_cast<std::size_t>(qi) * 3 * embed + h * dh;
      std::vector<double> logits(m);
      double lmax = -1e300;
      for (int ki = 0; ki < m; ++ki) {
        const double* kk = qkv_d + static_cast<std::size_t>(ki) * 3 * embed + embed + h * dh;
        double dot = 0.0;
        for (int d = 0; d < dh; ++d) dot += q[d] * kk[d];
        logits[ki] = dot * scale;
        lmax = std::max(lmax, logits[ki]);
      }
      double z = 0.0;
      for (int ki = 0; ki < m; ++ki) {
        logits[ki] = std::exp(logits[ki] - lmax);
        z += logits[ki];
      }
      double* dst = out_d + static_cast<std::size_t>(qi) * embed + h * dh;
      for (int ki = 0; ki < m; ++ki) {
        const double a = logits[ki] / z;
        const double* v = qkv_d + static_cast<std::size_t>(ki) * 3 * embed + 2 * embed + h * dh;
        for (int d = 0; d < dh; ++d) dst[d] += a * v[d];
      }
    }
  }
  out.ensure_finite("BevAttention::apply");
  return out;
}

Tensor pillar_attention(const Tensor& tokens, int height_tokens) {
  if (tokens.rank() != 3) throw std::invalid_argument("pillar_attention: expected (T, N, embed)");
  const int frames = tokens.dim(0), locations = tokens.dim(1), embed = tokens.dim(2);
  if (height_tokens < 1 || embed % height_tokens != 0) {
    throw std::invalid_argument("pillar_attention: embed dim must divide by height_tokens");
  }
  const int d = embed / height_tokens;
  const int m = frames * height_tokens;  // attention pool per location
  const double scale = 1.0 / std::sqrt(static_cast<double>(d));
  Tensor out(tokens.dims());

#pragma omp parallel for schedule(static)
  for (int loc = 0; loc < locations; ++loc) {
    // gather the (frame, height-slot) sub-tokens of this location
    std::vector<double> sub(static_cast<std::size_t>(m) * d);
    for (int t = 0; t < frames; ++t) {
      for (int hs = 0; hs < height_tokens; ++hs) {
        for (int k = 0; k < d; ++k) {
          sub[(static_cast<std::size_t>(t) * height_tokens + hs) * d + k] =
              tokens(t, loc, hs * d + k);
        }
      }
    }
    std::vector<double> result(static_cast<std::size_t>(m) * d, 0.0);
    std::vector<double> logits(m);
    for (int qi = 0; qi < m; ++qi) {
      const double* q = sub.data() + static_cast<std::size_t>(qi) * d;
      double lmax = -1e300;
      for (int ki = 0; ki < m; ++ki) {
        const double* kk = sub.data() + static_cast<std::size_t>(ki) * d;
        double dot = 0.0;
        for (int k = 0; k < d; ++k) dot += q[k] * kk[k];
        logits[ki] = dot * scale;
        lmax = std::max(lmax, logits[ki]);
      }
      double z = 0.0;
      for (int ki = 0; ki < m; ++ki) {
        logits[ki] = std::exp(logits[ki] - lmax);
        z += logits[ki];
      }
      double* dst = result.data() + static_cast<std::size_t>(qi) * d;
      for (int ki = 0; ki < m; ++ki) {
        const double a = logits[ki] / z;
        const double* v = sub.data() + static_cast<std::size_t>(ki) * d;
        for (int k = 0; k < d; ++k) dst[k] += a * v[k];
      }
    }
    for (int t = 0; t < frames; ++t) {
      for (int hs = 0; hs < height_tokens; ++hs) {
        for (int k = 0; k < d; ++k) {
          out(t, loc, hs * d + k) =
              result[(static_cast<std::size_t>(t) * height_tokens + hs) * d + k];
        }
      }
    }
  }
  out.ensure_finite("pillar_attention");
  return out;
}

DualFlowFuse DualFlowFuse::make(int embed_dim, std::uint64_t seed) {
  std::mt19937_64 eng(seed);
  DualFlowFuse f;
  f.proj_z = Linear::random(embed_dim, embed_dim, eng);
  f.proj_bev = Linear::random(embed_dim, embed_dim, eng);
  return f;
}

Tensor DualFlowFuse::apply(const Tensor& z_z, const Tensor& z_bev) const {
  if (!z_z.same_shape(z_bev)) throw std::invalid_argument("DualFlowFuse: branch shape mismatch");
  return add(proj_z.apply(z_z), proj_bev.apply(z_bev));
}

DualFlowBlock DualFlowBlock::make(const KernelConfig& cfg, std::uint64_t seed) {
  cfg.validate();
  DualFlowBlock blk;
  blk.attention = BevAttention::make(cfg.embed_dim, cfg.heads, seed * 2654435761u + 1);
  blk.fuse = DualFlowFuse::make(cfg.embed_dim, seed * 2654435761u + 2);
  blk.height_tokens = cfg.height_tokens;
  return blk;
}

Tensor DualFlowBlock::forward(const Tensor& tokens) const {
  const Tensor z_bev = attention.apply(tokens);
  const Tensor z_z = pillar_attention(tokens, height_tokens);
  return fuse.apply(z_z, z_bev);
}

}  // namespace semvox::dualflow
