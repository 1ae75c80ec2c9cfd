// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstdint>
#include <random>
#include <vector>

#include "semvox/dualflow/tensor.hpp"

namespace semvox::dualflow {

/// Shape configuration of the attention stack.
struct KernelConfig {
  int patch_h = 7;
  int patch_w = 7;
  int stride_h = 3;
  int stride_w = 3;
  int local_frames = 4;      // T_l
  int reference_frames = 2;  // T_r
  int reference_radius = 10; // sequence range the reference frames sample from
  int embed_dim = 256;       // c_e
  int heads = 4;
  int height_tokens = 32;  // W_z
  int blocks = 2;

  int total_frames() const { return local_frames + reference_frames; }
  void validate() const;  // throws std::invalid_argument
};

/// Dense affine map on the last tensor dim: (.., in) -> (.., out).
struct Linear {
  Tensor weight;  // (in, out)
  Tensor bias;    // (out)

  static Linear random(int in, int out, std::mt19937_64& eng);  // U(+-1/sqrt(in))
  static Linear identity(int n);

  int in_dim() const { return weight.dim(0); }
  int out_dim() const { return weight.dim(1); }
  Tensor apply(const Tensor& x) const;
};

/// Last-dim layer normalization with learned scale/shift (init 1/0).
struct LayerNorm {
  Tensor gamma;
  Tensor beta;
  double eps = 1e-5;

  static LayerNorm unit(int n);
  Tensor apply(const Tensor& x) const;
};

/// Numerically stable softmax over the last dim.
Tensor softmax_last(const Tensor& x);

/// BEV feature/positional encoder: linear embedding with layer norm, then
/// four conv blocks (two 3x3 convs with ReLU, then 2x2 max-pool), halving
/// the spatial dims per block. Input (h, w, c_in), output (h/16, w/16, 80).
struct BevEncoder {
  Linear embed;
  LayerNorm norm;
  struct ConvBlock {
    Tensor w1, b1;  // (3, 3, c, c), (c)
    Tensor w2, b2;
  };
  std::vector<ConvBlock> blocks;
  int channels = 80;

  static BevEncoder make(int in_channels, std::uint64_t seed, int channels = 80);
  Tensor forward(const Tensor& volume) const;  // throws when h or w % 16 != 0
};

/// Overlapping patch geometry of the soft split. Token grid dims follow
/// floor((extent - patch) / stride) + 1; pixels past the last patch are
/// uncovered and reconstruct to zero.
struct PatchGeometry {
  int h = 0, w = 0, c = 0;
  int patch_h = 7, patch_w = 7;
  int stride_h = 3, stride_w = 3;

  int tokens_h() const { return (h - patch_h) / stride_h + 1; }
  int tokens_w() const { return (w - patch_w) / stride_w + 1; }
  int patch_elems() const { return patch_h * patch_w * c; }
  void validate() const;
};

/// Per-pixel patch coverage counts (h*w), the overlap-add normalizer.
std::vector<int> coverage_counts(const PatchGeometry& geom);

/// Soft split: overlapping patches flattened and projected to the embedding.
struct SoftSplit {
  PatchGeometry geom;
  Linear proj;  // (patch_elems, embed)

  static SoftSplit make(const PatchGeometry& geom, int embed_dim, std::uint64_t seed);
  /// Identity projection (embed == patch_elems); the exact inverse pair
  /// with soft_composite for round-trip checks.
  static SoftSplit identity(const PatchGeometry& geom);

  /// (T, h, w, c) -> (T, tokens_h*tokens_w, embed)
  Tensor apply(const Tensor& x) const;
};

/// Inverse of the soft split: unproject tokens to patches, overlap-add, and
/// divide by per-pixel coverage. With identity projections this inverts
/// SoftSplit::apply exactly up to roundoff.
Tensor soft_composite(const Tensor& tokens, const PatchGeometry& geom, const Linear& unproj);

/// LayerNorm + joint QKV projection + dense multi-head attention over all
/// spatio-temporal tokens, plus the residual input. No output projection:
/// with a single token the output is exactly value + residual.
struct BevAttention {
  LayerNorm ln;
  Linear qkv;  // (embed, 3*embed)
  int heads = 4;

  static BevAttention make(int embed_dim, int heads, std::uint64_t seed);
  static BevAttention zeroed(int embed_dim, int heads);

  /// tokens (T, N, embed) -> same shape.
  Tensor apply(const Tensor& tokens) const;
};

/// Height-axis attention: per token-grid location, the embedding splits into
/// height_tokens sub-tokens of embed/height_tokens channels per frame; plain
/// scaled dot-product attention runs over the (frame x height) token set and
/// the result is reshaped back. No learned parameters.
Tensor pillar_attention(const Tensor& tokens, int height_tokens);

/// Projected sum of the two branches: proj_z(z_z) + proj_bev(z_bev).
struct DualFlowFuse {
  Linear proj_z;
  Linear proj_bev;

  static DualFlowFuse make(int embed_dim, std::uint64_t seed);
  Tensor apply(const Tensor& z_z, const Tensor& z_bev) const;
};

/// One attention block: BEV branch and pillar branch fused by projection.
struct DualFlowBlock {
  BevAttention attention;
  DualFlowFuse fuse;
  int height_tokens = 32;

  static DualFlowBlock make(const KernelConfig& cfg, std::uint64_t seed);
  Tensor forward(const Tensor& tokens) const;
};

}  // namespace semvox::dualflow
