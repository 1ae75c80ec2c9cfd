// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <vector>

#include "semvox/dualflow/tensor.hpp"
#include "semvox/voxel_core.hpp"

namespace semvox::dualflow {

struct LossResult {
  double value = 0.0;
  Tensor grad;  // same shape as the loss input
};

/// Mean negative log-softmax of the true class over unmasked voxels, with
/// the analytic gradient (softmax - onehot) / count. Labels equal to 255 are
/// excluded; an all-masked batch is an error.
LossResult ce_loss(const Tensor& logits, const std::vector<ClassId>& gt);

/// Row softmax of logits (N, C).
Tensor softmax_rows(const Tensor& logits);

/// Lovasz-softmax over probabilities (N, C): per class present in the
/// unmasked ground truth, hinge errors |fg - p| are sorted descending and
/// weighted by the discrete Jaccard-extension gradient; the mean over
/// present classes is returned together with the analytic subgradient.
/// The subgradient is unique away from sorting ties.
LossResult lovasz_loss(const Tensor& probabilities, const std::vector<ClassId>& gt);

/// Total supervision: ce_loss(logits) + lovasz_loss(softmax(logits)), with
/// the combined gradient w.r.t. the logits (Lovasz part chained through the
/// softmax Jacobian). The value is exactly the sum of the two terms.
LossResult ssc_loss(const Tensor& logits, const std::vector<ClassId>& gt);

}  // namespace semvox::dualflow
