// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#include "semvox/dualflow/losses.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>
#include <string>

namespace semvox::dualflow {

namespace {

void check_inputs(const Tensor& x, const std::vector<ClassId>& gt) {
  if (x.rank() != 2) throw std::invalid_argument("loss: expected (N, C) input");
  if (static_cast<std::size_t>(x.dim(0)) != gt.size()) {
    throw std::invalid_argument("loss: label count " + std::to_string(gt.size()) +
                                " != row count " + std::to_string(x.dim(0)));
  }
  for (ClassId c : gt) {
    if (c != kInvalidClass && c >= x.dim(1)) {
      throw std::invalid_argument("loss: label " + std::to_string(int(c)) +
                                  " outside the class columns");
    }
  }
}

}  // namespace

Tensor softmax_rows(const Tensor& logits) {
  if (logits.rank() != 2) throw std::invalid_argument("softmax_rows: expected (N, C)");
  const int n = logits.dim(0), c = logits.dim(1);
  Tensor p = logits;
  for (int i = 0; i < n; ++i) {
    double* row = p.data() + static_cast<std::size_t>(i) * c;
    double m = row[0];
    for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) {
      row[j] = std::exp(row[j] - m);
      z += row[j];
    }
    for (int j = 0; j < c; ++j) row[j] /= z;
  }
  return p;
}

LossResult ce_loss(const Tensor& logits, const std::vector<ClassId>& gt) {
  check_inputs(logits, gt);
  const int n = logits.dim(0), c = logits.dim(1);
  LossResult out;
  out.grad = Tensor({n, c});

  std::size_t count = 0;
  for (ClassId g : gt) {
    if (g != kInvalidClass) ++count;
  }
  if (count == 0) throw std::runtime_error("ce_loss: every voxel is masked; loss undefined");

  double total = 0.0;
  for (int i = 0; i < n; ++i) {
    if (gt[i] == kInvalidClass) continue;
    const double* row = logits.data() + static_cast<std::size_t>(i) * c;
    double m = row[0];
    for (int j = 1; j < c; ++j) m = std::max(m, row[j]);
    double z = 0.0;
    for (int j = 0; j < c; ++j) z += std::exp(row[j] - m);
    const double lse = m + std::log(z);
    total += lse - row[gt[i]];
    double* grow = out.grad.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) {
      grow[j] = std::exp(row[j] - lse) / static_cast<double>(count);
    }
    grow[gt[i]] -= 1.0 / static_cast<double>(count);
  }
  out.value = total / static_cast<double>(count);
  return out;
}

LossResult lovasz_loss(const Tensor& probabilities, const std::vector<ClassId>& gt) {
  check_inputs(probabilities, gt);
  const int n = probabilities.dim(0), c = probabilities.dim(1);
  LossResult out;
  out.grad = Tensor({n, c});

  std::vector<int> rows;  // unmasked voxels
  rows.reserve(n);
  for (int i = 0; i < n; ++i) {
    if (gt[i] != kInvalidClass) rows.push_back(i);
  }
  if (rows.empty()) throw std::runtime_error("lovasz_loss: every voxel is masked; loss undefined");

  std::vector<int> present;
  for (int cls = 0; cls < c; ++cls) {
    for (int i : rows) {
      if (gt[i] == cls) {
        present.push_back(cls);
        break;
      }
    }
  }
  if (present.empty()) {
    throw std::runtime_error("lovasz_loss: no class present in the ground truth");
  }

  const std::size_t m = rows.size();
  std::vector<double> errors(m);
  std::vector<char> fg(m);
  std::vector<std::size_t> order(m);
  std::vector<double> coeff(m);

  double total = 0.0;
  for (int cls : present) {
    double gts = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      fg[k] = gt[rows[k]] == cls ? 1 : 0;
      gts += fg[k];
      const double p = probabilities(rows[k], cls);
      errors[k] = fg[k] ? 1.0 - p : p;
    }
    std::iota(order.begin(), order.end(), std::size_t{0});
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return errors[a] > errors[b]; });

    // discrete gradient of the Jaccard extension along the sorted errors
    double inter = gts, uni = gts, prev_jac = 0.0;
    double loss_c = 0.0;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = order[k];
      if (fg[i]) {
        inter -= 1.0;
      } else {
        uni += 1.0;
      }
      const double jac = 1.0 - inter / uni;
      coeff[k] = k == 0 ? jac : jac - prev_jac;
      prev_jac = jac;
      loss_c += errors[i] * coeff[k];
    }
    total += loss_c;
    for (std::size_t k = 0; k < m; ++k) {
      const std::size_t i = order[k];
      out.grad(rows[i], cls) += (fg[i] ? -1.0 : 1.0) * coeff[k];
    }
  }

  const double inv = 1.0 / static_cast<double>(present.size());
  out.value = total * inv;
  for (double& g : out.grad.values()) g *= inv;
  return out;
}

LossResult ssc_loss(const Tensor& logits, const std::vector<ClassId>& gt) {
  const LossResult ce = ce_loss(logits, gt);
  const Tensor probs = softmax_rows(logits);
  const LossResult lv = lovasz_loss(probs, gt);

  LossResult out;
  out.value = ce.value + lv.value;
  out.grad = ce.grad;
  // chain the Lovasz gradient through the softmax: dL/dz_i = p_i (g_i - sum_j g_j p_j)
  const int n = logits.dim(0), c = logits.dim(1);
  for (int i = 0; i < n; ++i) {
    const double* p = probs.data() + static_cast<std::size_t>(i) * c;
    const double* g = lv.grad.data() + static_cast<std::size_t>(i) * c;
    double dot = 0.0;
    for (int j = 0; j < c; ++j) dot += g[j] * p[j];
    double* o = out.grad.data() + static_cast<std::size_t>(i) * c;
    for (int j = 0; j < c; ++j) o[j] += p[j] * (g[j] - dot);
  }
  return out;
}

}  // namespace semvox::dualflow
