// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#include "semvox/dualflow/tensor.hpp"

#include <cmath>
#include <stdexcept>
#include <string>

namespace semvox::dualflow {

Tensor::Tensor(std::vector<int> dims) : dims_(std::move(dims)) {
  std::size_t n = 1;
  for (int d : dims_) {
    if (d < 1) throw std::invalid_argument("Tensor: dims must be >= 1");
    n *= static_cast<std::size_t>(d);
  }
  data_.assign(n, 0.0);
}

Tensor Tensor::full(std::vector<int> dims, double value) {
  Tensor t(std::move(dims));
  for (double& v : t.data_) v = value;
  return t;
}

void Tensor::ensure_finite(const char* what) const {
  for (double v : data_) {
    if (!std::isfinite(v)) {
      throw std::runtime_error(std::string(what) + ": non-finite value in tensor");
    }
  }
}

Tensor add(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("add: shape mismatch");
  Tensor out = a;
  for (std::size_t i = 0; i < out.size(); ++i) out.values()[i] += b.values()[i];
  return out;
}

Tensor concat_time(const Tensor& a, const Tensor& b) {
  if (a.rank() != b.rank() || a.rank() < 1) throw std::invalid_argument("concat_time: rank mismatch");
  for (int i = 1; i < a.rank(); ++i) {
    if (a.dim(i) != b.dim(i)) throw std::invalid_argument("concat_time: trailing dims differ");
  }
  std::vector<int> dims = a.dims();
  dims[0] += b.dim(0);
  Tensor out(dims);
  std::copy(a.values().begin(), a.values().end(), out.values().begin());
  std::copy(b.values().begin(), b.values().end(), out.values().begin() + a.size());
  return out;
}

double max_abs_diff(const Tensor& a, const Tensor& b) {
  if (!a.same_shape(b)) throw std::invalid_argument("max_abs_diff: shape mismatch");
  double worst = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    worst = std::max(worst, std::abs(a.values()[i] - b.values()[i]));
  }
  return worst;
}

}  // namespace semvox::dualflow
