// Copyright 2026 semvox contributors
// SPDX-License-Identifier: Apache-2.0

#pragma once

#include <cstddef>
#include <vector>

namespace semvox::dualflow {

/// Dense row-major double tensor; the only container the kernel math uses.
class Tensor {
 public:
  Tensor() = default;
  explicit Tensor(std::vector<int> dims);

  static Tensor full(std::vector<int> dims, double value);

  const std::vector<int>& dims() const { return dims_; }
  int dim(int i) const { return dims_[i]; }
  int rank() const { return static_cast<int>(dims_.size()); }
  std::size_t size() const { return data_.size(); }

  double* data() { return data_.data(); }
  const double* data() const { return data_.data(); }
  std::vector<double>& values() { return data_; }
  const std::vector<double>& values() const { return data_; }

  double& operator()(int i) { return data_[i]; }
  double operator()(int i) const { return data_[i]; }
  double& operator()(int i, int j) { return data_[static_cast<std::size_t>(i) * dims_[1] + j]; }
  double operator()(int i, int j) const {
    return data_[static_cast<std::size_t>(i) * dims_[1] + j];
  }
  double& operator()(int i, int j, int k) {
    return data_[(static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k];
  }
  double operator()(int i, int j, int k) const {
    return data_[(static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k];
  }
  double& operator()(int i, int j, int k, int l) {
    return data_[((static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
  }
  double operator()(int i, int j, int k, int l) const {
    return data_[((static_cast<std::size_t>(i) * dims_[1] + j) * dims_[2] + k) * dims_[3] + l];
  }

  bool same_shape(const Tensor& other) const { return dims_ == other.dims_; }

  /// Throws std::runtime_error naming `what` when any value is NaN/Inf.
  void ensure_finite(const char* what) const;

 private:
  std::vector<int> dims_;
  std::vector<double> data_;
};

/// Elementwise sum; shapes must match.
Tensor add(const Tensor& a, const Tensor& b);

/// Concatenation along dim 0 (the time axis); trailing dims must match.
Tensor concat_time(const Tensor& a, const Tensor& b);

double max_abs_diff(const Tensor& a, const Tensor& b);

}  // namespace semvox::dualflow
