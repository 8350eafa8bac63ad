// Copyright 2026 The cfq Authors. All Rights Reserved.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

#pragma once

#include <array>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <string>

#include <Eigen/Core>

#include "cfq/error.hpp"

namespace cfq {

using Dims4 = std::array<std::size_t, 4>;

std::string to_string(const Dims4& dims);

// Product of the four extents; throws NumericalError on 64-bit overflow.
std::uint64_t element_count(const Dims4& dims);

// Dense 4-D tensor, row-major with axis 0 slowest: element (i,j,k,l) lives at
// ((i*d1 + j)*d2 + k)*d3 + l.
//
// Kernels use dims [in-channels, kernel-h, kernel-w, out-channels];
// activations use [channels, height, width, batch]. Instances are immutable
// once constructed and every element is finite.
template <typename Scalar>
class BasicTensor4 {
 public:
  using Vector = Eigen::Matrix<Scalar, Eigen::Dynamic, 1>;

  BasicTensor4() : BasicTensor4(Dims4{1, 1, 1, 1}) {}

  // Zero-filled.
  explicit BasicTensor4(const Dims4& dims)
      : dims_(checked_dims(dims)), data_(Vector::Zero(static_cast<Eigen::Index>(element_count(dims)))) {}

  BasicTensor4(const Dims4& dims, Vector data) : dims_(checked_dims(dims)), data_(std::move(data)) {
    if (static_cast<std::uint64_t>(data_.size()) != element_count(dims_)) {
      throw DimensionError("tensor data length " + std::to_string(data_.size()) +
                           " does not match dims " + to_string(dims_));
    }
    if (!data_.allFinite()) throw NumericalError("tensor contains non-finite values");
  }

  const Dims4& dims() const { return dims_; }
  std::size_t dim(std::size_t axis) const { return dims_[axis]; }
  std::size_t size() const { return static_cast<std::size_t>(data_.size()); }
  const Vector& data() const { return data_; }

  std::size_t offset(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return ((i * dims_[1] + j) * dims_[2] + k) * dims_[3] + l;
  }

  Scalar operator()(std::size_t i, std::size_t j, std::size_t k, std::size_t l) const {
    return data_[static_cast<Eigen::Index>(offset(i, j, k, l))];
  }

  template <typename Other>
  BasicTensor4<Other> cast() const {
    return BasicTensor4<Other>(dims_, data_.template cast<Other>());
  }

  friend bool operator==(const BasicTensor4& a, const BasicTensor4& b) {
    return a.dims_ == b.dims_ && a.data_ == b.data_;
  }

 private:
  static Dims4 checked_dims(const Dims4& dims) {
    for (std::size_t d : dims) {
      if (d == 0) throw DimensionError("tensor extents must be >= 1, got " + to_string(dims));
    }
    element_count(dims);
    return dims;
  }

  Dims4 dims_;
  Vector data_;
};

using Tensor4 = BasicTensor4<float>;

// sqrt of the sum of squares, accumulated in double.
template <typename Scalar>
double frobenius_norm(const BasicTensor4<Scalar>& t) {
  double sum = 0.0;
  for (Eigen::Index i = 0; i < t.data().size(); ++i) {
    const double v = static_cast<double>(t.data()[i]);
    sum += v * v;
  }
  return std::sqrt(sum);
}

// ||a - b||_F, accumulated in double. Throws DimensionError on shape mismatch.
template <typename Scalar>
double frobenius_distance(const BasicTensor4<Scalar>& a, const BasicTensor4<Scalar>& b) {
  if (a.dims() != b.dims()) {
    throw DimensionError("dims mismatch: " + to_string(a.dims()) + " vs " + to_string(b.dims()));
  }
  double sum = 0.0;
  for (Eigen::Index i = 0; i < a.data().size(); ++i) {
    const double d = static_cast<double>(a.data()[i]) - static_cast<double>(b.data()[i]);
    sum += d * d;
  }
  return std::sqrt(sum);
}

// ||a - b||_F / ||a||_F. The reference `a` must have non-zero norm.
template <typename Scalar>
double relative_error(const BasicTensor4<Scalar>& a, const BasicTensor4<Scalar>& b) {
  const double dist = frobenius_distance(a, b);
  const double ref = frobenius_norm(a);
  if (ref == 0.0) throw NumericalError("relative error against a zero-norm reference");
  return dist / ref;
}

template <typename Scalar>
BasicTensor4<Scalar> scaled(const BasicTensor4<Scalar>& t, Scalar factor) {
  return BasicTensor4<Scalar>(t.dims(), t.data() * factor);
}

// Elementwise max(0, x).
Tensor4 relu(const Tensor4& t);

}  // namespace cfq
