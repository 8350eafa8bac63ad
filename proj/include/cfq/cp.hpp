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
#include <cstddef>
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "cfq/ref_conv.hpp"
#include "cfq/tensor.hpp"

namespace cfq {

// Rank-R canonic polyadic factors of a 4-D kernel. factors[n] has shape
// [k_n, R]; columns of modes 0..2 are unit-norm after fitting and the column
// weights live in mode 3.
struct CpFactors {
  std::array<Eigen::MatrixXf, 4> factors;

  std::size_t rank() const { return static_cast<std::size_t>(factors[0].cols()); }
  Dims4 dims() const {
    return {static_cast<std::size_t>(factors[0].rows()), static_cast<std::size_t>(factors[1].rows()),
            static_cast<std::size_t>(factors[2].rows()), static_cast<std::size_t>(factors[3].rows())};
  }
  // Throws DimensionError / NumericalError when ranks disagree or entries are
  // non-finite.
  void validate() const;
};

struct AlsOptions {
  std::uint64_t seed = 0;
  std::size_t max_iters = 500;
  // Stop when the relative residual moves by less than this between sweeps.
  double rel_fit_tol = 1e-6;
  // Singular values of the Gram product below tol * sigma_max are dropped.
  double pinv_tol = 1e-10;
};

struct CpFit {
  CpFactors factors;
  // ||W - CP||_F / ||W||_F after each sweep; non-increasing.
  std::vector<double> fit_history;
};

// Alternating least squares. Each sweep updates mode 3 (the weights) first,
// then modes 0, 1, 2, every update solving the normal equations against the
// Hadamard product of the other modes' Gram matrices.
CpFit cp_als(const Tensor4& w, std::size_t rank, const AlsOptions& opts = {});

// Same, starting from `init` instead of a random draw.
CpFit cp_als(const Tensor4& w, const CpFactors& init, const AlsOptions& opts = {});

// Appends one component: random unit columns in modes 0..2, zero weight in
// mode 3. The padded factors represent the same tensor as `f`.
CpFactors pad_rank(const CpFactors& f, std::uint64_t seed);

// T[i,j,k,l] = sum_r A0[i,r] A1[j,r] A2[k,r] A3[l,r].
Tensor4 cp_reconstruct(const CpFactors& f, const Dims4& dims);

// Factorized convolution, one rank-1 term at a time:
//   channel contraction with A0, vertical 1-D pass with A1, horizontal 1-D
//   pass with A2, then scatter into output channels with A3.
// Equal to conv2d_direct(x, cp_reconstruct(f)) up to rounding.
Counted<Tensor4> conv2d_cp(const Tensor4& x, const CpFactors& f);

}  // namespace cfq
