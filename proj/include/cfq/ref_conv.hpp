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

#include <cstdint>

#include "cfq/tensor.hpp"

namespace cfq {

// Executed arithmetic events. Multiplies and additions are kept apart
// because adders are much cheaper than multipliers in hardware.
struct OpCount {
  std::uint64_t multiplies = 0;
  std::uint64_t additions = 0;

  OpCount& operator+=(const OpCount& o) {
    multiplies += o.multiplies;
    additions += o.additions;
    return *this;
  }
  friend OpCount operator+(OpCount a, const OpCount& b) { return a += b; }
  friend bool operator==(const OpCount&, const OpCount&) = default;
};

template <typename Result>
struct Counted {
  Result value;
  OpCount ops;
};

// Output extents of a stride-1 valid convolution of activations [C,H,W,N]
// with a kernel [k1,k2,k3,k4]: [k4, H-k2+1, W-k3+1, N]. Throws
// DimensionError on channel mismatch or a kernel window larger than the input.
Dims4 conv_output_dims(const Dims4& input, const Dims4& kernel);

// Direct stride-1 valid cross-correlation:
//   out[co,oy,ox,n] = sum_{ci,j,k} x[ci,oy+j,ox+k,n] * w[ci,j,k,co].
// Counts one multiply per product and (k1*k2*k3 - 1) additions per output.
Counted<Tensor4> conv2d_direct(const Tensor4& x, const Tensor4& w);

}  // namespace cfq
