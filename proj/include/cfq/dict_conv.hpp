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

#include <cstddef>
#include <vector>

#include "cfq/quantizer.hpp"
#include "cfq/ref_conv.hpp"

namespace cfq {

// Inner products of every input channel block at every spatial position
// with every centroid, laid out row-major over [B, H, W, |D|].
struct DotTable {
  Dims4 dims{1, 1, 1, 1};
  std::vector<float> values;
  // Stage-one work. Each product is one MAC; the accumulate half of the MAC
  // is not counted separately.
  OpCount ops;

  float operator()(std::size_t b, std::size_t y, std::size_t x, std::size_t d) const {
    return values[((b * dims[1] + y) * dims[2] + x) * dims[3] + d];
  }
};

// Stage one for batch element `batch` of x [C, H, W, N]. Channel blocks
// follow extract_blocks, padded channels read as zero.
DotTable precompute_dot_table(const Tensor4& x, const Dictionary& dict, std::size_t batch = 0);

// Stage two: out[co,oy,ox] = sum_{b,j,k} table(b, oy+j, ox+k, order(b,j,k,co)).
// Additions only; returns [k4, H-k2+1, W-k3+1, 1].
Counted<Tensor4> accumulate(const DotTable& table, const IndexTensor& order);

// Both stages over every batch element of x. Multiplies come from stage one,
// additions from stage two.
Counted<Tensor4> conv2d_dict(const Tensor4& x, const QuantizedKernel& q);

}  // namespace cfq
