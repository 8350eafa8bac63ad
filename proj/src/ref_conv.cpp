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

#include "cfq/ref_conv.hpp"

#include <cassert>

namespace cfq {

Dims4 conv_output_dims(const Dims4& input, const Dims4& kernel) {
  if (input[0] != kernel[0]) {
    throw DimensionError("input has " + std::to_string(input[0]) + " channels, kernel expects " +
                         std::to_string(kernel[0]));
  }
  if (input[1] < kernel[1] || input[2] < kernel[2]) {
    throw DimensionError("kernel window " + std::to_string(kernel[1]) + "x" + std::to_string(kernel[2]) +
                         " exceeds input " + std::to_string(input[1]) + "x" + std::to_string(input[2]));
  }
  return {kernel[3], input[1] - kernel[1] + 1, input[2] - kernel[2] + 1, input[3]};
}

Counted<Tensor4> conv2d_direct(const Tensor4& x, const Tensor4& w) {
  const Dims4 out_dims = conv_output_dims(x.dims(), w.dims());
  const Dims4& od = out_dims;
  const auto [k1, k2, k3, k4] = w.dims();
  const std::size_t batch = x.dim(3);

  Tensor4::Vector out(static_cast<Eigen::Index>(element_count(out_dims)));
  OpCount ops;
  for (std::size_t co = 0; co < k4; ++co) {
    for (std::size_t oy = 0; oy < od[1]; ++oy) {
      for (std::size_t ox = 0; ox < od[2]; ++ox) {
        for (std::size_t n = 0; n < batch; ++n) {
          double acc = 0.0;
          std::uint64_t terms = 0;
          for (std::size_t ci = 0; ci < k1; ++ci) {
            for (std::size_t j = 0; j < k2; ++j) {
              for (std::size_t k = 0; k < k3; ++k) {
                acc += static_cast<double>(x(ci, oy + j, ox + k, n)) * static_cast<double>(w(ci, j, k, co));
                ++terms;
              }
            }
          }
          ops.multiplies += terms;
          ops.additions += terms - 1;
          out[static_cast<Eigen::Index>(((co * od[1] + oy) * od[2] + ox) * batch + n)] = static_cast<float>(acc);
        }
      }
    }
  }
  assert(ops.multiplies == od[1] * od[2] * batch * k1 * k2 * k3 * k4);
  assert(ops.additions == ops.multiplies - element_count(out_dims));
  return {Tensor4(out_dims, std::move(out)), ops};
}

}  // namespace cfq
