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

#include "cfq/tensor.hpp"

namespace cfq {

std::string to_string(const Dims4& dims) {
  return "[" + std::to_string(dims[0]) + "," + std::to_string(dims[1]) + "," +
         std::to_string(dims[2]) + "," + std::to_string(dims[3]) + "]";
}

std::uint64_t element_count(const Dims4& dims) {
  std::uint64_t n = 1;
  for (std::size_t d : dims) {
    if (__builtin_mul_overflow(n, static_cast<std::uint64_t>(d), &n)) {
      throw NumericalError("element count of " + to_string(dims) + " overflows 64 bits");
    }
  }
  return n;
}

Tensor4 relu(const Tensor4& t) { return Tensor4(t.dims(), t.data().cwiseMax(0.0f)); }

}  // namespace cfq
