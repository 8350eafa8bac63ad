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

#include <doctest.h>

#include "cfq/ref_conv.hpp"
#include "cfq/rng.hpp"
#include "oracles.hpp"

using namespace cfq;

TEST_CASE("conv2d_direct hand example") {
  const Tensor4 x = oracle::tensor_from({1, 3, 3, 1}, {1, 2, 3, 4, 5, 6, 7, 8, 9});
  const Tensor4 w = oracle::tensor_from({1, 2, 2, 1}, {1, 1, 1, 1});
  const auto [out, ops] = conv2d_direct(x, w);
  CHECK(out.dims() == Dims4{1, 2, 2, 1});
  CHECK(out(0, 0, 0, 0) == 12.0f);
  CHECK(out(0, 0, 1, 0) == 16.0f);
  CHECK(out(0, 1, 0, 0) == 24.0f);
  CHECK(out(0, 1, 1, 0) == 28.0f);
  CHECK(ops.multiplies == 16);
  CHECK(ops.additions == 16 - 4);
}

TEST_CASE("conv2d_direct identity kernel") {
  const std::size_t c = 4;
  Tensor4::Vector v = Tensor4::Vector::Zero(c * c);
  for (std::size_t i = 0; i < c; ++i) v[static_cast<Eigen::Index>(i * c + i)] = 1.0f;
  const Tensor4 w({c, 1, 1, c}, v);
  const Tensor4 x = random_tensor({c, 5, 6, 2}, 9);
  CHECK(conv2d_direct(x, w).value == x);
}

TEST_CASE("conv2d_direct cross-correlation, batch and counts") {
  // Asymmetric kernel picks out the top-left neighbour only: no flip.
  const Tensor4 w = oracle::tensor_from({1, 2, 2, 1}, {1, 0, 0, 0});
  const Tensor4 x = random_tensor({1, 4, 4, 3}, 4);
  const auto out = conv2d_direct(x, w).value;
  for (std::size_t n = 0; n < 3; ++n)
    for (std::size_t y = 0; y < 3; ++y)
      for (std::size_t xx = 0; xx < 3; ++xx) CHECK(out(0, y, xx, n) == x(0, y, xx, n));

  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    Rng rng(seed);
    const std::size_t c = 1 + rng.below(5), k2 = 1 + rng.below(3), k3 = 1 + rng.below(3), k4 = 1 + rng.below(4);
    const std::size_t h = k2 + rng.below(4), wd = k3 + rng.below(4), n = 1 + rng.below(2);
    const auto r = conv2d_direct(random_tensor({c, h, wd, n}, seed), random_tensor({c, k2, k3, k4}, seed + 100));
    CHECK(r.value.dims() == Dims4{k4, h - k2 + 1, wd - k3 + 1, n});
    CHECK(r.ops.multiplies == (h - k2 + 1) * (wd - k3 + 1) * n * c * k2 * k3 * k4);
    CHECK(r.ops.additions == r.ops.multiplies - r.value.size());
  }
}

TEST_CASE("conv2d_direct linearity") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor4 x = random_tensor({3, 6, 5, 1}, seed);
    const Tensor4 w1 = random_tensor({3, 3, 2, 2}, seed + 50);
    const Tensor4 w2 = random_tensor({3, 3, 2, 2}, seed + 90);
    const float a = 0.7f, b = -1.3f;
    const Tensor4 combo({3, 3, 2, 2}, a * w1.data() + b * w2.data());
    const Tensor4 lhs = conv2d_direct(x, combo).value;
    const Tensor4 rhs({2, 4, 4, 1}, a * conv2d_direct(x, w1).value.data() + b * conv2d_direct(x, w2).value.data());
    CHECK(relative_error(rhs, lhs) <= 1e-5);
  }
}

TEST_CASE("conv2d_direct errors") {
  CHECK_THROWS_AS(conv2d_direct(Tensor4({2, 4, 4, 1}), Tensor4({3, 1, 1, 1})), DimensionError);
  CHECK_THROWS_AS(conv2d_direct(Tensor4({2, 2, 4, 1}), Tensor4({2, 3, 1, 1})), DimensionError);
  CHECK_THROWS_AS(conv2d_direct(Tensor4({2, 4, 2, 1}), Tensor4({2, 1, 3, 1})), DimensionError);
}
