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

#include <cmath>
#include <cstring>
#include <limits>

#include "cfq/io.hpp"
#include "cfq/rng.hpp"
#include "cfq/tensor.hpp"
#include "oracles.hpp"

using namespace cfq;

TEST_CASE("frobenius_norm") {
  CHECK(frobenius_norm(Tensor4({2, 2, 2, 2})) == 0.0);
  CHECK(frobenius_norm(oracle::tensor_from({2, 1, 1, 1}, {3, 4})) == doctest::Approx(5.0).epsilon(1e-15));

  const Tensor4 t = random_tensor({3, 3, 3, 3}, 17);
  const double expected = oracle::norm_by_index(t);
  CHECK(std::abs(frobenius_norm(t) - expected) <= 1e-12 * expected);
}

TEST_CASE("frobenius_norm scales and vanishes only at zero") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    const Tensor4 t = random_tensor({2, 3, 2, 2}, seed);
    const float c = static_cast<float>(Rng(seed).uniform(-4.0, 4.0));
    const double n = frobenius_norm(t);
    CHECK(n > 0.0);
    CHECK(std::abs(frobenius_norm(scaled(t, c)) - std::abs(c) * n) <= 1e-6 * std::abs(c) * n);
  }
  CHECK(frobenius_norm(scaled(random_tensor({2, 2, 2, 2}, 3), 0.0f)) == 0.0);
}

TEST_CASE("relative_error") {
  const Tensor4 a = random_tensor({2, 3, 4, 5}, 1);
  const Tensor4 b = random_tensor({2, 3, 4, 5}, 2);
  CHECK(relative_error(a, a) == 0.0);
  CHECK(relative_error(a, Tensor4(a.dims())) == doctest::Approx(1.0).epsilon(1e-15));

  const double expected = oracle::distance_by_index(a, b) / oracle::norm_by_index(a);
  CHECK(std::abs(relative_error(a, b) - expected) <= 1e-12 * expected);

  CHECK_THROWS_AS(relative_error(a, random_tensor({2, 3, 4, 4}, 2)), DimensionError);
  CHECK_THROWS_AS(relative_error(Tensor4(a.dims()), a), NumericalError);
}

TEST_CASE("tensor construction enforces invariants") {
  CHECK_THROWS_AS(Tensor4({0, 1, 1, 1}), DimensionError);
  Tensor4::Vector v(2);
  v << 1.0f, std::numeric_limits<float>::quiet_NaN();
  CHECK_THROWS_AS(Tensor4({2, 1, 1, 1}, v), NumericalError);
  CHECK_THROWS_AS(Tensor4({3, 1, 1, 1}, Tensor4::Vector::Zero(2)), DimensionError);
  const std::size_t huge = std::size_t{1} << 32;
  CHECK_THROWS_AS(element_count({huge, huge, huge, 1}), NumericalError);
}

TEST_CASE("tensor layout is row-major with axis 0 slowest") {
  const Tensor4 t = oracle::tensor_from({2, 1, 2, 3}, {0, 1, 2, 3, 4, 5, 6, 7, 8, 9, 10, 11});
  CHECK(t(0, 0, 0, 2) == 2.0f);
  CHECK(t(0, 0, 1, 0) == 3.0f);
  CHECK(t(1, 0, 0, 0) == 6.0f);
  CHECK(t(1, 0, 1, 2) == 11.0f);
}

TEST_CASE("relu") {
  CHECK(relu(scaled(random_tensor({2, 2, 2, 2}, 5, 0.1f, 1.0f), -1.0f)) == Tensor4({2, 2, 2, 2}));
  const Tensor4 pos = random_tensor({2, 2, 2, 2}, 6, 0.1f, 1.0f);
  CHECK(relu(pos) == pos);
  const Tensor4 mixed = random_tensor({3, 4, 4, 2}, 7);
  const Tensor4 r = relu(mixed);
  for (Eigen::Index i = 0; i < mixed.data().size(); ++i) {
    CHECK(r.data()[i] == (mixed.data()[i] > 0.0f ? mixed.data()[i] : 0.0f));
  }
}

TEST_CASE("t4 format") {
  const Tensor4 t = random_tensor({2, 3, 4, 5}, 42);
  const Bytes bytes = write_t4(t);
  const Tensor4 back = read_t4(bytes);
  CHECK(back.dims() == t.dims());
  CHECK(std::memcmp(back.data().data(), t.data().data(), t.size() * sizeof(float)) == 0);
  CHECK(write_t4(back) == bytes);

  CHECK(write_t4(Tensor4({6, 3, 3, 1})).size() == 240);

  // Header layout.
  CHECK(std::memcmp(bytes.data(), "T4F1", 4) == 0);
  CHECK(bytes[4] == 2);
  CHECK(bytes[8] == 3);
  CHECK(bytes[12] == 4);
  CHECK(bytes[16] == 5);
  CHECK(bytes[20] == 0);

  SUBCASE("little-endian payload") {
    const Bytes one = write_t4(oracle::tensor_from({1, 1, 1, 1}, {1.0f}));
    // 1.0f = 0x3F800000
    CHECK(one[24] == 0x00);
    CHECK(one[25] == 0x00);
    CHECK(one[26] == 0x80);
    CHECK(one[27] == 0x3F);
  }
  SUBCASE("non-finite payload") {
    Bytes bad = bytes;
    const float nan = std::numeric_limits<float>::quiet_NaN();
    std::memcpy(bad.data() + 24 + 4 * 7, &nan, 4);
    CHECK_THROWS_AS(read_t4(bad), FormatError);
  }
  SUBCASE("bad magic") {
    Bytes bad = bytes;
    bad[0] = 'X';
    CHECK_THROWS_AS(read_t4(bad), FormatError);
  }
  SUBCASE("truncated") {
    CHECK_THROWS_AS(read_t4(std::span(bytes).first(bytes.size() - 1)), FormatError);
    CHECK_THROWS_AS(read_t4(std::span(bytes).first(10)), FormatError);
  }
  SUBCASE("trailing bytes") {
    Bytes bad = bytes;
    bad.push_back(0);
    CHECK_THROWS_AS(read_t4(bad), FormatError);
  }
  SUBCASE("reserved field") {
    Bytes bad = bytes;
    bad[21] = 1;
    CHECK_THROWS_AS(read_t4(bad), FormatError);
  }
  SUBCASE("dims overflow") {
    Bytes bad = bytes;
    for (int i = 4; i < 20; ++i) bad[i] = 0xFF;
    CHECK_THROWS_AS(read_t4(bad), FormatError);
  }
}

TEST_CASE("t4 round trip property") {
  for (std::uint64_t seed = 0; seed < 25; ++seed) {
    Rng rng(seed);
    const Dims4 dims{1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(4), 1 + rng.below(4)};
    const Tensor4 t = random_tensor(dims, seed, -1e6f, 1e6f);
    const Bytes b = write_t4(t);
    CHECK(b.size() == kT4HeaderBytes + 4 * t.size());
    CHECK(write_t4(read_t4(b)) == b);
  }
}
