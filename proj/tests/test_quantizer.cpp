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

#include <algorithm>
#include <set>

#include "cfq/io.hpp"
#include "cfq/quantizer.hpp"
#include "cfq/rng.hpp"
#include "oracles.hpp"

using namespace cfq;

namespace {

// Kernel [k1,k2,k3,k4] whose channel blocks of length M are drawn from
// `distinct` fixed random vectors (tail block zero-padded).
Tensor4 kernel_with_distinct_blocks(const Dims4& dims, std::size_t m_len, std::size_t distinct, std::uint64_t seed) {
  Rng rng(seed);
  std::vector<std::vector<float>> protos(distinct, std::vector<float>(m_len));
  for (auto& p : protos)
    for (auto& v : p) v = static_cast<float>(rng.uniform(-1.0, 1.0));
  std::vector<float> data(element_count(dims), 0.0f);
  const std::size_t nb = (dims[0] + m_len - 1) / m_len;
  std::size_t counter = 0;
  for (std::size_t b = 0; b < nb; ++b)
    for (std::size_t j = 0; j < dims[1]; ++j)
      for (std::size_t k = 0; k < dims[2]; ++k)
        for (std::size_t l = 0; l < dims[3]; ++l, ++counter) {
          // Cycle through all prototypes first so each one appears.
          const auto& p = protos[counter < distinct ? counter : rng.below(distinct)];
          for (std::size_t m = 0; m < m_len && b * m_len + m < dims[0]; ++m) {
            data[(((b * m_len + m) * dims[1] + j) * dims[2] + k) * dims[3] + l] = p[m];
          }
        }
  return oracle::tensor_from(dims, data);
}

// Sum over blocks of squared distance to the assigned centroid, real
// (non-padded) channels only.
double restricted_objective(const Tensor4& w, const QuantizedKernel& q) {
  const std::size_t m_len = q.dictionary.block_len;
  double sum = 0.0;
  for (std::size_t b = 0; b < q.order.dims[0]; ++b)
    for (std::size_t j = 0; j < w.dim(1); ++j)
      for (std::size_t k = 0; k < w.dim(2); ++k)
        for (std::size_t l = 0; l < w.dim(3); ++l)
          for (std::size_t m = 0; m < m_len && b * m_len + m < w.dim(0); ++m) {
            const double d = static_cast<double>(w(b * m_len + m, j, k, l)) -
                             q.dictionary.centroids(static_cast<Eigen::Index>(m), q.order(b, j, k, l));
            sum += d * d;
          }
  return sum;
}

}  // namespace

TEST_CASE("extract_blocks") {
  SUBCASE("M divides k1") {
    const Tensor4 w = oracle::tensor_from({6, 1, 1, 1}, {1, 2, 3, 4, 5, 6});
    const BlockMatrix b = extract_blocks(w, 3);
    REQUIRE(b.cols() == 2);
    CHECK(b.col(0) == Eigen::Vector3f(1, 2, 3));
    CHECK(b.col(1) == Eigen::Vector3f(4, 5, 6));
  }
  SUBCASE("tail padding") {
    const Tensor4 w = random_tensor({5, 1, 1, 2}, 3, 0.5f, 1.0f);
    const BlockMatrix b = extract_blocks(w, 3);
    REQUIRE(b.cols() == 4);
    // Column order (b, l): (0,0) (0,1) (1,0) (1,1).
    CHECK(b(0, 1) == w(0, 0, 0, 1));
    CHECK(b(1, 2) == w(4, 0, 0, 0));
    CHECK(b(2, 2) == 0.0f);
    CHECK(b(2, 3) == 0.0f);
    CHECK(b(2, 0) != 0.0f);
  }
  SUBCASE("single block per column") {
    const Tensor4 w = random_tensor({3, 3, 3, 1}, 8);
    const BlockMatrix b = extract_blocks(w, 3);
    REQUIRE(b.cols() == 9);
    for (std::size_t j = 0; j < 3; ++j)
      for (std::size_t k = 0; k < 3; ++k) {
        const Eigen::Index col = static_cast<Eigen::Index>(j * 3 + k);
        CHECK(b.col(col) == Eigen::Vector3f(w(0, j, k, 0), w(1, j, k, 0), w(2, j, k, 0)));
      }
  }
  CHECK_THROWS_AS(extract_blocks(Tensor4({4, 1, 1, 1}), 0), InvalidArgument);
  CHECK_THROWS_AS(extract_blocks(Tensor4({4, 1, 1, 1}), 5), InvalidArgument);
}

TEST_CASE("kmeans degenerate and exact cases") {
  SUBCASE("identical points, k = 1") {
    BlockMatrix pts(2, 5);
    pts.colwise() = Eigen::Vector2f(0.25f, -3.0f);
    const KMeansResult r = kmeans(pts, 1);
    CHECK(r.dictionary.size() == 1);
    CHECK(r.dictionary.centroids.col(0) == Eigen::Vector2f(0.25f, -3.0f));
    CHECK(r.objective == 0.0);
  }
  SUBCASE("k equals distinct count") {
    BlockMatrix pts(2, 6);
    pts << 0, 1, 0, 5, 1, 5,  //
        0, 2, 0, 5, 2, 5;
    const KMeansResult r = kmeans(pts, 3, {7});
    CHECK(r.objective == 0.0);
    std::set<std::pair<float, float>> got, want{{0, 0}, {1, 2}, {5, 5}};
    for (Eigen::Index c = 0; c < r.dictionary.centroids.cols(); ++c)
      got.insert({r.dictionary.centroids(0, c), r.dictionary.centroids(1, c)});
    CHECK(got == want);
  }
  SUBCASE("k clamped to distinct count") {
    BlockMatrix pts(1, 4);
    pts << 1, 1, 2, 2;
    const KMeansResult r = kmeans(pts, 10);
    CHECK(r.requested_k == 10);
    CHECK(r.effective_k == 2);
    CHECK(r.objective == 0.0);
  }
  CHECK_THROWS_AS(kmeans(BlockMatrix(1, 0), 1), InvalidArgument);
  CHECK_THROWS_AS(kmeans(BlockMatrix::Zero(1, 3), 0), InvalidArgument);
}

TEST_CASE("kmeans matches exhaustive 2-partition") {
  BlockMatrix pts(1, 4);
  pts << 0, 1, 10, 11;
  const oracle::TwoMeans best = oracle::exhaustive_two_means({0, 1, 10, 11});
  REQUIRE(best.objective == doctest::Approx(1.0));
  const KMeansResult r = kmeans(pts, 2, {3});
  CHECK(r.objective == doctest::Approx(best.objective).epsilon(1e-12));
  std::vector<float> c{r.dictionary.centroids(0, 0), r.dictionary.centroids(0, 1)};
  std::sort(c.begin(), c.end());
  CHECK(c[0] == doctest::Approx(best.low));
  CHECK(c[1] == doctest::Approx(best.high));
}

TEST_CASE("kmeans objective is non-increasing and deterministic") {
  for (std::uint64_t seed = 0; seed < 15; ++seed) {
    const BlockMatrix pts = extract_blocks(random_tensor({6, 3, 3, 8}, seed), 3);
    const KMeansResult a = kmeans(pts, 5, {seed});
    const KMeansResult b = kmeans(pts, 5, {seed});
    REQUIRE(a.objective_trace.size() >= 1);
    for (std::size_t i = 1; i < a.objective_trace.size(); ++i) {
      CHECK(a.objective_trace[i] <= a.objective_trace[i - 1]);
    }
    CHECK(a.objective == a.objective_trace.back());
    CHECK(a.dictionary.centroids == b.dictionary.centroids);
    CHECK(a.assignments == b.assignments);

    // Objective equals the brute-force sum over assignments.
    double sum = 0.0;
    for (Eigen::Index p = 0; p < pts.cols(); ++p) {
      sum += (pts.col(p).cast<double>() - a.dictionary.centroids.col(a.assignments[p]).cast<double>()).squaredNorm();
    }
    CHECK(a.objective == doctest::Approx(sum).epsilon(1e-12));
  }
}

TEST_CASE("kmeans keeps the best restart") {
  const BlockMatrix pts = extract_blocks(random_tensor({4, 3, 3, 16}, 77), 2);
  const KMeansResult many = kmeans(pts, 6, {5, 300, 1e-7, 8});
  for (std::size_t r = 0; r < 8; ++r) {
    // A single run with the seed stream of restart r.
    KMeansOptions one{5, 300, 1e-7, r + 1};
    CHECK(many.objective <= kmeans(pts, 6, one).objective);
  }
}

TEST_CASE("nearest_centroids breaks ties toward the smallest index") {
  Dictionary d;
  d.block_len = 1;
  d.centroids.resize(1, 3);
  d.centroids << -1.0f, 1.0f, 1.0f;
  BlockMatrix pts(1, 3);
  pts << 0.0f, 1.0f, 2.0f;
  CHECK(nearest_centroids(pts, d) == std::vector<std::uint32_t>{0, 1, 1});
}

TEST_CASE("quantize with an exact dictionary") {
  const Tensor4 w = kernel_with_distinct_blocks({6, 3, 3, 2}, 3, 3, 11);
  REQUIRE(count_distinct(extract_blocks(w, 3)) == 3);
  const QuantizedKernel q = quantize(w, 3, 3, {1});
  CHECK(q.dictionary.size() == 3);
  CHECK(frobenius_distance(w, reconstruct(q)) <= 1e-6 * frobenius_norm(w));
  CHECK(quantization_error(w, q).relative <= 1e-6);
}

TEST_CASE("quantize with a single centroid reproduces the block mean") {
  const Tensor4 w = random_tensor({6, 2, 2, 3}, 21);
  const QuantizedKernel q = quantize(w, 3, 1, {2});
  const BlockMatrix blocks = extract_blocks(w, 3);
  const Eigen::VectorXd mean = blocks.cast<double>().rowwise().mean();
  REQUIRE(q.dictionary.size() == 1);
  for (Eigen::Index m = 0; m < 3; ++m) CHECK(q.dictionary.centroids(m, 0) == doctest::Approx(mean[m]).epsilon(1e-6));
  const Tensor4 r = reconstruct(q);
  for (std::size_t b = 0; b < 2; ++b)
    for (std::size_t m = 0; m < 3; ++m) CHECK(r(b * 3 + m, 1, 0, 2) == q.dictionary.centroids(static_cast<Eigen::Index>(m), 0));

  // Error equals the square root of the brute-force one-cluster objective.
  double objective = 0.0;
  for (Eigen::Index p = 0; p < blocks.cols(); ++p) objective += (blocks.col(p).cast<double>() - mean).squaredNorm();
  CHECK(quantization_error(w, q).frobenius == doctest::Approx(std::sqrt(objective)).epsilon(1e-6));
}

TEST_CASE("quantize on the six-channel 3x3 example") {
  const Tensor4 w = random_tensor({6, 3, 3, 1}, 2024);
  const QuantizedKernel q = quantize(w, 3, 3, {0});
  CHECK(q.order.dims == Dims4{2, 3, 3, 1});
  CHECK(q.dictionary.size() == 3);
  CHECK(q.dictionary.block_len == 3);
  CHECK(q.dictionary.centroids.rows() == 3);
}

TEST_CASE("quantize invariants") {
  for (std::uint64_t seed = 0; seed < 20; ++seed) {
    Rng rng(seed);
    const Dims4 dims{2 + rng.below(9), 1 + rng.below(3), 1 + rng.below(3), 1 + rng.below(4)};
    const std::size_t m_len = 1 + rng.below(dims[0]);
    const std::size_t dict = 1 + rng.below(8);
    const Tensor4 w = random_tensor(dims, seed);
    const QuantizedKernel q = quantize(w, m_len, dict, {seed});
    CAPTURE(seed);

    CHECK(q.order.dims == Dims4{(dims[0] + m_len - 1) / m_len, dims[1], dims[2], dims[3]});
    CHECK(reconstruct(q).dims() == dims);
    // Every centroid is used at least once.
    std::vector<bool> used(q.dictionary.size(), false);
    for (auto e : q.order.entries) used[e] = true;
    CHECK(std::all_of(used.begin(), used.end(), [](bool u) { return u; }));
    // Order entries are nearest centroids.
    CHECK(q.order.entries == nearest_centroids(extract_blocks(w, m_len), q.dictionary));
    // Squared reconstruction error equals the objective over real channels.
    const double err2 = std::pow(frobenius_distance(w, reconstruct(q)), 2);
    const double obj = restricted_objective(w, q);
    CHECK(std::abs(err2 - obj) <= 1e-9 * std::max(obj, 1e-30));
    // Bit-deterministic.
    const QuantizedKernel again = quantize(w, m_len, dict, {seed});
    CHECK(write_cdq(again) == write_cdq(q));
  }
}

TEST_CASE("reconstruct") {
  QuantizedKernel q;
  q.kernel_dims = {5, 2, 2, 1};
  q.dictionary.block_len = 2;
  q.dictionary.centroids = Eigen::MatrixXf::Zero(2, 1);
  q.order.dims = {3, 2, 2, 1};
  q.order.entries.assign(12, 0);
  CHECK(reconstruct(q) == Tensor4({5, 2, 2, 1}));

  q.order.entries[3] = 1;
  CHECK_THROWS_AS(reconstruct(q), FormatError);
}

TEST_CASE("quantize is idempotent on its own reconstruction") {
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor4 w = random_tensor({6, 3, 3, 3}, seed);
    const QuantizedKernel q = quantize(w, 3, 5, {seed});
    const Tensor4 w_hat = reconstruct(q);
    const QuantizedKernel q2 = quantize(w_hat, 3, q.dictionary.size(), {seed + 1});
    CHECK(quantization_error(w_hat, q2).relative <= 1e-6);
  }
}

TEST_CASE("padded tail blocks need their own centroids on re-quantization") {
  // Truncating a centroid and re-padding with zeros yields a new block, so
  // |D| alone is not enough when M does not divide k1.
  for (std::uint64_t seed = 0; seed < 10; ++seed) {
    const Tensor4 w = random_tensor({7, 3, 3, 3}, seed);
    const Tensor4 w_hat = reconstruct(quantize(w, 3, 5, {seed}));
    const std::size_t distinct = count_distinct(extract_blocks(w_hat, 3));
    CHECK(distinct <= 10);
    CHECK(quantization_error(w_hat, quantize(w_hat, 3, distinct, {seed + 1})).relative <= 1e-6);
  }
}

TEST_CASE("quantization error ordering and errors") {
  const Tensor4 w = random_tensor({4, 3, 3, 2}, 31);
  const std::size_t distinct = count_distinct(extract_blocks(w, 2));
  const double exact = quantization_error(w, quantize(w, 2, distinct)).relative;
  const double coarse = quantization_error(w, quantize(w, 2, 1)).relative;
  CHECK(exact <= 1e-6);
  CHECK(exact <= coarse);
  CHECK_THROWS_AS(quantization_error(random_tensor({4, 3, 3, 1}, 1), quantize(w, 2, 2)), DimensionError);
  CHECK_THROWS_AS(quantize(w, 2, 0), InvalidArgument);
}
