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
#include <cstdint>
#include <vector>

#include <Eigen/Core>

#include "cfq/tensor.hpp"

namespace cfq {

// Kernel blocks, one M-vector per column. Column order follows the
// row-major order of the block grid [B, k2, k3, k4].
using BlockMatrix = Eigen::MatrixXf;

// Set of |D| centroids of length M, one centroid per column. The column-major
// storage puts each centroid's M values next to each other.
struct Dictionary {
  std::size_t block_len = 1;
  Eigen::MatrixXf centroids;

  std::size_t size() const { return static_cast<std::size_t>(centroids.cols()); }
};

// Order tensor: one dictionary index per block position (b, j, k, l).
struct IndexTensor {
  Dims4 dims{1, 1, 1, 1};
  std::vector<std::uint32_t> entries;

  std::uint32_t operator()(std::size_t b, std::size_t j, std::size_t k, std::size_t l) const {
    return entries[((b * dims[1] + j) * dims[2] + k) * dims[3] + l];
  }
};

// A kernel stored as dictionary + order tensor.
struct QuantizedKernel {
  Dims4 kernel_dims{1, 1, 1, 1};
  Dictionary dictionary;
  IndexTensor order;

  // Checks shape consistency, index range and finiteness; throws
  // DimensionError / FormatError / NumericalError.
  void validate() const;
};

struct KMeansOptions {
  std::uint64_t seed = 0;
  std::size_t max_iters = 300;
  double rel_objective_tol = 1e-7;
  std::size_t restarts = 4;
};

struct KMeansResult {
  Dictionary dictionary;
  std::vector<std::uint32_t> assignments;
  // Sum of squared distances of each point to its assigned centroid.
  double objective = 0.0;
  std::size_t requested_k = 0;
  // min(requested_k, distinct points), after dropping centroids that ended
  // up unused.
  std::size_t effective_k = 0;
  std::size_t iterations = 0;
  // Objective after every assignment step of the returned run.
  std::vector<double> objective_trace;
};

// Number of channel blocks: ceil(k1 / M).
std::size_t block_count(std::size_t channels, std::size_t block_len);

// Slices `w` along the input-channel axis into aligned, non-overlapping
// blocks of length M; the tail block is zero-padded when M does not divide k1.
// Requires 1 <= M <= k1.
BlockMatrix extract_blocks(const Tensor4& w, std::size_t block_len);

// Number of pairwise-distinct columns (exact value comparison).
std::size_t count_distinct(const BlockMatrix& points);

// Lloyd's algorithm with k-means++ seeding; best objective over
// opts.restarts runs. k is clamped to the number of distinct points.
KMeansResult kmeans(const BlockMatrix& points, std::size_t k, const KMeansOptions& opts = {});

// Index of the nearest centroid (squared Euclidean, ties to the smallest index)
// for every column of `points`.
std::vector<std::uint32_t> nearest_centroids(const BlockMatrix& points, const Dictionary& dict);

QuantizedKernel quantize(const Tensor4& w, std::size_t block_len, std::size_t dict_size,
                         const KMeansOptions& opts = {});

// Expands the dictionary through the order tensor; padded tail entries are
// dropped so the result has dims q.kernel_dims.
Tensor4 reconstruct(const QuantizedKernel& q);

struct QuantizationError {
  double frobenius = 0.0;
  double relative = 0.0;
};

QuantizationError quantization_error(const Tensor4& w, const QuantizedKernel& q);

}  // namespace cfq
