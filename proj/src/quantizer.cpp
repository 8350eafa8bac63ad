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

#include "cfq/quantizer.hpp"

#include <algorithm>
#include <cassert>
#include <limits>
#include <numeric>

#include "cfq/rng.hpp"

namespace cfq {
namespace {

using PointMatrix = Eigen::MatrixXd;

double squared_distance(const PointMatrix& points, Eigen::Index p, const Eigen::MatrixXf& centroids,
                        Eigen::Index c) {
  return (points.col(p) - centroids.col(c).cast<double>()).squaredNorm();
}

// Nearest-centroid assignment; returns the objective.
double assign(const PointMatrix& points, const Eigen::MatrixXf& centroids, std::vector<std::uint32_t>& labels) {
  double objective = 0.0;
  for (Eigen::Index p = 0; p < points.cols(); ++p) {
    double best = std::numeric_limits<double>::infinity();
    Eigen::Index best_c = 0;
    for (Eigen::Index c = 0; c < centroids.cols(); ++c) {
      const double d = squared_distance(points, p, centroids, c);
      if (d < best) {
        best = d;
        best_c = c;
      }
    }
    labels[static_cast<std::size_t>(p)] = static_cast<std::uint32_t>(best_c);
    objective += best;
  }
  return objective;
}

Eigen::MatrixXf seed_plus_plus(const PointMatrix& points, std::size_t k, Rng& rng) {
  const Eigen::Index n = points.cols();
  Eigen::MatrixXf centroids(points.rows(), static_cast<Eigen::Index>(k));
  Eigen::Index first = static_cast<Eigen::Index>(rng.below(static_cast<std::uint64_t>(n)));
  centroids.col(0) = points.col(first).cast<float>();

  std::vector<double> d2(static_cast<std::size_t>(n));
  for (Eigen::Index p = 0; p < n; ++p) d2[p] = squared_distance(points, p, centroids, 0);

  for (Eigen::Index c = 1; c < static_cast<Eigen::Index>(k); ++c) {
    const double total = std::accumulate(d2.begin(), d2.end(), 0.0);
    assert(total > 0.0);
    const double target = rng.uniform() * total;
    Eigen::Index pick = -1;
    double cum = 0.0;
    for (Eigen::Index p = 0; p < n; ++p) {
      if (d2[p] <= 0.0) continue;
      pick = p;
      cum += d2[p];
      if (cum > target) break;
    }
    centroids.col(c) = points.col(pick).cast<float>();
    for (Eigen::Index p = 0; p < n; ++p) d2[p] = std::min(d2[p], squared_distance(points, p, centroids, c));
  }
  return centroids;
}

struct LloydRun {
  Eigen::MatrixXf centroids;
  std::vector<std::uint32_t> labels;
  double objective = 0.0;
  std::size_t iterations = 0;
  std::vector<double> trace;
};

LloydRun lloyd(const PointMatrix& points, Eigen::MatrixXf centroids, const KMeansOptions& opts, double energy) {
  const Eigen::Index n = points.cols();
  const Eigen::Index k = centroids.cols();
  LloydRun run;
  run.labels.assign(static_cast<std::size_t>(n), 0);
  double objective = assign(points, centroids, run.labels);
  run.trace.push_back(objective);

  // Centroids are rounded to float after each mean update, which can lift the
  // objective by at most ~n*M*eps_f^2 relative to the point energy.
  const double slack = 1e-12 * energy;

  std::vector<std::uint32_t> previous;
  for (std::size_t it = 0; it < opts.max_iters && objective > 0.0; ++it) {
    Eigen::MatrixXd sums = Eigen::MatrixXd::Zero(points.rows(), k);
    std::vector<std::size_t> counts(static_cast<std::size_t>(k), 0);
    for (Eigen::Index p = 0; p < n; ++p) {
      sums.col(run.labels[p]) += points.col(p);
      ++counts[run.labels[p]];
    }
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[c] > 0) centroids.col(c) = (sums.col(c) / static_cast<double>(counts[c])).cast<float>();
    }
    // Empty clusters restart at the point farthest from its own centroid.
    for (Eigen::Index c = 0; c < k; ++c) {
      if (counts[c] > 0) continue;
      double worst = -1.0;
      Eigen::Index worst_p = -1;
      for (Eigen::Index p = 0; p < n; ++p) {
        if (counts[run.labels[p]] <= 1) continue;
        const double d = squared_distance(points, p, centroids, run.labels[p]);
        if (d > worst) {
          worst = d;
          worst_p = p;
        }
      }
      if (worst_p < 0) continue;
      --counts[run.labels[worst_p]];
      centroids.col(c) = points.col(worst_p).cast<float>();
      run.labels[worst_p] = static_cast<std::uint32_t>(c);
      counts[c] = 1;
    }

    previous = run.labels;
    const double next = assign(points, centroids, run.labels);
    assert(next <= objective + slack);
    run.trace.push_back(next);
    ++run.iterations;
    const bool stable = previous == run.labels;
    const bool small_step = (objective - next) <= opts.rel_objective_tol * objective;
    objective = next;
    if (stable || small_step) break;
  }
  run.centroids = std::move(centroids);
  run.objective = objective;
  return run;
}

// Drops centroids no label refers to and renumbers labels in centroid order.
void prune_unused(Eigen::MatrixXf& centroids, std::vector<std::uint32_t>& labels) {
  std::vector<std::uint32_t> remap(static_cast<std::size_t>(centroids.cols()), UINT32_MAX);
  for (std::uint32_t l : labels) remap[l] = 0;
  std::uint32_t next = 0;
  for (auto& r : remap) {
    if (r != UINT32_MAX) r = next++;
  }
  if (next == centroids.cols()) return;
  Eigen::MatrixXf kept(centroids.rows(), next);
  for (Eigen::Index c = 0; c < centroids.cols(); ++c) {
    if (remap[c] != UINT32_MAX) kept.col(remap[c]) = centroids.col(c);
  }
  for (auto& l : labels) l = remap[l];
  centroids = std::move(kept);
}

}  // namespace

void QuantizedKernel::validate() const {
  const std::size_t m = dictionary.block_len;
  if (m == 0 || m > kernel_dims[0]) {
    throw DimensionError("block length " + std::to_string(m) + " out of range for k1 = " +
                         std::to_string(kernel_dims[0]));
  }
  if (static_cast<std::size_t>(dictionary.centroids.rows()) != m || dictionary.size() == 0) {
    throw DimensionError("dictionary shape does not match block length");
  }
  if (!dictionary.centroids.allFinite()) throw NumericalError("dictionary contains non-finite values");
  const Dims4 expected{block_count(kernel_dims[0], m), kernel_dims[1], kernel_dims[2], kernel_dims[3]};
  if (order.dims != expected) {
    throw DimensionError("order tensor dims " + to_string(order.dims) + " do not match expected " +
                         to_string(expected));
  }
  if (order.entries.size() != element_count(expected)) throw DimensionError("order tensor length mismatch");
  for (std::uint32_t e : order.entries) {
    if (e >= dictionary.size()) throw FormatError("order index " + std::to_string(e) + " out of range");
  }
}

std::size_t block_count(std::size_t channels, std::size_t block_len) {
  return (channels + block_len - 1) / block_len;
}

BlockMatrix extract_blocks(const Tensor4& w, std::size_t block_len) {
  const auto [k1, k2, k3, k4] = w.dims();
  if (block_len < 1 || block_len > k1) {
    throw InvalidArgument("block length must be in [1, " + std::to_string(k1) + "], got " +
                          std::to_string(block_len));
  }
  const std::size_t nb = block_count(k1, block_len);
  BlockMatrix blocks = BlockMatrix::Zero(static_cast<Eigen::Index>(block_len),
                                         static_cast<Eigen::Index>(nb * k2 * k3 * k4));
  Eigen::Index col = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t j = 0; j < k2; ++j) {
      for (std::size_t k = 0; k < k3; ++k) {
        for (std::size_t l = 0; l < k4; ++l, ++col) {
          for (std::size_t m = 0; m < block_len && b * block_len + m < k1; ++m) {
            blocks(static_cast<Eigen::Index>(m), col) = w(b * block_len + m, j, k, l);
          }
        }
      }
    }
  }
  return blocks;
}

std::size_t count_distinct(const BlockMatrix& points) {
  std::vector<Eigen::Index> idx(static_cast<std::size_t>(points.cols()));
  std::iota(idx.begin(), idx.end(), 0);
  auto less = [&](Eigen::Index a, Eigen::Index b) {
    for (Eigen::Index r = 0; r < points.rows(); ++r) {
      if (points(r, a) != points(r, b)) return points(r, a) < points(r, b);
    }
    return false;
  };
  std::sort(idx.begin(), idx.end(), less);
  std::size_t distinct = idx.empty() ? 0 : 1;
  for (std::size_t i = 1; i < idx.size(); ++i) {
    if (less(idx[i - 1], idx[i])) ++distinct;
  }
  return distinct;
}

KMeansResult kmeans(const BlockMatrix& points, std::size_t k, const KMeansOptions& opts) {
  if (points.cols() == 0 || points.rows() == 0) throw InvalidArgument("k-means needs a non-empty point set");
  if (k < 1) throw InvalidArgument("k-means needs k >= 1");
  if (opts.max_iters < 1 || opts.restarts < 1) throw InvalidArgument("max_iters and restarts must be >= 1");
  if (!points.allFinite()) throw NumericalError("k-means points contain non-finite values");

  const PointMatrix p = points.cast<double>();
  const double energy = p.squaredNorm();
  const std::size_t k_eff = std::min(k, count_distinct(points));

  LloydRun best;
  bool have_best = false;
  for (std::size_t r = 0; r < opts.restarts; ++r) {
    Rng rng(mix_seed(opts.seed, r));
    LloydRun run = lloyd(p, seed_plus_plus(p, k_eff, rng), opts, energy);
    if (!have_best || run.objective < best.objective) {
      best = std::move(run);
      have_best = true;
    }
  }
  prune_unused(best.centroids, best.labels);

  KMeansResult result;
  result.dictionary.block_len = static_cast<std::size_t>(points.rows());
  result.dictionary.centroids = std::move(best.centroids);
  result.assignments = std::move(best.labels);
  result.objective = best.objective;
  result.requested_k = k;
  result.effective_k = result.dictionary.size();
  result.iterations = best.iterations;
  result.objective_trace = std::move(best.trace);
  return result;
}

std::vector<std::uint32_t> nearest_centroids(const BlockMatrix& points, const Dictionary& dict) {
  if (points.rows() != dict.centroids.rows()) throw DimensionError("point length does not match block length");
  std::vector<std::uint32_t> labels(static_cast<std::size_t>(points.cols()));
  assign(points.cast<double>(), dict.centroids, labels);
  return labels;
}

QuantizedKernel quantize(const Tensor4& w, std::size_t block_len, std::size_t dict_size,
                         const KMeansOptions& opts) {
  if (dict_size < 1) throw InvalidArgument("dictionary size must be >= 1");
  const BlockMatrix blocks = extract_blocks(w, block_len);
  KMeansResult km = kmeans(blocks, dict_size, opts);

  QuantizedKernel q;
  q.kernel_dims = w.dims();
  q.dictionary = std::move(km.dictionary);
  q.order.dims = {block_count(w.dim(0), block_len), w.dim(1), w.dim(2), w.dim(3)};
  q.order.entries = nearest_centroids(blocks, q.dictionary);
  prune_unused(q.dictionary.centroids, q.order.entries);
  return q;
}

Tensor4 reconstruct(const QuantizedKernel& q) {
  q.validate();
  const auto [k1, k2, k3, k4] = q.kernel_dims;
  const std::size_t m_len = q.dictionary.block_len;
  Tensor4::Vector data(static_cast<Eigen::Index>(element_count(q.kernel_dims)));
  for (std::size_t b = 0; b < q.order.dims[0]; ++b) {
    for (std::size_t j = 0; j < k2; ++j) {
      for (std::size_t k = 0; k < k3; ++k) {
        for (std::size_t l = 0; l < k4; ++l) {
          const auto centroid = q.dictionary.centroids.col(q.order(b, j, k, l));
          for (std::size_t m = 0; m < m_len && b * m_len + m < k1; ++m) {
            const std::size_t i = b * m_len + m;
            data[static_cast<Eigen::Index>(((i * k2 + j) * k3 + k) * k4 + l)] = centroid[static_cast<Eigen::Index>(m)];
          }
        }
      }
    }
  }
  return Tensor4(q.kernel_dims, std::move(data));
}

QuantizationError quantization_error(const Tensor4& w, const QuantizedKernel& q) {
  if (w.dims() != q.kernel_dims) {
    throw DimensionError("kernel dims " + to_string(w.dims()) + " do not match quantized dims " +
                         to_string(q.kernel_dims));
  }
  QuantizationError e;
  e.frobenius = frobenius_distance(w, reconstruct(q));
  const double ref = frobenius_norm(w);
  if (ref > 0.0) {
    e.relative = e.frobenius / ref;
  } else if (e.frobenius > 0.0) {
    throw NumericalError("relative quantization error of a zero kernel is undefined");
  }
  return e;
}

}  // namespace cfq
