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

#include "cfq/dict_conv.hpp"

#include <cassert>

namespace cfq {

DotTable precompute_dot_table(const Tensor4& x, const Dictionary& dict, std::size_t batch) {
  const auto [channels, height, width, n] = x.dims();
  if (batch >= n) throw DimensionError("batch index out of range");
  const std::size_t m_len = dict.block_len;
  if (m_len < 1 || static_cast<std::size_t>(dict.centroids.rows()) != m_len || dict.size() == 0) {
    throw DimensionError("malformed dictionary");
  }
  const std::size_t nb = block_count(channels, m_len);
  const std::size_t nd = dict.size();

  DotTable table;
  table.dims = {nb, height, width, nd};
  table.values.resize(nb * height * width * nd);
  std::vector<float> block(m_len);
  std::size_t out = 0;
  for (std::size_t b = 0; b < nb; ++b) {
    for (std::size_t y = 0; y < height; ++y) {
      for (std::size_t xx = 0; xx < width; ++xx) {
        for (std::size_t m = 0; m < m_len; ++m) {
          const std::size_t c = b * m_len + m;
          block[m] = c < channels ? x(c, y, xx, batch) : 0.0f;
        }
        for (std::size_t d = 0; d < nd; ++d, ++out) {
          const auto centroid = dict.centroids.col(static_cast<Eigen::Index>(d));
          double acc = 0.0;
          for (std::size_t m = 0; m < m_len; ++m) {
            acc += static_cast<double>(block[m]) * static_cast<double>(centroid[static_cast<Eigen::Index>(m)]);
            ++table.ops.multiplies;
          }
          table.values[out] = static_cast<float>(acc);
        }
      }
    }
  }
  assert(table.ops.multiplies == height * width * nb * m_len * nd);
  return table;
}

Counted<Tensor4> accumulate(const DotTable& table, const IndexTensor& order) {
  const auto [nb, height, width, nd] = table.dims;
  const auto [ob, k2, k3, k4] = order.dims;
  if (ob != nb) throw DimensionError("dot table and order tensor disagree on block count");
  if (height < k2 || width < k3) throw DimensionError("kernel window exceeds input in accumulate");
  const std::size_t out_h = height - k2 + 1;
  const std::size_t out_w = width - k3 + 1;

  Tensor4::Vector out(static_cast<Eigen::Index>(k4 * out_h * out_w));
  OpCount ops;
  for (std::size_t co = 0; co < k4; ++co) {
    for (std::size_t oy = 0; oy < out_h; ++oy) {
      for (std::size_t ox = 0; ox < out_w; ++ox) {
        double acc = 0.0;
        bool first = true;
        for (std::size_t b = 0; b < nb; ++b) {
          for (std::size_t j = 0; j < k2; ++j) {
            for (std::size_t k = 0; k < k3; ++k) {
              const std::uint32_t d = order(b, j, k, co);
              if (d >= nd) throw DimensionError("order index exceeds dictionary size");
              const double v = table(b, oy + j, ox + k, d);
              if (first) {
                acc = v;
                first = false;
              } else {
                acc += v;
                ++ops.additions;
              }
            }
          }
        }
        out[static_cast<Eigen::Index>((co * out_h + oy) * out_w + ox)] = static_cast<float>(acc);
      }
    }
  }
  assert(ops.multiplies == 0);
  assert(ops.additions == k4 * out_h * out_w * (nb * k2 * k3 - 1));
  return {Tensor4({k4, out_h, out_w, 1}, std::move(out)), ops};
}

Counted<Tensor4> conv2d_dict(const Tensor4& x, const QuantizedKernel& q) {
  q.validate();
  const Dims4 out_dims = conv_output_dims(x.dims(), q.kernel_dims);
  const auto [k4, out_h, out_w, batch] = out_dims;

  Tensor4::Vector out(static_cast<Eigen::Index>(element_count(out_dims)));
  OpCount ops;
  for (std::size_t n = 0; n < batch; ++n) {
    const DotTable table = precompute_dot_table(x, q.dictionary, n);
    const Counted<Tensor4> part = accumulate(table, q.order);
    ops += table.ops;
    ops += part.ops;
    for (std::size_t co = 0; co < k4; ++co) {
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          out[static_cast<Eigen::Index>(((co * out_h + oy) * out_w + ox) * batch + n)] = part.value(co, oy, ox, 0);
        }
      }
    }
  }
  return {Tensor4(out_dims, std::move(out)), ops};
}

}  // namespace cfq
