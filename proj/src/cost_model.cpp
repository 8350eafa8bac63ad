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

#include "cfq/cost_model.hpp"

#include "cfq/io.hpp"
#include "cfq/quantizer.hpp"

namespace cfq {
namespace {

std::uint64_t mul(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_mul_overflow(a, b, &r)) throw NumericalError("cost count overflows 64 bits");
  return r;
}

std::uint64_t add(std::uint64_t a, std::uint64_t b) {
  std::uint64_t r = 0;
  if (__builtin_add_overflow(a, b, &r)) throw NumericalError("cost count overflows 64 bits");
  return r;
}

void check_block(const Dims4& kernel_dims, std::size_t block_len, std::size_t dict_size) {
  element_count(kernel_dims);
  for (std::size_t d : kernel_dims) {
    if (d == 0) throw DimensionError("kernel extents must be >= 1");
  }
  if (block_len < 1 || block_len > kernel_dims[0]) throw InvalidArgument("block length out of range");
  if (dict_size < 1) throw InvalidArgument("dictionary size must be >= 1");
}

}  // namespace

std::size_t blocks_for(std::size_t k1, std::size_t block_len, BlockConvention convention) {
  if (block_len == 0) throw InvalidArgument("block length must be >= 1");
  return convention == BlockConvention::kCeil ? block_count(k1, block_len) : k1 / block_len + 1;
}

std::uint64_t storage_bits_direct(const Dims4& kernel_dims) { return mul(32, element_count(kernel_dims)); }

std::uint64_t storage_bits_quantized(const Dims4& kernel_dims, std::size_t block_len, std::size_t dict_size,
                                     BlockConvention convention) {
  check_block(kernel_dims, block_len, dict_size);
  const std::uint64_t dictionary = mul(mul(32, block_len), dict_size);
  const Dims4 order{blocks_for(kernel_dims[0], block_len, convention), kernel_dims[1], kernel_dims[2],
                    kernel_dims[3]};
  return add(dictionary, mul(index_bit_width(dict_size), element_count(order)));
}

std::uint64_t storage_bits_cp(const Dims4& kernel_dims, std::size_t rank) {
  std::uint64_t rows = 0;
  for (std::size_t d : kernel_dims) rows = add(rows, d);
  return mul(mul(32, rank), rows);
}

std::uint64_t mac_direct_paper(const Dims4& input_dims, const Dims4& kernel_dims) {
  return mul(element_count(input_dims), element_count(kernel_dims));
}

std::uint64_t mac_dict_paper(const Dims4& input_dims, std::size_t dict_size) {
  return mul(element_count(input_dims), dict_size);
}

OpCount direct_op_count(const Dims4& input_dims, const Dims4& kernel_dims) {
  const Dims4 out = conv_output_dims(input_dims, kernel_dims);
  const std::uint64_t outputs = element_count(out);
  const std::uint64_t window = kernel_dims[0] * kernel_dims[1] * kernel_dims[2];
  return {mul(outputs, window), mul(outputs, window - 1)};
}

OpCount dict_op_count(const Dims4& input_dims, const Dims4& kernel_dims, std::size_t block_len,
                      std::size_t dict_size) {
  check_block(kernel_dims, block_len, dict_size);
  const Dims4 out = conv_output_dims(input_dims, kernel_dims);
  const std::uint64_t nb = block_count(kernel_dims[0], block_len);
  const std::uint64_t table = mul(mul(mul(input_dims[3], input_dims[1]), mul(input_dims[2], nb)),
                                  mul(block_len, dict_size));
  return {table, mul(element_count(out), nb * kernel_dims[1] * kernel_dims[2] - 1)};
}

OpCount cp_op_count(const Dims4& input_dims, const Dims4& kernel_dims, std::size_t rank) {
  if (rank < 1) throw InvalidArgument("CP rank must be >= 1");
  const Dims4 out = conv_output_dims(input_dims, kernel_dims);
  const std::uint64_t c = input_dims[0], h = input_dims[1], w = input_dims[2], n = input_dims[3];
  const std::uint64_t oh = out[1], ow = out[2];
  const std::uint64_t k2 = kernel_dims[1], k3 = kernel_dims[2], k4 = kernel_dims[3];
  const std::uint64_t per_rank_mults = c * h * w + k2 * oh * w + k3 * oh * ow + k4 * oh * ow;
  const std::uint64_t per_rank_adds = (c - 1) * h * w + (k2 - 1) * oh * w + (k3 - 1) * oh * ow;
  const std::uint64_t scatter_adds = (rank - 1) * k4 * oh * ow;
  return {mul(mul(n, rank), per_rank_mults), mul(n, add(mul(rank, per_rank_adds), scatter_adds))};
}

CostReport build_report(const ReportInputs& in) {
  check_block(in.kernel_dims, in.block_len, in.dict_size);
  CostReport r;
  r.bits_direct = storage_bits_direct(in.kernel_dims);
  r.bits_quantized = storage_bits_quantized(in.kernel_dims, in.block_len, in.dict_size, in.convention);
  r.compression = static_cast<double>(r.bits_direct) / static_cast<double>(r.bits_quantized);
  if (in.input_dims) {
    if ((*in.input_dims)[0] != in.kernel_dims[0]) {
      throw DimensionError("input channels " + std::to_string((*in.input_dims)[0]) + " do not match k1 = " +
                           std::to_string(in.kernel_dims[0]));
    }
    r.mac_direct_paper = mac_direct_paper(*in.input_dims, in.kernel_dims);
    r.mac_dict_paper = mac_dict_paper(*in.input_dims, in.dict_size);
    r.speedup_paper = static_cast<double>(*r.mac_direct_paper) / static_cast<double>(*r.mac_dict_paper);
  }
  if (in.direct_ops) r.mult_direct_measured = in.direct_ops->multiplies;
  if (in.dict_ops) {
    r.mult_dict_measured = in.dict_ops->multiplies;
    r.adds_dict_measured = in.dict_ops->additions;
  }
  if (r.mult_direct_measured && r.mult_dict_measured) {
    if (*r.mult_dict_measured == 0) throw InvalidArgument("measured dictionary multiplies must be positive");
    r.speedup_measured = static_cast<double>(*r.mult_direct_measured) / static_cast<double>(*r.mult_dict_measured);
  }
  if (in.frobenius_error.has_value() != in.relative_error.has_value()) {
    throw InvalidArgument("frobenius and relative error must be supplied together");
  }
  r.frobenius_error = in.frobenius_error;
  r.relative_error = in.relative_error;
  return r;
}

nlohmann::json to_json(const CostReport& r) {
  nlohmann::json j;
  auto put = [&j](const char* key, const auto& opt) {
    if (opt) j[key] = *opt;
  };
  put("mac_direct_paper", r.mac_direct_paper);
  put("mac_dict_paper", r.mac_dict_paper);
  put("mult_direct_measured", r.mult_direct_measured);
  put("mult_dict_measured", r.mult_dict_measured);
  put("adds_dict_measured", r.adds_dict_measured);
  j["bits_direct"] = r.bits_direct;
  j["bits_quantized"] = r.bits_quantized;
  put("speedup_paper", r.speedup_paper);
  put("speedup_measured", r.speedup_measured);
  j["compression"] = r.compression;
  put("frobenius_error", r.frobenius_error);
  put("relative_error", r.relative_error);
  return j;
}

}  // namespace cfq
