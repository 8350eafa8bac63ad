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
#include <optional>

#include <nlohmann/json.hpp>

#include "cfq/ref_conv.hpp"
#include "cfq/tensor.hpp"

namespace cfq {

// How many channel blocks the storage formula charges for.
enum class BlockConvention {
  kCeil,         // ceil(k1 / M), the blocks actually stored
  kPaperPlusOne  // floor(k1 / M) + 1, the literal analytic formula
};

std::size_t blocks_for(std::size_t k1, std::size_t block_len, BlockConvention convention);

// 32 * k1*k2*k3*k4.
std::uint64_t storage_bits_direct(const Dims4& kernel_dims);

// 32*M*|D| + (ceil(log2 |D|) + 1) * B*k2*k3*k4.
std::uint64_t storage_bits_quantized(const Dims4& kernel_dims, std::size_t block_len, std::size_t dict_size,
                                     BlockConvention convention = BlockConvention::kCeil);

// 32 * R * (k1 + k2 + k3 + k4).
std::uint64_t storage_bits_cp(const Dims4& kernel_dims, std::size_t rank);

// Analytic MAC counts, evaluated as published:
//   direct = L1*L2*L3*L4 * k1*k2*k3*k4,  dictionary = L1*L2*L3*L4 * |D|.
// The direct formula uses input extents and counts the channel axis twice,
// so it does not match the executed count; both are reported side by side.
std::uint64_t mac_direct_paper(const Dims4& input_dims, const Dims4& kernel_dims);
std::uint64_t mac_dict_paper(const Dims4& input_dims, std::size_t dict_size);

// Closed forms of what conv2d_direct / conv2d_dict / conv2d_cp execute.
OpCount direct_op_count(const Dims4& input_dims, const Dims4& kernel_dims);
OpCount dict_op_count(const Dims4& input_dims, const Dims4& kernel_dims, std::size_t block_len,
                      std::size_t dict_size);
OpCount cp_op_count(const Dims4& input_dims, const Dims4& kernel_dims, std::size_t rank);

struct CostReport {
  std::optional<std::uint64_t> mac_direct_paper;
  std::optional<std::uint64_t> mac_dict_paper;
  std::optional<std::uint64_t> mult_direct_measured;
  std::optional<std::uint64_t> mult_dict_measured;
  std::optional<std::uint64_t> adds_dict_measured;
  std::uint64_t bits_direct = 0;
  std::uint64_t bits_quantized = 0;
  std::optional<double> speedup_paper;
  std::optional<double> speedup_measured;
  double compression = 0.0;
  std::optional<double> frobenius_error;
  std::optional<double> relative_error;
};

struct ReportInputs {
  Dims4 kernel_dims{1, 1, 1, 1};
  std::size_t block_len = 1;
  std::size_t dict_size = 1;
  BlockConvention convention = BlockConvention::kCeil;
  // Enables the analytic MAC fields.
  std::optional<Dims4> input_dims;
  // Executed counts for the direct and dictionary paths.
  std::optional<OpCount> direct_ops;
  std::optional<OpCount> dict_ops;
  std::optional<double> frobenius_error;
  std::optional<double> relative_error;
};

// Throws InvalidArgument / DimensionError on inconsistent inputs.
CostReport build_report(const ReportInputs& in);

// snake_case field names; absent optionals are omitted.
nlohmann::json to_json(const CostReport& r);

}  // namespace cfq
