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
#include <filesystem>
#include <span>
#include <vector>

#include "cfq/cp.hpp"
#include "cfq/quantizer.hpp"
#include "cfq/tensor.hpp"

// Little-endian binary formats.
//
//   .t4   "T4F1" | d0 d1 d2 d3 (u32) | reserved u32 = 0 | d0*d1*d2*d3 f32, row-major
//   .cdq  "CDQ1" | k1 k2 k3 k4 (u32) | M (u32) | |D| (u32) | b (u8)
//         | |D|*M f32 centroids | B*k2*k3*k4 indices, b bits each, LSB-first,
//         zero-padded to a byte boundary; b = ceil(log2 |D|) + 1
//   .cpf  "CPF1" | k1 k2 k3 k4 (u32) | R (u32) | four factor matrices in mode
//         order, each k_n*R f32 with element (i,r) at i*R + r
//
// Readers reject bad magic, truncated or oversized payloads, non-finite
// values and inconsistent headers with FormatError.
namespace cfq {

using Bytes = std::vector<std::uint8_t>;

inline constexpr std::size_t kT4HeaderBytes = 24;
inline constexpr std::size_t kCdqHeaderBytes = 29;
inline constexpr std::size_t kCpfHeaderBytes = 24;

// ceil(log2 n) + 1 for n >= 1.
unsigned index_bit_width(std::uint64_t dict_size);

Bytes write_t4(const Tensor4& t);
Tensor4 read_t4(std::span<const std::uint8_t> bytes);

Bytes write_cdq(const QuantizedKernel& q);
QuantizedKernel read_cdq(std::span<const std::uint8_t> bytes);

Bytes write_cpf(const CpFactors& f);
CpFactors read_cpf(std::span<const std::uint8_t> bytes);

// Pack / unpack unsigned values at a fixed width, LSB-first.
Bytes pack_bits(std::span<const std::uint32_t> values, unsigned width);
std::vector<std::uint32_t> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t count, unsigned width);

Bytes read_file(const std::filesystem::path& path);
void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes);

}  // namespace cfq
