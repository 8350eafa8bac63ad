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

#include "cfq/io.hpp"

#include <bit>
#include <cmath>
#include <cstring>
#include <fstream>
#include <iterator>
#include <limits>
#include <string_view>

namespace cfq {
namespace {

class Writer {
 public:
  void magic(std::string_view m) { out_.insert(out_.end(), m.begin(), m.end()); }
  void u8(std::uint8_t v) { out_.push_back(v); }
  void u32(std::uint64_t v) {
    if (v > std::numeric_limits<std::uint32_t>::max()) throw InvalidArgument("value does not fit in 32 bits");
    for (int i = 0; i < 4; ++i) out_.push_back(static_cast<std::uint8_t>(v >> (8 * i)));
  }
  void f32(float v) { u32(std::bit_cast<std::uint32_t>(v)); }
  void raw(std::span<const std::uint8_t> bytes) { out_.insert(out_.end(), bytes.begin(), bytes.end()); }
  Bytes take() { return std::move(out_); }

 private:
  Bytes out_;
};

class Reader {
 public:
  explicit Reader(std::span<const std::uint8_t> in) : in_(in) {}

  void magic(std::string_view m) {
    need(m.size());
    if (std::memcmp(in_.data() + pos_, m.data(), m.size()) != 0) {
      throw FormatError("bad magic, expected \"" + std::string(m) + "\"");
    }
    pos_ += m.size();
  }
  std::uint8_t u8() {
    need(1);
    return in_[pos_++];
  }
  std::uint32_t u32() {
    need(4);
    std::uint32_t v = 0;
    for (int i = 0; i < 4; ++i) v |= static_cast<std::uint32_t>(in_[pos_ + i]) << (8 * i);
    pos_ += 4;
    return v;
  }
  float f32() {
    const float v = std::bit_cast<float>(u32());
    if (!std::isfinite(v)) throw FormatError("payload contains a non-finite value");
    return v;
  }
  std::span<const std::uint8_t> raw(std::size_t n) {
    need(n);
    auto s = in_.subspan(pos_, n);
    pos_ += n;
    return s;
  }
  std::size_t remaining() const { return in_.size() - pos_; }
  void need(std::size_t n) const {
    if (remaining() < n) throw FormatError("truncated input");
  }
  void finish() const {
    if (remaining() != 0) throw FormatError(std::to_string(remaining()) + " trailing bytes after payload");
  }

 private:
  std::span<const std::uint8_t> in_;
  std::size_t pos_ = 0;
};

Dims4 read_dims(Reader& r) {
  Dims4 d{};
  for (auto& e : d) {
    e = r.u32();
    if (e == 0) throw FormatError("zero extent in header");
  }
  return d;
}

std::uint64_t checked_count(const Dims4& d) {
  try {
    return element_count(d);
  } catch (const NumericalError&) {
    throw FormatError("header dims " + to_string(d) + " overflow a 64-bit element count");
  }
}

// Guards payload arithmetic before allocating: count * unit must fit the input.
void need_payload(const Reader& r, std::uint64_t count, std::uint64_t unit) {
  std::uint64_t bytes = 0;
  if (__builtin_mul_overflow(count, unit, &bytes) || bytes > r.remaining()) throw FormatError("truncated payload");
}

}  // namespace

unsigned index_bit_width(std::uint64_t dict_size) {
  if (dict_size == 0) throw InvalidArgument("dictionary size must be >= 1");
  return static_cast<unsigned>(std::bit_width(dict_size - 1)) + 1;
}

Bytes pack_bits(std::span<const std::uint32_t> values, unsigned width) {
  if (width == 0 || width > 32) throw InvalidArgument("bit width must be in [1, 32]");
  Bytes out((values.size() * width + 7) / 8, 0);
  std::size_t bit = 0;
  for (std::uint32_t v : values) {
    if (width < 32 && (v >> width) != 0) throw InvalidArgument("value does not fit the bit width");
    for (unsigned i = 0; i < width; ++i, ++bit) {
      if ((v >> i) & 1u) out[bit / 8] |= static_cast<std::uint8_t>(1u << (bit % 8));
    }
  }
  return out;
}

std::vector<std::uint32_t> unpack_bits(std::span<const std::uint8_t> bytes, std::size_t count, unsigned width) {
  if (width == 0 || width > 32) throw InvalidArgument("bit width must be in [1, 32]");
  if (bytes.size() * 8 < count * width) throw FormatError("truncated bit-packed payload");
  std::vector<std::uint32_t> out(count, 0);
  std::size_t bit = 0;
  for (auto& v : out) {
    for (unsigned i = 0; i < width; ++i, ++bit) {
      if ((bytes[bit / 8] >> (bit % 8)) & 1u) v |= 1u << i;
    }
  }
  return out;
}

Bytes write_t4(const Tensor4& t) {
  Writer w;
  w.magic("T4F1");
  for (std::size_t d : t.dims()) w.u32(d);
  w.u32(0);
  for (Eigen::Index i = 0; i < t.data().size(); ++i) w.f32(t.data()[i]);
  return w.take();
}

Tensor4 read_t4(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic("T4F1");
  const Dims4 dims = read_dims(r);
  if (r.u32() != 0) throw FormatError("reserved header field is not zero");
  const std::uint64_t n = checked_count(dims);
  need_payload(r, n, 4);
  Tensor4::Vector data(static_cast<Eigen::Index>(n));
  for (Eigen::Index i = 0; i < data.size(); ++i) data[i] = r.f32();
  r.finish();
  return Tensor4(dims, std::move(data));
}

Bytes write_cdq(const QuantizedKernel& q) {
  q.validate();
  const std::size_t nd = q.dictionary.size();
  const unsigned width = index_bit_width(nd);
  Writer w;
  w.magic("CDQ1");
  for (std::size_t d : q.kernel_dims) w.u32(d);
  w.u32(q.dictionary.block_len);
  w.u32(nd);
  w.u8(static_cast<std::uint8_t>(width));
  // Column-major M x |D|: centroid-by-centroid.
  const float* c = q.dictionary.centroids.data();
  for (Eigen::Index i = 0; i < q.dictionary.centroids.size(); ++i) w.f32(c[i]);
  w.raw(pack_bits(q.order.entries, width));
  return w.take();
}

QuantizedKernel read_cdq(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic("CDQ1");
  QuantizedKernel q;
  q.kernel_dims = read_dims(r);
  checked_count(q.kernel_dims);
  const std::size_t m_len = r.u32();
  const std::size_t nd = r.u32();
  const unsigned width = r.u8();
  if (m_len == 0 || m_len > q.kernel_dims[0]) throw FormatError("block length out of range");
  if (nd == 0) throw FormatError("empty dictionary");
  if (width != index_bit_width(nd)) throw FormatError("index bit width does not match dictionary size");

  need_payload(r, static_cast<std::uint64_t>(m_len) * nd, 4);
  q.dictionary.block_len = m_len;
  q.dictionary.centroids.resize(static_cast<Eigen::Index>(m_len), static_cast<Eigen::Index>(nd));
  float* c = q.dictionary.centroids.data();
  for (Eigen::Index i = 0; i < q.dictionary.centroids.size(); ++i) c[i] = r.f32();

  q.order.dims = {block_count(q.kernel_dims[0], m_len), q.kernel_dims[1], q.kernel_dims[2], q.kernel_dims[3]};
  const std::uint64_t n_idx = checked_count(q.order.dims);
  std::uint64_t bits = 0;
  if (__builtin_mul_overflow(n_idx, static_cast<std::uint64_t>(width), &bits)) throw FormatError("index payload overflow");
  const auto packed = r.raw((bits + 7) / 8);
  r.finish();
  q.order.entries = unpack_bits(packed, n_idx, width);
  if (bits % 8 != 0 && (packed.back() >> (bits % 8)) != 0) throw FormatError("non-zero padding bits");
  try {
    q.validate();
  } catch (const DimensionError& e) {
    throw FormatError(e.what());
  }
  return q;
}

Bytes write_cpf(const CpFactors& f) {
  f.validate();
  Writer w;
  w.magic("CPF1");
  for (std::size_t d : f.dims()) w.u32(d);
  w.u32(f.rank());
  for (const auto& a : f.factors) {
    for (Eigen::Index i = 0; i < a.rows(); ++i) {
      for (Eigen::Index r = 0; r < a.cols(); ++r) w.f32(a(i, r));
    }
  }
  return w.take();
}

CpFactors read_cpf(std::span<const std::uint8_t> bytes) {
  Reader r(bytes);
  r.magic("CPF1");
  const Dims4 dims = read_dims(r);
  const std::size_t rank = r.u32();
  if (rank == 0) throw FormatError("CP rank 0");
  CpFactors f;
  for (int m = 0; m < 4; ++m) {
    need_payload(r, static_cast<std::uint64_t>(dims[m]) * rank, 4);
    f.factors[m].resize(static_cast<Eigen::Index>(dims[m]), static_cast<Eigen::Index>(rank));
    for (Eigen::Index i = 0; i < f.factors[m].rows(); ++i) {
      for (Eigen::Index c = 0; c < f.factors[m].cols(); ++c) f.factors[m](i, c) = r.f32();
    }
  }
  r.finish();
  return f;
}

Bytes read_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw IoError("cannot open " + path.string());
  Bytes out((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
  if (in.bad()) throw IoError("read failed for " + path.string());
  return out;
}

void write_file(const std::filesystem::path& path, std::span<const std::uint8_t> bytes) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw IoError("cannot write " + path.string());
  out.write(reinterpret_cast<const char*>(bytes.data()), static_cast<std::streamsize>(bytes.size()));
  out.close();
  if (!out) {
    std::error_code ec;
    std::filesystem::remove(path, ec);
    throw IoError("write failed for " + path.string());
  }
}

}  // namespace cfq
