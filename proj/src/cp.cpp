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

#include "cfq/cp.hpp"

#include <cassert>
#include <cmath>

#include <Eigen/SVD>

#include "cfq/rng.hpp"

namespace cfq {
namespace {

using Factors = std::array<Eigen::MatrixXd, 4>;

// Mode-n unfolding; the remaining modes keep increasing order with the last
// one varying fastest.
Eigen::MatrixXd unfold(const BasicTensor4<double>& t, int mode) {
  const Dims4& d = t.dims();
  const auto rows = static_cast<Eigen::Index>(d[mode]);
  const auto cols = static_cast<Eigen::Index>(t.size() / d[mode]);
  Eigen::MatrixXd out(rows, cols);
  std::array<std::size_t, 4> idx{};
  for (idx[0] = 0; idx[0] < d[0]; ++idx[0]) {
    for (idx[1] = 0; idx[1] < d[1]; ++idx[1]) {
      for (idx[2] = 0; idx[2] < d[2]; ++idx[2]) {
        for (idx[3] = 0; idx[3] < d[3]; ++idx[3]) {
          std::size_t col = 0;
          for (int m = 0; m < 4; ++m) {
            if (m != mode) col = col * d[m] + idx[m];
          }
          out(static_cast<Eigen::Index>(idx[mode]), static_cast<Eigen::Index>(col)) =
              t(idx[0], idx[1], idx[2], idx[3]);
        }
      }
    }
  }
  return out;
}

// Khatri-Rao product of the three factors other than `mode`, row order
// matching unfold().
Eigen::MatrixXd khatri_rao_except(const Factors& a, int mode) {
  const Eigen::Index rank = a[0].cols();
  Eigen::MatrixXd kr = Eigen::MatrixXd::Ones(1, rank);
  for (int m = 0; m < 4; ++m) {
    if (m == mode) continue;
    Eigen::MatrixXd next(kr.rows() * a[m].rows(), rank);
    for (Eigen::Index i = 0; i < kr.rows(); ++i) {
      for (Eigen::Index j = 0; j < a[m].rows(); ++j) {
        next.row(i * a[m].rows() + j) = kr.row(i).cwiseProduct(a[m].row(j));
      }
    }
    kr = std::move(next);
  }
  return kr;
}

Eigen::MatrixXd pseudo_inverse(const Eigen::MatrixXd& v, double tol) {
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(v, Eigen::ComputeFullU | Eigen::ComputeFullV);
  const auto& s = svd.singularValues();
  const double cutoff = s.size() > 0 ? tol * s[0] : 0.0;
  Eigen::VectorXd inv = Eigen::VectorXd::Zero(s.size());
  for (Eigen::Index i = 0; i < s.size(); ++i) {
    if (s[i] > cutoff) inv[i] = 1.0 / s[i];
  }
  return svd.matrixV() * inv.asDiagonal() * svd.matrixU().transpose();
}

BasicTensor4<double> reconstruct_double(const Factors& a, const Dims4& d) {
  BasicTensor4<double>::Vector data(static_cast<Eigen::Index>(element_count(d)));
  Eigen::Index o = 0;
  for (std::size_t i = 0; i < d[0]; ++i) {
    for (std::size_t j = 0; j < d[1]; ++j) {
      for (std::size_t k = 0; k < d[2]; ++k) {
        const Eigen::RowVectorXd ijk = a[0].row(i).cwiseProduct(a[1].row(j)).cwiseProduct(a[2].row(k));
        for (std::size_t l = 0; l < d[3]; ++l) data[o++] = ijk.dot(a[3].row(l));
      }
    }
  }
  return BasicTensor4<double>(d, std::move(data));
}

// Moves column norms of mode `mode` (0..2) into the weights of mode 3.
void normalize_into_weights(Factors& a, int mode) {
  for (Eigen::Index r = 0; r < a[mode].cols(); ++r) {
    const double s = a[mode].col(r).norm();
    if (s > 0.0) {
      a[mode].col(r) /= s;
      a[3].col(r) *= s;
    }
  }
}

// Relative residual at the double rounding floor.
constexpr double kExactFit = 1e-13;

CpFit run_als(const Tensor4& w, Factors a, const AlsOptions& opts) {
  if (opts.max_iters < 1) throw InvalidArgument("ALS max_iters must be >= 1");
  const BasicTensor4<double> t = w.cast<double>();
  const double norm = frobenius_norm(t);
  if (norm == 0.0) throw NumericalError("CP decomposition of an all-zero tensor");

  std::array<Eigen::MatrixXd, 4> unfolded;
  for (int m = 0; m < 4; ++m) unfolded[m] = unfold(t, m);

  CpFit out;
  double previous = frobenius_distance(t, reconstruct_double(a, t.dims())) / norm;
  constexpr std::array<int, 4> kOrder{3, 0, 1, 2};
  for (std::size_t sweep = 0; sweep < opts.max_iters; ++sweep) {
    const Factors before = a;
    for (int mode : kOrder) {
      Eigen::MatrixXd gram = Eigen::MatrixXd::Ones(a[0].cols(), a[0].cols());
      for (int m = 0; m < 4; ++m) {
        if (m != mode) gram = gram.cwiseProduct(a[m].transpose() * a[m]);
      }
      a[mode] = unfolded[mode] * khatri_rao_except(a, mode) * pseudo_inverse(gram, opts.pinv_tol);
      if (mode != 3) normalize_into_weights(a, mode);
    }
    const double fit = frobenius_distance(t, reconstruct_double(a, t.dims())) / norm;
    if (fit > previous) {
      // Over-complete ranks make the normal equations ill-conditioned once
      // the residual is near zero; keep the better factors.
      a = before;
      break;
    }
    assert(fit <= previous + 1e-9);
    out.fit_history.push_back(fit);
    const bool done = fit <= kExactFit || std::abs(previous - fit) < opts.rel_fit_tol;
    previous = fit;
    if (done) break;
  }
  if (out.fit_history.empty()) out.fit_history.push_back(previous);
  for (int m = 0; m < 4; ++m) out.factors.factors[m] = a[m].cast<float>();
  out.factors.validate();
  return out;
}

}  // namespace

void CpFactors::validate() const {
  const Eigen::Index r = factors[0].cols();
  if (r < 1) throw InvalidArgument("CP rank must be >= 1");
  for (const auto& f : factors) {
    if (f.cols() != r) throw DimensionError("CP factor ranks disagree");
    if (f.rows() < 1) throw DimensionError("CP factor with zero rows");
    if (!f.allFinite()) throw NumericalError("CP factors contain non-finite values");
  }
}

CpFit cp_als(const Tensor4& w, std::size_t rank, const AlsOptions& opts) {
  if (rank < 1) throw InvalidArgument("CP rank must be >= 1");
  Rng rng(opts.seed);
  Factors a;
  for (int m = 0; m < 4; ++m) {
    a[m].resize(static_cast<Eigen::Index>(w.dim(m)), static_cast<Eigen::Index>(rank));
    for (Eigen::Index i = 0; i < a[m].rows(); ++i) {
      for (Eigen::Index r = 0; r < a[m].cols(); ++r) a[m](i, r) = rng.uniform(-1.0, 1.0);
    }
  }
  for (int m = 0; m < 3; ++m) normalize_into_weights(a, m);
  return run_als(w, std::move(a), opts);
}

CpFit cp_als(const Tensor4& w, const CpFactors& init, const AlsOptions& opts) {
  init.validate();
  if (init.dims() != w.dims()) throw DimensionError("initial CP factors do not match kernel dims");
  Factors a;
  for (int m = 0; m < 4; ++m) a[m] = init.factors[m].cast<double>();
  return run_als(w, std::move(a), opts);
}

CpFactors pad_rank(const CpFactors& f, std::uint64_t seed) {
  f.validate();
  Rng rng(seed);
  CpFactors out;
  const Eigen::Index r = f.factors[0].cols();
  for (int m = 0; m < 4; ++m) {
    out.factors[m].resize(f.factors[m].rows(), r + 1);
    out.factors[m].leftCols(r) = f.factors[m];
    if (m == 3) {
      out.factors[m].col(r).setZero();
      continue;
    }
    Eigen::VectorXd v(f.factors[m].rows());
    do {
      for (Eigen::Index i = 0; i < v.size(); ++i) v[i] = rng.uniform(-1.0, 1.0);
    } while (v.norm() == 0.0);
    out.factors[m].col(r) = (v / v.norm()).cast<float>();
  }
  return out;
}

Tensor4 cp_reconstruct(const CpFactors& f, const Dims4& dims) {
  f.validate();
  if (f.dims() != dims) {
    throw DimensionError("CP factor rows " + to_string(f.dims()) + " do not match dims " + to_string(dims));
  }
  Factors a;
  for (int m = 0; m < 4; ++m) a[m] = f.factors[m].cast<double>();
  return reconstruct_double(a, dims).cast<float>();
}

Counted<Tensor4> conv2d_cp(const Tensor4& x, const CpFactors& f) {
  f.validate();
  const Dims4 out_dims = conv_output_dims(x.dims(), f.dims());
  const auto [channels, height, width, batch] = x.dims();
  const std::size_t k2 = f.dims()[1];
  const std::size_t k3 = f.dims()[2];
  const std::size_t k4 = f.dims()[3];
  const std::size_t out_h = out_dims[1];
  const std::size_t out_w = out_dims[2];
  const auto& a0 = f.factors[0];
  const auto& a1 = f.factors[1];
  const auto& a2 = f.factors[2];
  const auto& a3 = f.factors[3];

  Eigen::VectorXd out = Eigen::VectorXd::Zero(static_cast<Eigen::Index>(element_count(out_dims)));
  OpCount ops;
  Eigen::MatrixXd s(height, width), v(out_h, width), u(out_h, out_w);
  for (std::size_t n = 0; n < batch; ++n) {
    for (Eigen::Index r = 0; r < a0.cols(); ++r) {
      // channel contraction
      for (std::size_t y = 0; y < height; ++y) {
        for (std::size_t xx = 0; xx < width; ++xx) {
          double acc = static_cast<double>(a0(0, r)) * x(0, y, xx, n);
          ++ops.multiplies;
          for (std::size_t c = 1; c < channels; ++c) {
            acc += static_cast<double>(a0(static_cast<Eigen::Index>(c), r)) * x(c, y, xx, n);
            ++ops.multiplies;
            ++ops.additions;
          }
          s(y, xx) = acc;
        }
      }
      // vertical pass
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t xx = 0; xx < width; ++xx) {
          double acc = static_cast<double>(a1(0, r)) * s(oy, xx);
          ++ops.multiplies;
          for (std::size_t j = 1; j < k2; ++j) {
            acc += static_cast<double>(a1(static_cast<Eigen::Index>(j), r)) * s(oy + j, xx);
            ++ops.multiplies;
            ++ops.additions;
          }
          v(oy, xx) = acc;
        }
      }
      // horizontal pass
      for (std::size_t oy = 0; oy < out_h; ++oy) {
        for (std::size_t ox = 0; ox < out_w; ++ox) {
          double acc = static_cast<double>(a2(0, r)) * v(oy, ox);
          ++ops.multiplies;
          for (std::size_t k = 1; k < k3; ++k) {
            acc += static_cast<double>(a2(static_cast<Eigen::Index>(k), r)) * v(oy, ox + k);
            ++ops.multiplies;
            ++ops.additions;
          }
          u(oy, ox) = acc;
        }
      }
      // scatter into output channels
      for (std::size_t co = 0; co < k4; ++co) {
        const double weight = a3(static_cast<Eigen::Index>(co), r);
        for (std::size_t oy = 0; oy < out_h; ++oy) {
          for (std::size_t ox = 0; ox < out_w; ++ox) {
            double& dst = out[static_cast<Eigen::Index>(((co * out_h + oy) * out_w + ox) * batch + n)];
            const double term = weight * u(oy, ox);
            ++ops.multiplies;
            if (r == 0) {
              dst = term;
            } else {
              dst += term;
              ++ops.additions;
            }
          }
        }
      }
    }
  }
  return {Tensor4(out_dims, out.cast<float>()), ops};
}

}  // namespace cfq
