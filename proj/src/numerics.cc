// nivec/numerics.cc

// Copyright 2026  The nivec Authors

// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//  http://www.apache.org/licenses/LICENSE-2.0
//
// THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
// KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
// WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
// MERCHANTABLITY OR NON-INFRINGEMENT.
// See the Apache 2 License for the specific language governing permissions and
// limitations under the License.

#include "nivec/numerics.h"

#include <cmath>
#include <numbers>

#include "nivec/error.h"

namespace nivec {

namespace {

constexpr double kSymmetryTolerance = 1e-10;

void CheckSymmetric(const Matrix &m, const char *what) {
  NIVEC_CHECK(m.rows() == m.cols(), ErrorCode::kDimensionMismatch,
              std::string(what) + ": matrix is not square");
  double scale = std::max(1.0, m.cwiseAbs().maxCoeff());
  if (Asymmetry(m) > kSymmetryTolerance * scale)
    Fail(ErrorCode::kInvalidArgument, std::string(what) + ": matrix is not symmetric");
}

}  // namespace

bool AllFinite(const Matrix &m) { return m.allFinite(); }
bool AllFinite(const Vector &v) { return v.allFinite(); }

Vector StableSoftmax(const Vector &logits) {
  NIVEC_CHECK(logits.size() >= 1, ErrorCode::kInvalidArgument, "softmax of empty vector");
  NIVEC_CHECK(logits.allFinite(), ErrorCode::kNonFinite, "softmax of non-finite logits");
  double max = logits.maxCoeff();
  Vector out = (logits.array() - max).exp().matrix();
  out /= out.sum();
  return out;
}

void StableSoftmaxRows(Matrix *logits) {
  NIVEC_CHECK(logits->cols() >= 1, ErrorCode::kInvalidArgument, "softmax over zero columns");
  NIVEC_CHECK(logits->allFinite(), ErrorCode::kNonFinite, "softmax of non-finite logits");
  for (Eigen::Index t = 0; t < logits->rows(); ++t) {
    auto row = logits->row(t);
    double max = row.maxCoeff();
    row = (row.array() - max).exp().matrix();
    row /= row.sum();
  }
}

Matrix Cholesky(const Matrix &spd) {
  CheckSymmetric(spd, "cholesky");
  const Eigen::Index n = spd.rows();
  Matrix l = Matrix::Zero(n, n);
  for (Eigen::Index j = 0; j < n; ++j) {
    double d = spd(j, j) - l.row(j).head(j).squaredNorm();
    if (!(d > 0.0) || !std::isfinite(d))
      Fail(ErrorCode::kNotPositiveDefinite,
           "cholesky: matrix not positive definite at pivot " + std::to_string(j));
    double ljj = std::sqrt(d);
    l(j, j) = ljj;
    for (Eigen::Index i = j + 1; i < n; ++i)
      l(i, j) = (spd(i, j) - l.row(i).head(j).dot(l.row(j).head(j))) / ljj;
  }
  return l;
}

SymEigResult SymEig(const Matrix &sym) {
  CheckSymmetric(sym, "sym_eig");
  Eigen::SelfAdjointEigenSolver<Eigen::MatrixXd> solver{Eigen::MatrixXd(sym)};
  NIVEC_CHECK(solver.info() == Eigen::Success, ErrorCode::kNonFinite,
              "sym_eig: eigen-solver did not converge");
  const Eigen::Index n = sym.rows();
  SymEigResult res;
  res.values.resize(n);
  res.vectors.resize(n, n);
  // Eigen returns ascending order.
  for (Eigen::Index i = 0; i < n; ++i) {
    res.values(i) = solver.eigenvalues()(n - 1 - i);
    res.vectors.col(i) = solver.eigenvectors().col(n - 1 - i);
  }
  return res;
}

Matrix SpdInverse(const Matrix &spd) {
  Matrix l = Cholesky(spd);
  Matrix linv = l.triangularView<Eigen::Lower>().solve(
      Matrix::Identity(spd.rows(), spd.cols()));
  return Symmetrize(linv.transpose() * linv);
}

double SpdLogDet(const Matrix &spd) {
  Matrix l = Cholesky(spd);
  return 2.0 * l.diagonal().array().log().sum();
}

double Asymmetry(const Matrix &m) {
  if (m.rows() != m.cols()) return std::numeric_limits<double>::infinity();
  if (m.size() == 0) return 0.0;
  return (m - m.transpose()).cwiseAbs().maxCoeff();
}

Matrix Symmetrize(const Matrix &m) { return 0.5 * (m + m.transpose()); }

uint64_t Fnv1a64(std::string_view bytes, uint64_t basis) {
  uint64_t h = basis;
  for (unsigned char c : bytes) {
    h ^= c;
    h *= 0x100000001b3ULL;
  }
  return h;
}

Rng::Rng(uint64_t seed, uint64_t stream) : seed_(seed), stream_(stream) {
  // pcg32_srandom_r
  inc_ = (stream << 1u) | 1u;
  state_ = 0;
  NextU32();
  state_ += seed;
  NextU32();
}

uint32_t Rng::NextU32() {
  uint64_t old = state_;
  state_ = old * 6364136223846793005ULL + inc_;
  uint32_t xorshifted = static_cast<uint32_t>(((old >> 18u) ^ old) >> 27u);
  uint32_t rot = static_cast<uint32_t>(old >> 59u);
  return (xorshifted >> rot) | (xorshifted << ((32u - rot) & 31u));
}

double Rng::Uniform() {
  uint64_t a = NextU32() >> 5;  // 27 bits
  uint64_t b = NextU32() >> 6;  // 26 bits
  return (static_cast<double>(a) * 67108864.0 + static_cast<double>(b)) / 9007199254740992.0;
}

uint32_t Rng::UniformInt(uint32_t n) {
  NIVEC_CHECK(n > 0, ErrorCode::kInvalidArgument, "UniformInt(0)");
  // Rejection to remove modulo bias.
  uint32_t threshold = static_cast<uint32_t>(-n) % n;
  for (;;) {
    uint32_t r = NextU32();
    if (r >= threshold) return r % n;
  }
}

double Rng::Normal() {
  if (has_spare_) {
    has_spare_ = false;
    return spare_;
  }
  double u1 = 1.0 - Uniform();  // (0, 1]
  double u2 = Uniform();
  double radius = std::sqrt(-2.0 * std::log(u1));
  double angle = 2.0 * std::numbers::pi * u2;
  spare_ = radius * std::sin(angle);
  has_spare_ = true;
  return radius * std::cos(angle);
}

Matrix Rng::NormalMatrix(int rows, int cols, double stddev) {
  Matrix m(rows, cols);
  for (int i = 0; i < rows; ++i)
    for (int j = 0; j < cols; ++j) m(i, j) = stddev * Normal();
  return m;
}

Rng Rng::Derive(std::string_view tag) const {
  uint64_t h = Fnv1a64(tag, Fnv1a64(std::to_string(seed_) + ":" + std::to_string(stream_)));
  return Rng(seed_ ^ h, h ^ stream_);
}

}  // namespace nivec
