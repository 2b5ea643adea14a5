// nivec/numerics.h

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

#ifndef NIVEC_NUMERICS_H_
#define NIVEC_NUMERICS_H_

#include <cstdint>
#include <string>
#include <string_view>
#include <vector>

#include <Eigen/Dense>

namespace nivec {

// All core math is double precision.  Matrices are row-major so that a
// T x D feature matrix stores frame t contiguously.
using Matrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using Vector = Eigen::VectorXd;

bool AllFinite(const Matrix &m);
bool AllFinite(const Vector &v);

/// Softmax with max-subtraction.  Throws on non-finite input or empty input.
Vector StableSoftmax(const Vector &logits);

/// Row-wise softmax of a T x C logit matrix, in place.
void StableSoftmaxRows(Matrix *logits);

/// Lower-triangular Cholesky factor L with L L^T = spd.  On failure the error
/// message names the pivot index at which positivity was lost.
Matrix Cholesky(const Matrix &spd);

struct SymEigResult {
  Vector values;   // descending
  Matrix vectors;  // column i pairs with values(i)
};

/// Eigen-decomposition of a symmetric matrix, eigenvalues sorted descending.
SymEigResult SymEig(const Matrix &sym);

/// Inverse of an SPD matrix through its Cholesky factor; result symmetrized.
Matrix SpdInverse(const Matrix &spd);

/// log|spd| through its Cholesky factor.
double SpdLogDet(const Matrix &spd);

/// Largest |a_ij - a_ji|.
double Asymmetry(const Matrix &m);

Matrix Symmetrize(const Matrix &m);

/// PCG-XSH-RR 32-bit generator (64-bit LCG state).  Normal draws use the
/// Box-Muller transform with a cached spare, so streams are identical across
/// compilers and standard libraries.
class Rng {
 public:
  explicit Rng(uint64_t seed, uint64_t stream = 0);

  uint32_t NextU32();
  /// Uniform in [0, 1) with 53 random bits.
  double Uniform();
  /// Uniform integer in [0, n).
  uint32_t UniformInt(uint32_t n);
  double Normal();
  double Normal(double mean, double stddev) { return mean + stddev * Normal(); }
  Matrix NormalMatrix(int rows, int cols, double stddev = 1.0);

  /// Independent substream keyed by a string tag; same (seed, tag) gives the
  /// same stream regardless of how much this generator has been used.
  Rng Derive(std::string_view tag) const;

  template <class T>
  void Shuffle(std::vector<T> *v) {
    for (size_t i = v->size(); i > 1; --i) {
      size_t j = UniformInt(static_cast<uint32_t>(i));
      std::swap((*v)[i - 1], (*v)[j]);
    }
  }

  uint64_t seed() const { return seed_; }
  static constexpr std::string_view kAlgorithm = "pcg32-xsh-rr";

 private:
  uint64_t seed_;
  uint64_t stream_;
  uint64_t state_ = 0;
  uint64_t inc_ = 0;
  bool has_spare_ = false;
  double spare_ = 0.0;
};

/// 64-bit FNV-1a; used for content hashes and RNG stream derivation.
uint64_t Fnv1a64(std::string_view bytes, uint64_t basis = 0xcbf29ce484222325ULL);

}  // namespace nivec

#endif  // NIVEC_NUMERICS_H_
