// tests/ivector-fixtures.h

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

#ifndef NIVEC_TESTS_IVECTOR_FIXTURES_H_
#define NIVEC_TESTS_IVECTOR_FIXTURES_H_

#include <algorithm>
#include <cmath>
#include <numbers>
#include <vector>

#include "nivec/ivector.h"
#include "nivec/suffstats.h"

namespace nivec::testing {

inline IVectorExtractor RandomExtractor(int c, int d, int r, Rng *rng, double loading = 0.7,
                                        double mean_spread = 2.0) {
  IVectorExtractor ext;
  for (int k = 0; k < c; ++k) {
    Matrix block(d, r + 1);
    block.col(0) = rng->NormalMatrix(d, 1, mean_spread).col(0);
    block.rightCols(r) = rng->NormalMatrix(d, r, loading);
    ext.t.push_back(block);
  }
  ext.precision.resize(d);
  for (int j = 0; j < d; ++j) ext.precision(j) = 1.0 / (0.2 + 0.5 * rng->Uniform());
  return ext;
}

struct HardAlignedUtterance {
  Vector w;
  std::vector<int> components;
  Matrix frames;
  Matrix gamma;
  SufficientStats stats;
};

/// Frames from the model with uniformly drawn one-hot alignments.
inline HardAlignedUtterance SampleUtterance(const IVectorExtractor &ext, int t, Rng *rng) {
  HardAlignedUtterance u;
  const int c = ext.NumComponents(), d = ext.Dim(), r = ext.Rank();
  u.w = rng->NormalMatrix(r, 1).col(0);
  u.frames.resize(t, d);
  u.gamma = Matrix::Zero(t, c);
  for (int i = 0; i < t; ++i) {
    const int k = static_cast<int>(rng->UniformInt(c));
    u.components.push_back(k);
    u.gamma(i, k) = 1.0;
    Vector x = ext.t[k].col(0) + ext.t[k].rightCols(r) * u.w;
    for (int j = 0; j < d; ++j) x(j) += rng->Normal() / std::sqrt(ext.precision(j));
    u.frames.row(i) = x.transpose();
  }
  u.stats = AccumulateStats(u.frames, u.gamma, true);
  return u;
}

/// Soft statistics of random frames under random posteriors.
inline std::vector<SufficientStats> RandomSoftCorpus(int utts, int c, int d, Rng *rng) {
  std::vector<SufficientStats> out;
  Matrix centers = rng->NormalMatrix(c, d, 2.0);
  for (int u = 0; u < utts; ++u) {
    const int t = 5 + static_cast<int>(rng->UniformInt(40));
    Matrix shift = rng->NormalMatrix(1, d);
    Matrix x(t, d);
    Matrix logits(t, c);
    for (int i = 0; i < t; ++i) {
      const int k = static_cast<int>(rng->UniformInt(c));
      x.row(i) = centers.row(k) + shift + rng->NormalMatrix(1, d, 0.7);
      for (int j = 0; j < c; ++j) logits(i, j) = -0.5 * (x.row(i) - centers.row(j)).squaredNorm();
    }
    StableSoftmaxRows(&logits);
    out.push_back(AccumulateStats(x, logits, true));
  }
  return out;
}

/// Loadings of all components stacked into a (C*D) x R matrix.
inline Matrix StackedLoadings(const IVectorExtractor &ext) {
  const int d = ext.Dim(), r = ext.Rank();
  Matrix out(ext.NumComponents() * d, r);
  for (int c = 0; c < ext.NumComponents(); ++c) out.middleRows(c * d, d) = ext.t[c].rightCols(r);
  return out;
}

/// Largest principal angle between the column spaces of a and b.
inline double MaxPrincipalAngleDegrees(const Matrix &a, const Matrix &b) {
  Eigen::MatrixXd qa = Eigen::HouseholderQR<Eigen::MatrixXd>(a).householderQ() *
                       Eigen::MatrixXd::Identity(a.rows(), a.cols());
  Eigen::MatrixXd qb = Eigen::HouseholderQR<Eigen::MatrixXd>(b).householderQ() *
                       Eigen::MatrixXd::Identity(b.rows(), b.cols());
  Eigen::JacobiSVD<Eigen::MatrixXd> svd(qa.transpose() * qb);
  const double smallest = std::clamp(svd.singularValues().minCoeff(), 0.0, 1.0);
  return std::acos(smallest) * 180.0 / std::numbers::pi;
}

}  // namespace nivec::testing

#endif  // NIVEC_TESTS_IVECTOR_FIXTURES_H_
