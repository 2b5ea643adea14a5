// tests/test-util.h

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

#ifndef NIVEC_TESTS_TEST_UTIL_H_
#define NIVEC_TESTS_TEST_UTIL_H_

#include <boost/multiprecision/cpp_bin_float.hpp>
#include <boost/multiprecision/eigen.hpp>
#include <filesystem>
#include <functional>
#include <optional>
#include <string>

#include "nivec/aggregation.h"
#include "nivec/error.h"
#include "nivec/numerics.h"

namespace nivec::testing {

using Real = boost::multiprecision::cpp_bin_float_50;
using RealMatrix = Eigen::Matrix<Real, Eigen::Dynamic, Eigen::Dynamic>;
using RealVector = Eigen::Matrix<Real, Eigen::Dynamic, 1>;

inline RealMatrix ToReal(const Matrix &m) { return m.cast<Real>(); }
inline RealVector ToReal(const Vector &v) { return v.cast<Real>(); }

/// A A' / dim + ridge I, well conditioned.
inline Matrix RandomSpd(int dim, Rng *rng, double ridge = 0.5) {
  Matrix a = rng->NormalMatrix(dim, dim);
  return Symmetrize(a * a.transpose() / dim + ridge * Matrix::Identity(dim, dim));
}

inline GmmFullParams RandomGmm(int c, int d, Rng *rng) {
  GmmFullParams p;
  p.weights.resize(c);
  for (int i = 0; i < c; ++i) p.weights(i) = 0.2 + rng->Uniform();
  p.weights /= p.weights.sum();
  p.means = rng->NormalMatrix(c, d, 1.5);
  for (int i = 0; i < c; ++i) p.covs.push_back(RandomSpd(d, rng));
  return p;
}

/*
  Component posteriors straight from the definition
     w_c N(x; mu_c, Sigma_c) / sum_k w_k N(x; mu_k, Sigma_k)
  in 50-digit arithmetic with an LU inverse and determinant.
*/
inline Matrix GmmPosteriorOracle(const Matrix &x, const GmmFullParams &p) {
  const int c = p.NumComponents(), d = p.Dim();
  const Real two_pi = 2 * boost::multiprecision::acos(Real(-1));
  std::vector<RealMatrix> inv(c);
  std::vector<Real> norm(c);
  for (int k = 0; k < c; ++k) {
    RealMatrix s = ToReal(p.covs[k]);
    Eigen::FullPivLU<RealMatrix> lu(s);
    inv[k] = lu.inverse();
    norm[k] = Real(p.weights(k)) / boost::multiprecision::sqrt(pow(two_pi, d) * lu.determinant());
  }
  Matrix out(x.rows(), c);
  for (Eigen::Index t = 0; t < x.rows(); ++t) {
    std::vector<Real> dens(c);
    Real total = 0;
    for (int k = 0; k < c; ++k) {
      RealVector diff = ToReal(Vector(x.row(t).transpose() - p.means.row(k).transpose()));
      Real q = diff.dot(inv[k] * diff);
      dens[k] = norm[k] * boost::multiprecision::exp(-q / 2);
      total += dens[k];
    }
    for (int k = 0; k < c; ++k) out(t, k) = static_cast<double>(dens[k] / total);
  }
  return out;
}

inline double MaxAbsDiff(const Matrix &a, const Matrix &b) {
  return (a - b).cwiseAbs().maxCoeff();
}

/// Fresh empty directory under the system temp dir.
inline std::string TempDir(const std::string &name) {
  namespace fs = std::filesystem;
  fs::path p = fs::temp_directory_path() / ("nivec-test-" + name);
  fs::remove_all(p);
  fs::create_directories(p);
  return p.string();
}

/// Central difference of a scalar function of one matrix entry.
inline double NumericPartial(const std::function<double()> &f, double *theta) {
  const double orig = *theta, h = 1e-5 * std::max(1.0, std::abs(orig));
  *theta = orig + h;
  const double up = f();
  *theta = orig - h;
  const double down = f();
  *theta = orig;
  return (up - down) / (2.0 * h);
}

/// Code of the nivec::Error thrown by f, or nullopt when f returns normally.
template <typename F>
std::optional<ErrorCode> ThrownCode(F &&f) {
  try {
    f();
  } catch (const Error &e) {
    return e.code();
  }
  return std::nullopt;
}

}  // namespace nivec::testing

#endif  // NIVEC_TESTS_TEST_UTIL_H_
