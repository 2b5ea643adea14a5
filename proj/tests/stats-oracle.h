// tests/stats-oracle.h

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

#ifndef NIVEC_TESTS_STATS_ORACLE_H_
#define NIVEC_TESTS_STATS_ORACLE_H_

#include <algorithm>
#include <vector>

#include "nivec/suffstats.h"

namespace nivec::testing {

struct NaiveStats {
  std::vector<double> z;
  std::vector<std::vector<double>> f;
  std::vector<std::vector<std::vector<double>>> s;
};

inline NaiveStats TripleLoop(const Matrix &x, const Matrix &g) {
  const int t_len = static_cast<int>(x.rows()), c = static_cast<int>(g.cols()),
            d = static_cast<int>(x.cols());
  NaiveStats n;
  n.z.assign(c, 0.0);
  n.f.assign(c, std::vector<double>(d, 0.0));
  n.s.assign(c, std::vector<std::vector<double>>(d, std::vector<double>(d, 0.0)));
  for (int k = 0; k < c; ++k)
    for (int t = 0; t < t_len; ++t) {
      n.z[k] += g(t, k);
      for (int i = 0; i < d; ++i) {
        n.f[k][i] += g(t, k) * x(t, i);
        for (int j = 0; j < d; ++j) n.s[k][i][j] += g(t, k) * x(t, i) * x(t, j);
      }
    }
  return n;
}

inline Matrix RandomPosteriors(int t, int c, Rng *rng) {
  Matrix logits = 2.0 * rng->NormalMatrix(t, c);
  StableSoftmaxRows(&logits);
  return logits;
}

inline double MaxDiff(const SufficientStats &a, const SufficientStats &b) {
  double m = (a.zeroth - b.zeroth).cwiseAbs().maxCoeff();
  m = std::max(m, (a.first - b.first).cwiseAbs().maxCoeff());
  return std::max(m, (a.second - b.second).cwiseAbs().maxCoeff());
}


}  // namespace nivec::testing

#endif  // NIVEC_TESTS_STATS_ORACLE_H_
