// tests/metrics-oracle.h

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

#ifndef NIVEC_TESTS_METRICS_ORACLE_H_
#define NIVEC_TESTS_METRICS_ORACLE_H_

#include <algorithm>
#include <limits>
#include <set>
#include <utility>
#include <vector>

#include "nivec/metrics.h"

namespace nivec::testing {

/// (p_miss, p_fa) at every threshold in {+inf} U scores, counted directly.
inline std::vector<std::pair<double, double>> ExhaustivePoints(const std::vector<double> &tgt,
                                                               const std::vector<double> &non) {
  std::set<double> thresholds(tgt.begin(), tgt.end());
  thresholds.insert(non.begin(), non.end());
  thresholds.insert(std::numeric_limits<double>::infinity());
  std::vector<std::pair<double, double>> pts;
  for (double th : thresholds) {
    long miss = 0, fa = 0;
    for (double s : tgt) miss += s < th;
    for (double s : non) fa += s >= th;
    pts.emplace_back(static_cast<double>(miss) / tgt.size(),
                     static_cast<double>(fa) / non.size());
  }
  return pts;
}

/*
  Convex-hull EER as a saddle point: max over the prior p of the Bayes
  error min_points p * p_miss + (1 - p) * p_fa.  The inner minimum is a
  concave piecewise-linear function of p, so the maximum sits at p = 0, 1 or
  where the cost lines of two points cross.
*/
inline double OracleEer(const std::vector<double> &tgt, const std::vector<double> &non) {
  auto pts = ExhaustivePoints(tgt, non);
  std::vector<double> priors = {0.0, 1.0};
  for (size_t i = 0; i < pts.size(); ++i)
    for (size_t j = i + 1; j < pts.size(); ++j) {
      const double a = pts[i].first - pts[i].second, b = pts[j].first - pts[j].second;
      if (a == b) continue;
      const double p = (pts[j].second - pts[i].second) / (a - b);
      if (p > 0.0 && p < 1.0) priors.push_back(p);
    }
  double best = 0.0;
  for (double p : priors) {
    double cost = std::numeric_limits<double>::infinity();
    for (const auto &[pm, pf] : pts) cost = std::min(cost, p * pm + (1.0 - p) * pf);
    best = std::max(best, cost);
  }
  return best;
}

inline double OracleMinDcf(const std::vector<double> &tgt, const std::vector<double> &non,
                           const DcfParams &params) {
  const double w_miss = params.c_miss * params.p_target;
  const double w_fa = params.c_fa * (1.0 - params.p_target);
  double best = std::numeric_limits<double>::infinity();
  for (const auto &[pm, pf] : ExhaustivePoints(tgt, non))
    best = std::min(best, w_miss * pm + w_fa * pf);
  return best / std::min(w_miss, w_fa);
}

}  // namespace nivec::testing

#endif  // NIVEC_TESTS_METRICS_ORACLE_H_
