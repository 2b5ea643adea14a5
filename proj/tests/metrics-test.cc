// tests/metrics-test.cc

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

#include <algorithm>
#include <cmath>
#include <limits>
#include <set>

#include "doctest.h"
#include "metrics-oracle.h"
#include "nivec/error.h"
#include "nivec/metrics.h"
#include "nivec/numerics.h"

using namespace nivec;
using namespace nivec::testing;

TEST_CASE("hand case eer is one quarter") {
  CHECK(Eer({2.0, 0.0}, {1.0, -1.0}) == doctest::Approx(0.25).epsilon(1e-15));
}

TEST_CASE("perfect separation gives zero eer and zero dcf") {
  CHECK(Eer({3.0, 4.0}, {1.0, 2.0}) == 0.0);
  CHECK(MinDcf({3.0, 4.0}, {1.0, 2.0}) == 0.0);
}

TEST_CASE("constant scores give normalized dcf of one") {
  std::vector<double> tgt(7, 0.5), non(11, 0.5);
  CHECK(MinDcf(tgt, non, {1.0, 1.0, 0.05}) == 1.0);
  CHECK(Eer(tgt, non) == doctest::Approx(0.5).epsilon(1e-15));
}

TEST_CASE("det points run from reject-all to accept-all") {
  auto pts = DetPoints({1.0, 2.0, 2.0}, {0.0, 2.0});
  REQUIRE(pts.size() == 4);  // 3 distinct scores + 1
  CHECK(pts.front().p_miss == 1.0);
  CHECK(pts.front().p_fa == 0.0);
  CHECK(pts.back().p_miss == 0.0);
  CHECK(pts.back().p_fa == 1.0);
}

TEST_CASE("eer and mindcf match exhaustive oracles on random score sets") {
  Rng rng(21);
  double worst_eer = 0.0;
  int dcf_mismatch = 0;
  for (int trial = 0; trial < 100; ++trial) {
    const int nt = 1 + static_cast<int>(rng.UniformInt(25));
    const int nn = 1 + static_cast<int>(rng.UniformInt(25));
    const bool ties = trial % 3 == 0;
    std::vector<double> tgt, non;
    for (int i = 0; i < nt; ++i) {
      double s = rng.Normal(1.0, 1.0);
      tgt.push_back(ties ? std::round(2 * s) : s);
    }
    for (int i = 0; i < nn; ++i) {
      double s = rng.Normal(0.0, 1.0);
      non.push_back(ties ? std::round(2 * s) : s);
    }
    DcfParams params{1.0 + rng.Uniform(), 1.0 + rng.Uniform(), 0.01 + 0.5 * rng.Uniform()};
    worst_eer = std::max(worst_eer, std::abs(Eer(tgt, non) - OracleEer(tgt, non)));
    if (MinDcf(tgt, non, params) != OracleMinDcf(tgt, non, params)) ++dcf_mismatch;
  }
  CHECK(worst_eer <= 1e-12);
  CHECK(dcf_mismatch == 0);
}

TEST_CASE("metrics reject empty classes and non-finite scores") {
  CHECK_THROWS_AS(Eer({}, {1.0}), Error);
  CHECK_THROWS_AS(MinDcf({1.0}, {}), Error);
  CHECK_THROWS_AS(Eer({std::nan("")}, {1.0}), Error);
  CHECK_THROWS_AS(MinDcf({1.0}, {0.0}, {1.0, 1.0, 1.5}), Error);
}

TEST_CASE("metrics json has the documented keys") {
  MetricsReport r = ComputeMetrics({2.0, 0.0}, {1.0, -1.0});
  std::string j = MetricsJson(r);
  for (const char *key : {"\"eer\"", "\"min_dcf\"", "\"num_target\"", "\"num_nontarget\""})
    CHECK(j.find(key) != std::string::npos);
  CHECK(DetCsv(DetPoints({1.0}, {0.0})).rfind("p_miss,p_fa\n", 0) == 0);
}
