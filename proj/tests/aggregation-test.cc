// tests/aggregation-test.cc

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

#include <cmath>
#include <numbers>

#include "doctest.h"
#include "nivec/aggregation.h"
#include "nivec/error.h"
#include "test-util.h"

using namespace nivec;
using namespace nivec::testing;

TEST_CASE("full and expanded gmm posteriors agree with the density oracle") {
  Rng rng(101);
  for (int trial = 0; trial < 20; ++trial) {
    const int c = 1 + static_cast<int>(rng.UniformInt(16));
    const int d = 1 + static_cast<int>(rng.UniformInt(12));
    GmmFullParams p = RandomGmm(c, d, &rng);
    Matrix x = rng.NormalMatrix(15, d, 2.0);
    Matrix oracle = GmmPosteriorOracle(x, p);
    CHECK(MaxAbsDiff(GmmPosteriorFull(x, p), oracle) <= 1e-10);
    CHECK(MaxAbsDiff(GmmPosteriorExpanded(x, p), oracle) <= 1e-10);
  }
}

TEST_CASE("single component gmm gives posterior one") {
  Rng rng(3);
  GmmFullParams p = RandomGmm(1, 4, &rng);
  Matrix g = GmmPosteriorFull(rng.NormalMatrix(5, 4), p);
  CHECK(MaxAbsDiff(g, Matrix::Ones(5, 1)) == 0.0);
}

TEST_CASE("gmm weights must sum to one") {
  Rng rng(4);
  GmmFullParams p = RandomGmm(3, 2, &rng);
  p.weights(0) += 0.1;
  CHECK_THROWS_AS(GmmPosteriorFull(rng.NormalMatrix(2, 2), p), Error);
}

TEST_CASE("netvlad posteriors equal gmm posteriors under a shared covariance") {
  Rng rng(202);
  for (int trial = 0; trial < 20; ++trial) {
    const int c = 2 + static_cast<int>(rng.UniformInt(10));
    const int d = 1 + static_cast<int>(rng.UniformInt(8));
    GmmFullParams p = RandomGmm(c, d, &rng);
    Matrix shared = RandomSpd(d, &rng);
    for (auto &cov : p.covs) cov = shared;
    Matrix prec = SpdInverse(shared);
    Matrix omega(c, d);
    Vector psi(c);
    for (int k = 0; k < c; ++k) {
      Vector mu = p.means.row(k).transpose();
      omega.row(k) = (prec * mu).transpose();
      psi(k) = std::log(p.weights(k)) - 0.5 * mu.dot(prec * mu);
    }
    Matrix x = rng.NormalMatrix(12, d, 2.0);
    CHECK(MaxAbsDiff(NetVladPosterior(x, omega, psi), GmmPosteriorOracle(x, p)) <= 1e-10);
  }
}

TEST_CASE("isotropic lde posteriors equal gmm posteriors with scalar covariances") {
  Rng rng(303);
  for (int trial = 0; trial < 20; ++trial) {
    const int c = 2 + static_cast<int>(rng.UniformInt(10));
    const int d = 1 + static_cast<int>(rng.UniformInt(8));
    GmmFullParams p = RandomGmm(c, d, &rng);
    Vector log_s(c), beta(c);
    for (int k = 0; k < c; ++k) {
      const double sigma2 = 0.3 + 2.0 * rng.Uniform();
      p.covs[k] = sigma2 * Matrix::Identity(d, d);
      log_s(k) = -std::log(sigma2);  // s = 1 / sigma^2
      beta(k) = std::log(p.weights(k)) - 0.5 * d * std::log(2.0 * std::numbers::pi * sigma2);
    }
    Matrix x = rng.NormalMatrix(12, d, 2.0);
    Matrix g = LdePosterior(x, p.means, log_s, beta, LdeVariant::kIsotropic);
    CHECK(MaxAbsDiff(g, GmmPosteriorOracle(x, p)) <= 1e-10);
  }
}

TEST_CASE("shared-diagonal lde posteriors equal gmm posteriors with a shared diagonal") {
  Rng rng(404);
  const int c = 5, d = 6;
  GmmFullParams p = RandomGmm(c, d, &rng);
  Vector diag(d), log_d(d);
  for (int j = 0; j < d; ++j) {
    diag(j) = 0.5 + rng.Uniform();
    log_d(j) = -std::log(diag(j));
  }
  Vector beta(c);
  for (int k = 0; k < c; ++k) {
    p.covs[k] = diag.asDiagonal();
    beta(k) = std::log(p.weights(k));
  }
  Matrix x = rng.NormalMatrix(10, d);
  Matrix g = LdePosterior(x, p.means, log_d, beta, LdeVariant::kSharedDiagonal);
  CHECK(MaxAbsDiff(g, GmmPosteriorOracle(x, p)) <= 1e-10);
}

TEST_CASE("posterior rows lie on the simplex for extreme logits") {
  Rng rng(5);
  Matrix x = 1e3 * rng.NormalMatrix(8, 3);
  Matrix g = NetVladPosterior(x, rng.NormalMatrix(4, 3), Vector::Zero(4));
  CHECK(AllFinite(g));
  CHECK((g.rowwise().sum().array() - 1.0).abs().maxCoeff() <= 1e-12);
  CHECK(g.minCoeff() >= 0.0);
}

namespace {

Vector NaiveLde(const Matrix &x, const Matrix &g, const Matrix &mu, bool normalize_blocks) {
  const Eigen::Index c = mu.rows(), d = mu.cols();
  Vector out(c * d);
  for (Eigen::Index k = 0; k < c; ++k) {
    double n = 0.0;
    Vector v = Vector::Zero(d);
    for (Eigen::Index t = 0; t < x.rows(); ++t) {
      n += g(t, k);
      v += g(t, k) * (mu.row(k) - x.row(t)).transpose();
    }
    if (normalize_blocks)
      out.segment(k * d, d) = v / (v.norm() + 1e-9);
    else
      out.segment(k * d, d) = v / (n + 1e-9);
  }
  if (normalize_blocks) out /= out.norm() + 1e-9;
  return out;
}

}  // namespace

TEST_CASE("supervector aggregation matches the per-frame loop") {
  Rng rng(6);
  Matrix x = rng.NormalMatrix(30, 4);
  Matrix mu = rng.NormalMatrix(3, 4);
  Matrix g = NetVladPosterior(x, rng.NormalMatrix(3, 4), Vector::Zero(3));
  CHECK((LdeAggregate(x, g, mu) - NaiveLde(x, g, mu, false)).cwiseAbs().maxCoeff() <= 1e-12);
  CHECK((NetVladAggregate(x, g, mu) - NaiveLde(x, g, mu, true)).cwiseAbs().maxCoeff() <= 1e-12);
}

TEST_CASE("mean and std pooling uses the population variance") {
  Matrix x(4, 2);
  x << 1, 0, 2, 0, 3, 0, 4, 0;
  Vector p = MeanStdPool(x);
  REQUIRE(p.size() == 4);
  CHECK(p(0) == doctest::Approx(2.5).epsilon(1e-12));
  CHECK(p(2) == doctest::Approx(std::sqrt(1.25)).epsilon(1e-6));
  CHECK(p(3) >= 0.0);
  CHECK(std::isfinite(p(3)));
}

TEST_CASE("heads process each sequence independently") {
  Rng rng(7);
  for (AggregationKind kind : {AggregationKind::kMeanStd, AggregationKind::kLdeIsotropic,
                               AggregationKind::kLdeSharedDiag, AggregationKind::kNetVlad,
                               AggregationKind::kHybrid}) {
    CAPTURE(AggregationKindName(kind));
    auto head = MakeAggregationHead({kind, 4, true}, 3, &rng);
    Matrix x = rng.NormalMatrix(10, 3);
    Matrix both = head->Forward(x, {2, 5}, nullptr);
    Matrix first = head->Forward(x.topRows(5), {1, 5}, nullptr);
    Matrix second = head->Forward(x.bottomRows(5), {1, 5}, nullptr);
    CHECK(both.rows() == 2);
    CHECK(both.cols() == head->output_dim());
    CHECK(MaxAbsDiff(both.row(0), first) <= 1e-13);
    CHECK(MaxAbsDiff(both.row(1), second) <= 1e-13);
  }
}

TEST_CASE("lde head output equals the free aggregation function") {
  Rng rng(8);
  auto head = MakeAggregationHead({AggregationKind::kLdeSharedDiag, 3, true}, 4, &rng);
  Matrix x = rng.NormalMatrix(9, 4);
  Vector expected = LdeAggregate(x, head->Posteriors(x), head->Centroids());
  Matrix got = head->Forward(x, {1, 9}, nullptr);
  CHECK((got.row(0).transpose() - expected).cwiseAbs().maxCoeff() <= 1e-13);
}

TEST_CASE("aggregation names round-trip") {
  for (const char *name : {"meanstd", "lde-iso", "lde-shared-diag", "netvlad", "hybrid"})
    CHECK(std::string(AggregationKindName(ParseAggregationKind(name))) == name);
  CHECK_THROWS_AS(ParseAggregationKind("vlad"), Error);
}
