// tests/backend-test.cc

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

#include "backend-oracle.h"
#include "doctest.h"
#include "nivec/backend.h"
#include "nivec/error.h"
#include "test-util.h"

using namespace nivec;
using namespace nivec::testing;

namespace {

PldaModel RandomModel(int dim, Rng *rng) {
  PldaModel m;
  m.mean = rng->NormalMatrix(dim, 1).col(0);
  m.between = RandomSpd(dim, rng, 0.3);
  m.within = RandomSpd(dim, rng, 0.3);
  return m;
}

// Speakers drawn from the two-covariance model itself.
void SampleCorpus(const PldaModel &m, int speakers, int max_per, Rng *rng, Matrix *x,
                  std::vector<int> *labels) {
  const int dim = static_cast<int>(m.mean.size());
  Matrix lb = Cholesky(m.between), lw = Cholesky(m.within);
  std::vector<Vector> rows;
  labels->clear();
  for (int s = 0; s < speakers; ++s) {
    Vector y = m.mean + lb * rng->NormalMatrix(dim, 1).col(0);
    const int n = 2 + static_cast<int>(rng->UniformInt(max_per - 1));
    for (int i = 0; i < n; ++i) {
      rows.push_back(y + lw * rng->NormalMatrix(dim, 1).col(0));
      labels->push_back(s);
    }
  }
  x->resize(static_cast<Eigen::Index>(rows.size()), dim);
  for (size_t i = 0; i < rows.size(); ++i) x->row(i) = rows[i].transpose();
}

}  // namespace

TEST_CASE("plda score equals the dense joint-gaussian log-likelihood ratio") {
  Rng rng(31);
  double worst = 0.0;
  for (int trial = 0; trial < 30; ++trial) {
    const int dim = 1 + static_cast<int>(rng.UniformInt(6));
    PldaModel m = RandomModel(dim, &rng);
    PldaScorer scorer(m);
    for (int k = 0; k < 5; ++k) {
      Vector a = rng.NormalMatrix(dim, 1, 2.0).col(0), b = rng.NormalMatrix(dim, 1, 2.0).col(0);
      worst = std::max(worst, std::abs(scorer.Score(a, b) - OracleLlr(m, a, b)));
    }
  }
  CHECK(worst <= 1e-8);
}

TEST_CASE("plda score is exactly symmetric") {
  Rng rng(32);
  PldaModel m = RandomModel(5, &rng);
  PldaScorer scorer(m);
  for (int k = 0; k < 100; ++k) {
    Vector a = rng.NormalMatrix(5, 1).col(0), b = rng.NormalMatrix(5, 1).col(0);
    CHECK(scorer.Score(a, b) == scorer.Score(b, a));
  }
  Matrix e = rng.NormalMatrix(6, 5);
  Matrix s = scorer.ScoreMatrix(e, e);
  CHECK(Asymmetry(s) == 0.0);
}

TEST_CASE("plda log-likelihood equals the stacked dense gaussian") {
  Rng rng(33);
  for (int trial = 0; trial < 10; ++trial) {
    const int dim = 1 + static_cast<int>(rng.UniformInt(4));
    PldaModel m = RandomModel(dim, &rng);
    Matrix x;
    std::vector<int> labels;
    SampleCorpus(m, 3, 4, &rng, &x, &labels);
    const double got = PldaLogLikelihood(m, x, labels);
    const double want = OracleCorpusLogLikelihood(m, x, labels);
    CHECK(std::abs(got - want) <= 1e-8 * std::max(1.0, std::abs(want)));
  }
}

TEST_CASE("plda em objective never decreases") {
  Rng rng(34);
  for (int trial = 0; trial < 5; ++trial) {
    PldaModel truth = RandomModel(4, &rng);
    Matrix x;
    std::vector<int> labels;
    SampleCorpus(truth, 25, 6, &rng, &x, &labels);
    PldaFitResult fit = FitPlda(x, labels, {15});
    REQUIRE(fit.objective.size() == 16);
    for (size_t i = 1; i < fit.objective.size(); ++i)
      CHECK(fit.objective[i] - fit.objective[i - 1] >= -1e-8 * std::abs(fit.objective[i - 1]));
    CHECK(Asymmetry(fit.model.between) == 0.0);
    CHECK(Asymmetry(fit.model.within) == 0.0);
  }
}

TEST_CASE("plda fit needs two speakers with repeated utterances") {
  Matrix x = Matrix::Identity(3, 3);
  CHECK_THROWS_AS(FitPlda(x, {0, 1, 2}), Error);
  CHECK_THROWS_AS(FitPlda(x, {0, 0}), Error);
}

TEST_CASE("as-norm matches the naive sort-based oracle") {
  Rng rng(35);
  double worst = 0.0;
  for (int trial = 0; trial < 50; ++trial) {
    const int n = 1 + static_cast<int>(rng.UniformInt(40));
    const int k = 1 + static_cast<int>(rng.UniformInt(n));
    Vector e = rng.NormalMatrix(n, 1).col(0), t = rng.NormalMatrix(n, 1).col(0);
    const double raw = rng.Normal();
    const double got = AsNorm(raw, TopKStats(e, k), TopKStats(t, k));
    worst = std::max(worst, std::abs(got - OracleAsNorm(raw, e, t, k)));
  }
  CHECK(worst <= 1e-12);
}

TEST_CASE("as-norm floors a zero spread and rejects oversize k") {
  Vector same = Vector::Constant(4, 2.0);
  CohortSideStats s = TopKStats(same, 3);
  CHECK(s.stddev == kAsNormSigmaFloor);
  CHECK(std::isfinite(AsNorm(2.5, s, s)));
  CHECK_THROWS_AS(TopKStats(same, 5), Error);
}

TEST_CASE("whitening gives identity covariance on the training set") {
  Rng rng(36);
  Matrix a = rng.NormalMatrix(5, 5);
  Matrix x = rng.NormalMatrix(400, 5) * a;
  Preprocessor p = FitPreprocessor(x);
  Matrix w(400, 5);
  for (int i = 0; i < 400; ++i) w.row(i) = p.Apply(x.row(i).transpose()).transpose();
  Matrix c = w.rowwise() - w.colwise().mean();
  Matrix cov = c.transpose() * c / 399.0;
  CHECK(MaxAbsDiff(cov, Matrix::Identity(5, 5)) <= 1e-8);
  Matrix t = p.Transform(x);
  CHECK((t.rowwise().norm().array() - 1.0).abs().maxCoeff() <= 1e-12);
}

TEST_CASE("preprocessor warns when the covariance is rank deficient") {
  Rng rng(37);
  std::string warning;
  FitPreprocessor(rng.NormalMatrix(4, 6), &warning);
  CHECK_FALSE(warning.empty());
  CHECK_THROWS_AS(LengthNormalize(Vector::Zero(3)), Error);
}

TEST_CASE("backend file round-trips") {
  Rng rng(38);
  Backend b;
  b.preprocessor.center = rng.NormalMatrix(3, 1).col(0);
  b.preprocessor.whitening = RandomSpd(3, &rng);
  b.plda = RandomModel(3, &rng);
  b.cohort = rng.NormalMatrix(4, 3);
  const std::string path = TempDir("backend") + "/b.nivb";
  SaveBackend(b, path);
  Backend c = LoadBackend(path);
  CHECK(MaxAbsDiff(c.plda.between, b.plda.between) == 0.0);
  CHECK(MaxAbsDiff(c.cohort, b.cohort) == 0.0);
  CHECK(MaxAbsDiff(c.preprocessor.whitening, b.preprocessor.whitening) == 0.0);
}
