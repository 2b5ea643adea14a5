// nivec/backend.h

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

#ifndef NIVEC_BACKEND_H_
#define NIVEC_BACKEND_H_

#include <string>
#include <vector>

#include "nivec/numerics.h"

namespace nivec {

/// Centering and whitening fitted on training embeddings (rows).
struct Preprocessor {
  Vector center;
  Matrix whitening;  // E x E, applied as W (x - c)

  Vector Apply(const Vector &x) const;
  /// Centers, whitens and length-normalizes every row.
  Matrix Transform(const Matrix &rows) const;
};

/// W = V diag(lambda^-1/2) V' of the sample covariance, eigenvalues floored
/// at 1e-8 * max.  Needs at least two rows; warns (through *warning) when
/// N <= E.
Preprocessor FitPreprocessor(const Matrix &embeddings, std::string *warning = nullptr);

/// Throws kInvalidArgument for a zero vector.
Vector LengthNormalize(const Vector &v);

/// Two-covariance model x = mu + y + e, y ~ N(0, B), e ~ N(0, W).
struct PldaModel {
  Vector mean;
  Matrix between;  // B
  Matrix within;   // W
};

struct PldaFitOptions {
  int iterations = 10;
};

struct PldaFitResult {
  PldaModel model;
  std::vector<double> objective;  // marginal log-likelihood before each update and after the last
};

/// EM fit.  Requires >= 2 speakers with >= 2 rows each.
PldaFitResult FitPlda(const Matrix &embeddings, const std::vector<int> &labels,
                      const PldaFitOptions &options = {});

/// Marginal log-likelihood of labelled data under the model.
double PldaLogLikelihood(const PldaModel &model, const Matrix &embeddings,
                         const std::vector<int> &labels);

/*
  Closed-form verification score
     log N([a; b]; [mu; mu], [[T, B], [B, T]]) - log N(a; mu, T) - log N(b; mu, T)
  with T = B + W, written as 1/2 (a' Q a + b' Q b) + a' P b + const.  The
  cross term is evaluated as 1/2 (a' P b + b' P a) so that
  Score(a, b) == Score(b, a) bit for bit.
*/
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel &model);
  double Score(const Vector &a, const Vector &b) const;
  /// Scores of every row of `a` against every row of `b`.
  Matrix ScoreMatrix(const Matrix &a, const Matrix &b) const;

 private:
  Vector mean_;
  Matrix q_, p_;
  double constant_ = 0.0;
};

constexpr double kAsNormSigmaFloor = 1e-6;

/// Mean and standard deviation of the top-K cohort scores of one side.
struct CohortSideStats {
  double mean = 0.0;
  double stddev = 0.0;
};

/// `scores` holds the scores of one trial side against every cohort member.
CohortSideStats TopKStats(const Vector &scores, int top_k);

/// s' = 1/2 [(s - mu_e) / sigma_e + (s - mu_t) / sigma_t].
double AsNorm(double raw, const CohortSideStats &enroll, const CohortSideStats &test);

/*
  Backend model file: "NIVB", u32 version 1, center c, whitening W, PLDA mean,
  B and W covariances (all as f64 vectors / matrices), cohort (rows x E).
*/
constexpr uint32_t kBackendFileVersion = 1;

struct Backend {
  Preprocessor preprocessor;
  PldaModel plda;
  Matrix cohort;  // preprocessed cohort embeddings, may be empty
};

void SaveBackend(const Backend &backend, const std::string &path);
Backend LoadBackend(const std::string &path);

}  // namespace nivec

#endif  // NIVEC_BACKEND_H_
