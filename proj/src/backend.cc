// nivec/backend.cc

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

#include "nivec/backend.h"

#include <algorithm>
#include <cmath>
#include <functional>
#include <map>
#include <numbers>
#include <sstream>

#include "nivec/binary-io.h"
#include "nivec/error.h"

namespace nivec {

Vector Preprocessor::Apply(const Vector &x) const {
  NIVEC_CHECK(x.size() == center.size(), ErrorCode::kDimensionMismatch,
              "preprocessor: embedding dim mismatch");
  return whitening * (x - center);
}

Matrix Preprocessor::Transform(const Matrix &rows) const {
  Matrix out(rows.rows(), rows.cols());
  for (Eigen::Index i = 0; i < rows.rows(); ++i)
    out.row(i) = LengthNormalize(Apply(rows.row(i).transpose())).transpose();
  return out;
}

Preprocessor FitPreprocessor(const Matrix &embeddings, std::string *warning) {
  const Eigen::Index n = embeddings.rows(), dim = embeddings.cols();
  NIVEC_CHECK(n >= 2, ErrorCode::kInvalidArgument, "preprocessor: need at least 2 embeddings");
  if (warning) {
    warning->clear();
    if (n <= dim)
      *warning = "preprocessor: " + std::to_string(n) + " embeddings for dimension " +
                 std::to_string(dim) + "; covariance is rank deficient";
  }
  Preprocessor p;
  p.center = embeddings.colwise().mean().transpose();
  Matrix centered = embeddings.rowwise() - p.center.transpose();
  Matrix cov = Symmetrize(centered.transpose() * centered / static_cast<double>(n - 1));
  SymEigResult eig = SymEig(cov);
  const double floor = 1e-8 * std::max(eig.values(0), 0.0);
  Vector scale = eig.values.array().max(floor).max(1e-300).rsqrt();
  p.whitening = Symmetrize(eig.vectors * scale.asDiagonal() * eig.vectors.transpose());
  return p;
}

Vector LengthNormalize(const Vector &v) {
  const double norm = v.norm();
  NIVEC_CHECK(norm > 0.0 && std::isfinite(norm), ErrorCode::kInvalidArgument,
              "length normalization of a zero or non-finite vector");
  return v / norm;
}

namespace {

struct SpeakerGroups {
  std::vector<std::vector<Eigen::Index>> rows;  // per speaker, in label order
};

SpeakerGroups GroupBySpeaker(const Matrix &x, const std::vector<int> &labels) {
  NIVEC_CHECK(static_cast<size_t>(x.rows()) == labels.size(), ErrorCode::kDimensionMismatch,
              "plda: label count mismatch");
  std::map<int, std::vector<Eigen::Index>> groups;
  for (size_t i = 0; i < labels.size(); ++i) groups[labels[i]].push_back(static_cast<Eigen::Index>(i));
  SpeakerGroups g;
  for (auto &[label, rows] : groups) g.rows.push_back(std::move(rows));
  return g;
}

const double kLog2Pi = std::log(2.0 * std::numbers::pi);

}  // namespace

double PldaLogLikelihood(const PldaModel &model, const Matrix &x, const std::vector<int> &labels) {
  SpeakerGroups groups = GroupBySpeaker(x, labels);
  const double dim = static_cast<double>(x.cols());
  const Matrix w_inv = SpdInverse(model.within);
  const double w_logdet = SpdLogDet(model.within);
  double total = 0.0;
  for (const auto &rows : groups.rows) {
    const double n = static_cast<double>(rows.size());
    Vector mean = Vector::Zero(x.cols());
    for (Eigen::Index r : rows) mean += x.row(r).transpose();
    mean /= n;
    Matrix scatter = Matrix::Zero(x.cols(), x.cols());
    for (Eigen::Index r : rows) {
      Vector d = x.row(r).transpose() - mean;
      scatter += d * d.transpose();
    }
    Matrix cov = model.between + model.within / n;
    Vector d = mean - model.mean;
    Eigen::LLT<Matrix> llt(cov);
    NIVEC_CHECK(llt.info() == Eigen::Success, ErrorCode::kNotPositiveDefinite,
                "plda: speaker-mean covariance not positive definite");
    const double cov_logdet = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
    total += -0.5 * (dim * kLog2Pi + cov_logdet + d.dot(llt.solve(d)));
    total += -0.5 * (n - 1.0) * (dim * kLog2Pi + w_logdet) - 0.5 * dim * std::log(n) -
             0.5 * (w_inv.array() * scatter.array()).sum();
  }
  return total;
}

PldaFitResult FitPlda(const Matrix &x, const std::vector<int> &labels,
                      const PldaFitOptions &options) {
  SpeakerGroups groups = GroupBySpeaker(x, labels);
  size_t usable = 0;
  for (const auto &rows : groups.rows)
    if (rows.size() >= 2) ++usable;
  NIVEC_CHECK(groups.rows.size() >= 2 && usable >= 2, ErrorCode::kInvalidArgument,
              "plda: need >= 2 speakers with >= 2 embeddings each");
  NIVEC_CHECK(options.iterations >= 0, ErrorCode::kConfig, "plda: iterations must be >= 0");
  const Eigen::Index dim = x.cols();
  const double n_total = static_cast<double>(x.rows());
  const double n_speakers = static_cast<double>(groups.rows.size());

  PldaFitResult result;
  PldaModel &m = result.model;
  m.mean = x.colwise().mean().transpose();
  std::vector<Vector> means;
  Matrix between = Matrix::Zero(dim, dim), within = Matrix::Zero(dim, dim);
  for (const auto &rows : groups.rows) {
    Vector mean = Vector::Zero(dim);
    for (Eigen::Index r : rows) mean += x.row(r).transpose();
    mean /= static_cast<double>(rows.size());
    Vector d = mean - m.mean;
    between += d * d.transpose();
    for (Eigen::Index r : rows) {
      Vector e = x.row(r).transpose() - mean;
      within += e * e.transpose();
    }
    means.push_back(std::move(mean));
  }
  m.between = Symmetrize(between / n_speakers);
  m.within = Symmetrize(within / n_total);
  const double ridge = 1e-10 * std::max(1.0, m.within.trace() / dim);
  m.within.diagonal().array() += ridge;
  m.between.diagonal().array() += ridge;

  for (int it = 0; it < options.iterations; ++it) {
    result.objective.push_back(PldaLogLikelihood(m, x, labels));
    const Matrix b_inv = SpdInverse(m.between);
    const Matrix w_inv = SpdInverse(m.within);
    Matrix next_b = Matrix::Zero(dim, dim), next_w = Matrix::Zero(dim, dim);
    for (size_t s = 0; s < groups.rows.size(); ++s) {
      const auto &rows = groups.rows[s];
      const double n = static_cast<double>(rows.size());
      Matrix post_cov = SpdInverse(b_inv + n * w_inv);
      Vector post_mean = post_cov * (n * (w_inv * (means[s] - m.mean)));
      next_b += post_mean * post_mean.transpose() + post_cov;
      for (Eigen::Index r : rows) {
        Vector e = x.row(r).transpose() - m.mean - post_mean;
        next_w += e * e.transpose();
      }
      next_w += n * post_cov;
    }
    m.between = Symmetrize(next_b / n_speakers);
    m.within = Symmetrize(next_w / n_total);
  }
  result.objective.push_back(PldaLogLikelihood(m, x, labels));
  return result;
}

PldaScorer::PldaScorer(const PldaModel &model) : mean_(model.mean) {
  const Matrix total = model.between + model.within;
  const Matrix total_inv = SpdInverse(total);
  const Matrix schur = Symmetrize(total - model.between * total_inv * model.between);
  const Matrix schur_inv = SpdInverse(schur);
  q_ = Symmetrize(total_inv - schur_inv);
  p_ = Symmetrize(total_inv * model.between * schur_inv);
  constant_ = 0.5 * SpdLogDet(total) - 0.5 * SpdLogDet(schur);
}

double PldaScorer::Score(const Vector &a, const Vector &b) const {
  const Vector da = a - mean_, db = b - mean_;
  const double qa = da.dot(q_ * da), qb = db.dot(q_ * db);
  const double pab = da.dot(p_ * db), pba = db.dot(p_ * da);
  return 0.5 * (qa + qb) + 0.5 * (pab + pba) + constant_;
}

Matrix PldaScorer::ScoreMatrix(const Matrix &a, const Matrix &b) const {
  Matrix out(a.rows(), b.rows());
  for (Eigen::Index i = 0; i < a.rows(); ++i)
    for (Eigen::Index j = 0; j < b.rows(); ++j)
      out(i, j) = Score(a.row(i).transpose(), b.row(j).transpose());
  return out;
}

CohortSideStats TopKStats(const Vector &scores, int top_k) {
  NIVEC_CHECK(scores.size() >= 1, ErrorCode::kInvalidArgument, "as-norm: empty cohort");
  NIVEC_CHECK(top_k >= 1 && top_k <= scores.size(), ErrorCode::kInvalidArgument,
              "as-norm: K=" + std::to_string(top_k) + " exceeds cohort size " +
                  std::to_string(scores.size()));
  std::vector<double> s(scores.data(), scores.data() + scores.size());
  std::partial_sort(s.begin(), s.begin() + top_k, s.end(), std::greater<double>());
  double mean = 0.0;
  for (int i = 0; i < top_k; ++i) mean += s[i];
  mean /= top_k;
  double var = 0.0;
  for (int i = 0; i < top_k; ++i) var += (s[i] - mean) * (s[i] - mean);
  var /= top_k;
  return {mean, std::max(std::sqrt(var), kAsNormSigmaFloor)};
}

double AsNorm(double raw, const CohortSideStats &enroll, const CohortSideStats &test) {
  return 0.5 * ((raw - enroll.mean) / enroll.stddev + (raw - test.mean) / test.stddev);
}

void SaveBackend(const Backend &backend, const std::string &path) {
  std::ostringstream os;
  BinaryWriter w(os);
  w.WriteMagic("NIVB");
  w.WriteU32(kBackendFileVersion);
  w.WriteVector(backend.preprocessor.center);
  w.WriteMatrix(backend.preprocessor.whitening);
  w.WriteVector(backend.plda.mean);
  w.WriteMatrix(backend.plda.between);
  w.WriteMatrix(backend.plda.within);
  w.WriteMatrix(backend.cohort);
  WriteFileBytes(path, os.str());
}

Backend LoadBackend(const std::string &path) {
  std::istringstream is(ReadFileBytes(path));
  BinaryReader r(is);
  r.ExpectMagic("NIVB");
  r.ExpectVersion(kBackendFileVersion);
  Backend b;
  b.preprocessor.center = r.ReadVector();
  const Eigen::Index dim = b.preprocessor.center.size();
  b.preprocessor.whitening = r.ReadMatrix(dim, dim, "whitening");
  b.plda.mean = r.ReadVector();
  NIVEC_CHECK(b.plda.mean.size() == dim, ErrorCode::kDimensionMismatch, "backend: PLDA mean dim");
  b.plda.between = r.ReadMatrix(dim, dim, "PLDA between covariance");
  b.plda.within = r.ReadMatrix(dim, dim, "PLDA within covariance");
  b.cohort = r.ReadMatrix();
  NIVEC_CHECK(b.cohort.rows() == 0 || b.cohort.cols() == dim, ErrorCode::kDimensionMismatch,
              "backend: cohort dim");
  return b;
}

}  // namespace nivec
