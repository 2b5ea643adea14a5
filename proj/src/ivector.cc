// nivec/ivector.cc

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

#include "nivec/ivector.h"

#include <cmath>
#include <cstdio>
#include <numbers>
#include <sstream>

#include "nivec/binary-io.h"
#include "nivec/error.h"
#include "nivec/parallel.h"

namespace nivec {

namespace {

constexpr double kVarianceFloor = 1e-8;
constexpr size_t kEmChunk = 256;

// Per-extractor products reused across utterances.
struct Projections {
  std::vector<Matrix> tlt;  // R x R: T_c' Lambda T_c
  std::vector<Matrix> lt;   // R x D: T_c' Lambda
};

Projections Project(const IVectorExtractor &ext) {
  Projections p;
  const int rank = ext.Rank();
  for (const Matrix &block : ext.t) {
    Matrix basis = block.rightCols(rank);
    Matrix lt = basis.transpose() * ext.precision.asDiagonal();
    p.tlt.push_back(lt * basis);
    p.lt.push_back(std::move(lt));
  }
  return p;
}

void CheckStats(const SufficientStats &s, const IVectorExtractor &ext) {
  NIVEC_CHECK(s.NumComponents() == ext.NumComponents() && s.Dim() == ext.Dim(),
              ErrorCode::kDimensionMismatch,
              "ivector: stats are " + std::to_string(s.NumComponents()) + "x" +
                  std::to_string(s.Dim()) + ", extractor expects " +
                  std::to_string(ext.NumComponents()) + "x" + std::to_string(ext.Dim()));
}

struct UtterancePosterior {
  Vector mean;
  Matrix covariance;
  double log_likelihood = 0.0;
};

UtterancePosterior Infer(const SufficientStats &s, const IVectorExtractor &ext,
                         const Projections &proj, bool want_covariance) {
  const int rank = ext.Rank(), num = ext.NumComponents();
  Matrix precision = Matrix::Identity(rank, rank);
  Vector linear = Vector::Zero(rank);
  double quadratic = 0.0;
  for (int c = 0; c < num; ++c) {
    const double z = s.zeroth(c);
    if (z == 0.0 && s.first.row(c).isZero(0.0)) continue;
    Vector mean = ext.t[c].col(0);
    Vector centered = s.first.row(c).transpose() - z * mean;
    precision += z * proj.tlt[c];
    linear += proj.lt[c] * centered;
    Vector s_diag = s.SecondOrderDiagonal(c);
    quadratic += (ext.precision.array() *
                  (s_diag.array() - 2.0 * s.first.row(c).transpose().array() * mean.array() +
                   z * mean.array().square()))
                     .sum();
  }
  Eigen::LLT<Matrix> llt(precision);
  if (llt.info() != Eigen::Success)
    Fail(ErrorCode::kNotPositiveDefinite, "ivector: posterior precision not positive definite");
  UtterancePosterior out;
  out.mean = llt.solve(linear);
  if (want_covariance) out.covariance = llt.solve(Matrix::Identity(rank, rank));
  const double total_z = s.zeroth.sum();
  const double log_det_l = 2.0 * llt.matrixLLT().diagonal().array().log().sum();
  const double dim = static_cast<double>(ext.Dim());
  out.log_likelihood = -0.5 * total_z * dim * std::log(2.0 * std::numbers::pi) +
                       0.5 * total_z * ext.precision.array().log().sum() - 0.5 * quadratic +
                       0.5 * linear.dot(out.mean) - 0.5 * log_det_l;
  return out;
}

}  // namespace

void IVectorExtractor::Validate() const {
  NIVEC_CHECK(!t.empty(), ErrorCode::kInvalidArgument, "ivector extractor: no components");
  NIVEC_CHECK(Rank() >= 1, ErrorCode::kInvalidArgument, "ivector extractor: rank must be >= 1");
  for (const Matrix &block : t)
    NIVEC_CHECK(block.rows() == Dim() && block.cols() == Rank() + 1, ErrorCode::kDimensionMismatch,
                "ivector extractor: inconsistent block shapes");
  NIVEC_CHECK(precision.size() == Dim() && (precision.array() > 0.0).all(),
              ErrorCode::kInvalidArgument, "ivector extractor: precision must be positive");
}

IVectorExtractor InitExtractor(const SufficientStats &total, int rank, Rng *rng) {
  NIVEC_CHECK(rank >= 1, ErrorCode::kConfig, "ivector rank must be >= 1");
  ComponentMoments moments = StatsToMoments(total);
  if (!moments.empty.empty()) {
    std::string list;
    for (int c : moments.empty) list += (list.empty() ? "" : ", ") + std::to_string(c);
    Fail(ErrorCode::kInvalidArgument, "ivector init: empty components " + list);
  }
  const int num = total.NumComponents(), dim = total.Dim();
  Vector avg_var = Vector::Zero(dim);
  for (int c = 0; c < num; ++c) avg_var += total.zeroth(c) * moments.covs[c].diagonal();
  avg_var /= total.zeroth.sum();
  IVectorExtractor ext;
  ext.precision = avg_var.array().max(kVarianceFloor).inverse();
  for (int c = 0; c < num; ++c) {
    Matrix block(dim, rank + 1);
    block.col(0) = moments.means.row(c).transpose();
    block.rightCols(rank) = rng->NormalMatrix(dim, rank, 0.01);
    ext.t.push_back(std::move(block));
  }
  return ext;
}

IVectorPosterior ComputePosterior(const SufficientStats &stats, const IVectorExtractor &ext) {
  CheckStats(stats, ext);
  const Projections proj = Project(ext);
  const int rank = ext.Rank();
  IVectorPosterior post;
  post.precision = Matrix::Identity(rank, rank);
  Vector linear = Vector::Zero(rank);
  for (int c = 0; c < ext.NumComponents(); ++c) {
    const double z = stats.zeroth(c);
    if (z == 0.0 && stats.first.row(c).isZero(0.0)) continue;
    post.precision += z * proj.tlt[c];
    linear += proj.lt[c] * (stats.first.row(c).transpose() - z * ext.t[c].col(0));
  }
  post.mean = post.precision.llt().solve(linear);
  return post;
}

Vector ExtractIvector(const SufficientStats &stats, const IVectorExtractor &ext) {
  return ComputePosterior(stats, ext).mean;
}

double UtteranceLogLikelihood(const SufficientStats &stats, const IVectorExtractor &ext) {
  CheckStats(stats, ext);
  return Infer(stats, ext, Project(ext), false).log_likelihood;
}

double CorpusLogLikelihood(const std::vector<SufficientStats> &corpus, const IVectorExtractor &ext,
                           int jobs) {
  const Projections proj = Project(ext);
  std::vector<double> ll(corpus.size());
  ParallelFor(corpus.size(), jobs, [&](size_t u) {
    CheckStats(corpus[u], ext);
    ll[u] = Infer(corpus[u], ext, proj, false).log_likelihood;
  });
  double total = 0.0;
  for (double v : ll) total += v;
  return total;
}

EmIterationResult EmIterate(const std::vector<SufficientStats> &corpus, const IVectorExtractor &ext,
                            int jobs) {
  ext.Validate();
  NIVEC_CHECK(!corpus.empty(), ErrorCode::kInvalidArgument, "ivector EM: empty corpus");
  const int num = ext.NumComponents(), dim = ext.Dim(), rank = ext.Rank();
  const Projections proj = Project(ext);
  std::vector<Matrix> acc_a(num, Matrix::Zero(rank + 1, rank + 1));
  std::vector<Matrix> acc_c(num, Matrix::Zero(dim, rank + 1));
  Vector acc_s = Vector::Zero(dim);
  double acc_z = 0.0;
  EmIterationResult result;

  std::vector<UtterancePosterior> posts;
  for (size_t begin = 0; begin < corpus.size(); begin += kEmChunk) {
    const size_t end = std::min(corpus.size(), begin + kEmChunk);
    posts.assign(end - begin, UtterancePosterior());
    ParallelFor(end - begin, jobs, [&](size_t i) {
      CheckStats(corpus[begin + i], ext);
      posts[i] = Infer(corpus[begin + i], ext, proj, true);
    });
    for (size_t i = 0; i < posts.size(); ++i) {
      const SufficientStats &s = corpus[begin + i];
      const UtterancePosterior &p = posts[i];
      result.objective += p.log_likelihood;
      Vector ea(rank + 1);
      ea(0) = 1.0;
      ea.tail(rank) = p.mean;
      Matrix eaa = ea * ea.transpose();
      eaa.bottomRightCorner(rank, rank) += p.covariance;
      for (int c = 0; c < num; ++c) {
        const double z = s.zeroth(c);
        if (z != 0.0) acc_a[c] += z * eaa;
        acc_c[c] += s.first.row(c).transpose() * ea.transpose();
        acc_s += s.SecondOrderDiagonal(c);
      }
      acc_z += s.zeroth.sum();
    }
  }
  NIVEC_CHECK(acc_z > 0.0, ErrorCode::kInvalidArgument, "ivector EM: corpus has no frames");

  IVectorExtractor next;
  next.t.resize(num);
  Vector explained = Vector::Zero(dim);
  for (int c = 0; c < num; ++c) {
    if (acc_a[c](0, 0) <= 0.0) {
      next.t[c] = ext.t[c];
      result.ridged_components.push_back(c);
      continue;
    }
    Matrix a = Symmetrize(acc_a[c]);
    Eigen::LLT<Matrix> llt(a);
    if (llt.info() != Eigen::Success) {
      a.diagonal().array() += 1e-8 * a.trace() / (rank + 1);
      llt.compute(a);
      result.ridged_components.push_back(c);
      NIVEC_CHECK(llt.info() == Eigen::Success, ErrorCode::kNotPositiveDefinite,
                  "ivector EM: singular accumulator for component " + std::to_string(c));
    }
    // T~_c = C_c inv(A_c), solved as A_c T~_c' = C_c'.
    next.t[c] = llt.solve(acc_c[c].transpose()).transpose();
    explained += (next.t[c].array() * acc_c[c].array()).rowwise().sum().matrix();
  }
  Vector variance = ((acc_s - explained) / acc_z).array().max(kVarianceFloor);
  next.precision = variance.array().inverse();
  result.extractor = std::move(next);
  return result;
}

Matrix SampleIvectors(const IVectorPosterior &post, int n, Rng *rng) {
  NIVEC_CHECK(n >= 1, ErrorCode::kInvalidArgument, "sample count must be >= 1");
  const Matrix chol = Cholesky(post.Covariance());
  Matrix draws = rng->NormalMatrix(n, static_cast<int>(post.mean.size()));
  Matrix out = draws * chol.transpose();
  out.rowwise() += post.mean.transpose();
  return out;
}

double PosteriorTrace(const IVectorPosterior &post) { return post.Covariance().trace(); }

void SaveExtractor(const IVectorExtractor &ext, const std::string &path) {
  ext.Validate();
  std::ostringstream os;
  BinaryWriter w(os);
  w.WriteMagic("NIVX");
  w.WriteU32(kExtractorFileVersion);
  w.WriteU32(ext.NumComponents());
  w.WriteU32(ext.Dim());
  w.WriteU32(ext.Rank());
  for (const Matrix &block : ext.t) w.WriteMatrix(block);
  w.WriteVector(ext.precision);
  WriteFileBytes(path, os.str());
}

IVectorExtractor LoadExtractor(const std::string &path) {
  std::istringstream is(ReadFileBytes(path));
  BinaryReader r(is);
  r.ExpectMagic("NIVX");
  r.ExpectVersion(kExtractorFileVersion);
  const int num = static_cast<int>(r.ReadU32());
  const int dim = static_cast<int>(r.ReadU32());
  const int rank = static_cast<int>(r.ReadU32());
  IVectorExtractor ext;
  for (int c = 0; c < num; ++c) ext.t.push_back(r.ReadMatrix(dim, rank + 1, "extractor block"));
  ext.precision = r.ReadVector();
  ext.Validate();
  return ext;
}

void WriteSampleCsv(const std::vector<std::string> &ids, const std::vector<Matrix> &samples,
                    const std::string &path) {
  NIVEC_CHECK(ids.size() == samples.size() && !samples.empty(), ErrorCode::kInvalidArgument,
              "sample export: id count mismatch");
  const Eigen::Index rank = samples[0].cols();
  Eigen::Index total = 0;
  for (const Matrix &m : samples) total += m.rows();
  Matrix all(total, rank);
  for (Eigen::Index off = 0; const Matrix &m : samples) {
    all.middleRows(off, m.rows()) = m;
    off += m.rows();
  }
  Eigen::RowVectorXd mean = all.colwise().mean();
  Matrix centered = all.rowwise() - mean;
  Matrix axes = Matrix::Zero(rank, 2);
  if (total >= 2) {
    SymEigResult eig = SymEig(Symmetrize(centered.transpose() * centered / (total - 1.0)));
    for (int k = 0; k < std::min<Eigen::Index>(2, rank); ++k) {
      Vector v = eig.vectors.col(k);
      Eigen::Index pivot;
      v.cwiseAbs().maxCoeff(&pivot);
      if (v(pivot) < 0) v = -v;  // fixed sign so exports are reproducible
      axes.col(k) = v;
    }
  }
  Matrix projected = centered * axes;
  std::ostringstream os;
  os << "utterance,sample,pc1,pc2";
  for (Eigen::Index j = 0; j < rank; ++j) os << ",w" << j + 1;
  os << "\n";
  char buf[32];
  Eigen::Index row = 0;
  for (size_t u = 0; u < samples.size(); ++u) {
    for (Eigen::Index i = 0; i < samples[u].rows(); ++i, ++row) {
      os << ids[u] << "," << i;
      for (int k = 0; k < 2; ++k) {
        std::snprintf(buf, sizeof(buf), ",%.9g", projected(row, k));
        os << buf;
      }
      for (Eigen::Index j = 0; j < rank; ++j) {
        std::snprintf(buf, sizeof(buf), ",%.9g", samples[u](i, j));
        os << buf;
      }
      os << "\n";
    }
  }
  WriteFileBytes(path, os.str());
}

void WriteTraceCsv(const std::vector<std::string> &ids, const std::vector<double> &num_frames,
                   const std::vector<double> &traces, const std::string &path) {
  NIVEC_CHECK(ids.size() == num_frames.size() && ids.size() == traces.size(),
              ErrorCode::kInvalidArgument, "trace export: length mismatch");
  std::ostringstream os;
  os << "utterance,num_frames,trace\n";
  char buf[96];
  for (size_t i = 0; i < ids.size(); ++i) {
    std::snprintf(buf, sizeof(buf), ",%.0f,%.9g\n", num_frames[i], traces[i]);
    os << ids[i] << buf;
  }
  WriteFileBytes(path, os.str());
}

}  // namespace nivec
