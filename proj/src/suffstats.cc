// nivec/suffstats.cc

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

#include "nivec/suffstats.h"

#include <sstream>

#include "nivec/binary-io.h"
#include "nivec/error.h"

namespace nivec {

SufficientStats::SufficientStats(int num_components, int dim, bool diag)
    : zeroth(Vector::Zero(num_components)),
      first(Matrix::Zero(num_components, dim)),
      second(diag ? Matrix::Zero(num_components, dim)
                  : Matrix::Zero(static_cast<Eigen::Index>(num_components) * dim, dim)),
      diagonal(diag) {}

Matrix SufficientStats::SecondOrder(int c) const {
  const int dim = Dim();
  if (diagonal) return second.row(c).transpose().asDiagonal();
  return second.middleRows(static_cast<Eigen::Index>(c) * dim, dim);
}

Vector SufficientStats::SecondOrderDiagonal(int c) const {
  if (diagonal) return second.row(c).transpose();
  return SecondOrder(c).diagonal();
}

SufficientStats AccumulateStats(const Matrix &x, const Matrix &gamma, bool diagonal) {
  NIVEC_CHECK(gamma.rows() == x.rows() && gamma.cols() >= 1, ErrorCode::kDimensionMismatch,
              "stats: posterior rows " + std::to_string(gamma.rows()) + " vs frames " +
                  std::to_string(x.rows()));
  const int num = static_cast<int>(gamma.cols()), dim = static_cast<int>(x.cols());
  SufficientStats s(num, dim, diagonal);
  s.num_frames = static_cast<double>(x.rows());
  s.zeroth = gamma.colwise().sum().transpose();
  s.first.noalias() = gamma.transpose() * x;
  if (diagonal) {
    s.second.noalias() = gamma.transpose() * x.array().square().matrix();
  } else {
    for (int c = 0; c < num; ++c) {
      Matrix weighted = x.array().colwise() * gamma.col(c).array();
      s.second.middleRows(static_cast<Eigen::Index>(c) * dim, dim).noalias() =
          weighted.transpose() * x;
    }
  }
  return s;
}

SufficientStats MergeStats(const SufficientStats &a, const SufficientStats &b) {
  NIVEC_CHECK(a.NumComponents() == b.NumComponents() && a.Dim() == b.Dim() &&
                  a.diagonal == b.diagonal,
              ErrorCode::kDimensionMismatch, "stats: cannot merge statistics of different shapes");
  SufficientStats out = a;
  out.zeroth += b.zeroth;
  out.first += b.first;
  out.second += b.second;
  out.num_frames += b.num_frames;
  return out;
}

ComponentMoments StatsToMoments(const SufficientStats &stats, double empty_threshold) {
  const int num = stats.NumComponents(), dim = stats.Dim();
  ComponentMoments m;
  m.means = Matrix::Zero(num, dim);
  for (int c = 0; c < num; ++c) {
    const double z = stats.zeroth(c);
    if (z <= empty_threshold) {
      m.empty.push_back(c);
      m.covs.push_back(Matrix::Zero(dim, dim));
      continue;
    }
    Vector mean = stats.first.row(c).transpose() / z;
    m.means.row(c) = mean.transpose();
    Matrix cov;
    if (stats.diagonal) {
      Vector var = stats.second.row(c).transpose() / z - mean.array().square().matrix();
      const double floor = 1e-6 * std::max(var.sum(), 0.0) / dim;
      cov = var.array().max(floor).matrix().asDiagonal();
    } else {
      cov = Symmetrize(stats.SecondOrder(c) / z - mean * mean.transpose());
      const double floor = 1e-6 * std::max(cov.trace(), 0.0) / dim;
      SymEigResult eig = SymEig(cov);
      Vector values = eig.values.array().max(floor);
      cov = Symmetrize(eig.vectors * values.asDiagonal() * eig.vectors.transpose());
    }
    m.covs.push_back(cov);
  }
  return m;
}

void WriteStatsArchive(const StatsArchive &archive, const std::string &path) {
  NIVEC_CHECK(archive.ids.size() == archive.stats.size(), ErrorCode::kInvalidArgument,
              "stats archive: id count mismatch");
  std::ostringstream os;
  BinaryWriter w(os);
  w.WriteMagic("NIVS");
  w.WriteU32(kStatsFileVersion);
  w.WriteU32(static_cast<uint32_t>(archive.stats.size()));
  const int num = archive.stats.empty() ? 0 : archive.stats[0].NumComponents();
  const int dim = archive.stats.empty() ? 0 : archive.stats[0].Dim();
  const bool diag = archive.stats.empty() || archive.stats[0].diagonal;
  w.WriteU32(num);
  w.WriteU32(dim);
  w.WriteU32(diag ? 1 : 0);
  for (size_t i = 0; i < archive.stats.size(); ++i) {
    const SufficientStats &s = archive.stats[i];
    NIVEC_CHECK(s.NumComponents() == num && s.Dim() == dim && s.diagonal == diag,
                ErrorCode::kDimensionMismatch, "stats archive: inconsistent shapes");
    w.WriteString(archive.ids[i]);
    w.WriteF64(s.num_frames);
    w.WriteVector(s.zeroth);
    w.WriteMatrix(s.first);
    w.WriteMatrix(s.second);
  }
  WriteFileBytes(path, os.str());
}

StatsArchive ReadStatsArchive(const std::string &path) {
  std::istringstream is(ReadFileBytes(path));
  BinaryReader r(is);
  r.ExpectMagic("NIVS");
  r.ExpectVersion(kStatsFileVersion);
  const uint32_t count = r.ReadU32();
  const int num = static_cast<int>(r.ReadU32()), dim = static_cast<int>(r.ReadU32());
  const bool diag = r.ReadU32() != 0;
  StatsArchive a;
  for (uint32_t i = 0; i < count; ++i) {
    a.ids.push_back(r.ReadString());
    SufficientStats s(num, dim, diag);
    s.num_frames = r.ReadF64();
    s.zeroth = r.ReadVector();
    NIVEC_CHECK(s.zeroth.size() == num, ErrorCode::kDimensionMismatch, "stats archive: bad z");
    s.first = r.ReadMatrix(num, dim, "first-order stats");
    s.second = r.ReadMatrix(s.second.rows(), dim, "second-order stats");
    a.stats.push_back(std::move(s));
  }
  return a;
}

}  // namespace nivec
