// nivec/suffstats.h

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

#ifndef NIVEC_SUFFSTATS_H_
#define NIVEC_SUFFSTATS_H_

#include <string>
#include <vector>

#include "nivec/numerics.h"

namespace nivec {

/*
  Zeroth, first and second order statistics of T frames against a
  C-component dictionary:
     z_c = sum_t g_tc,   f_c = sum_t g_tc x_t,   S_c = sum_t g_tc x_t x_t'
  With diagonal storage `second` is C x D and row c holds diag(S_c); with full
  storage it is (C*D) x D and rows [c*D, (c+1)*D) hold S_c.
*/
struct SufficientStats {
  Vector zeroth;   // C
  Matrix first;    // C x D
  Matrix second;
  bool diagonal = true;
  double num_frames = 0.0;

  SufficientStats() = default;
  SufficientStats(int num_components, int dim, bool diagonal);

  int NumComponents() const { return static_cast<int>(zeroth.size()); }
  int Dim() const { return static_cast<int>(first.cols()); }
  /// Full S_c (D x D); diagonal storage yields a diagonal matrix.
  Matrix SecondOrder(int c) const;
  Vector SecondOrderDiagonal(int c) const;
};

SufficientStats AccumulateStats(const Matrix &x, const Matrix &gamma, bool diagonal = true);

/// Elementwise sum; both operands must share C, D and storage.
SufficientStats MergeStats(const SufficientStats &a, const SufficientStats &b);

struct ComponentMoments {
  Matrix means;              // C x D
  std::vector<Matrix> covs;  // C entries, D x D (diagonal for diagonal stats)
  std::vector<int> empty;    // components with z_c <= threshold
};

/// mean_c = f_c / z_c and cov_c = S_c / z_c - mean_c mean_c', with
/// eigenvalues floored at 1e-6 * trace / D.  Components with
/// z_c <= empty_threshold are listed in `empty` and get zero moments.
ComponentMoments StatsToMoments(const SufficientStats &stats, double empty_threshold = 1e-10);

/*
  Stats archive: "NIVS", u32 version 1, u32 count, u32 C, u32 D, u32 diagonal
  flag, then per utterance: id string, f64 T, z (C), f (C x D), S.
*/
constexpr uint32_t kStatsFileVersion = 1;

struct StatsArchive {
  std::vector<std::string> ids;
  std::vector<SufficientStats> stats;
};

void WriteStatsArchive(const StatsArchive &archive, const std::string &path);
StatsArchive ReadStatsArchive(const std::string &path);

}  // namespace nivec

#endif  // NIVEC_SUFFSTATS_H_
