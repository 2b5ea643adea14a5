// nivec/ivector.h

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

#ifndef NIVEC_IVECTOR_H_
#define NIVEC_IVECTOR_H_

#include <string>
#include <vector>

#include "nivec/suffstats.h"

namespace nivec {

/*
  Augmented total-variability model.  Frames aligned to component c follow
     x ~ N(T~_c [1; w], inv(diag(precision))),   w ~ N(0, I_R)
  where T~_c = [mu_c, T_c] is D x (R + 1).
*/
struct IVectorExtractor {
  std::vector<Matrix> t;  // C blocks, D x (R + 1); column 0 is the component mean
  Vector precision;       // D, shared diagonal residual precision

  int NumComponents() const { return static_cast<int>(t.size()); }
  int Dim() const { return t.empty() ? 0 : static_cast<int>(t[0].rows()); }
  int Rank() const { return t.empty() ? 0 : static_cast<int>(t[0].cols()) - 1; }
  void Validate() const;
};

/// Column 0 from the component means of `total`, precision from the inverse
/// of the z-weighted average diagonal covariance, basis columns drawn from
/// N(0, 0.01^2).  Empty components raise kInvalidArgument naming them.
IVectorExtractor InitExtractor(const SufficientStats &total, int rank, Rng *rng);

struct IVectorPosterior {
  Vector mean;       // R
  Matrix precision;  // R x R, L = I + sum_c z_c T_c' Lambda T_c

  Matrix Covariance() const { return SpdInverse(precision); }
};

IVectorPosterior ComputePosterior(const SufficientStats &stats, const IVectorExtractor &ext);

Vector ExtractIvector(const SufficientStats &stats, const IVectorExtractor &ext);

/// log p(frames | ext) with the latent integrated out, for one utterance.
double UtteranceLogLikelihood(const SufficientStats &stats, const IVectorExtractor &ext);

struct EmIterationResult {
  IVectorExtractor extractor;
  double objective = 0.0;  // summed marginal log-likelihood under the input extractor
  std::vector<int> ridged_components;
};

/// One EM iteration over a corpus of per-utterance statistics.  The E-step
/// runs on up to `jobs` threads; accumulation happens in corpus order.
EmIterationResult EmIterate(const std::vector<SufficientStats> &corpus, const IVectorExtractor &ext,
                            int jobs = 1);

/// Summed marginal log-likelihood of a corpus.
double CorpusLogLikelihood(const std::vector<SufficientStats> &corpus, const IVectorExtractor &ext,
                           int jobs = 1);

/// n draws (rows) from N(mean, inv(precision)).
Matrix SampleIvectors(const IVectorPosterior &post, int n, Rng *rng);

/// trace(inv(L)).
double PosteriorTrace(const IVectorPosterior &post);

/*
  Extractor file: "NIVX", u32 version 1, u32 C, u32 D, u32 R, then C matrices
  (D x (R + 1), f64) and the precision vector.
*/
constexpr uint32_t kExtractorFileVersion = 1;

void SaveExtractor(const IVectorExtractor &ext, const std::string &path);
IVectorExtractor LoadExtractor(const std::string &path);

/// CSV "utterance,sample,pc1,pc2,w1..wR": every sampled i-vector with its
/// projection onto the two leading principal axes of all samples.
void WriteSampleCsv(const std::vector<std::string> &ids, const std::vector<Matrix> &samples,
                    const std::string &path);

/// CSV "utterance,num_frames,trace".
void WriteTraceCsv(const std::vector<std::string> &ids, const std::vector<double> &num_frames,
                   const std::vector<double> &traces, const std::string &path);

}  // namespace nivec

#endif  // NIVEC_IVECTOR_H_
