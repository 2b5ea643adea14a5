// nivec/metrics.h

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

#ifndef NIVEC_METRICS_H_
#define NIVEC_METRICS_H_

#include <string>
#include <vector>

namespace nivec {

struct DcfParams {
  double c_miss = 1.0;
  double c_fa = 1.0;
  double p_target = 0.05;

  void Validate() const;
};

/// One operating point; a trial is accepted when its score >= threshold.
struct OperatingPoint {
  double p_miss = 0.0;
  double p_fa = 0.0;
};

/// Points for thresholds above the highest score and at every distinct
/// score, ordered from reject-all (1, 0) to accept-all (0, 1).
std::vector<OperatingPoint> DetPoints(const std::vector<double> &target_scores,
                                      const std::vector<double> &nontarget_scores);

/// Equal error rate of the ROC convex hull: the point where the hull, with
/// straight segments between its vertices, crosses p_miss == p_fa.
double Eer(const std::vector<double> &target_scores, const std::vector<double> &nontarget_scores);

/// min over thresholds of c_miss p_t P_miss + c_fa (1 - p_t) P_fa, divided
/// by min(c_miss p_t, c_fa (1 - p_t)).
double MinDcf(const std::vector<double> &target_scores,
              const std::vector<double> &nontarget_scores, const DcfParams &params = {});

struct MetricsReport {
  double eer = 0.0;
  double min_dcf = 0.0;
  int num_target = 0;
  int num_nontarget = 0;
};

MetricsReport ComputeMetrics(const std::vector<double> &target_scores,
                             const std::vector<double> &nontarget_scores,
                             const DcfParams &params = {});

/// {"eer", "min_dcf", "num_target", "num_nontarget"}.
std::string MetricsJson(const MetricsReport &report);
/// CSV "p_miss,p_fa".
std::string DetCsv(const std::vector<OperatingPoint> &points);

}  // namespace nivec

#endif  // NIVEC_METRICS_H_
