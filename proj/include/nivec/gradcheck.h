// nivec/gradcheck.h

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

#ifndef NIVEC_GRADCHECK_H_
#define NIVEC_GRADCHECK_H_

#include <string>
#include <vector>

#include "nivec/numerics.h"

namespace nivec {

/*
  Central finite differences against the analytic backward passes.  Each
  check draws a random input and a random projection r of the output, takes
  L = sum(r .* y) and compares dL/dtheta for the input and every parameter
  tensor.  Step h = 1e-5 * max(1, |theta|).  The error of one coordinate is
  |analytic - numeric| / max(|analytic|, |numeric|, 1e-3).
*/
struct GradCheckOptions {
  int seeds = 20;
  double tolerance = 1e-4;
  int max_coords_per_tensor = 24;
  uint64_t base_seed = 17;
};

struct GradCheckReport {
  std::string name;
  int seeds = 0;
  double max_error = 0.0;
  std::string worst;  // tensor and coordinate of the largest error
  bool passed = false;
};

/// Names accepted by RunGradCheck.
std::vector<std::string> GradCheckTargets();

GradCheckReport RunGradCheck(const std::string &target, const GradCheckOptions &options = {});

std::vector<GradCheckReport> RunGradientSuite(const GradCheckOptions &options = {});

}  // namespace nivec

#endif  // NIVEC_GRADCHECK_H_
