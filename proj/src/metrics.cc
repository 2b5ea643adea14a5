// nivec/metrics.cc

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

#include "nivec/metrics.h"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "json.hpp"
#include "nivec/error.h"

namespace nivec {

void DcfParams::Validate() const {
  NIVEC_CHECK(c_miss > 0.0 && c_fa > 0.0, ErrorCode::kConfig, "detection costs must be > 0");
  NIVEC_CHECK(p_target > 0.0 && p_target < 1.0, ErrorCode::kConfig, "p_target must be in (0, 1)");
}

namespace {

void CheckClasses(const std::vector<double> &tgt, const std::vector<double> &non) {
  NIVEC_CHECK(!tgt.empty() && !non.empty(), ErrorCode::kInvalidArgument,
              "metrics need at least one target and one nontarget trial");
  for (double s : tgt) NIVEC_CHECK(std::isfinite(s), ErrorCode::kNonFinite, "non-finite score");
  for (double s : non) NIVEC_CHECK(std::isfinite(s), ErrorCode::kNonFinite, "non-finite score");
}

// Miss and false-alarm counts as the threshold sweeps down through the
// distinct scores.  Entry 0 is reject-all.
struct Sweep {
  std::vector<long> misses;
  std::vector<long> false_alarms;
};

Sweep SweepCounts(const std::vector<double> &tgt, const std::vector<double> &non) {
  std::vector<std::pair<double, bool>> all;
  all.reserve(tgt.size() + non.size());
  for (double s : tgt) all.emplace_back(s, true);
  for (double s : non) all.emplace_back(s, false);
  std::sort(all.begin(), all.end(),
            [](const auto &a, const auto &b) { return a.first > b.first; });
  Sweep sw;
  long miss = static_cast<long>(tgt.size()), fa = 0;
  sw.misses.push_back(miss);
  sw.false_alarms.push_back(fa);
  for (size_t i = 0; i < all.size();) {
    const double s = all[i].first;
    for (; i < all.size() && all[i].first == s; ++i) {
      if (all[i].second)
        --miss;
      else
        ++fa;
    }
    sw.misses.push_back(miss);
    sw.false_alarms.push_back(fa);
  }
  return sw;
}

double Cross(const OperatingPoint &o, const OperatingPoint &a, const OperatingPoint &b) {
  return (a.p_fa - o.p_fa) * (b.p_miss - o.p_miss) - (a.p_miss - o.p_miss) * (b.p_fa - o.p_fa);
}

}  // namespace

std::vector<OperatingPoint> DetPoints(const std::vector<double> &tgt,
                                      const std::vector<double> &non) {
  CheckClasses(tgt, non);
  Sweep sw = SweepCounts(tgt, non);
  const double nt = static_cast<double>(tgt.size()), nn = static_cast<double>(non.size());
  std::vector<OperatingPoint> points;
  for (size_t i = 0; i < sw.misses.size(); ++i)
    points.push_back({sw.misses[i] / nt, sw.false_alarms[i] / nn});
  return points;
}

double Eer(const std::vector<double> &tgt, const std::vector<double> &non) {
  std::vector<OperatingPoint> points = DetPoints(tgt, non);
  // Lower convex hull in the (p_fa, p_miss) plane; points arrive sorted by
  // increasing p_fa and decreasing p_miss.
  std::vector<OperatingPoint> hull;
  for (const OperatingPoint &p : points) {
    while (hull.size() >= 2 && Cross(hull[hull.size() - 2], hull.back(), p) <= 0.0) hull.pop_back();
    hull.push_back(p);
  }
  for (size_t i = 0; i + 1 < hull.size(); ++i) {
    const OperatingPoint &a = hull[i], &b = hull[i + 1];
    const double da = a.p_miss - a.p_fa, db = b.p_miss - b.p_fa;
    if (da >= 0.0 && db <= 0.0) {
      if (da == db) return a.p_miss;
      const double t = da / (da - db);
      return a.p_fa + t * (b.p_fa - a.p_fa);
    }
  }
  Fail(ErrorCode::kCheckFailed, "eer: convex hull does not cross the diagonal");
}

double MinDcf(const std::vector<double> &tgt, const std::vector<double> &non,
              const DcfParams &params) {
  params.Validate();
  std::vector<OperatingPoint> points = DetPoints(tgt, non);
  const double w_miss = params.c_miss * params.p_target;
  const double w_fa = params.c_fa * (1.0 - params.p_target);
  double best = w_miss * points[0].p_miss + w_fa * points[0].p_fa;
  for (const OperatingPoint &p : points) best = std::min(best, w_miss * p.p_miss + w_fa * p.p_fa);
  return best / std::min(w_miss, w_fa);
}

MetricsReport ComputeMetrics(const std::vector<double> &tgt, const std::vector<double> &non,
                             const DcfParams &params) {
  MetricsReport r;
  r.eer = Eer(tgt, non);
  r.min_dcf = MinDcf(tgt, non, params);
  r.num_target = static_cast<int>(tgt.size());
  r.num_nontarget = static_cast<int>(non.size());
  return r;
}

std::string MetricsJson(const MetricsReport &report) {
  nlohmann::ordered_json j;
  j["eer"] = report.eer;
  j["min_dcf"] = report.min_dcf;
  j["num_target"] = report.num_target;
  j["num_nontarget"] = report.num_nontarget;
  return j.dump(2) + "\n";
}

std::string DetCsv(const std::vector<OperatingPoint> &points) {
  std::ostringstream os;
  os << "p_miss,p_fa\n";
  char buf[64];
  for (const OperatingPoint &p : points) {
    std::snprintf(buf, sizeof(buf), "%.9g,%.9g\n", p.p_miss, p.p_fa);
    os << buf;
  }
  return os.str();
}

}  // namespace nivec
