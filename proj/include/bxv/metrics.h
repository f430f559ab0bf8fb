// include/bxv/metrics.h

// Copyright 2026  The bxv authors

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

#pragma once

#include <filesystem>
#include <string>
#include <vector>

#include "bxv/backend.h"

namespace bxv {

struct DetPoint {
  double threshold = 0.0;  // +/-inf at the endpoints
  double p_fa = 0.0;
  double p_miss = 0.0;
};

struct MetricsReport {
  double eer = 0.0;      // fraction in [0, 0.5]
  double min_dcf = 0.0;  // normalized detection cost
  double p_target = 0.01;
  double c_miss = 1.0;
  double c_fa = 1.0;
  std::size_t num_target = 0, num_nontarget = 0;
  std::vector<DetPoint> det_points;
};

/// Threshold sweep over all distinct scores with the accept-at-threshold
/// convention (score >= theta accepts); EER by linear interpolation between
/// the adjacent sweep points where P_miss - P_fa changes sign.
double compute_eer(const std::vector<double>& target_scores,
                   const std::vector<double>& nontarget_scores);

/// min over thresholds (including accept-all and reject-all) of
/// [c_miss*P_miss*p_t + c_fa*P_fa*(1-p_t)] / min(c_miss*p_t, c_fa*(1-p_t)).
double compute_min_dcf(const std::vector<double>& target_scores,
                       const std::vector<double>& nontarget_scores,
                       double p_target, double c_miss, double c_fa);

/// One point per distinct threshold in descending-threshold order, with the
/// (0,1) reject-all and (1,0) accept-all endpoints included.
std::vector<DetPoint> det_curve(const std::vector<double>& target_scores,
                                const std::vector<double>& nontarget_scores);

/// Joins a score set against its labeled trial list (keys must match
/// exactly) and computes the full report.
MetricsReport evaluate_scores(const ScoreSet& scores, const TrialList& trials,
                              double p_target, double c_miss, double c_fa);

void split_by_label(const ScoreSet& scores, const TrialList& trials,
                    std::vector<double>* target_scores,
                    std::vector<double>* nontarget_scores);

/// Inverse standard normal CDF (Acklam's rational approximation); +/-inf at
/// the endpoints.  Used for the DET probit columns.
double probit(double p);

std::string format_report(const MetricsReport& r);
void write_det_csv(const MetricsReport& r, const std::filesystem::path& path);
void write_det_svg(const MetricsReport& r, const std::filesystem::path& path);

}  // namespace bxv
