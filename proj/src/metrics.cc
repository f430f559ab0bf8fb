// src/metrics.cc

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

#include "bxv/metrics.h"

#include <algorithm>
#include <cmath>
#include <limits>
#include <map>
#include <set>

#include "bxv/error.h"
#include "bxv/io.h"

namespace bxv {

namespace {

constexpr double kInf = std::numeric_limits<double>::infinity();

struct SweepPoint {
  double threshold;
  double p_fa;
  double p_miss;
};

/// Error rates at every distinct score threshold, ascending.  Accept when
/// score >= threshold, so P_miss(theta) = #targets below theta / #targets
/// and P_fa(theta) = #nontargets at or above theta / #nontargets.
std::vector<SweepPoint> sweep(const std::vector<double>& targets,
                              const std::vector<double>& nontargets) {
  if (targets.empty() || nontargets.empty())
    throw_data("metric sweep: need at least one target and one nontarget trial");
  std::vector<double> ts = targets, nt = nontargets;
  std::sort(ts.begin(), ts.end());
  std::sort(nt.begin(), nt.end());
  std::vector<double> thresholds;
  thresholds.reserve(ts.size() + nt.size());
  thresholds.insert(thresholds.end(), ts.begin(), ts.end());
  thresholds.insert(thresholds.end(), nt.begin(), nt.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());

  const double nt_total = static_cast<double>(nt.size());
  const double t_total = static_cast<double>(ts.size());
  std::vector<SweepPoint> points;
  points.reserve(thresholds.size());
  for (double theta : thresholds) {
    const auto t_below = static_cast<double>(
        std::lower_bound(ts.begin(), ts.end(), theta) - ts.begin());
    const auto nt_at_or_above = static_cast<double>(
        nt.end() - std::lower_bound(nt.begin(), nt.end(), theta));
    points.push_back({theta, nt_at_or_above / nt_total, t_below / t_total});
  }
  return points;
}

}  // namespace

double compute_eer(const std::vector<double>& targets,
                   const std::vector<double>& nontargets) {
  const auto points = sweep(targets, nontargets);
  // Append the reject-all endpoint so the sign flip always exists:
  // the first point has P_miss=0, P_fa=1 (accept everything at the min).
  std::vector<SweepPoint> pts = points;
  pts.push_back({kInf, 0.0, 1.0});

  for (std::size_t i = 0; i + 1 < pts.size(); ++i) {
    const double da = pts[i].p_miss - pts[i].p_fa;
    const double db = pts[i + 1].p_miss - pts[i + 1].p_fa;
    if (da == 0.0) return pts[i].p_fa;
    if (da < 0.0 && db >= 0.0) {
      if (db == 0.0) return pts[i + 1].p_fa;
      const double t = da / (da - db);
      return pts[i].p_fa + t * (pts[i + 1].p_fa - pts[i].p_fa);
    }
  }
  // All points above the diagonal never happens: the sweep starts at
  // (P_fa=1, P_miss=0).
  throw_numeric("compute_eer: no crossing found");
}

double compute_min_dcf(const std::vector<double>& targets,
                       const std::vector<double>& nontargets, double p_target,
                       double c_miss, double c_fa) {
  if (p_target <= 0.0 || p_target >= 1.0)
    throw_data("compute_min_dcf: p_target must be in (0,1)");
  if (c_miss <= 0.0 || c_fa <= 0.0)
    throw_data("compute_min_dcf: costs must be positive");
  auto points = sweep(targets, nontargets);
  points.push_back({kInf, 0.0, 1.0});  // reject-all; accept-all is the first point
  const double norm =
      std::min(c_miss * p_target, c_fa * (1.0 - p_target));
  double best = kInf;
  for (const auto& p : points) {
    const double cost =
        (c_miss * p.p_miss * p_target + c_fa * p.p_fa * (1.0 - p_target)) / norm;
    if (cost < best) best = cost;
  }
  return best;
}

std::vector<DetPoint> det_curve(const std::vector<double>& targets,
                                const std::vector<double>& nontargets) {
  const auto points = sweep(targets, nontargets);
  std::vector<DetPoint> out;
  out.reserve(points.size() + 2);
  out.push_back({kInf, 0.0, 1.0});  // reject everything
  for (auto it = points.rbegin(); it != points.rend(); ++it)
    out.push_back({it->threshold, it->p_fa, it->p_miss});
  out.push_back({-kInf, 1.0, 0.0});  // accept everything
  return out;
}

void split_by_label(const ScoreSet& scores, const TrialList& trials,
                    std::vector<double>* target_scores,
                    std::vector<double>* nontarget_scores) {
  std::map<std::pair<std::string, std::string>, bool> labels;
  for (const Trial& t : trials) labels[{t.enroll, t.test}] = t.target;
  if (labels.size() != trials.size())
    throw_data("evaluate: duplicate keys in trial list");

  std::set<std::pair<std::string, std::string>> unseen;
  for (const auto& [key, lab] : labels) unseen.insert(key);
  target_scores->clear();
  nontarget_scores->clear();
  for (const ScoredTrial& s : scores) {
    const auto key = std::make_pair(s.enroll, s.test);
    auto it = labels.find(key);
    if (it == labels.end())
      throw_data("evaluate: scored trial (" + s.enroll + ", " + s.test +
                 ") is not in the trial list");
    unseen.erase(key);
    (it->second ? target_scores : nontarget_scores)->push_back(s.score);
  }
  if (!unseen.empty())
    throw_data("evaluate: " + std::to_string(unseen.size()) +
               " trials have no score (first: " + unseen.begin()->first + ", " +
               unseen.begin()->second + ")");
}

MetricsReport evaluate_scores(const ScoreSet& scores, const TrialList& trials,
                              double p_target, double c_miss, double c_fa) {
  std::vector<double> ts, nt;
  split_by_label(scores, trials, &ts, &nt);
  if (ts.empty() || nt.empty())
    throw_data("evaluate: need both target and nontarget trials (got " +
               std::to_string(ts.size()) + " targets, " +
               std::to_string(nt.size()) + " nontargets)");
  MetricsReport r;
  r.p_target = p_target;
  r.c_miss = c_miss;
  r.c_fa = c_fa;
  r.num_target = ts.size();
  r.num_nontarget = nt.size();
  r.eer = compute_eer(ts, nt);
  r.min_dcf = compute_min_dcf(ts, nt, p_target, c_miss, c_fa);
  r.det_points = det_curve(ts, nt);
  return r;
}

double probit(double p) {
  if (p <= 0.0) return -kInf;
  if (p >= 1.0) return kInf;
  // Acklam's inverse normal CDF approximation (|relative error| < 1.2e-9).
  static const double a[] = {-3.969683028665376e+01, 2.209460984245205e+02,
                             -2.759285104469687e+02, 1.383577518672690e+02,
                             -3.066479806614716e+01, 2.506628277459239e+00};
  static const double b[] = {-5.447609879822406e+01, 1.615858368580409e+02,
                             -1.556989798598866e+02, 6.680131188771972e+01,
                             -1.328068155288572e+01};
  static const double c[] = {-7.784894002430293e-03, -3.223964580411365e-01,
                             -2.400758277161838e+00, -2.549732539343734e+00,
                             4.374664141464968e+00,  2.938163982698783e+00};
  static const double dd[] = {7.784695709041462e-03, 3.224671290700398e-01,
                              2.445134137142996e+00, 3.754408661907416e+00};
  const double plow = 0.02425, phigh = 1.0 - plow;
  double q, r, x;
  if (p < plow) {
    q = std::sqrt(-2.0 * std::log(p));
    x = (((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  } else if (p <= phigh) {
    q = p - 0.5;
    r = q * q;
    x = (((((a[0] * r + a[1]) * r + a[2]) * r + a[3]) * r + a[4]) * r + a[5]) * q /
        (((((b[0] * r + b[1]) * r + b[2]) * r + b[3]) * r + b[4]) * r + 1.0);
  } else {
    q = std::sqrt(-2.0 * std::log(1.0 - p));
    x = -(((((c[0] * q + c[1]) * q + c[2]) * q + c[3]) * q + c[4]) * q + c[5]) /
        ((((dd[0] * q + dd[1]) * q + dd[2]) * q + dd[3]) * q + 1.0);
  }
  return x;
}

std::string format_report(const MetricsReport& r) {
  std::string line = "eer=" + format_double("%.4f", 100.0 * r.eer) + "% min_dcf=" +
                     format_double("%.4f", r.min_dcf) + " p_target=" +
                     format_double("%g", r.p_target);
  line += "\nc_miss=" + format_double("%g", r.c_miss) + " c_fa=" +
          format_double("%g", r.c_fa) + " targets=" + std::to_string(r.num_target) +
          " nontargets=" + std::to_string(r.num_nontarget) + "\n";
  return line;
}

namespace {

std::string num_or_inf(double v, const char* fmt) {
  if (v == kInf) return "inf";
  if (v == -kInf) return "-inf";
  return format_double(fmt, v);
}

}  // namespace

void write_det_csv(const MetricsReport& r, const std::filesystem::path& path) {
  std::string text = "threshold,p_fa,p_miss,probit_fa,probit_miss\n";
  for (const DetPoint& p : r.det_points) {
    text += num_or_inf(p.threshold, "%.9g") + "," + format_double("%.9g", p.p_fa) +
            "," + format_double("%.9g", p.p_miss) + "," +
            num_or_inf(probit(p.p_fa), "%.9g") + "," +
            num_or_inf(probit(p.p_miss), "%.9g") + "\n";
  }
  write_file(path, text);
}

void write_det_svg(const MetricsReport& r, const std::filesystem::path& path) {
  // Probit-warped axes clipped to [0.05%, 60%], the conventional DET window.
  const double lo = probit(0.0005), hi = probit(0.60);
  const double width = 480.0, height = 480.0, margin = 50.0;
  auto sx = [&](double p) {
    double z = probit(std::min(std::max(p, 0.0005), 0.60));
    return margin + (z - lo) / (hi - lo) * (width - 2 * margin);
  };
  auto sy = [&](double p) {
    double z = probit(std::min(std::max(p, 0.0005), 0.60));
    return height - margin - (z - lo) / (hi - lo) * (height - 2 * margin);
  };
  std::string svg =
      "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"480\" height=\"480\" "
      "viewBox=\"0 0 480 480\">\n"
      "<rect width=\"480\" height=\"480\" fill=\"white\"/>\n";
  const double ticks[] = {0.001, 0.002, 0.005, 0.01, 0.02, 0.05, 0.1, 0.2, 0.4};
  for (double t : ticks) {
    svg += "<line x1=\"" + format_double("%.1f", sx(t)) + "\" y1=\"" +
           format_double("%.1f", height - margin) + "\" x2=\"" +
           format_double("%.1f", sx(t)) + "\" y2=\"" +
           format_double("%.1f", margin) + "\" stroke=\"#ddd\"/>\n";
    svg += "<line x1=\"" + format_double("%.1f", margin) + "\" y1=\"" +
           format_double("%.1f", sy(t)) + "\" x2=\"" +
           format_double("%.1f", width - margin) + "\" y2=\"" +
           format_double("%.1f", sy(t)) + "\" stroke=\"#ddd\"/>\n";
    svg += "<text x=\"" + format_double("%.1f", sx(t) - 10) + "\" y=\"" +
           format_double("%.1f", height - margin + 15) +
           "\" font-size=\"9\">" + format_double("%g", 100 * t) + "%</text>\n";
    svg += "<text x=\"" + format_double("%.1f", margin - 38) + "\" y=\"" +
           format_double("%.1f", sy(t) + 3) + "\" font-size=\"9\">" +
           format_double("%g", 100 * t) + "%</text>\n";
  }
  svg += "<polyline fill=\"none\" stroke=\"#c22\" stroke-width=\"1.5\" points=\"";
  for (const DetPoint& p : r.det_points)
    svg += format_double("%.2f", sx(p.p_fa)) + "," +
           format_double("%.2f", sy(p.p_miss)) + " ";
  svg += "\"/>\n";
  svg += "<text x=\"200\" y=\"470\" font-size=\"11\">false alarm rate</text>\n";
  svg += "<text x=\"8\" y=\"240\" font-size=\"11\" transform=\"rotate(-90 14 240)\">"
         "miss rate</text>\n";
  svg += "</svg>\n";
  write_file(path, svg);
}

}  // namespace bxv
