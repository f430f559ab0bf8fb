// tests/test_metrics.cc

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

#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <algorithm>
#include <cmath>
#include <filesystem>
#include <vector>

#include "bxv/error.h"
#include "bxv/io.h"
#include "bxv/metrics.h"
#include "bxv/rng.h"
#include "doctest.h"

using namespace bxv;

namespace {

// Exhaustive-sweep oracle: recount both error rates at every candidate
// threshold by brute force (O(n^2)), then interpolate exactly like the
// definition says.  Shares no code with the implementation.
struct OraclePoint {
  double p_fa, p_miss;
};

std::vector<OraclePoint> oracle_sweep(const std::vector<double>& ts,
                                      const std::vector<double>& nt) {
  std::vector<double> thresholds = ts;
  thresholds.insert(thresholds.end(), nt.begin(), nt.end());
  std::sort(thresholds.begin(), thresholds.end());
  thresholds.erase(std::unique(thresholds.begin(), thresholds.end()),
                   thresholds.end());
  std::vector<OraclePoint> pts;
  for (double theta : thresholds) {
    double miss = 0.0, fa = 0.0;
    for (double s : ts)
      if (s < theta) miss += 1.0;
    for (double s : nt)
      if (s >= theta) fa += 1.0;
    pts.push_back({fa / static_cast<double>(nt.size()),
                   miss / static_cast<double>(ts.size())});
  }
  pts.push_back({0.0, 1.0});  // reject everything
  return pts;
}

double oracle_eer(const std::vector<double>& ts, const std::vector<double>& nt) {
  const auto pts = oracle_sweep(ts, nt);
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
  return -1.0;
}

double oracle_min_dcf(const std::vector<double>& ts, const std::vector<double>& nt,
                      double pt, double cm, double cf) {
  const auto pts = oracle_sweep(ts, nt);
  const double norm = std::min(cm * pt, cf * (1.0 - pt));
  double best = 1e300;
  for (const auto& p : pts)
    best = std::min(best, (cm * p.p_miss * pt + cf * p.p_fa * (1.0 - pt)) / norm);
  return best;
}

}  // namespace

TEST_CASE("compute_eer separable, symmetric, interleaved") {
  CHECK(compute_eer({2.0, 3.0}, {0.0, 1.0}) == 0.0);
  CHECK(compute_eer({0.0, 1.0}, {0.0, 1.0}) == 0.5);
  const double e = compute_eer({1.0, 3.0}, {0.0, 2.0});
  CHECK(e == oracle_eer({1.0, 3.0}, {0.0, 2.0}));
  CHECK(e == doctest::Approx(0.5));
}

TEST_CASE("compute_eer rejects single-class input") {
  CHECK_THROWS_AS(compute_eer({1.0}, {}), Error);
  CHECK_THROWS_AS(compute_eer({}, {1.0}), Error);
}

TEST_CASE("min_dcf separable and degenerate") {
  CHECK(compute_min_dcf({2.0, 3.0}, {0.0, 1.0}, 0.01, 1.0, 1.0) == 0.0);
  // All scores equal: best trivial policy, normalized cost exactly 1.
  CHECK(compute_min_dcf({1.0, 1.0}, {1.0, 1.0, 1.0}, 0.01, 1.0, 1.0) ==
        doctest::Approx(1.0));
}

TEST_CASE("eer and min_dcf match the exhaustive oracle on random sets") {
  RngStream rng(404);
  for (int rep = 0; rep < 200; ++rep) {
    const std::size_t nt_count = 2 + rng.next_below(60);
    const std::size_t t_count = 2 + rng.next_below(60);
    std::vector<double> ts(t_count), nt(nt_count);
    for (double& v : ts) v = rng.next_gaussian() + 0.5;
    for (double& v : nt) v = rng.next_gaussian() - 0.5;
    if (rep % 5 == 0) {
      // Inject ties between and within classes.
      ts[0] = nt[0];
      if (t_count > 1) ts[1] = ts[0];
    }
    CHECK(compute_eer(ts, nt) == oracle_eer(ts, nt));
    for (double pt : {0.01, 0.001})
      CHECK(compute_min_dcf(ts, nt, pt, 1.0, 1.0) ==
            oracle_min_dcf(ts, nt, pt, 1.0, 1.0));
  }
}

TEST_CASE("min_dcf never exceeds the trivial policy cost") {
  RngStream rng(405);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> ts(20), nt(30);
    for (double& v : ts) v = rng.next_gaussian();
    for (double& v : nt) v = rng.next_gaussian();
    CHECK(compute_min_dcf(ts, nt, 0.01, 1.0, 1.0) <= 1.0 + 1e-12);
    CHECK(compute_eer(ts, nt) >= 0.0);
  }
}

TEST_CASE("eer stays in [0, 0.5] for at-least-chance score sets") {
  // The sweep crossing can exceed 0.5 only when targets empirically score
  // below nontargets; separated sets keep the invariant meaningful.
  RngStream rng(409);
  for (int rep = 0; rep < 50; ++rep) {
    std::vector<double> ts(30), nt(40);
    for (double& v : ts) v = rng.next_gaussian() + 1.5;
    for (double& v : nt) v = rng.next_gaussian() - 1.5;
    const double e = compute_eer(ts, nt);
    CHECK(e >= 0.0);
    CHECK(e <= 0.5 + 1e-12);
  }
}

TEST_CASE("det_curve structure and EER cross-check") {
  const std::vector<double> ts = {2.0, 3.0, 5.0};
  const std::vector<double> nt = {0.0, 1.0, 2.5};
  const auto det = det_curve(ts, nt);
  // Point count: distinct scores + 2 endpoints.
  CHECK(det.size() == 6 + 2);
  CHECK(det.front().p_fa == 0.0);
  CHECK(det.front().p_miss == 1.0);
  CHECK(det.back().p_fa == 1.0);
  CHECK(det.back().p_miss == 0.0);

  // Monotone along the curve (threshold descending).
  for (std::size_t i = 1; i < det.size(); ++i) {
    CHECK(det[i].p_fa >= det[i - 1].p_fa);
    CHECK(det[i].p_miss <= det[i - 1].p_miss);
  }

  // Separable scores: some point attains (0, 0).
  const auto sep = det_curve({5.0, 6.0}, {1.0, 2.0});
  bool touches = false;
  for (const auto& p : sep)
    if (p.p_fa == 0.0 && p.p_miss == 0.0) touches = true;
  CHECK(touches);

  // EER read from the curve crossing matches compute_eer.
  RngStream rng(406);
  std::vector<double> rts(40), rnt(40);
  for (double& v : rts) v = rng.next_gaussian() + 0.8;
  for (double& v : rnt) v = rng.next_gaussian() - 0.8;
  const auto curve = det_curve(rts, rnt);
  double crossing = -1.0;
  for (std::size_t i = 0; i + 1 < curve.size(); ++i) {
    const double da = curve[i].p_miss - curve[i].p_fa;   // >= 0 side first
    const double db = curve[i + 1].p_miss - curve[i + 1].p_fa;
    if (da >= 0.0 && db <= 0.0) {
      if (da == db) {
        crossing = curve[i].p_fa;
      } else {
        const double t = da / (da - db);
        crossing = curve[i].p_fa + t * (curve[i + 1].p_fa - curve[i].p_fa);
      }
      break;
    }
  }
  CHECK(std::fabs(crossing - compute_eer(rts, rnt)) < 1e-9);
}

TEST_CASE("metrics invariant under strictly increasing score transforms") {
  RngStream rng(407);
  std::vector<double> ts(25), nt(35);
  for (double& v : ts) v = rng.next_gaussian() + 0.4;
  for (double& v : nt) v = rng.next_gaussian() - 0.4;
  auto warp = [](double x) { return std::exp(0.7 * x) + 3.0; };
  std::vector<double> wts, wnt;
  for (double v : ts) wts.push_back(warp(v));
  for (double v : nt) wnt.push_back(warp(v));
  CHECK(compute_eer(ts, nt) == doctest::Approx(compute_eer(wts, wnt)).epsilon(1e-12));
  CHECK(compute_min_dcf(ts, nt, 0.01, 1.0, 1.0) ==
        doctest::Approx(compute_min_dcf(wts, wnt, 0.01, 1.0, 1.0)).epsilon(1e-12));
  CHECK(det_curve(ts, nt).size() == det_curve(wts, wnt).size());
}

TEST_CASE("evaluate_scores joins trials and formats the report") {
  TrialList trials = {{"a", "b", true}, {"a", "c", false}, {"b", "c", false}};
  ScoreSet scores = {{"a", "b", 2.0}, {"a", "c", -1.0}, {"b", "c", 0.5}};
  const MetricsReport r = evaluate_scores(scores, trials, 0.01, 1.0, 1.0);
  CHECK(r.num_target == 1);
  CHECK(r.num_nontarget == 2);
  CHECK(r.eer == 0.0);
  const std::string line = format_report(r);
  CHECK(line.find("eer=0.0000%") != std::string::npos);
  CHECK(line.find("min_dcf=0.0000") != std::string::npos);
  CHECK(line.find("p_target=0.01") != std::string::npos);

  ScoreSet missing = {{"a", "b", 2.0}, {"a", "c", -1.0}};
  CHECK_THROWS_AS(evaluate_scores(missing, trials, 0.01, 1.0, 1.0), Error);
  ScoreSet unknown = scores;
  unknown.push_back({"zz", "q", 1.0});
  CHECK_THROWS_AS(evaluate_scores(unknown, trials, 0.01, 1.0, 1.0), Error);
}

TEST_CASE("fusion of a score set with itself leaves the report unchanged") {
  RngStream rng(408);
  TrialList trials;
  ScoreSet scores;
  for (int i = 0; i < 60; ++i) {
    const std::string e = "e" + std::to_string(i);
    const std::string t = "t" + std::to_string(i);
    trials.push_back({e, t, i % 3 == 0});
    scores.push_back({e, t, rng.next_gaussian() + (i % 3 == 0 ? 0.7 : 0.0)});
  }
  const ScoreSet fused = fuse_scores(scores, scores);
  const MetricsReport r1 = evaluate_scores(scores, trials, 0.01, 1.0, 1.0);
  const MetricsReport r2 = evaluate_scores(fused, trials, 0.01, 1.0, 1.0);
  CHECK(r1.eer == r2.eer);
  CHECK(r1.min_dcf == r2.min_dcf);
  CHECK(r1.det_points.size() == r2.det_points.size());
}

TEST_CASE("probit endpoints and reference values") {
  CHECK(probit(0.5) == doctest::Approx(0.0).epsilon(1e-9));
  CHECK(probit(0.975) == doctest::Approx(1.959963985).epsilon(1e-6));
  CHECK(probit(0.0) == -std::numeric_limits<double>::infinity());
  CHECK(probit(1.0) == std::numeric_limits<double>::infinity());
}

TEST_CASE("DET CSV and SVG outputs") {
  const auto dir = std::filesystem::temp_directory_path() / "bxv_test_metrics";
  std::filesystem::create_directories(dir);
  const MetricsReport r =
      evaluate_scores({{"a", "b", 1.0}, {"a", "c", -1.0}},
                      {{"a", "b", true}, {"a", "c", false}}, 0.01, 1.0, 1.0);
  write_det_csv(r, dir / "det.csv");
  const auto lines = read_lines(dir / "det.csv");
  CHECK(lines[0] == "threshold,p_fa,p_miss,probit_fa,probit_miss");
  CHECK(lines.size() == r.det_points.size() + 1);
  write_det_svg(r, dir / "det.svg");
  CHECK(read_file(dir / "det.svg").find("<svg") == 0);
  std::filesystem::remove_all(dir);
}
