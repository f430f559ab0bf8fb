// include/bxv/backend.h

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

#include "bxv/matrix.h"

namespace bxv {

struct Trial {
  std::string enroll, test;
  bool target = false;
};
using TrialList = std::vector<Trial>;

struct ScoredTrial {
  std::string enroll, test;
  double score = 0.0;
};
using ScoreSet = std::vector<ScoredTrial>;

// Text formats: trial lines "<enroll> <test> target|nontarget",
// score lines "<enroll> <test> <score:%.6f>".
TrialList load_trials(const std::filesystem::path& path);
void save_trials(const TrialList& trials, const std::filesystem::path& path);
ScoreSet load_scores(const std::filesystem::path& path);
void save_scores(const ScoreSet& scores, const std::filesystem::path& path);

/// Supervised linear projection; rows of `projection` are generalized
/// eigenvectors of (S_b, S_w) in descending eigenvalue order.
struct LdaModel {
  std::vector<double> mean;
  Matrix projection;  // out_dim x in_dim
  std::size_t in_dim() const { return projection.cols(); }
  std::size_t out_dim() const { return projection.rows(); }
};

/// Two-covariance PLDA: e = mean + y + eps with y ~ N(0, between_cov) per
/// speaker and eps ~ N(0, within_cov) per utterance.
struct PldaModel {
  std::vector<double> mean;
  Matrix between_cov;
  Matrix within_cov;
  std::size_t dim() const { return between_cov.rows(); }
};

/// Requested out_dim greater than num_classes - 1 (or the feature dim) is
/// clamped with a warning.  S_w is regularized by 1e-6 * trace/dim * I.
LdaModel lda_fit(const Matrix& embeddings, const std::vector<int>& labels,
                 std::size_t out_dim);
std::vector<double> lda_project(const LdaModel& model, const std::vector<double>& embedding);

double cosine_score(const std::vector<double>& a, const std::vector<double>& b);

struct PldaFitResult {
  PldaModel model;
  std::vector<double> loglik_trace;  // one total log-likelihood per EM iteration
};
PldaFitResult plda_fit(const Matrix& embeddings, const std::vector<int>& labels,
                       int iterations);

/// Marginal log-likelihood of a speaker's utterances under the model; used
/// for the EM trace and exposed for direct verification.
double plda_speaker_loglik(const PldaModel& model, const Matrix& utterances);

/// Same-speaker vs different-speaker log-likelihood ratio.
double plda_score(const PldaModel& model, const std::vector<double>& enroll,
                  const std::vector<double>& test);

/// Precomputed factorizations for batch scoring.
class PldaScorer {
 public:
  explicit PldaScorer(const PldaModel& model);
  double score(const std::vector<double>& enroll, const std::vector<double>& test) const;

 private:
  std::vector<double> mean_;
  Matrix chol_tot_;   // B + W
  Matrix chol_sum_;   // 2B + W
  Matrix chol_within_;
  double logdet_tot_ = 0.0, logdet_sum_ = 0.0, logdet_within_ = 0.0;
};

/// Per-trial arithmetic mean of two score sets over identical trial keys.
ScoreSet fuse_scores(const ScoreSet& a, const ScoreSet& b);

/// x -> x * sqrt(dim) / ||x||.
std::vector<double> length_normalize(const std::vector<double>& x);

}  // namespace bxv
