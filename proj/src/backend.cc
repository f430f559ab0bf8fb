// src/backend.cc

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

#include "bxv/backend.h"

#include <algorithm>
#include <cmath>
#include <map>
#include <set>
#include <string>

#include "bxv/error.h"
#include "bxv/io.h"

namespace bxv {

namespace {

constexpr double kCovFloor = 1e-8;
constexpr double kLog2Pi = 1.8378770664093454835606594728112;

/// Clip eigenvalues at kCovFloor and reconstruct; keeps the matrix SPD.
Matrix floor_spd(const Matrix& a) {
  const SymEig eig = sym_eig(a);
  const std::size_t n = a.rows();
  Matrix out(n, n, 0.0);
  for (std::size_t k = 0; k < n; ++k) {
    const double lam = std::max(eig.values[k], kCovFloor);
    for (std::size_t i = 0; i < n; ++i)
      for (std::size_t j = 0; j < n; ++j)
        out(i, j) += lam * eig.vectors(i, k) * eig.vectors(j, k);
  }
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = i + 1; j < n; ++j) {
      const double v = 0.5 * (out(i, j) + out(j, i));
      out(i, j) = v;
      out(j, i) = v;
    }
  return out;
}

/// -1/2 x^T C^-1 x - 1/2 logdet C - d/2 log(2 pi), with C given by its
/// Cholesky factor.
double gaussian_logpdf_centered(const Matrix& chol, double logdet, const Matrix& x) {
  const Matrix z = solve_lower(chol, x);
  double quad = 0.0;
  for (std::size_t i = 0; i < z.rows(); ++i) quad += z(i, 0) * z(i, 0);
  const double d = static_cast<double>(x.rows());
  return -0.5 * quad - 0.5 * logdet - 0.5 * d * kLog2Pi;
}

struct SpeakerBlock {
  std::vector<std::size_t> rows;
};

std::map<int, SpeakerBlock> group_by_speaker(const std::vector<int>& labels) {
  std::map<int, SpeakerBlock> groups;
  for (std::size_t i = 0; i < labels.size(); ++i) groups[labels[i]].rows.push_back(i);
  return groups;
}

}  // namespace

// ---------------------------------------------------------------------------
// Trial and score files.

TrialList load_trials(const std::filesystem::path& path) {
  TrialList out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto toks = split_ws(lines[i]);
    if (toks.size() != 3 || (toks[2] != "target" && toks[2] != "nontarget"))
      throw_data(path.string() + ":" + std::to_string(i + 1) +
                 ": expected '<enroll> <test> target|nontarget'");
    out.push_back({toks[0], toks[1], toks[2] == "target"});
  }
  if (out.empty()) throw_data(path.string() + ": empty trial list");
  return out;
}

void save_trials(const TrialList& trials, const std::filesystem::path& path) {
  std::string text;
  for (const Trial& t : trials)
    text += t.enroll + " " + t.test + (t.target ? " target\n" : " nontarget\n");
  write_file(path, text);
}

ScoreSet load_scores(const std::filesystem::path& path) {
  ScoreSet out;
  const auto lines = read_lines(path);
  for (std::size_t i = 0; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto toks = split_ws(lines[i]);
    if (toks.size() != 3)
      throw_data(path.string() + ":" + std::to_string(i + 1) +
                 ": expected '<enroll> <test> <score>'");
    char* end = nullptr;
    const double s = std::strtod(toks[2].c_str(), &end);
    if (end == nullptr || *end != '\0' || !std::isfinite(s))
      throw_data(path.string() + ":" + std::to_string(i + 1) + ": bad score '" +
                 toks[2] + "'");
    out.push_back({toks[0], toks[1], s});
  }
  if (out.empty()) throw_data(path.string() + ": empty score file");
  return out;
}

void save_scores(const ScoreSet& scores, const std::filesystem::path& path) {
  std::string text;
  for (const ScoredTrial& s : scores)
    text += s.enroll + " " + s.test + " " + format_double("%.6f", s.score) + "\n";
  write_file(path, text);
}

// ---------------------------------------------------------------------------
// LDA.

LdaModel lda_fit(const Matrix& embeddings, const std::vector<int>& labels,
                 std::size_t out_dim) {
  const std::size_t n = embeddings.rows(), d = embeddings.cols();
  if (labels.size() != n)
    throw_data("lda_fit: " + std::to_string(n) + " embeddings vs " +
               std::to_string(labels.size()) + " labels");
  if (out_dim < 1) throw_data("lda_fit: out_dim must be >= 1");
  const auto groups = group_by_speaker(labels);
  const std::size_t num_classes = groups.size();
  if (num_classes < 2) throw_data("lda_fit: need at least 2 classes");
  bool some_class_multi = false;
  for (const auto& [cls, blk] : groups)
    if (blk.rows.size() >= 2) some_class_multi = true;
  if (!some_class_multi)
    throw_data("lda_fit: every class has a single sample; within-class scatter "
               "is empty");

  std::vector<double> gmean(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) gmean[j] += embeddings(i, j);
  for (double& v : gmean) v /= static_cast<double>(n);

  Matrix sw(d, d, 0.0), sb(d, d, 0.0);
  for (const auto& [cls, blk] : groups) {
    std::vector<double> cmean(d, 0.0);
    for (std::size_t r : blk.rows)
      for (std::size_t j = 0; j < d; ++j) cmean[j] += embeddings(r, j);
    for (double& v : cmean) v /= static_cast<double>(blk.rows.size());
    for (std::size_t r : blk.rows)
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
          sw(a, b) += (embeddings(r, a) - cmean[a]) * (embeddings(r, b) - cmean[b]);
    const double nc = static_cast<double>(blk.rows.size());
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        sb(a, b) += nc * (cmean[a] - gmean[a]) * (cmean[b] - gmean[b]);
  }
  const double inv_n = 1.0 / static_cast<double>(n);
  sw = scale(sw, inv_n);
  sb = scale(sb, inv_n);

  double reg = 1e-6 * trace(sw) / static_cast<double>(d);
  if (reg <= 0.0) reg = 1e-6;
  for (std::size_t i = 0; i < d; ++i) sw(i, i) += reg;

  Matrix l;
  try {
    l = cholesky_lower(sw);
  } catch (const Error&) {
    throw_data("lda_fit: within-class scatter singular even after regularization");
  }

  // Generalized problem S_b v = lambda S_w v via the whitened symmetric
  // matrix L^-1 S_b L^-T; eigenvectors map back as v = L^-T u.
  const Matrix y = solve_lower(l, sb);
  Matrix m = transpose(solve_lower(l, transpose(y)));
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = i + 1; j < d; ++j) {
      const double v = 0.5 * (m(i, j) + m(j, i));
      m(i, j) = v;
      m(j, i) = v;
    }
  const SymEig eig = sym_eig(m);

  std::size_t eff = out_dim;
  const std::size_t cap = std::min(num_classes - 1, d);
  if (eff > cap) {
    warn("lda_fit: out_dim " + std::to_string(eff) + " clamped to " +
         std::to_string(cap) + " (num_classes - 1 or feature dim)");
    eff = cap;
  }

  Matrix u(d, eff);
  for (std::size_t j = 0; j < eff; ++j)
    for (std::size_t i = 0; i < d; ++i) u(i, j) = eig.vectors(i, j);
  const Matrix v = solve_lower_transposed(l, u);  // d x eff

  LdaModel model;
  model.mean = gmean;
  model.projection = transpose(v);
  ensure_finite(model.projection, "lda_fit projection");
  return model;
}

std::vector<double> lda_project(const LdaModel& model, const std::vector<double>& x) {
  if (x.size() != model.in_dim())
    throw_data("lda_project: embedding dim " + std::to_string(x.size()) +
               " does not match model in_dim " + std::to_string(model.in_dim()));
  std::vector<double> out(model.out_dim(), 0.0);
  for (std::size_t r = 0; r < model.out_dim(); ++r) {
    double s = 0.0;
    for (std::size_t c = 0; c < model.in_dim(); ++c)
      s += model.projection(r, c) * (x[c] - model.mean[c]);
    out[r] = s;
  }
  return out;
}

double cosine_score(const std::vector<double>& a, const std::vector<double>& b) {
  if (a.size() != b.size())
    throw_data("cosine_score: dimension mismatch (" + std::to_string(a.size()) +
               " vs " + std::to_string(b.size()) + ")");
  double dot = 0.0, na = 0.0, nb = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) {
    dot += a[i] * b[i];
    na += a[i] * a[i];
    nb += b[i] * b[i];
  }
  na = std::sqrt(na);
  nb = std::sqrt(nb);
  if (na <= 1e-12 || nb <= 1e-12)
    throw_data("cosine_score: zero-norm embedding");
  return dot / (na * nb);
}

std::vector<double> length_normalize(const std::vector<double>& x) {
  double norm = 0.0;
  for (double v : x) norm += v * v;
  norm = std::sqrt(norm);
  if (norm <= 1e-12) throw_data("length_normalize: zero-norm embedding");
  const double s = std::sqrt(static_cast<double>(x.size())) / norm;
  std::vector<double> out(x.size());
  for (std::size_t i = 0; i < x.size(); ++i) out[i] = x[i] * s;
  return out;
}

// ---------------------------------------------------------------------------
// PLDA.

double plda_speaker_loglik(const PldaModel& model, const Matrix& utterances) {
  // Decompose the joint density of n exchangeable rows into the density of
  // the sample mean under B + W/n and n-1 within-speaker degrees of freedom
  // under W; an orthonormal (Helmert) change of basis gives
  //   log p(e_1..e_n) = log N(mbar; mu, B + W/n) - (d/2) log n
  //                     - ((n-1) d / 2) log 2pi - ((n-1)/2) logdet W
  //                     - 1/2 sum_i (e_i - mbar)^T W^-1 (e_i - mbar).
  const std::size_t n = utterances.rows(), d = utterances.cols();
  if (n < 1 || d != model.dim())
    throw_data("plda_speaker_loglik: shape mismatch");
  std::vector<double> mbar(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mbar[j] += utterances(i, j);
  for (double& v : mbar) v /= static_cast<double>(n);

  Matrix cov_mean = model.between_cov;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j)
      cov_mean(i, j) += model.within_cov(i, j) / static_cast<double>(n);
  const Matrix lm = cholesky_lower(cov_mean);
  Matrix centered(d, 1);
  for (std::size_t j = 0; j < d; ++j) centered(j, 0) = mbar[j] - model.mean[j];
  double ll = gaussian_logpdf_centered(lm, spd_logdet_from_cholesky(lm), centered);
  ll -= 0.5 * static_cast<double>(d) * std::log(static_cast<double>(n));

  if (n > 1) {
    const Matrix lw = cholesky_lower(model.within_cov);
    const double logdet_w = spd_logdet_from_cholesky(lw);
    ll -= 0.5 * static_cast<double>((n - 1) * d) * kLog2Pi;
    ll -= 0.5 * static_cast<double>(n - 1) * logdet_w;
    Matrix dev(d, 1);
    for (std::size_t i = 0; i < n; ++i) {
      for (std::size_t j = 0; j < d; ++j) dev(j, 0) = utterances(i, j) - mbar[j];
      const Matrix z = solve_lower(lw, dev);
      for (std::size_t j = 0; j < d; ++j) ll -= 0.5 * z(j, 0) * z(j, 0);
    }
  }
  return ll;
}

PldaFitResult plda_fit(const Matrix& embeddings, const std::vector<int>& labels,
                       int iterations) {
  const std::size_t n = embeddings.rows(), d = embeddings.cols();
  if (labels.size() != n)
    throw_data("plda_fit: " + std::to_string(n) + " embeddings vs " +
               std::to_string(labels.size()) + " labels");
  if (iterations < 1) throw_data("plda_fit: iterations must be >= 1");
  const auto groups = group_by_speaker(labels);
  const std::size_t num_spk = groups.size();
  std::size_t multi = 0;
  for (const auto& [cls, blk] : groups)
    if (blk.rows.size() >= 2) ++multi;
  if (num_spk < 2 || multi < 2)
    throw_data("plda_fit: need at least 2 speakers with at least 2 utterances "
               "each (got " + std::to_string(num_spk) + " speakers, " +
               std::to_string(multi) + " with multiple utterances)");

  // Moment initialization: global mean, covariance of speaker means, average
  // within-speaker covariance.
  std::vector<double> mu(d, 0.0);
  for (std::size_t i = 0; i < n; ++i)
    for (std::size_t j = 0; j < d; ++j) mu[j] += embeddings(i, j);
  for (double& v : mu) v /= static_cast<double>(n);

  Matrix between(d, d, 0.0), within(d, d, 0.0);
  for (const auto& [cls, blk] : groups) {
    std::vector<double> cmean(d, 0.0);
    for (std::size_t r : blk.rows)
      for (std::size_t j = 0; j < d; ++j) cmean[j] += embeddings(r, j);
    for (double& v : cmean) v /= static_cast<double>(blk.rows.size());
    for (std::size_t a = 0; a < d; ++a)
      for (std::size_t b = 0; b < d; ++b)
        between(a, b) += (cmean[a] - mu[a]) * (cmean[b] - mu[b]);
    for (std::size_t r : blk.rows)
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b)
          within(a, b) +=
              (embeddings(r, a) - cmean[a]) * (embeddings(r, b) - cmean[b]);
  }
  between = floor_spd(scale(between, 1.0 / static_cast<double>(num_spk)));
  within = floor_spd(scale(within, 1.0 / static_cast<double>(n)));

  PldaModel model;
  model.mean = mu;
  model.between_cov = between;
  model.within_cov = within;

  PldaFitResult result;
  const Matrix eye = Matrix::identity(d);

  for (int iter = 0; iter < iterations; ++iter) {
    const Matrix b_inv = solve_spd(model.between_cov, eye);
    const Matrix w_inv = solve_spd(model.within_cov, eye);

    Matrix sum_yy(d, d, 0.0);
    std::vector<double> sum_y_weighted(d, 0.0);  // sum over utterances of yhat
    std::vector<Matrix> yhat_per_spk;
    std::vector<const SpeakerBlock*> blocks;
    Matrix sum_ncs(d, d, 0.0);

    for (const auto& [cls, blk] : groups) {
      const double ns = static_cast<double>(blk.rows.size());
      std::vector<double> cmean(d, 0.0);
      for (std::size_t r : blk.rows)
        for (std::size_t j = 0; j < d; ++j) cmean[j] += embeddings(r, j);
      for (double& v : cmean) v /= ns;

      Matrix prec = b_inv;
      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) prec(a, b) += ns * w_inv(a, b);
      const Matrix cs = solve_spd(prec, eye);

      Matrix rhs(d, 1);
      for (std::size_t j = 0; j < d; ++j) rhs(j, 0) = cmean[j] - mu[j];
      Matrix tmp = matmul(w_inv, rhs);
      for (std::size_t j = 0; j < d; ++j) tmp(j, 0) *= ns;
      const Matrix yhat = matmul(cs, tmp);

      for (std::size_t a = 0; a < d; ++a)
        for (std::size_t b = 0; b < d; ++b) {
          sum_yy(a, b) += yhat(a, 0) * yhat(b, 0) + cs(a, b);
          sum_ncs(a, b) += ns * cs(a, b);
        }
      for (std::size_t j = 0; j < d; ++j) sum_y_weighted[j] += ns * yhat(j, 0);
      yhat_per_spk.push_back(yhat);
      blocks.push_back(&blk);
    }

    // Joint closed-form M-step over (mean, within, between).
    std::vector<double> mu_new(d);
    for (std::size_t j = 0; j < d; ++j) {
      double s = 0.0;
      for (std::size_t i = 0; i < n; ++i) s += embeddings(i, j);
      mu_new[j] = (s - sum_y_weighted[j]) / static_cast<double>(n);
    }

    Matrix within_new = sum_ncs;
    for (std::size_t s = 0; s < blocks.size(); ++s) {
      const Matrix& yhat = yhat_per_spk[s];
      for (std::size_t r : blocks[s]->rows) {
        for (std::size_t a = 0; a < d; ++a) {
          const double ra = embeddings(r, a) - mu_new[a] - yhat(a, 0);
          for (std::size_t b = 0; b < d; ++b) {
            const double rb = embeddings(r, b) - mu_new[b] - yhat(b, 0);
            within_new(a, b) += ra * rb;
          }
        }
      }
    }

    model.mean = mu_new;
    mu = mu_new;
    model.between_cov = floor_spd(scale(sum_yy, 1.0 / static_cast<double>(num_spk)));
    model.within_cov = floor_spd(scale(within_new, 1.0 / static_cast<double>(n)));

    double ll = 0.0;
    for (const auto& [cls, blk] : groups) {
      Matrix utts(blk.rows.size(), d);
      for (std::size_t i = 0; i < blk.rows.size(); ++i)
        for (std::size_t j = 0; j < d; ++j) utts(i, j) = embeddings(blk.rows[i], j);
      ll += plda_speaker_loglik(model, utts);
    }
    if (!std::isfinite(ll)) throw_numeric("plda_fit: log-likelihood diverged");
    result.loglik_trace.push_back(ll);
  }

  result.model = std::move(model);
  return result;
}

PldaScorer::PldaScorer(const PldaModel& model) : mean_(model.mean) {
  const std::size_t d = model.dim();
  Matrix tot = model.between_cov;
  Matrix sum = model.within_cov;
  for (std::size_t i = 0; i < d; ++i)
    for (std::size_t j = 0; j < d; ++j) {
      tot(i, j) += model.within_cov(i, j);
      sum(i, j) += 2.0 * model.between_cov(i, j);
    }
  chol_tot_ = cholesky_lower(tot);
  chol_sum_ = cholesky_lower(sum);
  chol_within_ = cholesky_lower(model.within_cov);
  logdet_tot_ = spd_logdet_from_cholesky(chol_tot_);
  logdet_sum_ = spd_logdet_from_cholesky(chol_sum_);
  logdet_within_ = spd_logdet_from_cholesky(chol_within_);
}

double PldaScorer::score(const std::vector<double>& enroll,
                         const std::vector<double>& test) const {
  const std::size_t d = mean_.size();
  if (enroll.size() != d || test.size() != d)
    throw_data("plda_score: embedding dim mismatch (model dim " +
               std::to_string(d) + ", got " + std::to_string(enroll.size()) +
               " and " + std::to_string(test.size()) + ")");
  // The same-speaker joint over [e;t] block-diagonalizes under the
  // orthonormal rotation u = (e+t)/sqrt(2), v = (e-t)/sqrt(2):
  // cov(u) = 2B + W, cov(v) = W, cross-covariance zero.  The
  // different-speaker hypothesis factorizes directly with cov B + W.
  const double inv_sqrt2 = 0.70710678118654752440;
  Matrix u(d, 1), v(d, 1), x(d, 1), y(d, 1);
  for (std::size_t j = 0; j < d; ++j) {
    const double e = enroll[j] - mean_[j];
    const double t = test[j] - mean_[j];
    x(j, 0) = e;
    y(j, 0) = t;
    u(j, 0) = (e + t) * inv_sqrt2;
    v(j, 0) = (e - t) * inv_sqrt2;
  }
  const double same = gaussian_logpdf_centered(chol_sum_, logdet_sum_, u) +
                      gaussian_logpdf_centered(chol_within_, logdet_within_, v);
  const double diff = gaussian_logpdf_centered(chol_tot_, logdet_tot_, x) +
                      gaussian_logpdf_centered(chol_tot_, logdet_tot_, y);
  const double s = same - diff;
  if (!std::isfinite(s)) throw_numeric("plda_score: non-finite score");
  return s;
}

double plda_score(const PldaModel& model, const std::vector<double>& enroll,
                  const std::vector<double>& test) {
  return PldaScorer(model).score(enroll, test);
}

// ---------------------------------------------------------------------------
// Fusion.

ScoreSet fuse_scores(const ScoreSet& a, const ScoreSet& b) {
  std::map<std::pair<std::string, std::string>, double> bmap;
  for (const ScoredTrial& s : b) bmap[{s.enroll, s.test}] = s.score;
  if (bmap.size() != b.size()) throw_data("fuse_scores: duplicate trial keys");

  std::set<std::pair<std::string, std::string>> only_a, only_b;
  for (const auto& [key, score] : bmap) only_b.insert(key);
  for (const ScoredTrial& s : a) {
    const auto key = std::make_pair(s.enroll, s.test);
    if (bmap.count(key))
      only_b.erase(key);
    else
      only_a.insert(key);
  }
  if (!only_a.empty() || !only_b.empty()) {
    std::string msg = "fuse_scores: trial keys differ;";
    int shown = 0;
    for (const auto& k : only_a) {
      if (++shown > 5) break;
      msg += " only-in-a(" + k.first + "," + k.second + ")";
    }
    shown = 0;
    for (const auto& k : only_b) {
      if (++shown > 5) break;
      msg += " only-in-b(" + k.first + "," + k.second + ")";
    }
    if (only_a.size() + only_b.size() > 10) msg += " ...";
    throw_data(msg);
  }

  ScoreSet fused;
  fused.reserve(a.size());
  for (const ScoredTrial& s : a)
    fused.push_back({s.enroll, s.test, 0.5 * (s.score + bmap[{s.enroll, s.test}])});
  return fused;
}

}  // namespace bxv
