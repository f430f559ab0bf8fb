// include/bxv/varbayes.h

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

#include <functional>
#include <optional>
#include <utility>
#include <vector>

#include "bxv/matrix.h"
#include "bxv/rng.h"

namespace bxv {

/// Diagonal-Gaussian weight posterior q(w; mu, rho).  The per-weight
/// standard deviation is softplus(rho), so it stays positive without
/// constraints on rho.  Shapes of mu and rho always match.
struct GaussianPosterior {
  Matrix mu;
  Matrix rho;
};

/// Fixed diagonal-Gaussian prior p(w; mu, sigma), sigma > 0 elementwise.
struct GaussianPrior {
  Matrix mu;
  Matrix sigma;
};

/// One reparameterized draw: w = mu + softplus(rho) .* eps, with the noise
/// retained so the backward pass can route gradients to (mu, rho).
struct WeightSample {
  Matrix w;
  Matrix eps;
};

struct LossBreakdown {
  double kl_term = 0.0;
  double nll_term = 0.0;
  double total = 0.0;
  int j_samples = 1;
};

enum class ForwardMode { kSample, kMean };

double softplus(double x);
double softplus_inverse(double y);
double sigmoid(double x);

/// sigma = ln(1 + e^rho), evaluated as max(rho,0) + log1p(e^-|rho|).
Matrix softplus_sigma(const Matrix& rho);

WeightSample sample_weights(const GaussianPosterior& post, RngStream& rng);
WeightSample sample_with_eps(const GaussianPosterior& post, Matrix eps);

/// Closed-form KL(q || p) for diagonal Gaussians:
///   sum_d [ ln(sigma_p/sigma_q) + ((mu_q - mu_p)^2 + sigma_q^2) / (2 sigma_p^2) - 1/2 ]
double kl_closed_form(const GaussianPosterior& post, const GaussianPrior& prior);

/// Monte Carlo estimate of the expected data loss: mean of data_loss(w^j)
/// over J posterior draws.  Returns the samples for gradient reuse.
/// forced_eps, when given, supplies the noise per sample (test hook).
std::pair<double, std::vector<WeightSample>> mc_nll(
    const GaussianPosterior& post,
    const std::function<double(const Matrix&)>& data_loss, RngStream& rng,
    int j_samples, const std::vector<Matrix>* forced_eps = nullptr);

LossBreakdown variational_loss(double kl, double nll, double kl_weight,
                               int j_samples = 1);

/// Analytic gradient of the (kl_weight-scaled) objective w.r.t. mu:
///   kl_weight * (mu - mu_p) / sigma_p^2 + mean_j G_j
/// When kl_weight == 0 the prior term is skipped entirely so the data path
/// is reproduced bitwise.
Matrix grad_mu(const GaussianPosterior& post, const GaussianPrior& prior,
               const std::vector<Matrix>& sample_grads, double kl_weight);

/// Analytic gradient w.r.t. rho, with s(rho) the softplus derivative:
///   kl_weight * (sigma_q/sigma_p^2 - 1/sigma_q) * s(rho)
///     + mean_j (eps_j .* G_j) * s(rho)
Matrix grad_rho(const GaussianPosterior& post, const GaussianPrior& prior,
                const std::vector<Matrix>& sample_grads,
                const std::vector<Matrix>& eps_used, double kl_weight);

/// Affine map through the posterior.  If the posterior has in+1 columns the
/// last column is the bias.  mode kMean uses w = mu; kSample draws (or uses
/// fixed_sample when supplied).
std::pair<Matrix, std::optional<WeightSample>> variational_forward(
    const GaussianPosterior& post, const Matrix& input, RngStream* rng,
    ForwardMode mode, bool has_bias_column,
    const WeightSample* fixed_sample = nullptr);

}  // namespace bxv
