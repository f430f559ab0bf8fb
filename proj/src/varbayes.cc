// src/varbayes.cc

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

#include "bxv/varbayes.h"

#include <cmath>
#include <string>

#include "bxv/error.h"

namespace bxv {

double softplus(double x) {
  return (x > 0.0 ? x : 0.0) + std::log1p(std::exp(-std::fabs(x)));
}

double softplus_inverse(double y) {
  if (y <= 0.0) throw_data("softplus_inverse: argument must be positive");
  return std::log(std::expm1(y));
}

double sigmoid(double x) {
  if (x >= 0.0) return 1.0 / (1.0 + std::exp(-x));
  const double e = std::exp(x);
  return e / (1.0 + e);
}

Matrix softplus_sigma(const Matrix& rho) {
  Matrix sigma(rho.rows(), rho.cols());
  for (std::size_t i = 0; i < rho.size(); ++i)
    sigma.data()[i] = softplus(rho.data()[i]);
  return sigma;
}

namespace {

void check_posterior(const GaussianPosterior& post) {
  if (!post.mu.same_shape(post.rho))
    throw_data("posterior: mu shape " + shape_str(post.mu) +
               " does not match rho shape " + shape_str(post.rho));
}

void check_pair(const GaussianPosterior& post, const GaussianPrior& prior) {
  check_posterior(post);
  if (!post.mu.same_shape(prior.mu) || !post.mu.same_shape(prior.sigma))
    throw_data("posterior/prior shape mismatch (" + shape_str(post.mu) + " vs " +
               shape_str(prior.mu) + ")");
}

}  // namespace

WeightSample sample_weights(const GaussianPosterior& post, RngStream& rng) {
  check_posterior(post);
  WeightSample s;
  s.eps = Matrix(post.mu.rows(), post.mu.cols());
  for (std::size_t i = 0; i < s.eps.size(); ++i)
    s.eps.data()[i] = rng.next_gaussian();
  return sample_with_eps(post, std::move(s.eps));
}

WeightSample sample_with_eps(const GaussianPosterior& post, Matrix eps) {
  check_posterior(post);
  if (!eps.same_shape(post.mu))
    throw_data("sample_with_eps: eps shape " + shape_str(eps) +
               " does not match posterior " + shape_str(post.mu));
  WeightSample s;
  s.w = Matrix(post.mu.rows(), post.mu.cols());
  for (std::size_t i = 0; i < s.w.size(); ++i)
    s.w.data()[i] = post.mu.data()[i] + softplus(post.rho.data()[i]) * eps.data()[i];
  s.eps = std::move(eps);
  return s;
}

double kl_closed_form(const GaussianPosterior& post, const GaussianPrior& prior) {
  check_pair(post, prior);
  double kl = 0.0;
  for (std::size_t i = 0; i < post.mu.size(); ++i) {
    const double sq = softplus(post.rho.data()[i]);
    const double sp = prior.sigma.data()[i];
    const double dmu = post.mu.data()[i] - prior.mu.data()[i];
    kl += std::log(sp / sq) + (dmu * dmu + sq * sq) / (2.0 * sp * sp) - 0.5;
  }
  if (!std::isfinite(kl)) throw_numeric("kl_closed_form: non-finite result");
  return kl;
}

std::pair<double, std::vector<WeightSample>> mc_nll(
    const GaussianPosterior& post,
    const std::function<double(const Matrix&)>& data_loss, RngStream& rng,
    int j_samples, const std::vector<Matrix>* forced_eps) {
  if (j_samples < 1) throw_data("mc_nll: j_samples must be >= 1");
  if (forced_eps != nullptr &&
      forced_eps->size() != static_cast<std::size_t>(j_samples))
    throw_data("mc_nll: forced_eps count does not match j_samples");
  std::vector<WeightSample> samples;
  samples.reserve(j_samples);
  double sum = 0.0;
  for (int j = 0; j < j_samples; ++j) {
    samples.push_back(forced_eps != nullptr
                          ? sample_with_eps(post, (*forced_eps)[j])
                          : sample_weights(post, rng));
    const double loss = data_loss(samples.back().w);
    if (!std::isfinite(loss))
      throw_numeric("mc_nll: data loss returned a non-finite value at sample " +
                    std::to_string(j));
    sum += loss;
  }
  return {sum / static_cast<double>(j_samples), std::move(samples)};
}

LossBreakdown variational_loss(double kl, double nll, double kl_weight,
                               int j_samples) {
  if (!std::isfinite(kl) || !std::isfinite(nll))
    throw_numeric("variational_loss: non-finite inputs (kl=" + std::to_string(kl) +
                  ", nll=" + std::to_string(nll) + ")");
  if (kl < -1e-9) throw_data("variational_loss: negative KL " + std::to_string(kl));
  if (kl_weight <= 0.0)
    throw_data("variational_loss: kl_weight must be positive");
  LossBreakdown b;
  b.kl_term = kl;
  b.nll_term = nll;
  b.total = kl_weight * kl + nll;
  b.j_samples = j_samples;
  return b;
}

namespace {

void check_grad_inputs(const GaussianPosterior& post,
                       const std::vector<Matrix>& sample_grads) {
  if (sample_grads.empty()) throw_data("grad: need at least one sample gradient");
  for (const Matrix& g : sample_grads)
    if (!g.same_shape(post.mu))
      throw_data("grad: sample gradient shape " + shape_str(g) +
                 " does not match posterior " + shape_str(post.mu));
}

}  // namespace

Matrix grad_mu(const GaussianPosterior& post, const GaussianPrior& prior,
               const std::vector<Matrix>& sample_grads, double kl_weight) {
  check_pair(post, prior);
  check_grad_inputs(post, sample_grads);
  const double inv_j = 1.0 / static_cast<double>(sample_grads.size());
  Matrix g(post.mu.rows(), post.mu.cols(), 0.0);
  for (const Matrix& gs : sample_grads)
    for (std::size_t i = 0; i < g.size(); ++i) g.data()[i] += gs.data()[i];
  for (std::size_t i = 0; i < g.size(); ++i) {
    double v = g.data()[i] * inv_j;
    if (kl_weight != 0.0) {
      const double sp = prior.sigma.data()[i];
      v += kl_weight * (post.mu.data()[i] - prior.mu.data()[i]) / (sp * sp);
    }
    g.data()[i] = v;
  }
  ensure_finite(g, "grad_mu");
  return g;
}

Matrix grad_rho(const GaussianPosterior& post, const GaussianPrior& prior,
                const std::vector<Matrix>& sample_grads,
                const std::vector<Matrix>& eps_used, double kl_weight) {
  check_pair(post, prior);
  check_grad_inputs(post, sample_grads);
  if (eps_used.size() != sample_grads.size())
    throw_data("grad_rho: " + std::to_string(eps_used.size()) +
               " noise matrices for " + std::to_string(sample_grads.size()) +
               " sample gradients");
  for (const Matrix& e : eps_used)
    if (!e.same_shape(post.mu))
      throw_data("grad_rho: eps shape " + shape_str(e) +
                 " does not match posterior " + shape_str(post.mu));

  const std::size_t j_count = sample_grads.size();
  const double inv_j = 1.0 / static_cast<double>(j_count);
  Matrix g(post.mu.rows(), post.mu.cols(), 0.0);
  for (std::size_t j = 0; j < j_count; ++j)
    for (std::size_t i = 0; i < g.size(); ++i)
      g.data()[i] += eps_used[j].data()[i] * sample_grads[j].data()[i];
  for (std::size_t i = 0; i < g.size(); ++i) {
    const double rho = post.rho.data()[i];
    const double s = sigmoid(rho);
    double v = g.data()[i] * inv_j * s;
    if (kl_weight != 0.0) {
      const double sq = softplus(rho);
      const double sp = prior.sigma.data()[i];
      v += kl_weight * (sq / (sp * sp) - 1.0 / sq) * s;
    }
    g.data()[i] = v;
  }
  ensure_finite(g, "grad_rho");
  return g;
}

std::pair<Matrix, std::optional<WeightSample>> variational_forward(
    const GaussianPosterior& post, const Matrix& input, RngStream* rng,
    ForwardMode mode, bool has_bias_column, const WeightSample* fixed_sample) {
  check_posterior(post);
  const std::size_t in_dim = post.mu.cols() - (has_bias_column ? 1 : 0);
  if (input.cols() != in_dim)
    throw_data("variational_forward: input has " + std::to_string(input.cols()) +
               " columns, layer expects " + std::to_string(in_dim));

  std::optional<WeightSample> sample;
  const Matrix* w = &post.mu;
  if (mode == ForwardMode::kSample) {
    if (fixed_sample != nullptr) {
      sample = *fixed_sample;
    } else {
      if (rng == nullptr)
        throw_data("variational_forward: sample mode needs an RngStream");
      sample = sample_weights(post, *rng);
    }
    w = &sample->w;
  }

  Matrix out(input.rows(), post.mu.rows(), 0.0);
  for (std::size_t t = 0; t < input.rows(); ++t) {
    for (std::size_t o = 0; o < post.mu.rows(); ++o) {
      double s = has_bias_column ? (*w)(o, in_dim) : 0.0;
      const double* wrow = w->data() + o * w->cols();
      const double* xrow = input.data() + t * input.cols();
      for (std::size_t k = 0; k < in_dim; ++k) s += wrow[k] * xrow[k];
      out(t, o) = s;
    }
  }
  ensure_finite(out, "variational_forward");
  return {std::move(out), std::move(sample)};
}

}  // namespace bxv
