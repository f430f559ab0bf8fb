// src/trainer.cc

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

#include "bxv/trainer.h"

#include <algorithm>
#include <cmath>

#include "bxv/error.h"
#include "bxv/io.h"

namespace bxv {

TrainConfig TrainConfig::load(const std::filesystem::path& path) {
  return from_config(ConfigFile::load(path));
}

TrainConfig TrainConfig::from_config(const ConfigFile& cfg) {
  cfg.require_keys_in({"lr", "momentum", "epochs", "minibatch_size", "chunk_min",
                       "chunk_max", "j_samples", "kl_weight", "seed", "sigma_p",
                       "force_zero_eps"});
  TrainConfig tc;
  tc.lr = cfg.get_real("lr", tc.lr);
  tc.momentum = cfg.get_real("momentum", tc.momentum);
  tc.epochs = static_cast<int>(cfg.get_int("epochs", tc.epochs));
  tc.minibatch_size = static_cast<int>(cfg.get_int("minibatch_size", tc.minibatch_size));
  tc.chunk_min = static_cast<int>(cfg.get_int("chunk_min", tc.chunk_min));
  tc.chunk_max = static_cast<int>(cfg.get_int("chunk_max", tc.chunk_max));
  tc.j_samples = static_cast<int>(cfg.get_int("j_samples", tc.j_samples));
  if (cfg.has("kl_weight") && cfg.get_string("kl_weight", "auto") != "auto")
    tc.kl_weight = cfg.get_real("kl_weight", tc.kl_weight);
  tc.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(tc.seed)));
  tc.sigma_p = cfg.get_real("sigma_p", tc.sigma_p);
  tc.force_zero_eps = cfg.get_bool("force_zero_eps", tc.force_zero_eps);
  tc.validate();
  return tc;
}

void TrainConfig::validate() const {
  if (lr < 0.0) throw_usage("train config: lr must be >= 0");
  if (momentum < 0.0 || momentum >= 1.0)
    throw_usage("train config: momentum must be in [0, 1)");
  if (epochs < 0) throw_usage("train config: epochs must be >= 0");
  if (minibatch_size < 1) throw_usage("train config: minibatch_size must be >= 1");
  if (chunk_min < 1 || chunk_max < chunk_min)
    throw_usage("train config: need 1 <= chunk_min <= chunk_max");
  if (j_samples < 1) throw_usage("train config: j_samples must be >= 1");
}

Chunk draw_chunk(std::size_t utt_len, const TrainConfig& cfg,
                 std::size_t receptive_field, RngStream& rng) {
  const auto range = static_cast<std::uint64_t>(cfg.chunk_max - cfg.chunk_min + 1);
  std::size_t len = static_cast<std::size_t>(cfg.chunk_min) +
                    static_cast<std::size_t>(rng.next_below(range));
  if (len > utt_len) len = utt_len;
  if (len < receptive_field) len = receptive_field;
  if (len > utt_len)
    throw_data("draw_chunk: utterance of " + std::to_string(utt_len) +
               " frames is shorter than the receptive field " +
               std::to_string(receptive_field));
  const std::size_t start =
      static_cast<std::size_t>(rng.next_below(utt_len - len + 1));
  return Chunk{0, start, len};
}

std::vector<Minibatch> chunk_schedule_epoch(const Corpus& corpus,
                                            const TrainConfig& cfg,
                                            std::size_t receptive_field,
                                            RngStream& rng) {
  const std::size_t n = corpus.utterances.size();
  if (n == 0) throw_data("chunk_schedule_epoch: empty corpus");
  std::vector<std::size_t> order(n);
  for (std::size_t i = 0; i < n; ++i) order[i] = i;
  for (std::size_t i = n; i > 1; --i) {
    const std::size_t j = static_cast<std::size_t>(rng.next_below(i));
    std::swap(order[i - 1], order[j]);
  }
  std::vector<Minibatch> batches;
  Minibatch cur;
  for (std::size_t idx : order) {
    Chunk c = draw_chunk(corpus.utterances[idx].feats.frames(), cfg,
                         receptive_field, rng);
    c.utt_index = idx;
    cur.push_back(c);
    if (cur.size() == static_cast<std::size_t>(cfg.minibatch_size)) {
      batches.push_back(std::move(cur));
      cur.clear();
    }
  }
  if (!cur.empty()) batches.push_back(std::move(cur));
  return batches;
}

void sgd_update(Matrix& param, Matrix& velocity, const Matrix& grad, double lr,
                double momentum, const std::string& tensor_name) {
  if (!param.same_shape(grad) || !param.same_shape(velocity))
    throw_data("sgd_update: shape mismatch for " + tensor_name);
  for (std::size_t i = 0; i < param.size(); ++i) {
    const double v = momentum * velocity.data()[i] + grad.data()[i];
    const double p = param.data()[i] - lr * v;
    if (!std::isfinite(p))
      throw_numeric("sgd_update: non-finite update in " + tensor_name);
    velocity.data()[i] = v;
    param.data()[i] = p;
  }
}

GaussianPrior make_prior_from_baseline(const NetworkState& baseline,
                                       const std::string& layer, double sigma_p,
                                       bool include_bias) {
  if (sigma_p <= 0.0) throw_data("make_prior_from_baseline: sigma_p must be > 0");
  const std::size_t idx = baseline.layer_index(layer);
  const LayerParams& p = baseline.params[idx];
  if (p.variational)
    throw_data("make_prior_from_baseline: baseline layer '" + layer +
               "' is itself variational");
  const std::size_t out = p.weight.rows(), in = p.weight.cols();
  GaussianPrior prior;
  prior.mu = Matrix(out, in + (include_bias ? 1 : 0));
  for (std::size_t r = 0; r < out; ++r) {
    for (std::size_t c = 0; c < in; ++c) prior.mu(r, c) = p.weight(r, c);
    if (include_bias) prior.mu(r, in) = p.bias(0, r);
  }
  prior.sigma = Matrix(prior.mu.rows(), prior.mu.cols(), sigma_p);
  return prior;
}

namespace {

struct Velocities {
  // Keyed by tensor role per layer index.
  std::vector<Matrix> weight, bias, mu, rho;
};

Velocities make_velocities(const NetworkState& st) {
  Velocities v;
  const std::size_t n = st.stack.size();
  v.weight.resize(n);
  v.bias.resize(n);
  v.mu.resize(n);
  v.rho.resize(n);
  for (std::size_t i = 0; i < n; ++i) {
    const LayerParams& p = st.params[i];
    if (st.stack[i].type == LayerType::kStatsPool) continue;
    if (p.variational) {
      v.mu[i] = Matrix(p.post.mu.rows(), p.post.mu.cols(), 0.0);
      v.rho[i] = Matrix(p.post.rho.rows(), p.post.rho.cols(), 0.0);
      if (!p.bias_in_posterior) v.bias[i] = Matrix(1, p.bias.cols(), 0.0);
    } else {
      v.weight[i] = Matrix(p.weight.rows(), p.weight.cols(), 0.0);
      v.bias[i] = Matrix(1, p.bias.cols(), 0.0);
    }
  }
  return v;
}

Matrix chunk_features(const Utterance& u, const Chunk& c) {
  Matrix m(c.length, u.feats.dim());
  for (std::size_t t = 0; t < c.length; ++t)
    for (std::size_t d = 0; d < u.feats.dim(); ++d)
      m(t, d) = u.feats.values(c.start + t, d);
  return m;
}

void validate_corpus_for_training(const Corpus& corpus, const NetworkConfig& cfg) {
  if (corpus.utterances.empty()) throw_data("train: empty corpus");
  if (corpus.feature_dim() != cfg.feature_dim)
    throw_data("train: corpus feature dim " + std::to_string(corpus.feature_dim()) +
               " does not match network feature_dim " +
               std::to_string(cfg.feature_dim));
  if (corpus.num_speakers() != cfg.num_speakers)
    throw_data("train: corpus has " + std::to_string(corpus.num_speakers()) +
               " speakers, network num_speakers is " +
               std::to_string(cfg.num_speakers));
  const std::size_t rf = cfg.receptive_field();
  for (const Utterance& u : corpus.utterances)
    if (u.feats.frames() < rf)
      throw_data("train: utterance '" + u.id + "' has " +
                 std::to_string(u.feats.frames()) +
                 " frames, shorter than the receptive field (" +
                 std::to_string(rf) + " frames minimum)");
}

TrainResult train_network(const Corpus& corpus, const NetworkConfig& cfg,
                          const TrainConfig& tc, NetworkState initial) {
  validate_corpus_for_training(corpus, cfg);
  tc.validate();
  const std::size_t rf = cfg.receptive_field();

  NetworkState state = std::move(initial);
  RngStream chunk_rng = RngStream(tc.seed).fork(10);
  RngStream eps_rng = RngStream(tc.seed).fork(11);

  std::vector<std::size_t> var_layers;
  for (std::size_t i = 0; i < state.stack.size(); ++i)
    if (state.params[i].variational) var_layers.push_back(i);
  const bool has_var = !var_layers.empty();
  const int j_count = has_var ? tc.j_samples : 1;

  const std::size_t num_batches =
      (corpus.utterances.size() + tc.minibatch_size - 1) / tc.minibatch_size;
  double klw = tc.kl_weight;
  if (klw < 0.0) klw = 1.0 / static_cast<double>(num_batches);

  Velocities vel = make_velocities(state);
  TrainResult result;

  for (int epoch = 0; epoch < tc.epochs; ++epoch) {
    const auto batches = chunk_schedule_epoch(corpus, tc, rf, chunk_rng);
    double ep_kl = 0.0, ep_nll = 0.0, ep_total = 0.0;
    std::size_t correct = 0, total_chunks = 0;

    for (const Minibatch& batch : batches) {
      const double inv_b = 1.0 / static_cast<double>(batch.size());
      const double inv_j = 1.0 / static_cast<double>(j_count);

      double kl = 0.0;
      for (std::size_t li : var_layers)
        kl += kl_closed_form(state.params[li].post, state.params[li].prior);

      // Accumulators: deterministic layer grads averaged over j, per-sample
      // G and eps for the variational layers.
      std::vector<LayerGrads> det_acc(state.stack.size());
      std::map<std::size_t, std::vector<Matrix>> g_per_layer, eps_per_layer;
      std::vector<std::vector<double>> prob_acc(
          batch.size(), std::vector<double>(cfg.num_speakers, 0.0));
      double nll = 0.0;

      for (int j = 0; j < j_count; ++j) {
        SampleMap samples;
        for (std::size_t li : var_layers) {
          const GaussianPosterior& post = state.params[li].post;
          samples[state.stack[li].name] =
              tc.force_zero_eps
                  ? sample_with_eps(post, Matrix(post.mu.rows(), post.mu.cols(), 0.0))
                  : sample_weights(post, eps_rng);
        }

        double loss_j = 0.0;
        std::vector<LayerGrads> batch_acc(state.stack.size());
        for (std::size_t e = 0; e < batch.size(); ++e) {
          const Chunk& c = batch[e];
          const Utterance& utt = corpus.utterances[c.utt_index];
          const Matrix feats = chunk_features(utt, c);
          const ForwardTape tape =
              network_forward(state, feats, has_var ? ForwardMode::kSample : ForwardMode::kMean,
                              nullptr, &samples);
          const CrossEntropyResult ce =
              cross_entropy(tape.logits, static_cast<std::size_t>(utt.speaker));
          loss_j += ce.loss * inv_b;
          const NetworkGrads g =
              network_backward(state, tape, scale(ce.dlogits, inv_b));
          for (std::size_t li = 0; li < state.stack.size(); ++li) {
            if (g.layers[li].dweight.empty()) continue;
            if (batch_acc[li].dweight.empty()) {
              batch_acc[li].dweight = g.layers[li].dweight;
              batch_acc[li].dbias = g.layers[li].dbias;
            } else {
              add_scaled_inplace(batch_acc[li].dweight, g.layers[li].dweight, 1.0);
              if (!batch_acc[li].dbias.empty())
                add_scaled_inplace(batch_acc[li].dbias, g.layers[li].dbias, 1.0);
            }
          }
          const auto probs = softmax_row(tape.logits);
          for (std::size_t k = 0; k < probs.size(); ++k)
            prob_acc[e][k] += probs[k] * inv_j;
        }
        if (!std::isfinite(loss_j))
          throw_numeric("train: loss diverged at epoch " + std::to_string(epoch));
        nll += loss_j * inv_j;

        for (std::size_t li = 0; li < state.stack.size(); ++li) {
          if (batch_acc[li].dweight.empty()) continue;
          if (state.params[li].variational) {
            // G_j for this sample: gradient of the batch data loss w.r.t. w^j.
            g_per_layer[li].push_back(std::move(batch_acc[li].dweight));
            eps_per_layer[li].push_back(samples[state.stack[li].name].eps);
            if (!batch_acc[li].dbias.empty()) {
              if (det_acc[li].dbias.empty())
                det_acc[li].dbias = scale(batch_acc[li].dbias, inv_j);
              else
                add_scaled_inplace(det_acc[li].dbias, batch_acc[li].dbias, inv_j);
            }
          } else {
            if (det_acc[li].dweight.empty()) {
              det_acc[li].dweight = scale(batch_acc[li].dweight, inv_j);
              det_acc[li].dbias = scale(batch_acc[li].dbias, inv_j);
            } else {
              add_scaled_inplace(det_acc[li].dweight, batch_acc[li].dweight, inv_j);
              add_scaled_inplace(det_acc[li].dbias, batch_acc[li].dbias, inv_j);
            }
          }
        }
      }

      LossBreakdown lb;
      if (has_var && klw > 0.0) {
        lb = variational_loss(kl, nll, klw, j_count);
      } else {
        lb.kl_term = has_var ? kl : 0.0;
        lb.nll_term = nll;
        lb.total = klw * lb.kl_term + nll;
        lb.j_samples = j_count;
      }
      if (!std::isfinite(lb.total))
        throw_numeric("train: loss diverged at epoch " + std::to_string(epoch));

      for (std::size_t li = 0; li < state.stack.size(); ++li) {
        LayerParams& p = state.params[li];
        const std::string& name = state.stack[li].name;
        if (state.stack[li].type == LayerType::kStatsPool) continue;
        if (p.variational) {
          const Matrix gmu =
              grad_mu(p.post, p.prior, g_per_layer[li], klw);
          const Matrix grho =
              grad_rho(p.post, p.prior, g_per_layer[li], eps_per_layer[li], klw);
          sgd_update(p.post.mu, vel.mu[li], gmu, tc.lr, tc.momentum, name + ".mu_q");
          sgd_update(p.post.rho, vel.rho[li], grho, tc.lr, tc.momentum,
                     name + ".rho_q");
          if (!p.bias_in_posterior && !det_acc[li].dbias.empty())
            sgd_update(p.bias, vel.bias[li], det_acc[li].dbias, tc.lr, tc.momentum,
                       name + ".bias");
        } else {
          sgd_update(p.weight, vel.weight[li], det_acc[li].dweight, tc.lr,
                     tc.momentum, name + ".weight");
          sgd_update(p.bias, vel.bias[li], det_acc[li].dbias, tc.lr, tc.momentum,
                     name + ".bias");
        }
      }

      result.steps.push_back(lb);
      ep_kl += lb.kl_term;
      ep_nll += lb.nll_term;
      ep_total += lb.total;
      for (std::size_t e = 0; e < batch.size(); ++e) {
        const auto& probs = prob_acc[e];
        const std::size_t pred =
            std::max_element(probs.begin(), probs.end()) - probs.begin();
        if (static_cast<int>(pred) ==
            corpus.utterances[batch[e].utt_index].speaker)
          ++correct;
        ++total_chunks;
      }
    }

    EpochStats es;
    es.epoch = epoch;
    const double inv_steps = 1.0 / static_cast<double>(batches.size());
    es.kl_term = ep_kl * inv_steps;
    es.nll_term = ep_nll * inv_steps;
    es.total = ep_total * inv_steps;
    es.accuracy = static_cast<double>(correct) / static_cast<double>(total_chunks);
    result.trace.push_back(es);
  }

  result.state = std::move(state);
  return result;
}

}  // namespace

TrainResult train_baseline(const Corpus& corpus, NetworkConfig net_cfg,
                           const TrainConfig& cfg) {
  net_cfg.bayesian = false;
  RngStream init_rng = RngStream(cfg.seed).fork(12);
  NetworkState state = init_network(net_cfg, init_rng);
  return train_network(corpus, net_cfg, cfg, std::move(state));
}

TrainResult train_bayesian(const Corpus& corpus, NetworkConfig net_cfg,
                           const TrainConfig& cfg, const NetworkState* baseline) {
  net_cfg.bayesian = true;
  if (net_cfg.variational_layers.empty())
    throw_usage("train_bayesian: variational_layers is empty");
  if (cfg.sigma_p <= 0.0)
    throw_usage("train_bayesian: sigma_p must be set to a positive prior scale");
  RngStream init_rng = RngStream(cfg.seed).fork(12);
  NetworkState state = init_network(net_cfg, init_rng);

  for (std::size_t li = 0; li < state.stack.size(); ++li) {
    LayerParams& p = state.params[li];
    if (state.stack[li].type == LayerType::kStatsPool) continue;
    const std::string& name = state.stack[li].name;
    if (baseline != nullptr) {
      const LayerParams& bp = baseline->params[baseline->layer_index(name)];
      if (bp.variational)
        throw_data("train_bayesian: baseline checkpoint has variational layer '" +
                   name + "'");
      if (p.variational) {
        if (bp.weight.rows() != p.post.mu.rows() ||
            bp.weight.cols() + (p.bias_in_posterior ? 1 : 0) != p.post.mu.cols())
          throw_data("train_bayesian: baseline layer '" + name +
                     "' shape does not match network config");
        for (std::size_t r = 0; r < bp.weight.rows(); ++r) {
          for (std::size_t c = 0; c < bp.weight.cols(); ++c)
            p.post.mu(r, c) = bp.weight(r, c);
          if (p.bias_in_posterior)
            p.post.mu(r, bp.weight.cols()) = bp.bias(0, r);
        }
        if (!p.bias_in_posterior) p.bias = bp.bias;
        p.prior = make_prior_from_baseline(*baseline, name, cfg.sigma_p,
                                           p.bias_in_posterior);
      } else {
        if (!bp.weight.same_shape(p.weight))
          throw_data("train_bayesian: baseline layer '" + name +
                     "' shape does not match network config");
        p.weight = bp.weight;
        p.bias = bp.bias;
      }
    } else if (p.variational) {
      p.prior.mu = p.post.mu;  // prior mean = initialization
      p.prior.sigma = Matrix(p.post.mu.rows(), p.post.mu.cols(), cfg.sigma_p);
    }
  }
  return train_network(corpus, net_cfg, cfg, std::move(state));
}

Matrix predictive_inference(const NetworkState& state, const Matrix& features,
                            int j_samples, RngStream& rng) {
  if (j_samples < 1) throw_data("predictive_inference: j_samples must be >= 1");
  const std::size_t n = state.config.num_speakers;
  Matrix posterior(1, n, 0.0);
  const double inv_j = 1.0 / static_cast<double>(j_samples);
  for (int j = 0; j < j_samples; ++j) {
    const ForwardTape tape =
        network_forward(state, features, ForwardMode::kSample, &rng);
    const auto probs = softmax_row(tape.logits);
    for (std::size_t k = 0; k < n; ++k) posterior(0, k) += probs[k] * inv_j;
  }
  return posterior;
}

std::string loss_trace_csv(const std::vector<EpochStats>& trace) {
  std::string csv = "epoch,kl_term,nll_term,total,accuracy\n";
  for (const EpochStats& e : trace) {
    csv += std::to_string(e.epoch) + "," + format_double("%.9g", e.kl_term) + "," +
           format_double("%.9g", e.nll_term) + "," +
           format_double("%.9g", e.total) + "," +
           format_double("%.6f", e.accuracy) + "\n";
  }
  return csv;
}

}  // namespace bxv
