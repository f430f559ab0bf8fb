// include/bxv/trainer.h

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

#include <cstdint>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bxv/config.h"
#include "bxv/corpus.h"
#include "bxv/network.h"

namespace bxv {

struct TrainConfig {
  double lr = 0.01;
  double momentum = 0.5;
  int epochs = 20;
  int minibatch_size = 16;
  int chunk_min = 50;
  int chunk_max = 150;
  int j_samples = 1;
  double kl_weight = -1.0;  // <= -1 (or "auto"): 1 / minibatches-per-epoch
  std::uint64_t seed = 42;
  double sigma_p = 0.1;
  bool force_zero_eps = false;  // debugging hook: eps forced to zero

  static TrainConfig load(const std::filesystem::path& path);
  static TrainConfig from_config(const ConfigFile& cfg);
  void validate() const;
};

struct Chunk {
  std::size_t utt_index = 0;
  std::size_t start = 0;
  std::size_t length = 0;
};
using Minibatch = std::vector<Chunk>;

/// One uniform chunk per utterance per epoch (length uniform in
/// [chunk_min, chunk_max] clamped to the utterance, never below the
/// receptive field), utterances visited in shuffled order, grouped into
/// minibatches with the last partial batch kept.
std::vector<Minibatch> chunk_schedule_epoch(const Corpus& corpus,
                                            const TrainConfig& cfg,
                                            std::size_t receptive_field,
                                            RngStream& rng);
Chunk draw_chunk(std::size_t utt_len, const TrainConfig& cfg,
                 std::size_t receptive_field, RngStream& rng);

/// Momentum SGD: v <- momentum*v + g; p <- p - lr*v.  Throws on a
/// non-finite update, naming the tensor.
void sgd_update(Matrix& param, Matrix& velocity, const Matrix& grad, double lr,
                double momentum, const std::string& tensor_name);

struct EpochStats {
  int epoch = 0;
  double kl_term = 0.0;
  double nll_term = 0.0;
  double total = 0.0;
  double accuracy = 0.0;
};

struct TrainResult {
  NetworkState state;
  std::vector<EpochStats> trace;        // one row per epoch
  std::vector<LossBreakdown> steps;     // one entry per optimizer step
};

TrainResult train_baseline(const Corpus& corpus, NetworkConfig net_cfg,
                           const TrainConfig& cfg);

/// Bayesian training; exactly the layers flagged variational in net_cfg
/// carry posteriors.  With a baseline, every layer starts from the baseline
/// tensors and each variational prior is centered on them; without one the
/// prior mean equals the fresh initialization (sigma_p from cfg either way).
TrainResult train_bayesian(const Corpus& corpus, NetworkConfig net_cfg,
                           const TrainConfig& cfg,
                           const NetworkState* baseline = nullptr);

/// Prior centered on a named baseline layer's weights (and bias when
/// include_bias) with constant scale sigma_p.
GaussianPrior make_prior_from_baseline(const NetworkState& baseline,
                                       const std::string& layer, double sigma_p,
                                       bool include_bias = true);

/// Mean softmax over J independent weight draws; rows sum to 1.
Matrix predictive_inference(const NetworkState& state, const Matrix& features,
                            int j_samples, RngStream& rng);

std::string loss_trace_csv(const std::vector<EpochStats>& trace);

}  // namespace bxv
