// include/bxv/network.h

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

#include <array>
#include <filesystem>
#include <map>
#include <optional>
#include <string>
#include <vector>

#include "bxv/config.h"
#include "bxv/matrix.h"
#include "bxv/varbayes.h"

namespace bxv {

enum class LayerType { kTdnn, kStatsPool, kAffine };

struct LayerSpec {
  std::string name;
  LayerType type = LayerType::kAffine;
  std::vector<int> offsets;  // tdnn context, strictly increasing
  std::size_t in_dim = 0;    // tdnn: spliced dim = below_dim * |offsets|
  std::size_t out_dim = 0;
  bool relu = false;
  bool variational = false;

  int context_span() const {
    return offsets.empty() ? 0 : offsets.back() - offsets.front();
  }
};

/// Extractor topology: frame1..frame5 time-delay layers, statistics pooling,
/// segment6/segment7 embedding layers, softmax head.  Dims are configurable;
/// contexts default to [-2,2], {-2,0,2}, {-3,0,3}, {0}, {0}.
struct NetworkConfig {
  std::size_t feature_dim = 10;
  std::size_t num_speakers = 8;
  std::size_t hidden_dim = 32;
  std::size_t stats_input_dim = 64;
  std::size_t embedding_dim = 16;
  std::array<std::vector<int>, 5> frame_contexts = {
      std::vector<int>{-2, -1, 0, 1, 2}, std::vector<int>{-2, 0, 2},
      std::vector<int>{-3, 0, 3}, std::vector<int>{0}, std::vector<int>{0}};
  std::vector<std::string> variational_layers = {"frame1"};
  double sigma0 = 0.05;
  bool variational_bias = true;
  bool bayesian = false;  // when false every layer is deterministic

  static NetworkConfig load(const std::filesystem::path& path);
  static NetworkConfig from_config(const ConfigFile& cfg);
  static NetworkConfig from_config_manifest(const ConfigFile& cfg);

  std::vector<LayerSpec> build_stack() const;
  std::size_t receptive_field() const;
};

struct LayerParams {
  // Deterministic tensors; weight is unused when the layer is variational,
  // bias is unused only when the bias entries live inside the posterior.
  Matrix weight;  // out x in
  Matrix bias;    // 1 x out
  bool variational = false;
  bool bias_in_posterior = false;
  GaussianPosterior post;  // out x (in [+1]) when variational
  GaussianPrior prior;
};

struct NetworkState {
  NetworkConfig config;
  std::vector<LayerSpec> stack;
  std::vector<LayerParams> params;  // aligned with stack; stats slot empty

  std::size_t layer_index(const std::string& name) const;
  bool has_layer(const std::string& name) const;
};

/// Per-layer caches sufficient to reproduce the forward pass bit-exactly.
struct LayerTape {
  Matrix input;
  Matrix spliced;  // tdnn only
  Matrix pre;
  Matrix post;
  Matrix w_eff;  // weights actually applied (sampled or mean or raw)
  Matrix b_eff;  // 1 x out
  std::optional<WeightSample> sample;
  std::vector<double> mean, var, sd;  // stats pooling
};

struct ForwardTape {
  std::vector<LayerTape> layers;
  Matrix logits;  // 1 x N
  std::size_t input_frames = 0;
};

struct LayerGrads {
  Matrix dweight;  // variational with bias column: out x (in+1) sample grad
  Matrix dbias;    // 1 x out; empty when folded into dweight
};

struct NetworkGrads {
  std::vector<LayerGrads> layers;
};

using SampleMap = std::map<std::string, WeightSample>;

NetworkState init_network(const NetworkConfig& cfg, RngStream& rng);

/// Splice-and-affine forward for one TDNN layer (ReLU applied):
/// output rows = T - (max_offset - min_offset).
Matrix tdnn_forward(const LayerSpec& spec, const Matrix& weight, const Matrix& bias,
                    const Matrix& input);

/// Concatenated per-dimension mean and population std, floored at 1e-10
/// variance: 1 x 2d from T x d.
Matrix stats_pool(const Matrix& input);

/// Full forward pass.  Variational layers follow `mode`; pre-drawn samples in
/// `fixed_samples` (keyed by layer name) take precedence over fresh draws so
/// one draw can be shared across a minibatch.
ForwardTape network_forward(const NetworkState& state, const Matrix& features,
                            ForwardMode mode, RngStream* rng,
                            const SampleMap* fixed_samples = nullptr);

struct CrossEntropyResult {
  double loss = 0.0;
  Matrix dlogits;  // softmax(logits) - onehot(label)
};
CrossEntropyResult cross_entropy(const Matrix& logits, std::size_t label);

std::vector<double> softmax_row(const Matrix& logits);

/// Exact reverse-mode gradients of the data loss for every layer; for
/// variational layers the gradient is w.r.t. the sampled weights (the G
/// buffer handed to grad_mu / grad_rho).
NetworkGrads network_backward(const NetworkState& state, const ForwardTape& tape,
                              const Matrix& dlogits);

/// segment6 pre-activation (1 x embedding_dim).
Matrix extract_embedding(const NetworkState& state, const Matrix& features,
                         ForwardMode mode, RngStream* rng);

void save_checkpoint(const NetworkState& state, const std::filesystem::path& dir);
NetworkState load_checkpoint(const std::filesystem::path& dir);

}  // namespace bxv
