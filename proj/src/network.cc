// src/network.cc

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

#include "bxv/network.h"

#include <algorithm>
#include <cmath>
#include <set>
#include <sstream>

#include "bxv/error.h"
#include "bxv/io.h"

namespace bxv {

namespace {

constexpr double kVarianceFloor = 1e-10;

std::string context_to_string(const std::vector<int>& ctx) {
  std::string s;
  for (std::size_t i = 0; i < ctx.size(); ++i) {
    if (i) s += ",";
    s += std::to_string(ctx[i]);
  }
  return s;
}

}  // namespace

NetworkConfig NetworkConfig::load(const std::filesystem::path& path) {
  return from_config(ConfigFile::load(path));
}

NetworkConfig NetworkConfig::from_config(const ConfigFile& cfg) {
  cfg.require_keys_in({"feature_dim", "num_speakers", "hidden_dim",
                       "stats_input_dim", "embedding_dim", "frame1_context",
                       "frame2_context", "frame3_context", "frame4_context",
                       "frame5_context", "variational_layers", "sigma0",
                       "variational_bias"});
  NetworkConfig nc;
  nc.feature_dim = static_cast<std::size_t>(cfg.get_int("feature_dim", 10));
  nc.num_speakers = static_cast<std::size_t>(cfg.get_int("num_speakers", 8));
  nc.hidden_dim = static_cast<std::size_t>(cfg.get_int("hidden_dim", 32));
  nc.stats_input_dim = static_cast<std::size_t>(cfg.get_int("stats_input_dim", 64));
  nc.embedding_dim = static_cast<std::size_t>(cfg.get_int("embedding_dim", 16));
  for (int k = 0; k < 5; ++k) {
    const std::string key = "frame" + std::to_string(k + 1) + "_context";
    if (cfg.has(key))
      nc.frame_contexts[k] = parse_context(cfg.require_string(key), key);
  }
  if (cfg.has("variational_layers"))
    nc.variational_layers = cfg.get_string_list("variational_layers");
  nc.sigma0 = cfg.get_real("sigma0", 0.05);
  nc.variational_bias = cfg.get_bool("variational_bias", true);
  if (nc.feature_dim < 1 || nc.num_speakers < 2 || nc.hidden_dim < 1 ||
      nc.stats_input_dim < 1 || nc.embedding_dim < 1)
    throw_usage(cfg.name() + ": network dimensions must be positive (and at "
                "least two speakers)");
  if (nc.sigma0 <= 0.0) throw_usage(cfg.name() + ": sigma0 must be positive");
  return nc;
}

std::vector<LayerSpec> NetworkConfig::build_stack() const {
  const std::set<std::string> known = {"frame1", "frame2", "frame3", "frame4",
                                       "frame5", "segment6", "segment7", "softmax"};
  for (const std::string& name : variational_layers)
    if (!known.count(name))
      throw_usage("variational_layers: unknown layer '" + name + "'");
  auto is_var = [&](const std::string& name) {
    return bayesian && std::find(variational_layers.begin(), variational_layers.end(),
                                 name) != variational_layers.end();
  };

  std::vector<LayerSpec> stack;
  std::size_t below = feature_dim;
  for (int k = 0; k < 5; ++k) {
    LayerSpec s;
    s.name = "frame" + std::to_string(k + 1);
    s.type = LayerType::kTdnn;
    s.offsets = frame_contexts[k];
    s.in_dim = below * s.offsets.size();
    s.out_dim = (k == 4) ? stats_input_dim : hidden_dim;
    s.relu = true;
    s.variational = is_var(s.name);
    below = s.out_dim;
    stack.push_back(std::move(s));
  }
  LayerSpec stats;
  stats.name = "stats";
  stats.type = LayerType::kStatsPool;
  stats.in_dim = stats_input_dim;
  stats.out_dim = 2 * stats_input_dim;
  stack.push_back(std::move(stats));

  LayerSpec seg6{"segment6", LayerType::kAffine, {0}, 2 * stats_input_dim,
                 embedding_dim, true, is_var("segment6")};
  LayerSpec seg7{"segment7", LayerType::kAffine, {0}, embedding_dim,
                 embedding_dim, true, is_var("segment7")};
  LayerSpec head{"softmax", LayerType::kAffine, {0}, embedding_dim,
                 num_speakers, false, is_var("softmax")};
  stack.push_back(std::move(seg6));
  stack.push_back(std::move(seg7));
  stack.push_back(std::move(head));
  return stack;
}

std::size_t NetworkConfig::receptive_field() const {
  std::size_t span = 1;
  for (const auto& ctx : frame_contexts)
    span += static_cast<std::size_t>(ctx.back() - ctx.front());
  return span;
}

std::size_t NetworkState::layer_index(const std::string& name) const {
  for (std::size_t i = 0; i < stack.size(); ++i)
    if (stack[i].name == name) return i;
  throw_data("network: unknown layer '" + name + "'");
}

bool NetworkState::has_layer(const std::string& name) const {
  for (const auto& s : stack)
    if (s.name == name) return true;
  return false;
}

NetworkState init_network(const NetworkConfig& cfg, RngStream& rng) {
  NetworkState st;
  st.config = cfg;
  st.stack = cfg.build_stack();
  st.params.resize(st.stack.size());
  const double rho0 = softplus_inverse(cfg.sigma0);

  for (std::size_t i = 0; i < st.stack.size(); ++i) {
    const LayerSpec& spec = st.stack[i];
    if (spec.type == LayerType::kStatsPool) continue;
    LayerParams& p = st.params[i];

    // Glorot-uniform over the weight block; biases start at zero.  The draw
    // count does not depend on the variational flag, so a Bayesian network
    // initializes its mu to exactly the weights a baseline run would get.
    const double limit =
        std::sqrt(6.0 / static_cast<double>(spec.in_dim + spec.out_dim));
    Matrix w(spec.out_dim, spec.in_dim);
    for (std::size_t k = 0; k < w.size(); ++k)
      w.data()[k] = (2.0 * rng.next_unit() - 1.0) * limit;

    p.variational = spec.variational;
    p.bias_in_posterior = spec.variational && cfg.variational_bias;
    if (spec.variational) {
      const std::size_t cols = spec.in_dim + (p.bias_in_posterior ? 1 : 0);
      p.post.mu = Matrix(spec.out_dim, cols, 0.0);
      for (std::size_t r = 0; r < spec.out_dim; ++r)
        for (std::size_t c = 0; c < spec.in_dim; ++c) p.post.mu(r, c) = w(r, c);
      p.post.rho = Matrix(spec.out_dim, cols, rho0);
      p.prior.mu = Matrix(spec.out_dim, cols, 0.0);
      p.prior.sigma = Matrix(spec.out_dim, cols, 1.0);
      if (!p.bias_in_posterior) p.bias = Matrix(1, spec.out_dim, 0.0);
    } else {
      p.weight = std::move(w);
      p.bias = Matrix(1, spec.out_dim, 0.0);
    }
  }
  return st;
}

namespace {

struct TdnnPass {
  Matrix spliced;  // t_out x (|offsets| * din)
  Matrix pre;
  Matrix post;  // ReLU applied
};

TdnnPass tdnn_pass(const LayerSpec& spec, const Matrix& weight, const Matrix& bias,
                   const Matrix& input) {
  const std::size_t num_off = spec.offsets.size();
  if (input.cols() * num_off != spec.in_dim)
    throw_data(spec.name + ": input dim " + std::to_string(input.cols()) +
               " with " + std::to_string(num_off) + " offsets does not match "
               "layer input dim " + std::to_string(spec.in_dim));
  const int span = spec.context_span();
  if (input.rows() < static_cast<std::size_t>(span + 1))
    throw_data(spec.name + ": needs at least " + std::to_string(span + 1) +
               " frames, got " + std::to_string(input.rows()));
  const std::size_t t_out = input.rows() - static_cast<std::size_t>(span);
  const std::size_t din = input.cols();

  TdnnPass pass;
  pass.spliced = Matrix(t_out, spec.in_dim);
  const int o_first = spec.offsets.front();
  for (std::size_t t = 0; t < t_out; ++t)
    for (std::size_t k = 0; k < num_off; ++k) {
      const std::size_t src = t + static_cast<std::size_t>(spec.offsets[k] - o_first);
      for (std::size_t d = 0; d < din; ++d)
        pass.spliced(t, k * din + d) = input(src, d);
    }

  pass.pre = matmul_nt(pass.spliced, weight);
  for (std::size_t t = 0; t < t_out; ++t)
    for (std::size_t o = 0; o < spec.out_dim; ++o) pass.pre(t, o) += bias(0, o);
  pass.post = pass.pre;
  for (std::size_t i = 0; i < pass.post.size(); ++i)
    if (pass.post.data()[i] < 0.0) pass.post.data()[i] = 0.0;
  return pass;
}

}  // namespace

Matrix tdnn_forward(const LayerSpec& spec, const Matrix& weight, const Matrix& bias,
                    const Matrix& input) {
  return tdnn_pass(spec, weight, bias, input).post;
}

Matrix stats_pool(const Matrix& input) {
  if (input.rows() < 1) throw_data("stats_pool: empty input");
  const std::size_t t_total = input.rows(), d = input.cols();
  Matrix out(1, 2 * d);
  const double inv_t = 1.0 / static_cast<double>(t_total);
  for (std::size_t j = 0; j < d; ++j) {
    double s = 0.0, s2 = 0.0;
    for (std::size_t t = 0; t < t_total; ++t) {
      const double v = input(t, j);
      s += v;
      s2 += v * v;
    }
    const double mean = s * inv_t;
    const double var = std::max(s2 * inv_t - mean * mean, kVarianceFloor);
    out(0, j) = mean;
    out(0, d + j) = std::sqrt(var);
  }
  return out;
}

namespace {

struct EffectiveWeights {
  Matrix w;  // out x in
  Matrix b;  // 1 x out
  std::optional<WeightSample> sample;
};

EffectiveWeights effective_weights(const LayerSpec& spec, const LayerParams& p,
                                   ForwardMode mode, RngStream* rng,
                                   const SampleMap* fixed_samples) {
  EffectiveWeights ew;
  if (!p.variational) {
    ew.w = p.weight;
    ew.b = p.bias;
    return ew;
  }
  const Matrix* full = &p.post.mu;
  if (mode == ForwardMode::kSample) {
    if (fixed_samples != nullptr) {
      auto it = fixed_samples->find(spec.name);
      if (it != fixed_samples->end()) ew.sample = it->second;
    }
    if (!ew.sample) {
      if (rng == nullptr)
        throw_data(spec.name + ": sample-mode forward needs an RngStream");
      ew.sample = sample_weights(p.post, *rng);
    }
    if (!ew.sample->w.same_shape(p.post.mu))
      throw_data(spec.name + ": fixed sample shape " + shape_str(ew.sample->w) +
                 " does not match posterior " + shape_str(p.post.mu));
    full = &ew.sample->w;
  }
  if (p.bias_in_posterior) {
    const std::size_t in_dim = spec.in_dim;
    ew.w = Matrix(spec.out_dim, in_dim);
    ew.b = Matrix(1, spec.out_dim);
    for (std::size_t r = 0; r < spec.out_dim; ++r) {
      for (std::size_t c = 0; c < in_dim; ++c) ew.w(r, c) = (*full)(r, c);
      ew.b(0, r) = (*full)(r, in_dim);
    }
  } else {
    ew.w = *full;
    ew.b = p.bias;
  }
  return ew;
}

}  // namespace

ForwardTape network_forward(const NetworkState& state, const Matrix& features,
                            ForwardMode mode, RngStream* rng,
                            const SampleMap* fixed_samples) {
  if (features.cols() != state.config.feature_dim)
    throw_data("network_forward: features have dim " +
               std::to_string(features.cols()) + ", network expects " +
               std::to_string(state.config.feature_dim));
  const std::size_t min_frames = state.config.receptive_field();
  if (features.rows() < min_frames)
    throw_data("network_forward: utterance has " + std::to_string(features.rows()) +
               " frames, receptive field needs at least " +
               std::to_string(min_frames));

  ForwardTape tape;
  tape.input_frames = features.rows();
  tape.layers.resize(state.stack.size());
  Matrix cur = features;

  for (std::size_t i = 0; i < state.stack.size(); ++i) {
    const LayerSpec& spec = state.stack[i];
    LayerTape& lt = tape.layers[i];
    lt.input = cur;

    if (spec.type == LayerType::kStatsPool) {
      const std::size_t t_total = cur.rows(), d = cur.cols();
      Matrix out = stats_pool(cur);
      lt.mean.resize(d);
      lt.sd.resize(d);
      lt.var.resize(d);
      const double inv_t = 1.0 / static_cast<double>(t_total);
      for (std::size_t j = 0; j < d; ++j) {
        double s = 0.0, s2 = 0.0;
        for (std::size_t t = 0; t < t_total; ++t) {
          s += cur(t, j);
          s2 += cur(t, j) * cur(t, j);
        }
        lt.mean[j] = s * inv_t;
        lt.var[j] = s2 * inv_t - lt.mean[j] * lt.mean[j];
        lt.sd[j] = out(0, d + j);
      }
      lt.pre = out;
      lt.post = out;
      cur = std::move(out);
      continue;
    }

    EffectiveWeights ew =
        effective_weights(spec, state.params[i], mode, rng, fixed_samples);
    lt.w_eff = ew.w;
    lt.b_eff = ew.b;
    lt.sample = std::move(ew.sample);

    if (spec.type == LayerType::kTdnn) {
      TdnnPass pass = tdnn_pass(spec, lt.w_eff, lt.b_eff, cur);
      lt.spliced = std::move(pass.spliced);
      lt.pre = std::move(pass.pre);
      lt.post = pass.post;
      cur = std::move(pass.post);
    } else {  // affine
      Matrix pre = matmul_nt(cur, lt.w_eff);
      for (std::size_t o = 0; o < spec.out_dim; ++o) pre(0, o) += lt.b_eff(0, o);
      lt.pre = pre;
      Matrix post = std::move(pre);
      if (spec.relu) {
        for (std::size_t k = 0; k < post.size(); ++k)
          if (post.data()[k] < 0.0) post.data()[k] = 0.0;
      }
      lt.post = post;
      cur = std::move(post);
    }
  }
  tape.logits = cur;
  ensure_finite(tape.logits, "network_forward logits");
  return tape;
}

std::vector<double> softmax_row(const Matrix& logits) {
  std::vector<double> p(logits.cols());
  double m = logits(0, 0);
  for (std::size_t i = 1; i < logits.cols(); ++i) m = std::max(m, logits(0, i));
  double z = 0.0;
  for (std::size_t i = 0; i < logits.cols(); ++i) {
    p[i] = std::exp(logits(0, i) - m);
    z += p[i];
  }
  for (double& v : p) v /= z;
  return p;
}

CrossEntropyResult cross_entropy(const Matrix& logits, std::size_t label) {
  if (logits.rows() != 1) throw_data("cross_entropy: logits must be a row vector");
  if (label >= logits.cols())
    throw_data("cross_entropy: label " + std::to_string(label) +
               " out of range for " + std::to_string(logits.cols()) + " classes");
  double m = logits(0, 0);
  for (std::size_t i = 1; i < logits.cols(); ++i) m = std::max(m, logits(0, i));
  double z = 0.0;
  for (std::size_t i = 0; i < logits.cols(); ++i) z += std::exp(logits(0, i) - m);
  const double lse = m + std::log(z);

  CrossEntropyResult out;
  out.loss = lse - logits(0, label);
  out.dlogits = Matrix(1, logits.cols());
  for (std::size_t i = 0; i < logits.cols(); ++i)
    out.dlogits(0, i) = std::exp(logits(0, i) - lse);
  out.dlogits(0, label) -= 1.0;
  return out;
}

NetworkGrads network_backward(const NetworkState& state, const ForwardTape& tape,
                              const Matrix& dlogits) {
  if (tape.layers.size() != state.stack.size())
    throw_data("network_backward: tape does not match network (tape has " +
               std::to_string(tape.layers.size()) + " layers, network " +
               std::to_string(state.stack.size()) + ")");
  if (dlogits.rows() != 1 || dlogits.cols() != state.config.num_speakers)
    throw_data("network_backward: dlogits shape " + shape_str(dlogits) +
               " does not match softmax output");

  NetworkGrads grads;
  grads.layers.resize(state.stack.size());
  Matrix dcur = dlogits;  // gradient w.r.t. current layer output

  for (std::size_t ii = state.stack.size(); ii-- > 0;) {
    const LayerSpec& spec = state.stack[ii];
    const LayerTape& lt = tape.layers[ii];

    if (spec.type == LayerType::kStatsPool) {
      const std::size_t d = spec.in_dim;
      const std::size_t t_total = lt.input.rows();
      if (dcur.cols() != 2 * d)
        throw_data("network_backward: stats tape mismatch");
      Matrix dinput(t_total, d, 0.0);
      const double inv_t = 1.0 / static_cast<double>(t_total);
      for (std::size_t j = 0; j < d; ++j) {
        const double dmean = dcur(0, j);
        const double dsd = dcur(0, d + j);
        const bool floored = lt.var[j] <= kVarianceFloor;
        for (std::size_t t = 0; t < t_total; ++t) {
          double g = dmean * inv_t;
          if (!floored)
            g += dsd * (lt.input(t, j) - lt.mean[j]) * inv_t / lt.sd[j];
          dinput(t, j) = g;
        }
      }
      dcur = std::move(dinput);
      continue;
    }

    // ReLU: pass gradient only where the pre-activation was positive.
    Matrix dpre = dcur;
    if (spec.relu) {
      if (!dpre.same_shape(lt.pre))
        throw_data("network_backward: tape/grad shape mismatch at " + spec.name);
      for (std::size_t k = 0; k < dpre.size(); ++k)
        if (lt.pre.data()[k] <= 0.0) dpre.data()[k] = 0.0;
    }

    const Matrix& x = spec.type == LayerType::kTdnn ? lt.spliced : lt.input;
    Matrix dw = matmul_tn(dpre, x);  // out x in
    Matrix db(1, spec.out_dim, 0.0);
    for (std::size_t t = 0; t < dpre.rows(); ++t)
      for (std::size_t o = 0; o < spec.out_dim; ++o) db(0, o) += dpre(t, o);
    Matrix dx = matmul(dpre, lt.w_eff);  // rows x in_dim (spliced for tdnn)

    LayerGrads& lg = grads.layers[ii];
    const LayerParams& p = state.params[ii];
    if (p.variational && p.bias_in_posterior) {
      lg.dweight = Matrix(spec.out_dim, spec.in_dim + 1);
      for (std::size_t r = 0; r < spec.out_dim; ++r) {
        for (std::size_t c = 0; c < spec.in_dim; ++c) lg.dweight(r, c) = dw(r, c);
        lg.dweight(r, spec.in_dim) = db(0, r);
      }
    } else {
      lg.dweight = std::move(dw);
      lg.dbias = std::move(db);
    }

    if (spec.type == LayerType::kTdnn) {
      const std::size_t din = lt.input.cols();
      const std::size_t num_off = spec.offsets.size();
      const int o_first = spec.offsets.front();
      Matrix dinput(lt.input.rows(), din, 0.0);
      for (std::size_t t = 0; t < dx.rows(); ++t)
        for (std::size_t k = 0; k < num_off; ++k) {
          const std::size_t dst =
              t + static_cast<std::size_t>(spec.offsets[k] - o_first);
          for (std::size_t d = 0; d < din; ++d)
            dinput(dst, d) += dx(t, k * din + d);
        }
      dcur = std::move(dinput);
    } else {
      dcur = std::move(dx);
    }
  }
  return grads;
}

Matrix extract_embedding(const NetworkState& state, const Matrix& features,
                         ForwardMode mode, RngStream* rng) {
  const ForwardTape tape = network_forward(state, features, mode, rng);
  return tape.layers[state.layer_index("segment6")].pre;
}

// ---------------------------------------------------------------------------
// Checkpoint I/O: a manifest line-file plus one BXM1 file per tensor.

namespace {

struct TensorRecord {
  std::string name, relpath, shape, hash;
};

void append_tensor(std::vector<std::pair<std::string, const Matrix*>>& out,
                   const std::string& name, const Matrix& m) {
  out.emplace_back(name, &m);
}

}  // namespace

void save_checkpoint(const NetworkState& state, const std::filesystem::path& dir) {
  ensure_dir(dir);
  ensure_dir(dir / "tensors");
  const NetworkConfig& cfg = state.config;

  std::vector<std::pair<std::string, const Matrix*>> tensors;
  std::string manifest;
  manifest += "bxv-checkpoint v1\n";
  manifest += "feature_dim = " + std::to_string(cfg.feature_dim) + "\n";
  manifest += "num_speakers = " + std::to_string(cfg.num_speakers) + "\n";
  manifest += "hidden_dim = " + std::to_string(cfg.hidden_dim) + "\n";
  manifest += "stats_input_dim = " + std::to_string(cfg.stats_input_dim) + "\n";
  manifest += "embedding_dim = " + std::to_string(cfg.embedding_dim) + "\n";
  for (int k = 0; k < 5; ++k)
    manifest += "frame" + std::to_string(k + 1) + "_context = " +
                context_to_string(cfg.frame_contexts[k]) + "\n";
  manifest += "sigma0 = " + format_double("%.17g", cfg.sigma0) + "\n";
  manifest += "variational_bias = " + std::string(cfg.variational_bias ? "true" : "false") + "\n";
  manifest += "bayesian = " + std::string(cfg.bayesian ? "true" : "false") + "\n";
  {
    std::string list;
    for (std::size_t i = 0; i < cfg.variational_layers.size(); ++i) {
      if (i) list += ",";
      list += cfg.variational_layers[i];
    }
    manifest += "variational_layers = " + list + "\n";
  }

  for (std::size_t i = 0; i < state.stack.size(); ++i) {
    const LayerSpec& spec = state.stack[i];
    if (spec.type == LayerType::kStatsPool) continue;
    const LayerParams& p = state.params[i];
    if (p.variational) {
      append_tensor(tensors, spec.name + ".mu_q", p.post.mu);
      append_tensor(tensors, spec.name + ".rho_q", p.post.rho);
      append_tensor(tensors, spec.name + ".prior_mu", p.prior.mu);
      append_tensor(tensors, spec.name + ".prior_sigma", p.prior.sigma);
      if (!p.bias_in_posterior)
        append_tensor(tensors, spec.name + ".bias", p.bias);
    } else {
      append_tensor(tensors, spec.name + ".weight", p.weight);
      append_tensor(tensors, spec.name + ".bias", p.bias);
    }
  }

  for (const auto& [name, m] : tensors) {
    const std::string rel = "tensors/" + name + ".bxm";
    write_bxm(dir / rel, *m);
    manifest += "tensor " + name + " " + rel + " " + shape_str(*m) + " " +
                hex64(fnv1a64_file(dir / rel)) + "\n";
  }
  write_file(dir / "manifest", manifest);
}

NetworkState load_checkpoint(const std::filesystem::path& dir) {
  const auto lines = read_lines(dir / "manifest");
  if (lines.empty() || lines[0] != "bxv-checkpoint v1")
    throw_data((dir / "manifest").string() + ": not a bxv checkpoint manifest");

  std::string kv_section;
  std::vector<TensorRecord> records;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    if (lines[i].rfind("tensor ", 0) == 0) {
      const auto toks = split_ws(lines[i]);
      if (toks.size() != 5)
        throw_data((dir / "manifest").string() + ": malformed tensor line '" +
                   lines[i] + "'");
      records.push_back({toks[1], toks[2], toks[3], toks[4]});
    } else {
      kv_section += lines[i];
      kv_section += "\n";
    }
  }
  const ConfigFile cfg = ConfigFile::from_string(kv_section, (dir / "manifest").string());
  NetworkConfig nc = NetworkConfig::from_config_manifest(cfg);

  NetworkState st;
  st.config = nc;
  st.stack = nc.build_stack();
  st.params.resize(st.stack.size());

  std::map<std::string, Matrix> loaded;
  for (const auto& rec : records) {
    const auto path = dir / rec.relpath;
    const std::string h = hex64(fnv1a64_file(path));
    if (h != rec.hash)
      throw_data(path.string() + ": content hash mismatch (manifest " + rec.hash +
                 ", file " + h + ")");
    Matrix m = read_bxm(path);
    if (shape_str(m) != rec.shape)
      throw_data(path.string() + ": shape " + shape_str(m) +
                 " does not match manifest " + rec.shape);
    loaded.emplace(rec.name, std::move(m));
  }
  auto take = [&](const std::string& name) {
    auto it = loaded.find(name);
    if (it == loaded.end())
      throw_data((dir / "manifest").string() + ": missing tensor '" + name + "'");
    Matrix m = std::move(it->second);
    loaded.erase(it);
    return m;
  };

  for (std::size_t i = 0; i < st.stack.size(); ++i) {
    const LayerSpec& spec = st.stack[i];
    if (spec.type == LayerType::kStatsPool) continue;
    LayerParams& p = st.params[i];
    p.variational = spec.variational;
    p.bias_in_posterior = spec.variational && nc.variational_bias;
    const std::size_t post_cols = spec.in_dim + (p.bias_in_posterior ? 1 : 0);
    if (p.variational) {
      p.post.mu = take(spec.name + ".mu_q");
      p.post.rho = take(spec.name + ".rho_q");
      p.prior.mu = take(spec.name + ".prior_mu");
      p.prior.sigma = take(spec.name + ".prior_sigma");
      if (!p.bias_in_posterior) p.bias = take(spec.name + ".bias");
      if (p.post.mu.rows() != spec.out_dim || p.post.mu.cols() != post_cols)
        throw_data(spec.name + ": posterior shape " + shape_str(p.post.mu) +
                   " does not match layer (" + std::to_string(spec.out_dim) + "x" +
                   std::to_string(post_cols) + ")");
    } else {
      p.weight = take(spec.name + ".weight");
      p.bias = take(spec.name + ".bias");
      if (p.weight.rows() != spec.out_dim || p.weight.cols() != spec.in_dim)
        throw_data(spec.name + ": weight shape " + shape_str(p.weight) +
                   " does not match layer");
    }
  }
  if (!loaded.empty())
    throw_data((dir / "manifest").string() + ": unexpected tensor '" +
               loaded.begin()->first + "'");
  return st;
}

NetworkConfig NetworkConfig::from_config_manifest(const ConfigFile& cfg) {
  NetworkConfig nc;
  nc.feature_dim = static_cast<std::size_t>(cfg.get_int("feature_dim", 10));
  nc.num_speakers = static_cast<std::size_t>(cfg.get_int("num_speakers", 8));
  nc.hidden_dim = static_cast<std::size_t>(cfg.get_int("hidden_dim", 32));
  nc.stats_input_dim = static_cast<std::size_t>(cfg.get_int("stats_input_dim", 64));
  nc.embedding_dim = static_cast<std::size_t>(cfg.get_int("embedding_dim", 16));
  for (int k = 0; k < 5; ++k) {
    const std::string key = "frame" + std::to_string(k + 1) + "_context";
    if (cfg.has(key))
      nc.frame_contexts[k] = parse_context(cfg.require_string(key), key);
  }
  nc.variational_layers = cfg.get_string_list("variational_layers");
  nc.sigma0 = cfg.get_real("sigma0", 0.05);
  nc.variational_bias = cfg.get_bool("variational_bias", true);
  nc.bayesian = cfg.get_bool("bayesian", false);
  return nc;
}

}  // namespace bxv
