// tests/test_xvector.cc

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
#include <cmath>
#include <filesystem>

#include "bxv/error.h"
#include "bxv/io.h"
#include "bxv/network.h"
#include "doctest.h"

using namespace bxv;

namespace {

NetworkConfig tiny_config() {
  NetworkConfig cfg;
  cfg.feature_dim = 4;
  cfg.num_speakers = 3;
  cfg.hidden_dim = 8;
  cfg.stats_input_dim = 8;
  cfg.embedding_dim = 6;
  return cfg;
}

// Naive per-frame splice-then-multiply oracle.
Matrix tdnn_oracle(const LayerSpec& spec, const Matrix& w, const Matrix& b,
                   const Matrix& input) {
  const std::size_t din = input.cols();
  const int o_first = spec.offsets.front();
  const std::size_t t_out = input.rows() - static_cast<std::size_t>(spec.context_span());
  Matrix out(t_out, spec.out_dim);
  for (std::size_t t = 0; t < t_out; ++t) {
    std::vector<double> spliced;
    for (int off : spec.offsets) {
      const std::size_t src = t + static_cast<std::size_t>(off - o_first);
      for (std::size_t d = 0; d < din; ++d) spliced.push_back(input(src, d));
    }
    for (std::size_t o = 0; o < spec.out_dim; ++o) {
      double s = b(0, o);
      for (std::size_t k = 0; k < spliced.size(); ++k) s += w(o, k) * spliced[k];
      out(t, o) = s > 0.0 ? s : 0.0;
    }
  }
  return out;
}

// Checks every parameter of a deterministic network against central finite
// differences of the cross-entropy loss.  Returns the max relative error.
double network_fd_check(NetworkState& state, const Matrix& feats,
                        std::size_t label, double h) {
  const ForwardTape tape = network_forward(state, feats, ForwardMode::kMean, nullptr);
  const CrossEntropyResult ce = cross_entropy(tape.logits, label);
  const NetworkGrads grads = network_backward(state, tape, ce.dlogits);
  const double floor = 1e-4 * std::max(1.0, std::fabs(ce.loss));

  auto loss_at = [&]() {
    const ForwardTape t2 = network_forward(state, feats, ForwardMode::kMean, nullptr);
    return cross_entropy(t2.logits, label).loss;
  };

  double worst = 0.0;
  for (std::size_t li = 0; li < state.stack.size(); ++li) {
    if (state.stack[li].type == LayerType::kStatsPool) continue;
    LayerParams& p = state.params[li];
    for (int which = 0; which < 2; ++which) {
      Matrix& tensor = which == 0 ? p.weight : p.bias;
      const Matrix& analytic =
          which == 0 ? grads.layers[li].dweight : grads.layers[li].dbias;
      for (std::size_t i = 0; i < tensor.size(); ++i) {
        const double keep = tensor.data()[i];
        tensor.data()[i] = keep + h;
        const double lp = loss_at();
        tensor.data()[i] = keep - h;
        const double lm = loss_at();
        tensor.data()[i] = keep;
        const double fd = (lp - lm) / (2.0 * h);
        const double a = analytic.data()[i];
        const double denom = std::max({std::fabs(a), std::fabs(fd), floor});
        worst = std::max(worst, std::fabs(a - fd) / denom);
      }
    }
  }
  return worst;
}

// Minimum |pre-activation| over ReLU layers; finite differences need a
// margin away from the kinks.
double relu_margin(const ForwardTape& tape, const NetworkState& state) {
  double margin = 1e9;
  for (std::size_t li = 0; li < state.stack.size(); ++li) {
    const LayerSpec& s = state.stack[li];
    if (s.type == LayerType::kStatsPool || !s.relu) continue;
    const Matrix& pre = tape.layers[li].pre;
    for (std::size_t i = 0; i < pre.size(); ++i)
      margin = std::min(margin, std::fabs(pre.data()[i]));
  }
  return margin;
}

void zero_all_params(NetworkState& state) {
  for (auto& p : state.params) {
    for (std::size_t i = 0; i < p.weight.size(); ++i) p.weight.data()[i] = 0.0;
    for (std::size_t i = 0; i < p.bias.size(); ++i) p.bias.data()[i] = 0.0;
    for (std::size_t i = 0; i < p.post.mu.size(); ++i) p.post.mu.data()[i] = 0.0;
  }
}

}  // namespace

TEST_CASE("tdnn_forward identity weights on single offset is ReLU") {
  LayerSpec spec{"t", LayerType::kTdnn, {0}, 3, 3, true, false};
  const Matrix w = Matrix::identity(3);
  const Matrix b(1, 3, 0.0);
  const Matrix x = Matrix::from_rows({{1.0, -2.0, 0.5}, {-1.0, 3.0, -0.25}});
  const Matrix y = tdnn_forward(spec, w, b, x);
  CHECK(y(0, 0) == 1.0);
  CHECK(y(0, 1) == 0.0);
  CHECK(y(1, 1) == 3.0);
  CHECK(y(1, 2) == 0.0);
}

TEST_CASE("tdnn_forward length arithmetic for offsets {-1,+1}") {
  LayerSpec spec{"t", LayerType::kTdnn, {-1, 1}, 4, 2, true, false};
  RngStream rng(3);
  const Matrix w = gaussian_sample(rng, 2, 4);
  const Matrix b(1, 2, 0.1);
  const Matrix x = gaussian_sample(rng, 5, 2);
  CHECK(tdnn_forward(spec, w, b, x).rows() == 3);
}

TEST_CASE("tdnn_forward matches naive splice oracle") {
  LayerSpec spec{"t", LayerType::kTdnn, {-2, 0, 2}, 9, 5, true, false};
  RngStream rng(17);
  const Matrix w = gaussian_sample(rng, 5, 9);
  const Matrix b = gaussian_sample(rng, 1, 5);
  const Matrix x = gaussian_sample(rng, 12, 3);
  const Matrix got = tdnn_forward(spec, w, b, x);
  const Matrix want = tdnn_oracle(spec, w, b, x);
  REQUIRE(got.same_shape(want));
  CHECK(max_abs(sub(got, want)) < 1e-12);
}

TEST_CASE("tdnn_forward names the required minimum frames") {
  LayerSpec spec{"frame3", LayerType::kTdnn, {-3, 0, 3}, 3, 2, true, false};
  const Matrix w(2, 3, 0.1);
  const Matrix b(1, 2, 0.0);
  try {
    tdnn_forward(spec, w, b, Matrix(4, 1, 1.0));
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("at least 7") != std::string::npos);
  }
}

TEST_CASE("stats_pool degenerate, simple, and two-pass oracle") {
  const Matrix constant(5, 2, 3.25);
  const Matrix s1 = stats_pool(constant);
  CHECK(s1(0, 0) == doctest::Approx(3.25));
  CHECK(s1(0, 2) == doctest::Approx(1e-5).epsilon(1e-6));  // sqrt of the floor

  const Matrix two = Matrix::from_rows({{0.0}, {2.0}});
  const Matrix s2 = stats_pool(two);
  CHECK(s2(0, 0) == doctest::Approx(1.0));
  CHECK(s2(0, 1) == doctest::Approx(1.0));

  RngStream rng(23);
  const Matrix x = gaussian_sample(rng, 50, 7);
  const Matrix got = stats_pool(x);
  for (std::size_t j = 0; j < 7; ++j) {
    double mean = 0.0;
    for (std::size_t t = 0; t < 50; ++t) mean += x(t, j);
    mean /= 50.0;
    double var = 0.0;
    for (std::size_t t = 0; t < 50; ++t)
      var += (x(t, j) - mean) * (x(t, j) - mean);
    var /= 50.0;
    CHECK(std::fabs(got(0, j) - mean) < 1e-10);
    CHECK(std::fabs(got(0, 7 + j) - std::sqrt(var)) < 1e-10);
  }
}

TEST_CASE("cross_entropy values and finite differences") {
  const Matrix uniform(1, 4, 0.0);
  CHECK(cross_entropy(uniform, 2).loss == doctest::Approx(std::log(4.0)).epsilon(1e-12));

  Matrix sat(1, 3, 0.0);
  sat(0, 1) = 30.0;
  CHECK(cross_entropy(sat, 1).loss < 1e-12);

  RngStream rng(29);
  Matrix logits = gaussian_sample(rng, 1, 5);
  const CrossEntropyResult ce = cross_entropy(logits, 3);
  const double h = 1e-6;
  for (std::size_t i = 0; i < 5; ++i) {
    Matrix lp = logits, lm = logits;
    lp(0, i) += h;
    lm(0, i) -= h;
    const double fd =
        (cross_entropy(lp, 3).loss - cross_entropy(lm, 3).loss) / (2.0 * h);
    CHECK(std::fabs(ce.dlogits(0, i) - fd) < 1e-7);
  }

  CHECK_THROWS_AS(cross_entropy(uniform, 4), Error);
}

TEST_CASE("network_forward zero weights gives uniform softmax") {
  NetworkConfig cfg = tiny_config();
  cfg.num_speakers = 2;
  RngStream rng(5);
  NetworkState state = init_network(cfg, rng);
  zero_all_params(state);
  const Matrix feats(20, 4, 0.7);
  const ForwardTape tape = network_forward(state, feats, ForwardMode::kMean, nullptr);
  CHECK(tape.logits(0, 0) == 0.0);
  CHECK(tape.logits(0, 1) == 0.0);
  const auto probs = softmax_row(tape.logits);
  CHECK(probs[0] == doctest::Approx(0.5));
}

TEST_CASE("frame bookkeeping: Table-1 contexts leave T-14 frames after frame3") {
  NetworkConfig cfg = tiny_config();
  CHECK(cfg.receptive_field() == 15);
  RngStream rng(6);
  NetworkState state = init_network(cfg, rng);
  RngStream frng(7);
  const Matrix feats = gaussian_sample(frng, 20, 4);
  const ForwardTape tape = network_forward(state, feats, ForwardMode::kMean, nullptr);
  CHECK(tape.layers[0].post.rows() == 16);  // span 4
  CHECK(tape.layers[1].post.rows() == 12);  // span 4
  CHECK(tape.layers[2].post.rows() == 6);   // span 6 -> T - 14
  CHECK(tape.layers[5].post.rows() == 1);   // stats pooling collapses
}

TEST_CASE("network_forward rejects short utterances naming the minimum") {
  NetworkConfig cfg = tiny_config();
  RngStream rng(8);
  NetworkState state = init_network(cfg, rng);
  try {
    network_forward(state, Matrix(10, 4, 0.0), ForwardMode::kMean, nullptr);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("15") != std::string::npos);
  }
}

TEST_CASE("shift equivariance before pooling") {
  NetworkConfig cfg = tiny_config();
  RngStream rng(9);
  NetworkState state = init_network(cfg, rng);
  RngStream frng(10);
  const Matrix full = gaussian_sample(frng, 30, 4);
  const std::size_t shift = 5, len = 20;
  Matrix sliced(len, 4);
  for (std::size_t t = 0; t < len; ++t)
    for (std::size_t d = 0; d < 4; ++d) sliced(t, d) = full(t + shift, d);

  const ForwardTape tf = network_forward(state, full, ForwardMode::kMean, nullptr);
  const ForwardTape ts = network_forward(state, sliced, ForwardMode::kMean, nullptr);
  // frame5 outputs of the slice equal the matching rows of the full run.
  const Matrix& f5_full = tf.layers[4].post;
  const Matrix& f5_slice = ts.layers[4].post;
  for (std::size_t t = 0; t < f5_slice.rows(); ++t)
    for (std::size_t d = 0; d < f5_slice.cols(); ++d)
      CHECK(f5_slice(t, d) == f5_full(t + shift, d));

  // Pooling the same frame set gives identical statistics.
  const Matrix pooled_slice = stats_pool(f5_slice);
  Matrix same_rows(f5_slice.rows(), f5_slice.cols());
  for (std::size_t t = 0; t < f5_slice.rows(); ++t)
    for (std::size_t d = 0; d < f5_slice.cols(); ++d)
      same_rows(t, d) = f5_full(t + shift, d);
  const Matrix pooled_full_rows = stats_pool(same_rows);
  for (std::size_t i = 0; i < pooled_slice.size(); ++i)
    CHECK(pooled_slice.data()[i] == pooled_full_rows.data()[i]);
}

TEST_CASE("sample mode with zero eps equals mean mode bitwise") {
  NetworkConfig cfg = tiny_config();
  cfg.bayesian = true;
  cfg.variational_layers = {"frame1", "segment6"};
  RngStream rng(11);
  NetworkState state = init_network(cfg, rng);
  RngStream frng(12);
  const Matrix feats = gaussian_sample(frng, 18, 4);

  SampleMap zeros;
  for (std::size_t li = 0; li < state.stack.size(); ++li) {
    if (!state.params[li].variational) continue;
    const GaussianPosterior& post = state.params[li].post;
    zeros[state.stack[li].name] =
        sample_with_eps(post, Matrix(post.mu.rows(), post.mu.cols(), 0.0));
  }
  const ForwardTape tm = network_forward(state, feats, ForwardMode::kMean, nullptr);
  const ForwardTape tsample =
      network_forward(state, feats, ForwardMode::kSample, nullptr, &zeros);
  for (std::size_t i = 0; i < tm.logits.size(); ++i)
    CHECK(tm.logits.data()[i] == tsample.logits.data()[i]);
}

TEST_CASE("all-variational-off bayesian config equals the baseline network") {
  NetworkConfig base = tiny_config();
  NetworkConfig off = tiny_config();
  off.bayesian = true;
  off.variational_layers = {};
  RngStream r1(77), r2(77);
  NetworkState s1 = init_network(base, r1);
  NetworkState s2 = init_network(off, r2);
  RngStream frng(15);
  const Matrix feats = gaussian_sample(frng, 16, 4);
  const Matrix l1 = network_forward(s1, feats, ForwardMode::kMean, nullptr).logits;
  const Matrix l2 = network_forward(s2, feats, ForwardMode::kSample, &frng).logits;
  for (std::size_t i = 0; i < l1.size(); ++i) CHECK(l1.data()[i] == l2.data()[i]);
}

TEST_CASE("network_backward zero dlogits gives zero gradients") {
  NetworkConfig cfg = tiny_config();
  RngStream rng(16);
  NetworkState state = init_network(cfg, rng);
  RngStream frng(17);
  const Matrix feats = gaussian_sample(frng, 17, 4);
  const ForwardTape tape = network_forward(state, feats, ForwardMode::kMean, nullptr);
  const NetworkGrads grads =
      network_backward(state, tape, Matrix(1, cfg.num_speakers, 0.0));
  for (const auto& lg : grads.layers) {
    if (lg.dweight.empty()) continue;
    CHECK(max_abs(lg.dweight) == 0.0);
    if (!lg.dbias.empty()) CHECK(max_abs(lg.dbias) == 0.0);
  }
}

TEST_CASE("softmax head gradient is the analytic outer product") {
  NetworkConfig cfg = tiny_config();
  RngStream rng(18);
  NetworkState state = init_network(cfg, rng);
  RngStream frng(19);
  const Matrix feats = gaussian_sample(frng, 16, 4);
  const ForwardTape tape = network_forward(state, feats, ForwardMode::kMean, nullptr);
  const CrossEntropyResult ce = cross_entropy(tape.logits, 1);
  const NetworkGrads grads = network_backward(state, tape, ce.dlogits);

  const std::size_t head = state.layer_index("softmax");
  const Matrix& head_in = tape.layers[head].input;  // 1 x embedding_dim
  for (std::size_t o = 0; o < cfg.num_speakers; ++o)
    for (std::size_t i = 0; i < cfg.embedding_dim; ++i)
      CHECK(grads.layers[head].dweight(o, i) ==
            doctest::Approx(ce.dlogits(0, o) * head_in(0, i)).epsilon(1e-12));
}

TEST_CASE("every parameter matches central finite differences") {
  NetworkConfig cfg = tiny_config();
  const Matrix feats = [] {
    RngStream frng(20);
    return gaussian_sample(frng, 16, 4);
  }();
  double worst = 1e9;
  for (std::uint64_t seed = 1; seed < 30; ++seed) {
    RngStream rng(seed);
    NetworkState state = init_network(cfg, rng);
    const ForwardTape tape =
        network_forward(state, feats, ForwardMode::kMean, nullptr);
    if (relu_margin(tape, state) < 1e-3) continue;  // stay away from kinks
    worst = network_fd_check(state, feats, 2, 1e-6);
    break;
  }
  CHECK(worst < 1e-5);
}

TEST_CASE("bayesian network with zero eps reproduces the deterministic one") {
  NetworkConfig det_cfg = tiny_config();
  NetworkConfig bay_cfg = tiny_config();
  bay_cfg.bayesian = true;
  bay_cfg.variational_layers = {"frame1"};

  RngStream r1(99), r2(99);
  NetworkState det = init_network(det_cfg, r1);
  NetworkState bay = init_network(bay_cfg, r2);

  RngStream frng(21);
  const Matrix feats = gaussian_sample(frng, 18, 4);
  SampleMap zeros;
  const GaussianPosterior& post = bay.params[0].post;
  zeros["frame1"] = sample_with_eps(post, Matrix(post.mu.rows(), post.mu.cols(), 0.0));

  const ForwardTape td = network_forward(det, feats, ForwardMode::kMean, nullptr);
  const ForwardTape tb = network_forward(bay, feats, ForwardMode::kSample, nullptr, &zeros);
  for (std::size_t i = 0; i < td.logits.size(); ++i)
    CHECK(td.logits.data()[i] == tb.logits.data()[i]);

  const CrossEntropyResult cd = cross_entropy(td.logits, 0);
  const CrossEntropyResult cb = cross_entropy(tb.logits, 0);
  const NetworkGrads gd = network_backward(det, td, cd.dlogits);
  const NetworkGrads gb = network_backward(bay, tb, cb.dlogits);
  // The variational layer's G equals [dW | db] of the deterministic layer.
  const Matrix& dw = gd.layers[0].dweight;
  const Matrix& db = gd.layers[0].dbias;
  const Matrix& g = gb.layers[0].dweight;
  for (std::size_t r = 0; r < dw.rows(); ++r) {
    for (std::size_t c = 0; c < dw.cols(); ++c) CHECK(g(r, c) == dw(r, c));
    CHECK(g(r, dw.cols()) == db(0, r));
  }
}

TEST_CASE("extract_embedding dataflow") {
  NetworkConfig cfg = tiny_config();
  RngStream rng(31);
  NetworkState state = init_network(cfg, rng);
  RngStream frng(32);
  const Matrix feats = gaussian_sample(frng, 19, 4);

  // segment6 zero weights, bias b: embedding equals the bias row.
  NetworkState zeroed = state;
  const std::size_t seg6 = state.layer_index("segment6");
  for (std::size_t i = 0; i < zeroed.params[seg6].weight.size(); ++i)
    zeroed.params[seg6].weight.data()[i] = 0.0;
  for (std::size_t i = 0; i < cfg.embedding_dim; ++i)
    zeroed.params[seg6].bias(0, i) = 0.25 * static_cast<double>(i + 1);
  const Matrix emb0 = extract_embedding(zeroed, feats, ForwardMode::kMean, nullptr);
  for (std::size_t i = 0; i < cfg.embedding_dim; ++i)
    CHECK(emb0(0, i) == doctest::Approx(0.25 * static_cast<double>(i + 1)));

  // Unaffected by segment7 / softmax weights.
  const Matrix emb1 = extract_embedding(state, feats, ForwardMode::kMean, nullptr);
  NetworkState perturbed = state;
  const std::size_t seg7 = state.layer_index("segment7");
  const std::size_t head = state.layer_index("softmax");
  for (std::size_t i = 0; i < perturbed.params[seg7].weight.size(); ++i)
    perturbed.params[seg7].weight.data()[i] += 1.0;
  for (std::size_t i = 0; i < perturbed.params[head].weight.size(); ++i)
    perturbed.params[head].weight.data()[i] -= 2.0;
  const Matrix emb2 = extract_embedding(perturbed, feats, ForwardMode::kMean, nullptr);
  for (std::size_t i = 0; i < emb1.size(); ++i)
    CHECK(emb1.data()[i] == emb2.data()[i]);

  // Equals the forward tape's cached segment6 pre-activation.
  const ForwardTape tape = network_forward(state, feats, ForwardMode::kMean, nullptr);
  for (std::size_t i = 0; i < emb1.size(); ++i)
    CHECK(emb1.data()[i] == tape.layers[seg6].pre.data()[i]);
}

TEST_CASE("checkpoint round trip is bitwise and hash-checked") {
  NetworkConfig cfg = tiny_config();
  cfg.bayesian = true;
  cfg.variational_layers = {"frame1"};
  RngStream rng(41);
  NetworkState state = init_network(cfg, rng);
  state.params[0].prior.mu = state.params[0].post.mu;
  state.params[0].prior.sigma =
      Matrix(state.params[0].post.mu.rows(), state.params[0].post.mu.cols(), 0.1);

  const auto dir = std::filesystem::temp_directory_path() / "bxv_test_ckpt";
  std::filesystem::remove_all(dir);
  save_checkpoint(state, dir);
  const NetworkState loaded = load_checkpoint(dir);

  REQUIRE(loaded.stack.size() == state.stack.size());
  CHECK(loaded.config.bayesian);
  for (std::size_t li = 0; li < state.stack.size(); ++li) {
    const LayerParams& a = state.params[li];
    const LayerParams& b = loaded.params[li];
    REQUIRE(a.variational == b.variational);
    for (std::size_t i = 0; i < a.weight.size(); ++i)
      CHECK(a.weight.data()[i] == b.weight.data()[i]);
    for (std::size_t i = 0; i < a.post.mu.size(); ++i)
      CHECK(a.post.mu.data()[i] == b.post.mu.data()[i]);
  }

  // Corrupt a tensor: the loader must notice the hash mismatch.
  write_file(dir / "tensors" / "frame2.weight.bxm", "BXM1garbage.....");
  CHECK_THROWS_AS(load_checkpoint(dir), Error);
  std::filesystem::remove_all(dir);
}
