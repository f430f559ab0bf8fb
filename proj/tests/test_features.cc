// tests/test_features.cc

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
#include "bxv/features.h"
#include "bxv/rng.h"
#include "bxv/trainer.h"
#include "doctest.h"

using namespace bxv;

namespace {

Waveform random_wave(RngStream& rng, std::size_t n, int rate = 16000) {
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(n);
  for (double& s : w.samples) s = 0.1 * rng.next_gaussian();
  return w;
}

FeatureMatrix random_features(RngStream& rng, std::size_t t, std::size_t d) {
  FeatureMatrix f;
  f.values = gaussian_sample(rng, t, d);
  return f;
}

}  // namespace

TEST_CASE("pre_emphasis identity, arithmetic, loop oracle, inverse") {
  RngStream rng(1);
  const Waveform w = random_wave(rng, 400);
  const Waveform same = pre_emphasis(w, 0.0);
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    CHECK(same.samples[i] == w.samples[i]);

  Waveform ones;
  ones.samples = {1.0, 1.0, 1.0};
  const Waveform e = pre_emphasis(ones, 0.97);
  CHECK(e.samples[0] == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(e.samples[1] == doctest::Approx(0.03).epsilon(1e-12));
  CHECK(e.samples[2] == doctest::Approx(0.03).epsilon(1e-12));

  // Scalar-loop oracle, exact.
  const double c = 0.97;
  const Waveform y = pre_emphasis(w, c);
  CHECK(y.samples[0] == w.samples[0] * (1.0 - c));
  for (std::size_t n = 1; n < w.samples.size(); ++n)
    CHECK(y.samples[n] == w.samples[n] - c * w.samples[n - 1]);

  // Inverse filter reconstructs the input.
  std::vector<double> rec(y.samples.size());
  rec[0] = y.samples[0] / (1.0 - c);
  for (std::size_t n = 1; n < y.samples.size(); ++n)
    rec[n] = y.samples[n] + c * rec[n - 1];
  for (std::size_t n = 0; n < rec.size(); ++n)
    CHECK(std::fabs(rec[n] - w.samples[n]) < 1e-9);

  Waveform empty;
  CHECK_THROWS_AS(pre_emphasis(empty, 0.97), Error);
}

TEST_CASE("frame_mfcc frame count for 1 s at 16 kHz") {
  RngStream rng(2);
  const Waveform w = random_wave(rng, 16000);
  MfccConfig cfg;
  const FeatureMatrix f = frame_mfcc(w, cfg);
  CHECK(f.frames() == 98);  // 1 + (16000 - 400) / 160
  CHECK(f.dim() == cfg.num_ceps);
}

TEST_CASE("frame_mfcc output dim equals num_ceps for any input") {
  RngStream rng(3);
  MfccConfig cfg;
  cfg.num_ceps = 13;
  for (std::size_t n : {400u, 650u, 1600u, 5000u}) {
    const Waveform w = random_wave(rng, n);
    CHECK(frame_mfcc(w, cfg).dim() == 13);
  }
}

TEST_CASE("frame_mfcc all-zero waveform yields identical frames") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.assign(4000, 0.0);
  const FeatureMatrix f = frame_mfcc(w, MfccConfig{});
  for (std::size_t t = 1; t < f.frames(); ++t)
    for (std::size_t d = 0; d < f.dim(); ++d)
      CHECK(f.values(t, d) == f.values(0, d));
}

TEST_CASE("frame_mfcc rejects waveforms shorter than one window") {
  RngStream rng(4);
  const Waveform w = random_wave(rng, 399);
  CHECK_THROWS_AS(frame_mfcc(w, MfccConfig{}), Error);
}

TEST_CASE("pure 1 kHz tone peaks in the nearest mel filter") {
  Waveform w;
  w.sample_rate = 16000;
  w.samples.resize(8000);
  for (std::size_t n = 0; n < w.samples.size(); ++n)
    w.samples[n] = std::sin(2.0 * M_PI * 1000.0 * static_cast<double>(n) / 16000.0);
  MfccConfig cfg;
  const auto energies = mel_filterbank_energies(w, cfg, 10);
  const auto centers = mel_filter_centers_hz(16000, cfg);
  std::size_t argmax = 0, nearest = 0;
  for (std::size_t i = 1; i < energies.size(); ++i)
    if (energies[i] > energies[argmax]) argmax = i;
  for (std::size_t i = 1; i < centers.size(); ++i)
    if (std::fabs(centers[i] - 1000.0) < std::fabs(centers[nearest] - 1000.0))
      nearest = i;
  CHECK(argmax == nearest);

  // Direct-DFT oracle for the winning filter's energy (independent of the FFT).
  const std::size_t win = 400, nfft = 512;
  std::vector<double> frame(win);
  const std::size_t start = 10 * 160;
  for (std::size_t n = 0; n < win; ++n) {
    const double ham = 0.54 - 0.46 * std::cos(2.0 * M_PI * n / (win - 1));
    frame[n] = w.samples[start + n] * ham;
  }
  std::vector<double> power(nfft / 2 + 1);
  for (std::size_t k = 0; k < power.size(); ++k) {
    double re = 0.0, im = 0.0;
    for (std::size_t n = 0; n < win; ++n) {
      const double ang = -2.0 * M_PI * static_cast<double>(k * n) / nfft;
      re += frame[n] * std::cos(ang);
      im += frame[n] * std::sin(ang);
    }
    power[k] = re * re + im * im;
  }
  // The FFT bin nearest 1 kHz dominates the oracle spectrum.
  std::size_t bin_argmax = 0;
  for (std::size_t k = 1; k < power.size(); ++k)
    if (power[k] > power[bin_argmax]) bin_argmax = k;
  CHECK(bin_argmax == 32);  // 1000 Hz / (16000/512)
}

TEST_CASE("sliding_cmn constant input, global degenerate window, oracle") {
  FeatureMatrix constant;
  constant.values = Matrix(40, 3, 2.5);
  const FeatureMatrix z = sliding_cmn(constant, 11);
  CHECK(max_abs(z.values) < 1e-12);

  RngStream rng(5);
  const FeatureMatrix f = random_features(rng, 20, 4);
  // T <= window: equivalent to global mean subtraction.
  const FeatureMatrix g = sliding_cmn(f, 300);
  for (std::size_t d = 0; d < 4; ++d) {
    double mean = 0.0;
    for (std::size_t t = 0; t < 20; ++t) mean += f.values(t, d);
    mean /= 20.0;
    for (std::size_t t = 0; t < 20; ++t)
      CHECK(std::fabs(g.values(t, d) - (f.values(t, d) - mean)) < 1e-12);
  }

  // Brute-force per-frame window mean oracle.
  const FeatureMatrix big = random_features(rng, 500, 4);
  const std::size_t win = 300;
  const FeatureMatrix c = sliding_cmn(big, win);
  for (std::size_t t = 0; t < 500; ++t) {
    std::size_t start = t > win / 2 ? t - win / 2 : 0;
    if (start + win > 500) start = 500 - win;
    for (std::size_t d = 0; d < 4; ++d) {
      double mean = 0.0;
      for (std::size_t k = start; k < start + win; ++k) mean += big.values(k, d);
      mean /= static_cast<double>(win);
      CHECK(std::fabs(c.values(t, d) - (big.values(t, d) - mean)) < 1e-12);
    }
  }
}

TEST_CASE("sliding_cmn idempotent for window >= T") {
  RngStream rng(6);
  const FeatureMatrix f = random_features(rng, 50, 5);
  const FeatureMatrix once = sliding_cmn(f, 64);
  const FeatureMatrix twice = sliding_cmn(once, 64);
  CHECK(max_abs(sub(twice.values, once.values)) < 1e-10);
}

TEST_CASE("energy_vad retention rules") {
  // All frames identical: everything retained at the default offset.
  FeatureMatrix constant;
  constant.values = Matrix(10, 3, 1.0);
  CHECK(energy_vad(constant, VadConfig{}).frames() == 10);

  // Separable halves at offset 0: exactly the high-energy half.
  FeatureMatrix halves;
  halves.values = Matrix(10, 2, 0.0);
  for (std::size_t t = 0; t < 10; ++t) halves.values(t, 0) = t < 5 ? 10.0 : -10.0;
  VadConfig zero_offset;
  zero_offset.offset = 0.0;
  const FeatureMatrix kept = energy_vad(halves, zero_offset);
  CHECK(kept.frames() == 5);
  for (std::size_t t = 0; t < 5; ++t) CHECK(kept.values(t, 0) == 10.0);

  // Brute-force threshold filter oracle + subsequence property.
  RngStream rng(7);
  const FeatureMatrix f = random_features(rng, 200, 4);
  VadConfig cfg;
  cfg.offset = -0.2;
  const FeatureMatrix v = energy_vad(f, cfg);
  double mean = 0.0;
  for (std::size_t t = 0; t < 200; ++t) mean += f.values(t, 0);
  mean /= 200.0;
  std::vector<std::size_t> want;
  for (std::size_t t = 0; t < 200; ++t)
    if (f.values(t, 0) > mean + cfg.offset) want.push_back(t);
  REQUIRE(v.frames() == want.size());
  for (std::size_t i = 0; i < want.size(); ++i)
    for (std::size_t d = 0; d < 4; ++d)
      CHECK(v.values(i, d) == f.values(want[i], d));

  // Everything below threshold: error telling the caller to relax it.
  VadConfig harsh;
  harsh.offset = 1e9;
  try {
    energy_vad(f, harsh);
    FAIL("expected error");
  } catch (const Error& e) {
    CHECK(std::string(e.what()).find("relax") != std::string::npos);
  }
}

TEST_CASE("audio front-end feeds the trainer end to end") {
  // Two synthetic "speakers" as sinusoid mixtures through the full recipe
  // chain: pre-emphasis, MFCC, sliding CMN, energy VAD, then a short
  // training run on the resulting corpus.
  RngStream rng(777);
  Corpus corpus;
  MfccConfig mfcc;
  mfcc.num_ceps = 8;
  // Speech-like structure: voiced segments alternating between two
  // speaker-specific tones, separated by near-silent gaps for the VAD to
  // prune.  A stationary tone would leave nothing after mean normalization.
  const double tone_lo[2] = {400.0, 700.0};
  const double tone_hi[2] = {520.0, 880.0};
  for (int spk = 0; spk < 2; ++spk) {
    for (int utt = 0; utt < 4; ++utt) {
      Waveform w;
      w.sample_rate = 16000;
      w.samples.resize(16000);  // 1 s -> 98 frames
      const double detune = 1.0 + 0.02 * utt;
      for (std::size_t n = 0; n < w.samples.size(); ++n) {
        const double t = static_cast<double>(n) / 16000.0;
        const std::size_t seg = n / 2400;          // 0.15 s segments
        const bool silent = n % 2400 >= 1920;      // trailing 0.03 s gap
        const double f = ((seg % 2) ? tone_hi[spk] : tone_lo[spk]) * detune;
        w.samples[n] = silent ? 0.005 * rng.next_gaussian()
                              : 0.5 * std::sin(2.0 * M_PI * f * t) +
                                    0.05 * rng.next_gaussian();
      }
      const Waveform pre = pre_emphasis(w, 0.97);
      FeatureMatrix feats = frame_mfcc(pre, mfcc);
      feats = energy_vad(feats, VadConfig{});  // on raw c0, before CMN
      feats = sliding_cmn(feats, 300);
      REQUIRE(feats.frames() >= 20);
      Utterance u;
      u.id = "s" + std::to_string(spk) + "_u" + std::to_string(utt);
      u.speaker_name = "s" + std::to_string(spk);
      u.feats = std::move(feats);
      corpus.utterances.push_back(std::move(u));
    }
  }
  corpus.assign_speaker_ids();

  NetworkConfig net;
  net.feature_dim = 8;
  net.num_speakers = 2;
  net.hidden_dim = 8;
  net.stats_input_dim = 8;
  net.embedding_dim = 6;
  TrainConfig tc;
  tc.lr = 0.1;
  tc.momentum = 0.5;
  tc.epochs = 30;
  tc.minibatch_size = 4;
  tc.chunk_min = 20;
  tc.chunk_max = 60;
  tc.seed = 3;
  const TrainResult r = train_baseline(corpus, net, tc);
  double best = 0.0;
  for (const EpochStats& e : r.trace) best = std::max(best, e.accuracy);
  CHECK(std::isfinite(r.trace.back().total));
  CHECK(best >= 0.9);  // the two tonal classes separate quickly
}

TEST_CASE("PCM and feature file round trips") {
  const auto dir = std::filesystem::temp_directory_path() / "bxv_test_features";
  std::filesystem::create_directories(dir);
  RngStream rng(8);
  Waveform w = random_wave(rng, 1000, 8000);
  write_pcm(dir / "x.pcm", w);
  const Waveform back = read_pcm(dir / "x.pcm");
  CHECK(back.sample_rate == 8000);
  REQUIRE(back.samples.size() == w.samples.size());
  for (std::size_t i = 0; i < w.samples.size(); ++i)
    CHECK(std::fabs(back.samples[i] - w.samples[i]) <= 1.0 / 32768.0);

  FeatureMatrix f = random_features(rng, 30, 13);
  write_features(dir / "f.bxm", f);
  const FeatureMatrix fb = read_features(dir / "f.bxm");
  REQUIRE(fb.values.same_shape(f.values));
  for (std::size_t i = 0; i < f.values.size(); ++i)
    CHECK(fb.values.data()[i] == f.values.data()[i]);
  CHECK(fb.frame_shift_ms == f.frame_shift_ms);
  std::filesystem::remove_all(dir);
}
