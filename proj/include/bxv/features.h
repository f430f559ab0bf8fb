// include/bxv/features.h

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

#include <cstddef>
#include <filesystem>
#include <vector>

#include "bxv/matrix.h"

namespace bxv {

struct Waveform {
  std::vector<double> samples;
  int sample_rate = 16000;
};

/// T x dim acoustic feature block with frame timing metadata.
struct FeatureMatrix {
  Matrix values;  // frames x coefficients
  double frame_shift_ms = 10.0;
  double frame_length_ms = 25.0;

  std::size_t frames() const { return values.rows(); }
  std::size_t dim() const { return values.cols(); }
};

struct MfccConfig {
  double frame_length_ms = 25.0;
  double frame_shift_ms = 10.0;
  std::size_t num_mel_filters = 40;
  std::size_t num_ceps = 30;
  double low_freq_hz = 20.0;
  double high_freq_hz = 0.0;  // 0 means Nyquist
  double log_floor = 1e-10;
};

struct VadConfig {
  double offset = -0.5;  // keep frames with c0 > mean(c0) + offset
};

/// y[n] = x[n] - coeff*x[n-1]; y[0] = x[0]*(1 - coeff), so the filter is
/// length-preserving and invertible.
Waveform pre_emphasis(const Waveform& w, double coeff);

/// 25ms/10ms Hamming frames, radix-2 FFT power spectrum, triangular mel
/// filterbank, log with floor, orthonormal DCT-II, first num_ceps kept.
/// The trailing partial window is dropped, so
/// frames = 1 + floor((samples - window) / shift).
FeatureMatrix frame_mfcc(const Waveform& w, const MfccConfig& cfg);

/// Per-frame mean subtraction over a centered window; near the utterance
/// edges the window shifts so it keeps length min(window_frames, T).
FeatureMatrix sliding_cmn(const FeatureMatrix& f, std::size_t window_frames);

/// Keeps frames whose c0 (log-energy proxy) exceeds the utterance c0 mean
/// plus cfg.offset.  Frame order is preserved.
FeatureMatrix energy_vad(const FeatureMatrix& f, const VadConfig& cfg);

/// Log mel filterbank energies for one frame, before the DCT.  Exposed for
/// inspection and testing.
std::vector<double> mel_filterbank_energies(const Waveform& w, const MfccConfig& cfg,
                                            std::size_t frame_index);
std::vector<double> mel_filter_centers_hz(int sample_rate, const MfccConfig& cfg);

// Waveform file: headerless little-endian 16-bit PCM plus a sibling
// "<path>.meta" whose single line reads "rate=<Hz>".
Waveform read_pcm(const std::filesystem::path& path);
void write_pcm(const std::filesystem::path& path, const Waveform& w);

// FeatureMatrix on disk: BXM1 plus a one-line sidecar
// "dim=<d> shift_ms=<s> length_ms=<l>".
void write_features(const std::filesystem::path& path, const FeatureMatrix& f);
FeatureMatrix read_features(const std::filesystem::path& path);

}  // namespace bxv
