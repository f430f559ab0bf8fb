// src/features.cc

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

#include "bxv/features.h"

#include <cmath>
#include <complex>
#include <string>

#include "bxv/error.h"
#include "bxv/io.h"

namespace bxv {

namespace {

constexpr double kPi = 3.14159265358979323846;

double hz_to_mel(double hz) { return 2595.0 * std::log10(1.0 + hz / 700.0); }
double mel_to_hz(double mel) { return 700.0 * (std::pow(10.0, mel / 2595.0) - 1.0); }

std::size_t next_pow2(std::size_t n) {
  std::size_t p = 1;
  while (p < n) p <<= 1;
  return p;
}

// Iterative radix-2 Cooley-Tukey; size must be a power of two.
void fft_inplace(std::vector<std::complex<double>>& a) {
  const std::size_t n = a.size();
  for (std::size_t i = 1, j = 0; i < n; ++i) {
    std::size_t bit = n >> 1;
    for (; j & bit; bit >>= 1) j ^= bit;
    j ^= bit;
    if (i < j) std::swap(a[i], a[j]);
  }
  for (std::size_t len = 2; len <= n; len <<= 1) {
    const double ang = -2.0 * kPi / static_cast<double>(len);
    const std::complex<double> wlen(std::cos(ang), std::sin(ang));
    for (std::size_t i = 0; i < n; i += len) {
      std::complex<double> w(1.0, 0.0);
      for (std::size_t k = 0; k < len / 2; ++k) {
        const std::complex<double> u = a[i + k];
        const std::complex<double> v = a[i + k + len / 2] * w;
        a[i + k] = u + v;
        a[i + k + len / 2] = u - v;
        w *= wlen;
      }
    }
  }
}

struct FrameGeometry {
  std::size_t window = 0, shift = 0, nfft = 0, num_frames = 0;
};

FrameGeometry frame_geometry(const Waveform& w, const MfccConfig& cfg) {
  FrameGeometry g;
  g.window = static_cast<std::size_t>(w.sample_rate * cfg.frame_length_ms / 1000.0);
  g.shift = static_cast<std::size_t>(w.sample_rate * cfg.frame_shift_ms / 1000.0);
  if (g.window == 0 || g.shift == 0)
    throw_data("frame_mfcc: degenerate frame geometry");
  if (w.samples.size() < g.window)
    throw_data("frame_mfcc: waveform has " + std::to_string(w.samples.size()) +
               " samples, shorter than one " + std::to_string(g.window) +
               "-sample window");
  g.nfft = next_pow2(g.window);
  g.num_frames = 1 + (w.samples.size() - g.window) / g.shift;
  return g;
}

// One triangular filter as (first_bin, weights).
struct MelFilter {
  std::size_t first = 0;
  std::vector<double> weights;
};

std::vector<MelFilter> build_mel_bank(int sample_rate, std::size_t nfft,
                                      const MfccConfig& cfg) {
  const double high = cfg.high_freq_hz > 0 ? cfg.high_freq_hz : sample_rate / 2.0;
  const double mel_lo = hz_to_mel(cfg.low_freq_hz);
  const double mel_hi = hz_to_mel(high);
  const std::size_t m = cfg.num_mel_filters;
  std::vector<double> edges(m + 2);
  for (std::size_t i = 0; i < m + 2; ++i)
    edges[i] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(i) /
                                      static_cast<double>(m + 1));
  const std::size_t num_bins = nfft / 2 + 1;
  const double bin_hz = static_cast<double>(sample_rate) / static_cast<double>(nfft);
  std::vector<MelFilter> bank(m);
  for (std::size_t f = 0; f < m; ++f) {
    const double left = edges[f], center = edges[f + 1], right = edges[f + 2];
    MelFilter filt;
    bool started = false;
    for (std::size_t k = 0; k < num_bins; ++k) {
      const double hz = bin_hz * static_cast<double>(k);
      double wgt = 0.0;
      if (hz > left && hz < right)
        wgt = hz <= center ? (hz - left) / (center - left)
                           : (right - hz) / (right - center);
      if (wgt > 0.0) {
        if (!started) {
          filt.first = k;
          started = true;
        }
        filt.weights.push_back(wgt);
      } else if (started) {
        break;
      }
    }
    bank[f] = std::move(filt);
  }
  return bank;
}

std::vector<double> frame_power_spectrum(const Waveform& w, const FrameGeometry& g,
                                         std::size_t frame_index) {
  std::vector<std::complex<double>> buf(g.nfft, {0.0, 0.0});
  const std::size_t start = frame_index * g.shift;
  const double denom = static_cast<double>(g.window - 1);
  for (std::size_t n = 0; n < g.window; ++n) {
    const double ham = 0.54 - 0.46 * std::cos(2.0 * kPi * static_cast<double>(n) / denom);
    buf[n] = w.samples[start + n] * ham;
  }
  fft_inplace(buf);
  std::vector<double> power(g.nfft / 2 + 1);
  for (std::size_t k = 0; k < power.size(); ++k) power[k] = std::norm(buf[k]);
  return power;
}

std::vector<double> log_mel_from_power(const std::vector<double>& power,
                                       const std::vector<MelFilter>& bank,
                                       double log_floor) {
  std::vector<double> out(bank.size());
  for (std::size_t f = 0; f < bank.size(); ++f) {
    double e = 0.0;
    for (std::size_t i = 0; i < bank[f].weights.size(); ++i)
      e += bank[f].weights[i] * power[bank[f].first + i];
    out[f] = std::log(std::max(e, log_floor));
  }
  return out;
}

}  // namespace

Waveform pre_emphasis(const Waveform& w, double coeff) {
  if (w.samples.empty()) throw_data("pre_emphasis: empty waveform");
  if (coeff < 0.0 || coeff >= 1.0)
    throw_data("pre_emphasis: coefficient must be in [0, 1), got " +
               std::to_string(coeff));
  Waveform out;
  out.sample_rate = w.sample_rate;
  out.samples.resize(w.samples.size());
  out.samples[0] = w.samples[0] * (1.0 - coeff);
  for (std::size_t n = 1; n < w.samples.size(); ++n)
    out.samples[n] = w.samples[n] - coeff * w.samples[n - 1];
  return out;
}

FeatureMatrix frame_mfcc(const Waveform& w, const MfccConfig& cfg) {
  const FrameGeometry g = frame_geometry(w, cfg);
  const auto bank = build_mel_bank(w.sample_rate, g.nfft, cfg);
  const std::size_t m = cfg.num_mel_filters;
  if (cfg.num_ceps < 1 || cfg.num_ceps > m)
    throw_data("frame_mfcc: num_ceps must be in [1, " + std::to_string(m) + "]");

  // Orthonormal DCT-II basis, num_ceps x num_mel.
  Matrix dct(cfg.num_ceps, m);
  for (std::size_t k = 0; k < cfg.num_ceps; ++k) {
    const double alpha = std::sqrt((k == 0 ? 1.0 : 2.0) / static_cast<double>(m));
    for (std::size_t j = 0; j < m; ++j)
      dct(k, j) = alpha * std::cos(kPi * static_cast<double>(k) *
                                   (static_cast<double>(j) + 0.5) /
                                   static_cast<double>(m));
  }

  FeatureMatrix out;
  out.frame_shift_ms = cfg.frame_shift_ms;
  out.frame_length_ms = cfg.frame_length_ms;
  out.values = Matrix(g.num_frames, cfg.num_ceps);
  for (std::size_t t = 0; t < g.num_frames; ++t) {
    const auto power = frame_power_spectrum(w, g, t);
    const auto logmel = log_mel_from_power(power, bank, cfg.log_floor);
    for (std::size_t k = 0; k < cfg.num_ceps; ++k) {
      double c = 0.0;
      for (std::size_t j = 0; j < m; ++j) c += dct(k, j) * logmel[j];
      out.values(t, k) = c;
    }
  }
  ensure_finite(out.values, "frame_mfcc");
  return out;
}

std::vector<double> mel_filterbank_energies(const Waveform& w, const MfccConfig& cfg,
                                            std::size_t frame_index) {
  const FrameGeometry g = frame_geometry(w, cfg);
  if (frame_index >= g.num_frames)
    throw_data("mel_filterbank_energies: frame index out of range");
  const auto bank = build_mel_bank(w.sample_rate, g.nfft, cfg);
  const auto power = frame_power_spectrum(w, g, frame_index);
  return log_mel_from_power(power, bank, cfg.log_floor);
}

std::vector<double> mel_filter_centers_hz(int sample_rate, const MfccConfig& cfg) {
  const double high = cfg.high_freq_hz > 0 ? cfg.high_freq_hz : sample_rate / 2.0;
  const double mel_lo = hz_to_mel(cfg.low_freq_hz);
  const double mel_hi = hz_to_mel(high);
  std::vector<double> centers(cfg.num_mel_filters);
  for (std::size_t f = 0; f < cfg.num_mel_filters; ++f)
    centers[f] = mel_to_hz(mel_lo + (mel_hi - mel_lo) * static_cast<double>(f + 1) /
                                        static_cast<double>(cfg.num_mel_filters + 1));
  return centers;
}

FeatureMatrix sliding_cmn(const FeatureMatrix& f, std::size_t window_frames) {
  if (window_frames < 1) throw_data("sliding_cmn: window must be >= 1 frame");
  const std::size_t t_total = f.frames();
  const std::size_t dim = f.dim();
  const std::size_t win = window_frames < t_total ? window_frames : t_total;
  FeatureMatrix out = f;
  for (std::size_t t = 0; t < t_total; ++t) {
    // Centered window, shifted at the edges so it keeps full length.
    std::size_t start = t > win / 2 ? t - win / 2 : 0;
    if (start + win > t_total) start = t_total - win;
    for (std::size_t d = 0; d < dim; ++d) {
      double mean = 0.0;
      for (std::size_t k = start; k < start + win; ++k) mean += f.values(k, d);
      mean /= static_cast<double>(win);
      out.values(t, d) = f.values(t, d) - mean;
    }
  }
  return out;
}

FeatureMatrix energy_vad(const FeatureMatrix& f, const VadConfig& cfg) {
  if (f.frames() < 1) throw_data("energy_vad: empty feature matrix");
  const std::size_t t_total = f.frames();
  double mean_c0 = 0.0;
  for (std::size_t t = 0; t < t_total; ++t) mean_c0 += f.values(t, 0);
  mean_c0 /= static_cast<double>(t_total);
  const double threshold = mean_c0 + cfg.offset;

  std::vector<std::size_t> keep;
  for (std::size_t t = 0; t < t_total; ++t)
    if (f.values(t, 0) > threshold) keep.push_back(t);
  if (keep.empty())
    throw_data("energy_vad: no frames above threshold " +
               std::to_string(threshold) +
               "; relax the VAD offset (current offset " +
               std::to_string(cfg.offset) + ")");

  FeatureMatrix out;
  out.frame_shift_ms = f.frame_shift_ms;
  out.frame_length_ms = f.frame_length_ms;
  out.values = Matrix(keep.size(), f.dim());
  for (std::size_t i = 0; i < keep.size(); ++i)
    for (std::size_t d = 0; d < f.dim(); ++d)
      out.values(i, d) = f.values(keep[i], d);
  return out;
}

Waveform read_pcm(const std::filesystem::path& path) {
  const std::string raw = read_file(path);
  if (raw.size() % 2 != 0)
    throw_data(path.string() + ": PCM file has odd byte count");
  const auto meta_lines = read_lines(path.string() + ".meta");
  int rate = 0;
  for (const auto& line : meta_lines) {
    if (line.rfind("rate=", 0) == 0) rate = std::atoi(line.c_str() + 5);
  }
  if (rate != 8000 && rate != 16000)
    throw_data(path.string() + ".meta: rate must be 8000 or 16000, got " +
               std::to_string(rate));
  Waveform w;
  w.sample_rate = rate;
  w.samples.resize(raw.size() / 2);
  const auto* p = reinterpret_cast<const unsigned char*>(raw.data());
  for (std::size_t i = 0; i < w.samples.size(); ++i) {
    const std::int16_t s =
        static_cast<std::int16_t>(p[2 * i] | (p[2 * i + 1] << 8));
    w.samples[i] = static_cast<double>(s) / 32768.0;
  }
  return w;
}

void write_pcm(const std::filesystem::path& path, const Waveform& w) {
  std::string raw;
  raw.reserve(2 * w.samples.size());
  for (double v : w.samples) {
    double clamped = v < -1.0 ? -1.0 : (v > 0.999969482421875 ? 0.999969482421875 : v);
    const auto s = static_cast<std::int16_t>(std::lrint(clamped * 32768.0));
    raw.push_back(static_cast<char>(s & 0xFF));
    raw.push_back(static_cast<char>((s >> 8) & 0xFF));
  }
  write_file(path, raw);
  write_file(path.string() + ".meta", "rate=" + std::to_string(w.sample_rate) + "\n");
}

void write_features(const std::filesystem::path& path, const FeatureMatrix& f) {
  write_bxm(path, f.values);
  write_file(path.string() + ".meta",
             "dim=" + std::to_string(f.dim()) + " shift_ms=" +
                 format_double("%g", f.frame_shift_ms) + " length_ms=" +
                 format_double("%g", f.frame_length_ms) + "\n");
}

FeatureMatrix read_features(const std::filesystem::path& path) {
  FeatureMatrix f;
  f.values = read_bxm(path);
  const std::filesystem::path meta = path.string() + ".meta";
  if (std::filesystem::exists(meta)) {
    for (const std::string& tok : split_ws(read_lines(meta).at(0))) {
      if (tok.rfind("shift_ms=", 0) == 0) f.frame_shift_ms = std::atof(tok.c_str() + 9);
      if (tok.rfind("length_ms=", 0) == 0) f.frame_length_ms = std::atof(tok.c_str() + 10);
    }
  }
  return f;
}

}  // namespace bxv
