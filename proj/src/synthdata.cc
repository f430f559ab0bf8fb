// src/synthdata.cc

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

#include "bxv/synthdata.h"

#include <cstdio>

#include "bxv/error.h"
#include "bxv/rng.h"

namespace bxv {

namespace {

std::vector<double> broadcast(const std::vector<double>& v, std::size_t dim,
                              const std::string& what) {
  if (v.size() == dim) return v;
  if (v.size() == 1) return std::vector<double>(dim, v[0]);
  throw_usage(what + ": expected 1 or " + std::to_string(dim) + " values, got " +
              std::to_string(v.size()));
}

}  // namespace

SynthSpec SynthSpec::load(const std::filesystem::path& path) {
  return from_config(ConfigFile::load(path));
}

SynthSpec SynthSpec::from_config(const ConfigFile& cfg) {
  std::set<std::string> allowed = {"num_speakers", "utts_per_speaker", "frames_min",
                                   "frames_max",   "feature_dim",      "speaker_spread",
                                   "noise_std",    "seed",             "prefix"};
  for (int k = 0; k < 16; ++k) {
    allowed.insert("profile" + std::to_string(k) + "_offset");
    allowed.insert("profile" + std::to_string(k) + "_scale");
  }
  cfg.require_keys_in(allowed);

  SynthSpec s;
  s.num_speakers = static_cast<int>(cfg.get_int("num_speakers", s.num_speakers));
  s.utts_per_speaker =
      static_cast<int>(cfg.get_int("utts_per_speaker", s.utts_per_speaker));
  s.frames_min = static_cast<int>(cfg.get_int("frames_min", s.frames_min));
  s.frames_max = static_cast<int>(cfg.get_int("frames_max", s.frames_max));
  s.feature_dim = static_cast<int>(cfg.get_int("feature_dim", s.feature_dim));
  s.speaker_spread = cfg.get_real("speaker_spread", s.speaker_spread);
  s.noise_std = cfg.get_real("noise_std", s.noise_std);
  s.seed = static_cast<std::uint64_t>(cfg.get_int("seed", static_cast<long long>(s.seed)));
  s.prefix = cfg.get_string("prefix", s.prefix);

  const auto dim = static_cast<std::size_t>(s.feature_dim);
  for (int k = 0; k < 16; ++k) {
    const std::string off_key = "profile" + std::to_string(k) + "_offset";
    const std::string scale_key = "profile" + std::to_string(k) + "_scale";
    if (!cfg.has(off_key) && !cfg.has(scale_key)) break;
    ChannelProfile p;
    p.offset = cfg.has(off_key) ? broadcast(cfg.get_real_list(off_key), dim, off_key)
                                : std::vector<double>(dim, 0.0);
    p.scale = cfg.has(scale_key)
                  ? broadcast(cfg.get_real_list(scale_key), dim, scale_key)
                  : std::vector<double>(dim, 1.0);
    s.profiles.push_back(std::move(p));
  }
  if (s.profiles.empty()) {
    ChannelProfile identity;
    identity.offset.assign(dim, 0.0);
    identity.scale.assign(dim, 1.0);
    s.profiles.push_back(std::move(identity));
  }
  s.validate();
  return s;
}

void SynthSpec::validate() const {
  if (num_speakers < 1 || utts_per_speaker < 1)
    throw_usage("synth spec: num_speakers and utts_per_speaker must be >= 1");
  if (frames_min < 1 || frames_max < frames_min)
    throw_usage("synth spec: need 1 <= frames_min <= frames_max");
  if (feature_dim < 1) throw_usage("synth spec: feature_dim must be >= 1");
  if (speaker_spread <= 0.0) throw_usage("synth spec: speaker_spread must be > 0");
  if (noise_std <= 0.0) throw_usage("synth spec: noise_std must be > 0");
  for (const ChannelProfile& p : profiles) {
    if (p.offset.size() != static_cast<std::size_t>(feature_dim) ||
        p.scale.size() != static_cast<std::size_t>(feature_dim))
      throw_usage("synth spec: profile vectors must have feature_dim entries");
    for (double sc : p.scale)
      if (sc <= 0.0) throw_usage("synth spec: profile scales must be > 0");
  }
}

Corpus generate_corpus(const SynthSpec& spec, int profile_select) {
  spec.validate();
  if (profile_select >= static_cast<int>(spec.profiles.size()))
    throw_usage("generate_corpus: profile " + std::to_string(profile_select) +
                " requested but spec has " + std::to_string(spec.profiles.size()));
  const auto dim = static_cast<std::size_t>(spec.feature_dim);
  RngStream root(spec.seed);
  RngStream spk_rng = root.fork(1);

  std::vector<std::vector<double>> means(spec.num_speakers,
                                         std::vector<double>(dim, 0.0));
  for (auto& m : means)
    for (double& v : m) v = spec.speaker_spread * spk_rng.next_gaussian();

  Corpus corpus;
  int utt_index = 0;
  for (int s = 0; s < spec.num_speakers; ++s) {
    char spk_name[64];
    std::snprintf(spk_name, sizeof spk_name, "%s%03d", spec.prefix.c_str(), s);
    for (int u = 0; u < spec.utts_per_speaker; ++u, ++utt_index) {
      RngStream utt_rng = root.fork(1000 + static_cast<std::uint64_t>(utt_index));
      const int frames =
          spec.frames_min +
          static_cast<int>(utt_rng.next_below(
              static_cast<std::uint64_t>(spec.frames_max - spec.frames_min + 1)));
      const int prof_idx = profile_select >= 0
                               ? profile_select
                               : utt_index % static_cast<int>(spec.profiles.size());
      const ChannelProfile& prof = spec.profiles[prof_idx];

      Utterance utt;
      char utt_name[96];
      std::snprintf(utt_name, sizeof utt_name, "%s_u%03d", spk_name, u);
      utt.id = utt_name;
      utt.speaker_name = spk_name;
      utt.feats.values = Matrix(frames, dim);
      for (int t = 0; t < frames; ++t)
        for (std::size_t d = 0; d < dim; ++d) {
          const double clean = means[s][d] + spec.noise_std * utt_rng.next_gaussian();
          utt.feats.values(t, d) = clean * prof.scale[d] + prof.offset[d];
        }
      corpus.utterances.push_back(std::move(utt));
    }
  }
  corpus.assign_speaker_ids();
  return corpus;
}

std::pair<Corpus, Corpus> make_domain_pair(const SynthSpec& spec) {
  if (spec.profiles.size() < 2)
    throw_usage("make_domain_pair: spec needs at least 2 channel profiles, has " +
                std::to_string(spec.profiles.size()));
  SynthSpec spec_a = spec;
  spec_a.seed = RngStream(spec.seed).fork(71).seed();
  spec_a.prefix = "a_" + spec.prefix;
  SynthSpec spec_b = spec;
  spec_b.seed = RngStream(spec.seed).fork(72).seed();
  spec_b.prefix = "b_" + spec.prefix;
  return {generate_corpus(spec_a, 0), generate_corpus(spec_b, 1)};
}

}  // namespace bxv
