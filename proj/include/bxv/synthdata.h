// include/bxv/synthdata.h

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
#include <string>
#include <utility>
#include <vector>

#include "bxv/config.h"
#include "bxv/corpus.h"

namespace bxv {

struct ChannelProfile {
  std::vector<double> offset;  // per-dimension, broadcast from scalar in config
  std::vector<double> scale;   // strictly positive
};

/// Seeded synthetic speaker-corpus recipe: per-speaker Gaussian means with
/// per-frame Gaussian noise and an affine per-utterance channel distortion.
struct SynthSpec {
  int num_speakers = 8;
  int utts_per_speaker = 10;
  int frames_min = 200;
  int frames_max = 300;
  int feature_dim = 10;
  double speaker_spread = 1.0;
  double noise_std = 0.2;
  std::vector<ChannelProfile> profiles;  // at least one; defaults to identity
  std::uint64_t seed = 1234;
  std::string prefix = "spk";

  static SynthSpec load(const std::filesystem::path& path);
  static SynthSpec from_config(const ConfigFile& cfg);
  void validate() const;
};

/// Deterministic in spec.seed.  profile_select < 0 assigns profiles
/// round-robin over utterances; otherwise every utterance gets the selected
/// profile.
Corpus generate_corpus(const SynthSpec& spec, int profile_select = -1);

/// Two corpora with freshly drawn, disjoint speakers: A uses profile 0 and
/// B uses profile 1, standing in for train/eval domains.
std::pair<Corpus, Corpus> make_domain_pair(const SynthSpec& spec);

}  // namespace bxv
