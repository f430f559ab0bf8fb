// include/bxv/corpus.h

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

#include <filesystem>
#include <string>
#include <vector>

#include "bxv/backend.h"
#include "bxv/features.h"

namespace bxv {

struct Utterance {
  std::string id;
  std::string speaker_name;
  int speaker = -1;  // dense 0..N-1 index assigned at load/build
  FeatureMatrix feats;
};

/// Labeled utterance collection; speaker ids are dense indices into
/// speaker_names (sorted lexicographically).
struct Corpus {
  std::vector<Utterance> utterances;
  std::vector<std::string> speaker_names;

  std::size_t num_speakers() const { return speaker_names.size(); }
  std::size_t feature_dim() const {
    return utterances.empty() ? 0 : utterances.front().feats.dim();
  }
  void assign_speaker_ids();  // rebuilds speaker_names + dense ids
};

// On-disk layout: <dir>/manifest ("bxv-corpus v1" + "utt <id> <relpath>"
// lines), <dir>/utt2spk ("<utt_id> <speaker>"), feature files under
// <dir>/feats/ in BXM1 format with .meta sidecars.
void save_corpus(const Corpus& corpus, const std::filesystem::path& dir);
Corpus load_corpus(const std::filesystem::path& dir);

/// Every unordered utterance pair of the corpus, labeled target iff the two
/// utterances share a speaker.  Deterministic order (manifest order).
TrialList make_all_pairs_trials(const Corpus& corpus);

}  // namespace bxv
