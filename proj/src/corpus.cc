// src/corpus.cc

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

#include "bxv/corpus.h"

#include <algorithm>
#include <map>
#include <set>

#include "bxv/error.h"
#include "bxv/io.h"

namespace bxv {

void Corpus::assign_speaker_ids() {
  std::set<std::string> names;
  for (const Utterance& u : utterances) names.insert(u.speaker_name);
  speaker_names.assign(names.begin(), names.end());
  std::map<std::string, int> index;
  for (std::size_t i = 0; i < speaker_names.size(); ++i)
    index[speaker_names[i]] = static_cast<int>(i);
  for (Utterance& u : utterances) u.speaker = index[u.speaker_name];
}

void save_corpus(const Corpus& corpus, const std::filesystem::path& dir) {
  ensure_dir(dir);
  ensure_dir(dir / "feats");
  std::string manifest = "bxv-corpus v1\n";
  std::string utt2spk;
  std::set<std::string> seen;
  for (const Utterance& u : corpus.utterances) {
    if (!seen.insert(u.id).second)
      throw_data("save_corpus: duplicate utterance id '" + u.id + "'");
    const std::string rel = "feats/" + u.id + ".bxm";
    write_features(dir / rel, u.feats);
    manifest += "utt " + u.id + " " + rel + "\n";
    utt2spk += u.id + " " + u.speaker_name + "\n";
  }
  write_file(dir / "manifest", manifest);
  write_file(dir / "utt2spk", utt2spk);
}

Corpus load_corpus(const std::filesystem::path& dir) {
  const auto lines = read_lines(dir / "manifest");
  if (lines.empty() || lines[0] != "bxv-corpus v1")
    throw_data((dir / "manifest").string() + ": not a bxv corpus manifest");

  std::map<std::string, std::string> spk_of;
  for (const std::string& line : read_lines(dir / "utt2spk")) {
    if (line.empty()) continue;
    const auto toks = split_ws(line);
    if (toks.size() != 2)
      throw_data((dir / "utt2spk").string() + ": expected '<utt> <speaker>', got '" +
                 line + "'");
    spk_of[toks[0]] = toks[1];
  }

  Corpus corpus;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto toks = split_ws(lines[i]);
    if (toks.size() != 3 || toks[0] != "utt")
      throw_data((dir / "manifest").string() + ":" + std::to_string(i + 1) +
                 ": expected 'utt <id> <relpath>'");
    Utterance u;
    u.id = toks[1];
    auto it = spk_of.find(u.id);
    if (it == spk_of.end())
      throw_data((dir / "utt2spk").string() + ": missing speaker for utterance '" +
                 u.id + "'");
    u.speaker_name = it->second;
    u.feats = read_features(dir / toks[2]);
    corpus.utterances.push_back(std::move(u));
  }
  if (corpus.utterances.empty())
    throw_data((dir / "manifest").string() + ": corpus has no utterances");
  const std::size_t dim = corpus.utterances.front().feats.dim();
  for (const Utterance& u : corpus.utterances)
    if (u.feats.dim() != dim)
      throw_data("load_corpus: utterance '" + u.id + "' has dim " +
                 std::to_string(u.feats.dim()) + ", expected " + std::to_string(dim));
  corpus.assign_speaker_ids();
  return corpus;
}

TrialList make_all_pairs_trials(const Corpus& corpus) {
  TrialList trials;
  const auto& utts = corpus.utterances;
  for (std::size_t i = 0; i < utts.size(); ++i)
    for (std::size_t j = i + 1; j < utts.size(); ++j)
      trials.push_back({utts[i].id, utts[j].id,
                        utts[i].speaker_name == utts[j].speaker_name});
  return trials;
}

}  // namespace bxv
