// include/bxv/pipeline.h

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

namespace bxv::pipeline {

// File-level pipeline stages behind the CLI subcommands and the C API.
// Every function throws bxv::Error on failure; seed arguments < 0 mean
// "use the config file's seed".

std::string synth(const std::filesystem::path& spec_file,
                  const std::filesystem::path& out_dir, int profile,
                  const std::string& prefix_override, long long seed_override,
                  bool write_trial_list);

std::string synth_pair(const std::filesystem::path& spec_file,
                       const std::filesystem::path& out_dir_a,
                       const std::filesystem::path& out_dir_b,
                       long long seed_override, bool write_trial_list);

std::string train(const std::filesystem::path& corpus_dir,
                  const std::filesystem::path& net_config,
                  const std::filesystem::path& train_config, bool bayesian,
                  const std::filesystem::path& baseline_ckpt,  // empty = none
                  double sigma_p_override,                     // <= 0 = unset
                  long long seed_override,
                  const std::filesystem::path& out_dir);

std::string extract(const std::filesystem::path& ckpt_dir,
                    const std::filesystem::path& corpus_dir,
                    const std::string& mode,  // "mean" | "sample"
                    int j_samples, long long seed_override,
                    const std::filesystem::path& out_dir);

std::string backend_fit(const std::filesystem::path& embeddings_dir,
                        const std::filesystem::path& corpus_dir,
                        const std::string& kind,  // "cosine" | "plda"
                        int lda_dim,              // <= 0 = kind default
                        bool length_norm, int plda_iters,  // <= 0 = default
                        const std::filesystem::path& out_dir);

std::string score(const std::filesystem::path& backend_dir,
                  const std::filesystem::path& embeddings_dir,
                  const std::filesystem::path& trials_file,
                  const std::filesystem::path& out_score_file);

std::string evaluate(const std::filesystem::path& score_file,
                     const std::filesystem::path& trials_file, double p_target,
                     double c_miss, double c_fa,
                     const std::filesystem::path& report_file,  // empty = skip
                     const std::filesystem::path& det_csv,      // empty = skip
                     const std::filesystem::path& det_svg);     // empty = skip

std::string fuse(const std::filesystem::path& scores_a,
                 const std::filesystem::path& scores_b,
                 const std::filesystem::path& out_score_file);

}  // namespace bxv::pipeline
