// capi/src/c_api.cc

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

#include "bxv/c_api.h"

#include <new>
#include <string>

#include "bxv/error.h"
#include "bxv/io.h"
#include "bxv/network.h"
#include "bxv/pipeline.h"
#include "bxv/trainer.h"

namespace {

thread_local std::string g_last_error;

bxv_status to_status(const bxv::Error& e) {
  switch (e.kind()) {
    case bxv::ErrorKind::kUsage:
      return BXV_ERR_USAGE;
    case bxv::ErrorKind::kNumeric:
      return BXV_ERR_NUMERIC;
    case bxv::ErrorKind::kData:
    default:
      return BXV_ERR_DATA;
  }
}

template <typename Fn>
bxv_status guarded(Fn&& fn) {
  try {
    fn();
    g_last_error.clear();
    return BXV_OK;
  } catch (const bxv::Error& e) {
    g_last_error = e.what();
    return to_status(e);
  } catch (const std::bad_alloc&) {
    g_last_error = "out of memory";
    return BXV_ERR_NUMERIC;
  } catch (const std::exception& e) {
    g_last_error = e.what();
    return BXV_ERR_DATA;
  } catch (...) {
    g_last_error = "unknown error";
    return BXV_ERR_DATA;
  }
}

std::string str_or_empty(const char* s) { return s == nullptr ? std::string() : s; }

void require_arg(const void* p, const char* name) {
  if (p == nullptr) bxv::throw_usage(std::string(name) + " must not be NULL");
}

}  // namespace

struct bxv_matrix_s {
  bxv::Matrix m;
};

struct bxv_network_s {
  bxv::NetworkState state;
};

extern "C" {

const char* bxv_last_error(void) { return g_last_error.c_str(); }

const char* bxv_version(void) { return "bxv 0.1.0"; }

bxv_status bxv_synth(const char* spec_file, const char* out_dir, int profile,
                     const char* speaker_prefix, long long seed, int write_trials) {
  return guarded([&] {
    require_arg(spec_file, "spec_file");
    require_arg(out_dir, "out_dir");
    bxv::pipeline::synth(spec_file, out_dir, profile, str_or_empty(speaker_prefix),
                         seed, write_trials != 0);
  });
}

bxv_status bxv_synth_pair(const char* spec_file, const char* out_dir_a,
                          const char* out_dir_b, long long seed, int write_trials) {
  return guarded([&] {
    require_arg(spec_file, "spec_file");
    require_arg(out_dir_a, "out_dir_a");
    require_arg(out_dir_b, "out_dir_b");
    bxv::pipeline::synth_pair(spec_file, out_dir_a, out_dir_b, seed,
                              write_trials != 0);
  });
}

bxv_status bxv_train(const char* corpus_dir, const char* net_config,
                     const char* train_config, int bayesian,
                     const char* baseline_ckpt, double sigma_p, long long seed,
                     const char* out_dir) {
  return guarded([&] {
    require_arg(corpus_dir, "corpus_dir");
    require_arg(net_config, "net_config");
    require_arg(train_config, "train_config");
    require_arg(out_dir, "out_dir");
    bxv::pipeline::train(corpus_dir, net_config, train_config, bayesian != 0,
                         str_or_empty(baseline_ckpt), sigma_p, seed, out_dir);
  });
}

bxv_status bxv_extract(const char* ckpt_dir, const char* corpus_dir,
                       const char* mode, int num_samples, long long seed,
                       const char* out_dir) {
  return guarded([&] {
    require_arg(ckpt_dir, "ckpt_dir");
    require_arg(corpus_dir, "corpus_dir");
    require_arg(mode, "mode");
    require_arg(out_dir, "out_dir");
    bxv::pipeline::extract(ckpt_dir, corpus_dir, mode, num_samples, seed, out_dir);
  });
}

bxv_status bxv_backend_fit(const char* embeddings_dir, const char* corpus_dir,
                           const char* kind, int lda_dim, int length_norm,
                           int plda_iters, const char* out_dir) {
  return guarded([&] {
    require_arg(embeddings_dir, "embeddings_dir");
    require_arg(corpus_dir, "corpus_dir");
    require_arg(kind, "kind");
    require_arg(out_dir, "out_dir");
    bxv::pipeline::backend_fit(embeddings_dir, corpus_dir, kind, lda_dim,
                               length_norm != 0, plda_iters, out_dir);
  });
}

bxv_status bxv_score(const char* backend_dir, const char* embeddings_dir,
                     const char* trials_file, const char* out_score_file) {
  return guarded([&] {
    require_arg(backend_dir, "backend_dir");
    require_arg(embeddings_dir, "embeddings_dir");
    require_arg(trials_file, "trials_file");
    require_arg(out_score_file, "out_score_file");
    bxv::pipeline::score(backend_dir, embeddings_dir, trials_file, out_score_file);
  });
}

bxv_status bxv_eval(const char* score_file, const char* trials_file,
                    double p_target, double c_miss, double c_fa,
                    const char* report_file, const char* det_csv,
                    const char* det_svg) {
  return guarded([&] {
    require_arg(score_file, "score_file");
    require_arg(trials_file, "trials_file");
    bxv::pipeline::evaluate(score_file, trials_file, p_target, c_miss, c_fa,
                            str_or_empty(report_file), str_or_empty(det_csv),
                            str_or_empty(det_svg));
  });
}

bxv_status bxv_fuse(const char* scores_a, const char* scores_b,
                    const char* out_score_file) {
  return guarded([&] {
    require_arg(scores_a, "scores_a");
    require_arg(scores_b, "scores_b");
    require_arg(out_score_file, "out_score_file");
    bxv::pipeline::fuse(scores_a, scores_b, out_score_file);
  });
}

bxv_status bxv_matrix_create(uint32_t rows, uint32_t cols, const double* row_major,
                             bxv_matrix** out) {
  return guarded([&] {
    require_arg(out, "out");
    bxv::Matrix m(rows, cols, 0.0);
    if (row_major != nullptr)
      for (std::size_t i = 0; i < m.size(); ++i) m.data()[i] = row_major[i];
    *out = new bxv_matrix_s{std::move(m)};
  });
}

bxv_status bxv_matrix_load(const char* path, bxv_matrix** out) {
  return guarded([&] {
    require_arg(path, "path");
    require_arg(out, "out");
    *out = new bxv_matrix_s{bxv::read_bxm(path)};
  });
}

bxv_status bxv_matrix_save(const bxv_matrix* m, const char* path) {
  return guarded([&] {
    require_arg(m, "matrix");
    require_arg(path, "path");
    bxv::write_bxm(path, m->m);
  });
}

uint32_t bxv_matrix_rows(const bxv_matrix* m) {
  return m == nullptr ? 0 : static_cast<uint32_t>(m->m.rows());
}

uint32_t bxv_matrix_cols(const bxv_matrix* m) {
  return m == nullptr ? 0 : static_cast<uint32_t>(m->m.cols());
}

const double* bxv_matrix_data(const bxv_matrix* m) {
  return m == nullptr ? nullptr : m->m.data();
}

void bxv_matrix_free(bxv_matrix* m) { delete m; }

bxv_status bxv_network_load(const char* ckpt_dir, bxv_network** out) {
  return guarded([&] {
    require_arg(ckpt_dir, "ckpt_dir");
    require_arg(out, "out");
    *out = new bxv_network_s{bxv::load_checkpoint(ckpt_dir)};
  });
}

bxv_status bxv_network_embed(const bxv_network* net, const bxv_matrix* features,
                             const char* mode, uint64_t seed, bxv_matrix** out) {
  return guarded([&] {
    require_arg(net, "network");
    require_arg(features, "features");
    require_arg(mode, "mode");
    require_arg(out, "out");
    const std::string m = mode;
    if (m != "mean" && m != "sample")
      bxv::throw_usage("mode must be 'mean' or 'sample'");
    bxv::RngStream rng(seed);
    bxv::Matrix emb = bxv::extract_embedding(
        net->state, features->m,
        m == "mean" ? bxv::ForwardMode::kMean : bxv::ForwardMode::kSample,
        m == "mean" ? nullptr : &rng);
    *out = new bxv_matrix_s{std::move(emb)};
  });
}

bxv_status bxv_network_posterior(const bxv_network* net, const bxv_matrix* features,
                                 int num_samples, uint64_t seed, bxv_matrix** out) {
  return guarded([&] {
    require_arg(net, "network");
    require_arg(features, "features");
    require_arg(out, "out");
    bxv::RngStream rng(seed);
    bxv::Matrix p =
        bxv::predictive_inference(net->state, features->m, num_samples, rng);
    *out = new bxv_matrix_s{std::move(p)};
  });
}

void bxv_network_free(bxv_network* net) { delete net; }

}  // extern "C"
