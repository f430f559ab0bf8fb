/* capi/include/bxv/c_api.h */

/* Copyright 2026  The bxv authors */

/* Licensed under the Apache License, Version 2.0 (the "License");
 * you may not use this file except in compliance with the License.
 * You may obtain a copy of the License at
 *
 *  http://www.apache.org/licenses/LICENSE-2.0
 *
 * THIS CODE IS PROVIDED *AS IS* BASIS, WITHOUT WARRANTIES OR CONDITIONS OF ANY
 * KIND, EITHER EXPRESS OR IMPLIED, INCLUDING WITHOUT LIMITATION ANY IMPLIED
 * WARRANTIES OR CONDITIONS OF TITLE, FITNESS FOR A PARTICULAR PURPOSE,
 * MERCHANTABLITY OR NON-INFRINGEMENT.
 * See the Apache 2 License for the specific language governing permissions and
 * limitations under the License.
 */

/* C interface to the bxv speaker-verification toolkit.  All functions return
 * bxv_status; on failure bxv_last_error() holds a message for the calling
 * thread.  Handles are opaque and freed with their bxv_*_free function.
 * Status values double as process exit codes in the bundled CLI.
 */

#ifndef BXV_C_API_H
#define BXV_C_API_H

#include <stddef.h>
#include <stdint.h>

#if defined(_WIN32)
#if defined(BXV_CAPI_BUILD)
#define BXV_API __declspec(dllexport)
#else
#define BXV_API __declspec(dllimport)
#endif
#else
#define BXV_API __attribute__((visibility("default")))
#endif

#ifdef __cplusplus
extern "C" {
#endif

typedef enum bxv_status {
  BXV_OK = 0,
  BXV_ERR_USAGE = 1,   /* bad flags, bad config keys, missing options */
  BXV_ERR_DATA = 2,    /* malformed or inconsistent inputs */
  BXV_ERR_NUMERIC = 3, /* NaN/Inf, failed factorization, divergence */
} bxv_status;

/* Message for the most recent failure on this thread; empty string if none. */
BXV_API const char* bxv_last_error(void);
BXV_API const char* bxv_version(void);

/* ------------------------------------------------------------------------
 * Pipeline stages (file to file).  Paths are UTF-8, NUL-terminated.
 * A seed argument < 0 means "use the seed from the config file".
 */

/* Generate a synthetic corpus.  profile < 0 rotates the spec's channel
 * profiles round-robin; otherwise every utterance uses the given profile.
 * speaker_prefix may be NULL; write_trials != 0 also emits trials.txt. */
BXV_API bxv_status bxv_synth(const char* spec_file, const char* out_dir,
                             int profile, const char* speaker_prefix,
                             long long seed, int write_trials);

/* Generate a train/eval domain pair (profile 0 vs profile 1, disjoint
 * speakers). */
BXV_API bxv_status bxv_synth_pair(const char* spec_file, const char* out_dir_a,
                                  const char* out_dir_b, long long seed,
                                  int write_trials);

/* Train an extractor.  baseline_ckpt may be NULL; sigma_p <= 0 means unset
 * (required for --bayesian without a baseline checkpoint). */
BXV_API bxv_status bxv_train(const char* corpus_dir, const char* net_config,
                             const char* train_config, int bayesian,
                             const char* baseline_ckpt, double sigma_p,
                             long long seed, const char* out_dir);

/* Extract one embedding per utterance.  mode is "mean" or "sample". */
BXV_API bxv_status bxv_extract(const char* ckpt_dir, const char* corpus_dir,
                               const char* mode, int num_samples,
                               long long seed, const char* out_dir);

/* Fit an LDA + cosine/PLDA scoring backend on labeled embeddings.
 * kind is "cosine" or "plda"; lda_dim <= 0 picks the kind default;
 * plda_iters <= 0 picks the default (20). */
BXV_API bxv_status bxv_backend_fit(const char* embeddings_dir,
                                   const char* corpus_dir, const char* kind,
                                   int lda_dim, int length_norm, int plda_iters,
                                   const char* out_dir);

/* Score a trial list against an embedding archive. */
BXV_API bxv_status bxv_score(const char* backend_dir, const char* embeddings_dir,
                             const char* trials_file, const char* out_score_file);

/* EER / min-DCF report plus optional DET CSV and SVG (pass NULL to skip). */
BXV_API bxv_status bxv_eval(const char* score_file, const char* trials_file,
                            double p_target, double c_miss, double c_fa,
                            const char* report_file, const char* det_csv,
                            const char* det_svg);

/* Per-trial mean of two score files over identical trial keys. */
BXV_API bxv_status bxv_fuse(const char* scores_a, const char* scores_b,
                            const char* out_score_file);

/* ------------------------------------------------------------------------
 * Opaque handles for in-process use.
 */

typedef struct bxv_matrix_s bxv_matrix;

BXV_API bxv_status bxv_matrix_create(uint32_t rows, uint32_t cols,
                                     const double* row_major, bxv_matrix** out);
BXV_API bxv_status bxv_matrix_load(const char* path, bxv_matrix** out);
BXV_API bxv_status bxv_matrix_save(const bxv_matrix* m, const char* path);
BXV_API uint32_t bxv_matrix_rows(const bxv_matrix* m);
BXV_API uint32_t bxv_matrix_cols(const bxv_matrix* m);
BXV_API const double* bxv_matrix_data(const bxv_matrix* m);
BXV_API void bxv_matrix_free(bxv_matrix* m);

typedef struct bxv_network_s bxv_network;

BXV_API bxv_status bxv_network_load(const char* ckpt_dir, bxv_network** out);
/* segment6 pre-activation embedding (1 x embedding_dim).  mode "mean" or
 * "sample"; the seed matters only for "sample". */
BXV_API bxv_status bxv_network_embed(const bxv_network* net,
                                     const bxv_matrix* features,
                                     const char* mode, uint64_t seed,
                                     bxv_matrix** out);
/* Predictive class posterior: mean softmax over num_samples weight draws. */
BXV_API bxv_status bxv_network_posterior(const bxv_network* net,
                                         const bxv_matrix* features,
                                         int num_samples, uint64_t seed,
                                         bxv_matrix** out);
BXV_API void bxv_network_free(bxv_network* net);

#ifdef __cplusplus
} /* extern "C" */
#endif

#endif /* BXV_C_API_H */
