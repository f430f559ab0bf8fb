// src/pipeline.cc

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

#include "bxv/pipeline.h"

#include <algorithm>
#include <map>
#include <vector>

#include "bxv/backend.h"
#include "bxv/config.h"
#include "bxv/corpus.h"
#include "bxv/error.h"
#include "bxv/io.h"
#include "bxv/metrics.h"
#include "bxv/synthdata.h"
#include "bxv/trainer.h"

namespace bxv::pipeline {

namespace {

constexpr const char* kVersion = "bxv 0.1.0";

void write_run_manifest(
    const std::filesystem::path& dir, const std::string& command,
    const std::vector<std::pair<std::string, std::string>>& fields) {
  std::string text = "bxv-run v1\n";
  text += "version = " + std::string(kVersion) + "\n";
  text += "command = " + command + "\n";
  for (const auto& [k, v] : fields) text += k + " = " + v + "\n";
  write_file(dir / "run.manifest", text);
}

std::string config_hash(const std::filesystem::path& path) {
  return hex64(fnv1a64_file(path));
}

struct EmbeddingArchive {
  std::vector<std::string> ids;  // manifest order
  std::map<std::string, std::vector<double>> vectors;
  std::size_t dim = 0;
};

EmbeddingArchive load_archive(const std::filesystem::path& dir) {
  const auto lines = read_lines(dir / "manifest");
  if (lines.empty() || lines[0] != "bxv-embeddings v1")
    throw_data((dir / "manifest").string() + ": not an embedding archive manifest");
  EmbeddingArchive ar;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    const auto toks = split_ws(lines[i]);
    if (toks.size() < 3 || toks[0] != "utt")
      throw_data((dir / "manifest").string() + ":" + std::to_string(i + 1) +
                 ": expected 'utt <id> <relpath>'");
    const Matrix m = read_bxm(dir / toks[2]);
    if (m.rows() != 1)
      throw_data((dir / toks[2]).string() + ": embedding must be a 1-row matrix");
    if (ar.dim == 0) ar.dim = m.cols();
    if (m.cols() != ar.dim)
      throw_data(dir.string() + ": mixed embedding dimensions (" +
                 std::to_string(m.cols()) + " vs " + std::to_string(ar.dim) +
                 " for '" + toks[1] + "')");
    std::vector<double> v(m.data(), m.data() + m.cols());
    ar.ids.push_back(toks[1]);
    ar.vectors.emplace(toks[1], std::move(v));
  }
  if (ar.ids.empty()) throw_data(dir.string() + ": empty embedding archive");
  return ar;
}

std::map<std::string, std::string> load_utt2spk(const std::filesystem::path& corpus_dir) {
  std::map<std::string, std::string> out;
  for (const std::string& line : read_lines(corpus_dir / "utt2spk")) {
    if (line.empty()) continue;
    const auto toks = split_ws(line);
    if (toks.size() != 2)
      throw_data((corpus_dir / "utt2spk").string() + ": bad line '" + line + "'");
    out[toks[0]] = toks[1];
  }
  if (out.empty()) throw_data((corpus_dir / "utt2spk").string() + ": empty");
  return out;
}

struct BackendModel {
  std::string kind;
  bool length_norm = false;
  LdaModel lda;
  PldaModel plda;  // valid when kind == "plda"
};

void save_backend(const BackendModel& bm, const std::filesystem::path& dir) {
  ensure_dir(dir);
  std::vector<std::pair<std::string, Matrix>> tensors;
  Matrix mean(1, bm.lda.mean.size());
  for (std::size_t i = 0; i < bm.lda.mean.size(); ++i) mean(0, i) = bm.lda.mean[i];
  tensors.emplace_back("lda_mean", std::move(mean));
  tensors.emplace_back("lda_proj", bm.lda.projection);
  if (bm.kind == "plda") {
    Matrix pmean(1, bm.plda.mean.size());
    for (std::size_t i = 0; i < bm.plda.mean.size(); ++i)
      pmean(0, i) = bm.plda.mean[i];
    tensors.emplace_back("plda_mean", std::move(pmean));
    tensors.emplace_back("plda_between", bm.plda.between_cov);
    tensors.emplace_back("plda_within", bm.plda.within_cov);
  }
  std::string manifest = "bxv-backend v1\n";
  manifest += "kind = " + bm.kind + "\n";
  manifest += "length_norm = " + std::string(bm.length_norm ? "true" : "false") + "\n";
  manifest += "in_dim = " + std::to_string(bm.lda.in_dim()) + "\n";
  manifest += "out_dim = " + std::to_string(bm.lda.out_dim()) + "\n";
  for (const auto& [name, m] : tensors) {
    const std::string rel = name + ".bxm";
    write_bxm(dir / rel, m);
    manifest += "tensor " + name + " " + rel + " " + shape_str(m) + " " +
                hex64(fnv1a64_file(dir / rel)) + "\n";
  }
  write_file(dir / "manifest", manifest);
}

BackendModel load_backend(const std::filesystem::path& dir) {
  const auto lines = read_lines(dir / "manifest");
  if (lines.empty() || lines[0] != "bxv-backend v1")
    throw_data((dir / "manifest").string() + ": not a backend manifest");
  std::string kv;
  std::map<std::string, std::filesystem::path> tensor_paths;
  for (std::size_t i = 1; i < lines.size(); ++i) {
    if (lines[i].empty()) continue;
    if (lines[i].rfind("tensor ", 0) == 0) {
      const auto toks = split_ws(lines[i]);
      if (toks.size() != 5)
        throw_data((dir / "manifest").string() + ": malformed tensor line");
      if (hex64(fnv1a64_file(dir / toks[2])) != toks[4])
        throw_data((dir / toks[2]).string() + ": content hash mismatch");
      tensor_paths[toks[1]] = dir / toks[2];
    } else {
      kv += lines[i] + "\n";
    }
  }
  const ConfigFile cfg = ConfigFile::from_string(kv, (dir / "manifest").string());
  BackendModel bm;
  bm.kind = cfg.require_string("kind");
  if (bm.kind != "cosine" && bm.kind != "plda")
    throw_data(dir.string() + ": unknown backend kind '" + bm.kind + "'");
  bm.length_norm = cfg.get_bool("length_norm", false);
  auto need = [&](const std::string& name) {
    auto it = tensor_paths.find(name);
    if (it == tensor_paths.end())
      throw_data((dir / "manifest").string() + ": missing tensor '" + name + "'");
    return read_bxm(it->second);
  };
  const Matrix mean = need("lda_mean");
  bm.lda.mean.assign(mean.data(), mean.data() + mean.cols());
  bm.lda.projection = need("lda_proj");
  if (bm.kind == "plda") {
    const Matrix pmean = need("plda_mean");
    bm.plda.mean.assign(pmean.data(), pmean.data() + pmean.cols());
    bm.plda.between_cov = need("plda_between");
    bm.plda.within_cov = need("plda_within");
  }
  return bm;
}

std::vector<double> apply_backend_frontend(const BackendModel& bm,
                                           const std::vector<double>& emb) {
  std::vector<double> v = lda_project(bm.lda, emb);
  if (bm.length_norm) v = length_normalize(v);
  return v;
}

}  // namespace

std::string synth(const std::filesystem::path& spec_file,
                  const std::filesystem::path& out_dir, int profile,
                  const std::string& prefix_override, long long seed_override,
                  bool write_trial_list) {
  SynthSpec spec = SynthSpec::load(spec_file);
  if (seed_override >= 0) spec.seed = static_cast<std::uint64_t>(seed_override);
  if (!prefix_override.empty()) spec.prefix = prefix_override;
  const Corpus corpus = generate_corpus(spec, profile);
  save_corpus(corpus, out_dir);
  if (write_trial_list) save_trials(make_all_pairs_trials(corpus), out_dir / "trials.txt");
  write_run_manifest(out_dir, "synth",
                     {{"spec", spec_file.string()},
                      {"spec_hash", config_hash(spec_file)},
                      {"seed", std::to_string(spec.seed)},
                      {"profile", std::to_string(profile)},
                      {"utterances", std::to_string(corpus.utterances.size())},
                      {"speakers", std::to_string(corpus.num_speakers())}});
  return "synthesized " + std::to_string(corpus.utterances.size()) +
         " utterances from " + std::to_string(corpus.num_speakers()) +
         " speakers into " + out_dir.string();
}

std::string synth_pair(const std::filesystem::path& spec_file,
                       const std::filesystem::path& out_dir_a,
                       const std::filesystem::path& out_dir_b,
                       long long seed_override, bool write_trial_list) {
  SynthSpec spec = SynthSpec::load(spec_file);
  if (seed_override >= 0) spec.seed = static_cast<std::uint64_t>(seed_override);
  const auto [a, b] = make_domain_pair(spec);
  save_corpus(a, out_dir_a);
  save_corpus(b, out_dir_b);
  if (write_trial_list) {
    save_trials(make_all_pairs_trials(a), out_dir_a / "trials.txt");
    save_trials(make_all_pairs_trials(b), out_dir_b / "trials.txt");
  }
  for (const auto* dir : {&out_dir_a, &out_dir_b})
    write_run_manifest(*dir, "synth-pair",
                       {{"spec", spec_file.string()},
                        {"spec_hash", config_hash(spec_file)},
                        {"seed", std::to_string(spec.seed)}});
  return "synthesized domain pair into " + out_dir_a.string() + " and " +
         out_dir_b.string();
}

std::string train(const std::filesystem::path& corpus_dir,
                  const std::filesystem::path& net_config,
                  const std::filesystem::path& train_config, bool bayesian,
                  const std::filesystem::path& baseline_ckpt,
                  double sigma_p_override, long long seed_override,
                  const std::filesystem::path& out_dir) {
  const Corpus corpus = load_corpus(corpus_dir);
  NetworkConfig net = NetworkConfig::load(net_config);
  const ConfigFile tc_file = ConfigFile::load(train_config);
  TrainConfig tc = TrainConfig::from_config(tc_file);
  if (seed_override >= 0) tc.seed = static_cast<std::uint64_t>(seed_override);
  if (sigma_p_override > 0.0) tc.sigma_p = sigma_p_override;

  TrainResult result;
  if (bayesian) {
    if (baseline_ckpt.empty() && sigma_p_override <= 0.0 && !tc_file.has("sigma_p"))
      throw_usage("train --bayesian without --baseline-ckpt requires --sigma-p "
                  "(or a sigma_p key in the train config)");
    if (!baseline_ckpt.empty()) {
      const NetworkState baseline = load_checkpoint(baseline_ckpt);
      result = train_bayesian(corpus, net, tc, &baseline);
    } else {
      result = train_bayesian(corpus, net, tc, nullptr);
    }
  } else {
    result = train_baseline(corpus, net, tc);
  }

  save_checkpoint(result.state, out_dir);
  write_file(out_dir / "loss.csv", loss_trace_csv(result.trace));
  write_run_manifest(out_dir, "train",
                     {{"corpus", corpus_dir.string()},
                      {"net_config", net_config.string()},
                      {"net_config_hash", config_hash(net_config)},
                      {"train_config", train_config.string()},
                      {"train_config_hash", config_hash(train_config)},
                      {"seed", std::to_string(tc.seed)},
                      {"bayesian", bayesian ? "true" : "false"},
                      {"baseline_ckpt", baseline_ckpt.string()}});
  std::string summary = "trained " + std::to_string(result.trace.size()) + " epochs";
  if (!result.trace.empty()) {
    const EpochStats& last = result.trace.back();
    summary += "; final total=" + format_double("%.6f", last.total) +
               " nll=" + format_double("%.6f", last.nll_term) +
               " accuracy=" + format_double("%.4f", last.accuracy);
  }
  return summary;
}

std::string extract(const std::filesystem::path& ckpt_dir,
                    const std::filesystem::path& corpus_dir,
                    const std::string& mode, int j_samples,
                    long long seed_override,
                    const std::filesystem::path& out_dir) {
  if (mode != "mean" && mode != "sample")
    throw_usage("extract: mode must be 'mean' or 'sample', got '" + mode + "'");
  if (j_samples < 1) throw_usage("extract: --j must be >= 1");
  const NetworkState state = load_checkpoint(ckpt_dir);
  const Corpus corpus = load_corpus(corpus_dir);
  const std::uint64_t seed =
      seed_override >= 0 ? static_cast<std::uint64_t>(seed_override) : 42;

  ensure_dir(out_dir);
  ensure_dir(out_dir / "emb");
  std::string manifest = "bxv-embeddings v1\n";
  for (std::size_t i = 0; i < corpus.utterances.size(); ++i) {
    const Utterance& u = corpus.utterances[i];
    Matrix emb;
    if (mode == "mean") {
      emb = extract_embedding(state, u.feats.values, ForwardMode::kMean, nullptr);
    } else {
      RngStream rng = RngStream(seed).fork(i);
      emb = Matrix(1, state.config.embedding_dim, 0.0);
      const double inv_j = 1.0 / static_cast<double>(j_samples);
      for (int j = 0; j < j_samples; ++j) {
        const Matrix one =
            extract_embedding(state, u.feats.values, ForwardMode::kSample, &rng);
        add_scaled_inplace(emb, one, inv_j);
      }
    }
    const std::string rel = "emb/" + u.id + ".bxm";
    write_bxm(out_dir / rel, emb);
    manifest += "utt " + u.id + " " + rel + " dim=" +
                std::to_string(emb.cols()) + "\n";
  }
  write_file(out_dir / "manifest", manifest);
  write_run_manifest(out_dir, "extract",
                     {{"ckpt", ckpt_dir.string()},
                      {"corpus", corpus_dir.string()},
                      {"mode", mode},
                      {"j", std::to_string(j_samples)},
                      {"seed", std::to_string(seed)}});
  return "extracted " + std::to_string(corpus.utterances.size()) +
         " embeddings into " + out_dir.string();
}

std::string backend_fit(const std::filesystem::path& embeddings_dir,
                        const std::filesystem::path& corpus_dir,
                        const std::string& kind, int lda_dim, bool length_norm,
                        int plda_iters, const std::filesystem::path& out_dir) {
  if (kind != "cosine" && kind != "plda")
    throw_usage("backend: kind must be 'cosine' or 'plda', got '" + kind + "'");
  const EmbeddingArchive ar = load_archive(embeddings_dir);
  const auto utt2spk = load_utt2spk(corpus_dir);

  std::map<std::string, int> spk_index;
  for (const std::string& id : ar.ids) {
    auto it = utt2spk.find(id);
    if (it == utt2spk.end())
      throw_data("backend: utterance '" + id + "' has no speaker label in " +
                 (corpus_dir / "utt2spk").string());
    spk_index.emplace(it->second, 0);
  }
  int next = 0;
  for (auto& [name, idx] : spk_index) idx = next++;

  Matrix embeddings(ar.ids.size(), ar.dim);
  std::vector<int> labels(ar.ids.size());
  for (std::size_t i = 0; i < ar.ids.size(); ++i) {
    const auto& v = ar.vectors.at(ar.ids[i]);
    for (std::size_t j = 0; j < ar.dim; ++j) embeddings(i, j) = v[j];
    labels[i] = spk_index.at(utt2spk.at(ar.ids[i]));
  }

  // Kaldi-style defaults from the recipe this mirrors: LDA to 150 for cosine
  // scoring and 200 for PLDA (clamped to classes-1 at small scale).
  std::size_t out_dim = lda_dim > 0 ? static_cast<std::size_t>(lda_dim)
                                    : (kind == "cosine" ? 150 : 200);
  BackendModel bm;
  bm.kind = kind;
  bm.length_norm = length_norm;
  bm.lda = lda_fit(embeddings, labels, out_dim);

  std::string extra;
  if (kind == "plda") {
    Matrix projected(ar.ids.size(), bm.lda.out_dim());
    for (std::size_t i = 0; i < ar.ids.size(); ++i) {
      std::vector<double> row(ar.dim);
      for (std::size_t j = 0; j < ar.dim; ++j) row[j] = embeddings(i, j);
      std::vector<double> p = apply_backend_frontend(bm, row);
      for (std::size_t j = 0; j < p.size(); ++j) projected(i, j) = p[j];
    }
    const int iters = plda_iters > 0 ? plda_iters : 20;
    PldaFitResult fit = plda_fit(projected, labels, iters);
    bm.plda = std::move(fit.model);
    std::string csv = "iteration,loglik\n";
    for (std::size_t i = 0; i < fit.loglik_trace.size(); ++i)
      csv += std::to_string(i) + "," +
             format_double("%.9g", fit.loglik_trace[i]) + "\n";
    ensure_dir(out_dir);
    write_file(out_dir / "plda_loglik.csv", csv);
    extra = "; plda loglik " + format_double("%.4f", fit.loglik_trace.front()) +
            " -> " + format_double("%.4f", fit.loglik_trace.back());
  }

  save_backend(bm, out_dir);
  write_run_manifest(out_dir, "backend",
                     {{"embeddings", embeddings_dir.string()},
                      {"corpus", corpus_dir.string()},
                      {"kind", kind},
                      {"lda_dim", std::to_string(bm.lda.out_dim())},
                      {"length_norm", length_norm ? "true" : "false"}});
  return "fitted " + kind + " backend (lda " + std::to_string(bm.lda.in_dim()) +
         " -> " + std::to_string(bm.lda.out_dim()) + ")" + extra;
}

std::string score(const std::filesystem::path& backend_dir,
                  const std::filesystem::path& embeddings_dir,
                  const std::filesystem::path& trials_file,
                  const std::filesystem::path& out_score_file) {
  const BackendModel bm = load_backend(backend_dir);
  const EmbeddingArchive ar = load_archive(embeddings_dir);
  const TrialList trials = load_trials(trials_file);

  std::vector<std::string> missing;
  for (const Trial& t : trials) {
    if (!ar.vectors.count(t.enroll)) missing.push_back(t.enroll);
    if (!ar.vectors.count(t.test)) missing.push_back(t.test);
  }
  if (!missing.empty()) {
    std::sort(missing.begin(), missing.end());
    missing.erase(std::unique(missing.begin(), missing.end()), missing.end());
    std::string msg = "score: " + std::to_string(missing.size()) +
                      " trial ids missing from the embedding archive:";
    for (std::size_t i = 0; i < missing.size() && i < 8; ++i)
      msg += " " + missing[i];
    if (missing.size() > 8) msg += " ...";
    throw_data(msg);
  }

  std::map<std::string, std::vector<double>> projected;
  for (const Trial& t : trials) {
    for (const std::string& id : {t.enroll, t.test})
      if (!projected.count(id))
        projected.emplace(id, apply_backend_frontend(bm, ar.vectors.at(id)));
  }

  ScoreSet scores;
  scores.reserve(trials.size());
  if (bm.kind == "plda") {
    const PldaScorer scorer(bm.plda);
    for (const Trial& t : trials)
      scores.push_back(
          {t.enroll, t.test, scorer.score(projected.at(t.enroll), projected.at(t.test))});
  } else {
    for (const Trial& t : trials)
      scores.push_back(
          {t.enroll, t.test, cosine_score(projected.at(t.enroll), projected.at(t.test))});
  }
  save_scores(scores, out_score_file);
  return "scored " + std::to_string(scores.size()) + " trials with the " +
         bm.kind + " backend";
}

std::string evaluate(const std::filesystem::path& score_file,
                     const std::filesystem::path& trials_file, double p_target,
                     double c_miss, double c_fa,
                     const std::filesystem::path& report_file,
                     const std::filesystem::path& det_csv,
                     const std::filesystem::path& det_svg) {
  const ScoreSet scores = load_scores(score_file);
  const TrialList trials = load_trials(trials_file);
  const MetricsReport report = evaluate_scores(scores, trials, p_target, c_miss, c_fa);
  const std::string text = format_report(report);
  if (!report_file.empty()) write_file(report_file, text);
  if (!det_csv.empty()) write_det_csv(report, det_csv);
  if (!det_svg.empty()) write_det_svg(report, det_svg);
  return text.substr(0, text.find('\n'));
}

std::string fuse(const std::filesystem::path& scores_a,
                 const std::filesystem::path& scores_b,
                 const std::filesystem::path& out_score_file) {
  const ScoreSet a = load_scores(scores_a);
  const ScoreSet b = load_scores(scores_b);
  const ScoreSet fused = fuse_scores(a, b);
  save_scores(fused, out_score_file);
  return "fused " + std::to_string(fused.size()) + " trial scores";
}

}  // namespace bxv::pipeline
