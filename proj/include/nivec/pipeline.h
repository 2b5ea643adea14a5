// nivec/pipeline.h

// Copyright 2026  The nivec Authors

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

#ifndef NIVEC_PIPELINE_H_
#define NIVEC_PIPELINE_H_

#include <optional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nivec/corpus.h"
#include "nivec/metrics.h"
#include "nivec/speaker-net.h"
#include "nivec/training.h"

namespace nivec {

struct CorpusSection {
  SynthSpec synth;
  int eval_speakers = 10;
  int num_target_trials = 500;
  int num_nontarget_trials = 500;
  std::optional<int> cmn_window;  // unset: whole-utterance CMN
  bool cmn = true;
  // External corpus: when train_manifest is set, `synth` is skipped and these
  // files are read instead.
  std::string train_manifest;
  std::string eval_manifest;
  std::string trials;
};

struct IvectorSection {
  int rank = 32;
  int iterations = 5;
  bool diagonal_stats = true;
  int sample_utterances = 10;       // eval utterances exported to samples.csv
  int samples_per_utterance = 50;
  int trace_utterances = 10;        // eval utterances used for trace.csv
};

struct BackendSection {
  int cohort_size = 200;
  int top_k = 100;
  bool clip_top_k = false;  // use min(K, cohort size) instead of failing
  int plda_iterations = 10;
};

struct PipelineConfig {
  CorpusSection corpus;
  SpeakerNetConfig network;  // num_speakers is set from the training manifest
  TrainConfig train;
  IvectorSection ivector;
  BackendSection backend;
  uint64_t seed = 1;

  void Validate() const;
  /// Seed of one stage, derived from the master seed and a tag.
  uint64_t StageSeed(const std::string &tag) const;
};

PipelineConfig PipelineConfigFromJson(const nlohmann::json &j);
nlohmann::json PipelineConfigToJson(const PipelineConfig &c);
PipelineConfig LoadPipelineConfig(const std::string &path);
/// FNV-1a of the canonical JSON dump.
std::string ConfigHash(const PipelineConfig &c);

/*
  Embedding archive: "NIVE", u32 version 1, u32 count, u32 dim, then per
  entry id string, speaker string and dim f64 values.
*/
constexpr uint32_t kEmbeddingFileVersion = 1;

struct EmbeddingArchive {
  std::vector<std::string> ids;
  std::vector<std::string> speakers;
  Matrix vectors;  // count x dim
};

void WriteEmbeddingArchive(const EmbeddingArchive &archive, const std::string &path);
EmbeddingArchive ReadEmbeddingArchive(const std::string &path);

/// Score file line: enroll, test, raw score, AS-normalized score.
struct ScoreLine {
  std::string enroll;
  std::string test;
  double raw = 0.0;
  double normalized = 0.0;
};

void WriteScores(const std::vector<ScoreLine> &scores, const std::string &path);
/// Accepts 3-column (enroll, test, score) or 4-column files; a 3-column
/// score is stored in both fields.
std::vector<ScoreLine> ReadScores(const std::string &path);

/// Splits scores into target / nontarget by the trial labels.  Every trial
/// with a known label must have a score.
void SplitScores(const std::vector<ScoreLine> &scores, const TrialList &trials, bool use_raw,
                 std::vector<double> *target, std::vector<double> *nontarget);

enum class System { kEmbedding, kIvector };

const char *SystemName(System s);
System ParseSystem(const std::string &name);

struct SystemResult {
  MetricsReport raw;
  MetricsReport normalized;
};

/*
  Stage driver over one work directory:
     corpus/      manifest.tsv, train.tsv, eval.tsv, trials.tsv, feats/
     net.nivn, loss.csv
     embeddings/  train.nive, eval.nive
     stats/       train.nivs, eval.nivs
     ivector.nivx, ivector-objective.csv
     ivectors/    train.nive, eval.nive, samples.csv, trace.csv
     backend-<system>.nivb, plda-<system>.csv
     scores/<system>.tsv
     metrics/<system>.json, metrics/<system>-det.csv
     report.md, report.json
  Every artifact X is accompanied by X.prov.json holding the config hash,
  stage seed, input content hashes and the artifact's own content hash.
*/
class Pipeline {
 public:
  Pipeline(PipelineConfig config, std::string workdir, int jobs, bool force);

  void Synth();
  void TrainNet();
  void ExtractEmbeddings();
  void ExtractStats();
  void TrainIvector();
  void ExtractIvectors();
  void TrainBackend(System system);
  void Score(System system);
  SystemResult Eval(System system);
  void RunAll();

  std::string Path(const std::string &relative) const;
  std::string TrainManifestPath() const;
  std::string EvalManifestPath() const;
  std::string TrialsPath() const;

  /// Verbose progress on stderr.
  bool verbose = true;

 private:
  void Log(const std::string &msg) const;
  void RequireInputs(const std::vector<std::string> &paths) const;
  void GuardOutputs(const std::vector<std::string> &paths) const;
  void WriteProvenance(const std::string &output, const std::string &stage,
                       const std::string &seed_tag, const std::vector<std::string> &inputs,
                       const std::string &features_hash = "") const;
  std::vector<Matrix> LoadFeatures(const CorpusManifest &manifest) const;
  std::string Relative(const std::string &path) const;
  void WriteReport(const SystemResult &emb, const SystemResult &ivec);

  PipelineConfig config_;
  std::string workdir_;
  int jobs_;
  bool force_;
};

}  // namespace nivec

#endif  // NIVEC_PIPELINE_H_
