// nivec/pipeline.cc

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

#include "nivec/pipeline.h"

#include <cstdio>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <map>
#include <set>
#include <sstream>

#include "nivec/backend.h"
#include "nivec/binary-io.h"
#include "nivec/error.h"
#include "nivec/ivector.h"
#include "nivec/parallel.h"
#include "nivec/suffstats.h"

namespace fs = std::filesystem;

namespace nivec {

// ---------------------------------------------------------------- config

namespace {

using nlohmann::json;

void CheckKeys(const json &j, const std::set<std::string> &allowed, const std::string &section) {
  if (!j.is_object()) Fail(ErrorCode::kConfig, section + ": expected an object");
  for (auto it = j.begin(); it != j.end(); ++it)
    if (!allowed.count(it.key()))
      Fail(ErrorCode::kConfig, section + ": unknown key '" + it.key() + "'");
}

const json &Section(const json &j, const char *name) {
  static const json kEmpty = json::object();
  return j.contains(name) ? j.at(name) : kEmpty;
}

}  // namespace

void PipelineConfig::Validate() const {
  corpus.synth.Validate();
  auto require = [](bool ok, const std::string &what) {
    if (!ok) Fail(ErrorCode::kConfig, "invalid config: " + what);
  };
  if (corpus.train_manifest.empty()) {
    require(corpus.eval_speakers >= 2, "corpus.eval_speakers >= 2");
    require(corpus.synth.num_speakers - corpus.eval_speakers >= 2,
            "corpus.num_speakers - corpus.eval_speakers >= 2");
  } else {
    require(!corpus.eval_manifest.empty() && !corpus.trials.empty(),
            "an external corpus needs train_manifest, eval_manifest and trials");
  }
  require(corpus.num_target_trials >= 1 && corpus.num_nontarget_trials >= 1,
          "trial counts >= 1");
  require(!corpus.cmn_window || *corpus.cmn_window >= 1, "corpus.cmn window >= 1");
  SpeakerNetConfig net = network;
  net.num_speakers = std::max(net.num_speakers, 2);
  net.Validate();
  train.Validate();
  require(ivector.rank >= 1, "ivector.rank >= 1");
  require(ivector.iterations >= 0, "ivector.iterations >= 0");
  require(ivector.sample_utterances >= 0 && ivector.samples_per_utterance >= 1,
          "ivector sample counts");
  require(ivector.trace_utterances >= 0, "ivector.trace_utterances >= 0");
  require(backend.cohort_size >= 1, "backend.cohort_size >= 1");
  require(backend.top_k >= 1, "backend.top_k >= 1");
  require(backend.plda_iterations >= 0, "backend.plda_iterations >= 0");
}

uint64_t PipelineConfig::StageSeed(const std::string &tag) const {
  return Fnv1a64(tag, Fnv1a64("seed:" + std::to_string(seed)));
}

PipelineConfig PipelineConfigFromJson(const json &j) {
  PipelineConfig c;
  try {
    CheckKeys(j, {"seed", "corpus", "network", "aggregation", "train", "ivector", "backend"},
              "config");
    c.seed = j.value("seed", c.seed);

    const json &cj = Section(j, "corpus");
    CheckKeys(cj,
              {"num_speakers", "utts_per_speaker", "min_frames", "max_frames", "feature_dim",
               "speaker_dim", "num_components", "component_spread", "speaker_scale",
               "channel_scale", "noise_scale", "stay_prob", "occupancy_spread", "noise_spread",
               "num_augment", "augment_noise_scale",
               "eval_speakers", "num_target_trials", "num_nontarget_trials", "cmn",
               "train_manifest", "eval_manifest", "trials"},
              "corpus");
    SynthSpec &s = c.corpus.synth;
    s.num_speakers = cj.value("num_speakers", s.num_speakers);
    s.utts_per_speaker = cj.value("utts_per_speaker", s.utts_per_speaker);
    s.min_frames = cj.value("min_frames", s.min_frames);
    s.max_frames = cj.value("max_frames", s.max_frames);
    s.feature_dim = cj.value("feature_dim", s.feature_dim);
    s.speaker_dim = cj.value("speaker_dim", s.speaker_dim);
    s.num_components = cj.value("num_components", s.num_components);
    s.component_spread = cj.value("component_spread", s.component_spread);
    s.speaker_scale = cj.value("speaker_scale", s.speaker_scale);
    s.channel_scale = cj.value("channel_scale", s.channel_scale);
    s.noise_scale = cj.value("noise_scale", s.noise_scale);
    s.stay_prob = cj.value("stay_prob", s.stay_prob);
    s.occupancy_spread = cj.value("occupancy_spread", s.occupancy_spread);
    s.noise_spread = cj.value("noise_spread", s.noise_spread);
    s.num_augment = cj.value("num_augment", s.num_augment);
    s.augment_noise_scale = cj.value("augment_noise_scale", s.augment_noise_scale);
    c.corpus.eval_speakers = cj.value("eval_speakers", c.corpus.eval_speakers);
    c.corpus.num_target_trials = cj.value("num_target_trials", c.corpus.num_target_trials);
    c.corpus.num_nontarget_trials = cj.value("num_nontarget_trials", c.corpus.num_nontarget_trials);
    if (cj.contains("cmn")) {
      const json &cmn = cj.at("cmn");
      if (cmn.is_number_integer()) {
        c.corpus.cmn_window = cmn.get<int>();
      } else {
        const std::string mode = cmn.get<std::string>();
        if (mode == "none")
          c.corpus.cmn = false;
        else if (mode != "utterance")
          Fail(ErrorCode::kConfig, "corpus.cmn must be \"utterance\", \"none\" or a window size");
      }
    }
    c.corpus.train_manifest = cj.value("train_manifest", std::string());
    c.corpus.eval_manifest = cj.value("eval_manifest", std::string());
    c.corpus.trials = cj.value("trials", std::string());

    const json &nj = Section(j, "network");
    CheckKeys(nj,
              {"architecture", "input_dim", "hidden_dim", "output_dim", "kernels",
               "se_bottleneck", "embedding_dim"},
              "network");
    FrameNetConfig &f = c.network.frame;
    if (nj.contains("architecture"))
      f.architecture = ParseArchitecture(nj.at("architecture").get<std::string>());
    f.input_dim = nj.value("input_dim", s.feature_dim);
    f.hidden_dim = nj.value("hidden_dim", f.hidden_dim);
    f.output_dim = nj.value("output_dim", f.output_dim);
    f.kernels = nj.value("kernels", f.kernels);
    f.se_bottleneck = nj.value("se_bottleneck", f.se_bottleneck);
    c.network.embedding_dim = nj.value("embedding_dim", c.network.embedding_dim);

    const json &aj = Section(j, "aggregation");
    CheckKeys(aj, {"kind", "num_components", "use_bias"}, "aggregation");
    AggregationConfig &a = c.network.aggregation;
    if (aj.contains("kind")) a.kind = ParseAggregationKind(aj.at("kind").get<std::string>());
    a.num_components = aj.value("num_components", a.num_components);
    a.use_bias = aj.value("use_bias", a.use_bias);

    const json &tj = Section(j, "train");
    CheckKeys(tj,
              {"crop_frames", "batch_size", "weight_decay", "lr_start", "lr_end", "schedule",
               "momentum", "epochs", "segments_per_speaker"},
              "train");
    c.train = TrainConfigFromJson(tj);

    const json &ij = Section(j, "ivector");
    CheckKeys(ij,
              {"rank", "iterations", "diagonal_stats", "sample_utterances",
               "samples_per_utterance", "trace_utterances"},
              "ivector");
    IvectorSection &iv = c.ivector;
    iv.rank = ij.value("rank", iv.rank);
    iv.iterations = ij.value("iterations", iv.iterations);
    iv.diagonal_stats = ij.value("diagonal_stats", iv.diagonal_stats);
    iv.sample_utterances = ij.value("sample_utterances", iv.sample_utterances);
    iv.samples_per_utterance = ij.value("samples_per_utterance", iv.samples_per_utterance);
    iv.trace_utterances = ij.value("trace_utterances", iv.trace_utterances);

    const json &bj = Section(j, "backend");
    CheckKeys(bj, {"cohort_size", "top_k", "clip_top_k", "plda_iterations"}, "backend");
    BackendSection &b = c.backend;
    b.cohort_size = bj.value("cohort_size", b.cohort_size);
    b.top_k = bj.value("top_k", b.top_k);
    b.clip_top_k = bj.value("clip_top_k", b.clip_top_k);
    b.plda_iterations = bj.value("plda_iterations", b.plda_iterations);
  } catch (const json::exception &e) {
    Fail(ErrorCode::kConfig, std::string("config: ") + e.what());
  }
  c.Validate();
  return c;
}

json PipelineConfigToJson(const PipelineConfig &c) {
  const SynthSpec &s = c.corpus.synth;
  json corpus = {{"num_speakers", s.num_speakers},
                 {"utts_per_speaker", s.utts_per_speaker},
                 {"min_frames", s.min_frames},
                 {"max_frames", s.max_frames},
                 {"feature_dim", s.feature_dim},
                 {"speaker_dim", s.speaker_dim},
                 {"num_components", s.num_components},
                 {"component_spread", s.component_spread},
                 {"speaker_scale", s.speaker_scale},
                 {"channel_scale", s.channel_scale},
                 {"noise_scale", s.noise_scale},
                 {"stay_prob", s.stay_prob},
                 {"occupancy_spread", s.occupancy_spread},
                 {"noise_spread", s.noise_spread},
                 {"num_augment", s.num_augment},
                 {"augment_noise_scale", s.augment_noise_scale},
                 {"eval_speakers", c.corpus.eval_speakers},
                 {"num_target_trials", c.corpus.num_target_trials},
                 {"num_nontarget_trials", c.corpus.num_nontarget_trials},
                 {"train_manifest", c.corpus.train_manifest},
                 {"eval_manifest", c.corpus.eval_manifest},
                 {"trials", c.corpus.trials}};
  if (c.corpus.cmn_window)
    corpus["cmn"] = *c.corpus.cmn_window;
  else
    corpus["cmn"] = c.corpus.cmn ? "utterance" : "none";
  const FrameNetConfig &f = c.network.frame;
  json train = TrainConfigToJson(c.train);
  train.erase("seed");
  return {{"seed", c.seed},
          {"corpus", corpus},
          {"network",
           {{"architecture", ArchitectureName(f.architecture)},
            {"input_dim", f.input_dim},
            {"hidden_dim", f.hidden_dim},
            {"output_dim", f.output_dim},
            {"kernels", f.kernels},
            {"se_bottleneck", f.se_bottleneck},
            {"embedding_dim", c.network.embedding_dim}}},
          {"aggregation",
           {{"kind", AggregationKindName(c.network.aggregation.kind)},
            {"num_components", c.network.aggregation.num_components},
            {"use_bias", c.network.aggregation.use_bias}}},
          {"train", train},
          {"ivector",
           {{"rank", c.ivector.rank},
            {"iterations", c.ivector.iterations},
            {"diagonal_stats", c.ivector.diagonal_stats},
            {"sample_utterances", c.ivector.sample_utterances},
            {"samples_per_utterance", c.ivector.samples_per_utterance},
            {"trace_utterances", c.ivector.trace_utterances}}},
          {"backend",
           {{"cohort_size", c.backend.cohort_size},
            {"top_k", c.backend.top_k},
            {"clip_top_k", c.backend.clip_top_k},
            {"plda_iterations", c.backend.plda_iterations}}}};
}

PipelineConfig LoadPipelineConfig(const std::string &path) {
  std::ifstream is(path);
  if (!is) Fail(ErrorCode::kMissingInput, "cannot open config " + path);
  json j;
  try {
    j = json::parse(is);
  } catch (const json::exception &e) {
    Fail(ErrorCode::kConfig, path + ": " + e.what());
  }
  return PipelineConfigFromJson(j);
}

std::string ConfigHash(const PipelineConfig &c) {
  return HexU64(Fnv1a64(PipelineConfigToJson(c).dump()));
}

// ---------------------------------------------------------------- archives

void WriteEmbeddingArchive(const EmbeddingArchive &a, const std::string &path) {
  NIVEC_CHECK(a.ids.size() == static_cast<size_t>(a.vectors.rows()) &&
                  a.speakers.size() == a.ids.size(),
              ErrorCode::kDimensionMismatch, "embedding archive: count mismatch");
  std::ostringstream os;
  BinaryWriter w(os);
  w.WriteMagic("NIVE");
  w.WriteU32(kEmbeddingFileVersion);
  w.WriteU32(static_cast<uint32_t>(a.ids.size()));
  w.WriteU32(static_cast<uint32_t>(a.vectors.cols()));
  for (size_t i = 0; i < a.ids.size(); ++i) {
    w.WriteString(a.ids[i]);
    w.WriteString(a.speakers[i]);
    for (Eigen::Index d = 0; d < a.vectors.cols(); ++d) w.WriteF64(a.vectors(i, d));
  }
  WriteFileBytes(path, os.str());
}

EmbeddingArchive ReadEmbeddingArchive(const std::string &path) {
  std::istringstream is(ReadFileBytes(path));
  BinaryReader r(is);
  r.ExpectMagic("NIVE");
  r.ExpectVersion(kEmbeddingFileVersion);
  const uint32_t count = r.ReadU32(), dim = r.ReadU32();
  EmbeddingArchive a;
  a.vectors.resize(count, dim);
  for (uint32_t i = 0; i < count; ++i) {
    a.ids.push_back(r.ReadString());
    a.speakers.push_back(r.ReadString());
    for (uint32_t d = 0; d < dim; ++d) a.vectors(i, d) = r.ReadF64();
  }
  return a;
}

void WriteScores(const std::vector<ScoreLine> &scores, const std::string &path) {
  std::ostringstream os;
  char buf[64];
  for (const ScoreLine &s : scores) {
    os << s.enroll << '\t' << s.test;
    std::snprintf(buf, sizeof(buf), "\t%.10g\t%.10g\n", s.raw, s.normalized);
    os << buf;
  }
  WriteFileBytes(path, os.str());
}

std::vector<ScoreLine> ReadScores(const std::string &path) {
  std::ifstream is(path);
  if (!is) Fail(ErrorCode::kMissingInput, "cannot open scores " + path);
  std::vector<ScoreLine> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ScoreLine s;
    if (!(ls >> s.enroll >> s.test >> s.raw))
      Fail(ErrorCode::kConfig, path + ":" + std::to_string(lineno) + ": malformed score line");
    if (!(ls >> s.normalized)) s.normalized = s.raw;
    out.push_back(std::move(s));
  }
  return out;
}

void SplitScores(const std::vector<ScoreLine> &scores, const TrialList &trials, bool use_raw,
                 std::vector<double> *target, std::vector<double> *nontarget) {
  std::map<std::pair<std::string, std::string>, double> lookup;
  for (const ScoreLine &s : scores) lookup[{s.enroll, s.test}] = use_raw ? s.raw : s.normalized;
  target->clear();
  nontarget->clear();
  for (const Trial &t : trials) {
    if (t.label == TrialLabel::kUnknown) continue;
    auto it = lookup.find({t.enroll_id, t.test_id});
    if (it == lookup.end())
      Fail(ErrorCode::kMissingInput, "no score for trial " + t.enroll_id + " " + t.test_id);
    (t.label == TrialLabel::kTarget ? target : nontarget)->push_back(it->second);
  }
}

const char *SystemName(System s) {
  return s == System::kEmbedding ? "embedding" : "ivector";
}

System ParseSystem(const std::string &name) {
  if (name == "embedding") return System::kEmbedding;
  if (name == "ivector") return System::kIvector;
  Fail(ErrorCode::kConfig, "unknown system '" + name + "' (expected embedding or ivector)");
}

// ---------------------------------------------------------------- pipeline

Pipeline::Pipeline(PipelineConfig config, std::string workdir, int jobs, bool force)
    : config_(std::move(config)), workdir_(std::move(workdir)), jobs_(jobs), force_(force) {
  config_.Validate();
  NIVEC_CHECK(jobs_ >= 1, ErrorCode::kConfig, "--jobs must be >= 1");
  std::error_code ec;
  fs::create_directories(workdir_, ec);
  if (ec || !fs::is_directory(workdir_))
    Fail(ErrorCode::kConfig, "workdir " + workdir_ + " is not writable");
}

std::string Pipeline::Path(const std::string &relative) const {
  return (fs::path(workdir_) / relative).string();
}

std::string Pipeline::TrainManifestPath() const {
  return config_.corpus.train_manifest.empty() ? Path("corpus/train.tsv")
                                               : config_.corpus.train_manifest;
}

std::string Pipeline::EvalManifestPath() const {
  return config_.corpus.train_manifest.empty() ? Path("corpus/eval.tsv")
                                               : config_.corpus.eval_manifest;
}

std::string Pipeline::TrialsPath() const {
  return config_.corpus.train_manifest.empty() ? Path("corpus/trials.tsv") : config_.corpus.trials;
}

void Pipeline::Log(const std::string &msg) const {
  if (verbose) std::cerr << "[nivec] " << msg << std::endl;
}

std::string Pipeline::Relative(const std::string &path) const {
  std::error_code ec;
  fs::path rel = fs::relative(path, workdir_, ec);
  if (ec || rel.empty() || *rel.begin() == "..") return path;
  return rel.generic_string();
}

void Pipeline::RequireInputs(const std::vector<std::string> &paths) const {
  for (const std::string &p : paths) {
    if (!fs::exists(p)) Fail(ErrorCode::kMissingInput, "missing input " + p);
    const std::string prov = p + ".prov.json";
    if (!fs::exists(prov)) continue;
    json j;
    try {
      j = json::parse(ReadFileBytes(prov));
    } catch (const json::exception &e) {
      Fail(ErrorCode::kCheckFailed, prov + ": " + e.what());
    }
    const std::string expected = j.value("output_hash", std::string());
    if (expected != FileContentHash(p))
      Fail(ErrorCode::kCheckFailed, "hash mismatch: " + p + " does not match " + prov);
    if (j.value("config_hash", std::string()) != ConfigHash(config_))
      Log("note: " + Relative(p) + " was produced under a different config");
  }
}

void Pipeline::GuardOutputs(const std::vector<std::string> &paths) const {
  for (const std::string &p : paths) {
    if (!force_ && fs::exists(p))
      Fail(ErrorCode::kConfig, "refusing to overwrite " + p + " (use --force)");
    fs::create_directories(fs::path(p).parent_path());
  }
}

void Pipeline::WriteProvenance(const std::string &output, const std::string &stage,
                               const std::string &seed_tag,
                               const std::vector<std::string> &inputs,
                               const std::string &features_hash) const {
  nlohmann::ordered_json j;
  j["artifact"] = Relative(output);
  j["stage"] = stage;
  j["config_hash"] = ConfigHash(config_);
  j["seed"] = seed_tag.empty() ? config_.seed : config_.StageSeed(seed_tag);
  nlohmann::ordered_json in = nlohmann::ordered_json::array();
  for (const std::string &p : inputs)
    in.push_back({{"path", Relative(p)}, {"hash", FileContentHash(p)}});
  j["inputs"] = in;
  if (!features_hash.empty()) j["features_hash"] = features_hash;
  j["output_hash"] = FileContentHash(output);
  WriteFileBytes(output + ".prov.json", j.dump(2) + "\n");
}

std::vector<Matrix> Pipeline::LoadFeatures(const CorpusManifest &manifest) const {
  std::vector<Matrix> out(manifest.entries.size());
  const int dim = config_.network.frame.input_dim;
  ParallelFor(out.size(), jobs_, [&](size_t i) {
    FeatureSequence seq = ReadFeatures(manifest.ResolvePath(manifest.entries[i]), dim);
    if (config_.corpus.cmn) seq = ApplyCmn(seq, config_.corpus.cmn_window);
    out[i] = std::move(seq.frames);
  });
  return out;
}

namespace {

// Hash over the content hashes of every feature file in a manifest.
std::string FeaturesDigest(const CorpusManifest &m) {
  std::string all;
  for (const auto &e : m.entries) all += FileContentHash(m.ResolvePath(e));
  return HexU64(Fnv1a64(all));
}

std::vector<int> SpeakerLabels(const CorpusManifest &m, std::vector<std::string> *names) {
  std::vector<std::string> speakers = m.SpeakerIds();
  std::map<std::string, int> index;
  for (size_t i = 0; i < speakers.size(); ++i) index[speakers[i]] = static_cast<int>(i);
  std::vector<int> labels;
  for (const auto &e : m.entries) labels.push_back(index.at(e.speaker_id));
  if (names) *names = std::move(speakers);
  return labels;
}

std::vector<int> LabelsFromStrings(const std::vector<std::string> &speakers) {
  std::map<std::string, int> index;
  std::vector<int> labels;
  for (const auto &s : speakers) {
    auto it = index.emplace(s, static_cast<int>(index.size())).first;
    labels.push_back(it->second);
  }
  return labels;
}

EmbeddingArchive ArchiveSkeleton(const CorpusManifest &m, int dim) {
  EmbeddingArchive a;
  for (const auto &e : m.entries) {
    a.ids.push_back(e.utterance_id);
    a.speakers.push_back(e.speaker_id);
  }
  a.vectors.resize(static_cast<Eigen::Index>(m.entries.size()), dim);
  return a;
}

std::string Percent(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.2f", 100.0 * v);
  return buf;
}

std::string Fixed4(double v) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "%.4f", v);
  return buf;
}

}  // namespace

void Pipeline::Synth() {
  if (!config_.corpus.train_manifest.empty()) {
    Log("synth: external corpus configured, nothing to generate");
    RequireInputs({TrainManifestPath(), EvalManifestPath(), TrialsPath()});
    return;
  }
  const std::vector<std::string> outputs = {Path("corpus/manifest.tsv"), TrainManifestPath(),
                                            EvalManifestPath(), TrialsPath()};
  GuardOutputs(outputs);
  SynthSpec spec = config_.corpus.synth;
  spec.seed = config_.StageSeed("synth");
  Log("synth: generating " + std::to_string(spec.num_speakers) + " speakers x " +
      std::to_string(spec.utts_per_speaker) + " utterances");
  CorpusManifest all = GenerateSyntheticCorpus(spec, Path("corpus"));

  std::vector<std::string> speakers = all.SpeakerIds();
  const size_t num_train = speakers.size() - static_cast<size_t>(config_.corpus.eval_speakers);
  std::set<std::string> train_speakers(speakers.begin(), speakers.begin() + num_train);
  CorpusManifest train, eval;
  train.base_dir = eval.base_dir = all.base_dir;
  for (const auto &e : all.entries) {
    if (train_speakers.count(e.speaker_id))
      train.entries.push_back(e);
    else if (e.utterance_id.find("-aug") == std::string::npos)
      eval.entries.push_back(e);
  }
  WriteManifest(train, TrainManifestPath());
  WriteManifest(eval, EvalManifestPath());
  TrialList trials = MakeTrials(eval, config_.corpus.num_target_trials,
                                config_.corpus.num_nontarget_trials, config_.StageSeed("trials"));
  WriteTrials(trials, TrialsPath());
  for (const std::string &o : outputs) WriteProvenance(o, "synth", "synth", {});
}

void Pipeline::TrainNet() {
  RequireInputs({TrainManifestPath()});
  const std::string net_path = Path("net.nivn"), curve_path = Path("loss.csv");
  GuardOutputs({net_path, curve_path});
  CorpusManifest manifest = ReadManifest(TrainManifestPath());
  TrainingData data;
  std::vector<std::string> speakers;
  data.labels = SpeakerLabels(manifest, &speakers);
  data.num_classes = static_cast<int>(speakers.size());
  data.utterances = LoadFeatures(manifest);

  SpeakerNetConfig net_config = config_.network;
  net_config.num_speakers = data.num_classes;
  Rng init(config_.StageSeed("network-init"));
  SpeakerNet net(net_config, &init);
  TrainConfig train = config_.train;
  train.seed = config_.StageSeed("train");
  const int total = train.StepsPerEpoch(data.num_classes) * train.epochs;
  Log("train-net: " + std::to_string(data.utterances.size()) + " utterances, " +
      std::to_string(data.num_classes) + " speakers, " + std::to_string(total) + " steps");
  const int every = std::max(1, total / 20);
  std::vector<TrainStep> curve = Train(&net, data, train, [&](const TrainStep &s) {
    if (s.step % every == 0 || s.step + 1 == total)
      Log("  step " + std::to_string(s.step) + " lr " + Fixed4(s.lr) + " loss " + Fixed4(s.loss) +
          " acc " + Fixed4(s.accuracy));
  });
  SaveCheckpoint(net, net_path);
  WriteLossCurve(curve, curve_path);
  const std::string digest = FeaturesDigest(manifest);
  for (const std::string &o : {net_path, curve_path})
    WriteProvenance(o, "train-net", "train", {TrainManifestPath()}, digest);
}

void Pipeline::ExtractEmbeddings() {
  const std::string net_path = Path("net.nivn");
  RequireInputs({net_path, TrainManifestPath(), EvalManifestPath()});
  std::unique_ptr<SpeakerNet> net = LoadCheckpoint(net_path);
  for (const auto &[name, manifest_path] :
       {std::pair<std::string, std::string>{"train", TrainManifestPath()},
        {"eval", EvalManifestPath()}}) {
    const std::string out = Path("embeddings/" + name + ".nive");
    GuardOutputs({out});
    CorpusManifest manifest = ReadManifest(manifest_path);
    std::vector<Matrix> feats = LoadFeatures(manifest);
    EmbeddingArchive archive = ArchiveSkeleton(manifest, net->config().embedding_dim);
    ParallelFor(feats.size(), jobs_,
                [&](size_t i) { archive.vectors.row(i) = net->Embedding(feats[i]).transpose(); });
    Log("extract-embeddings: " + name + " " + std::to_string(feats.size()) + " utterances");
    WriteEmbeddingArchive(archive, out);
    WriteProvenance(out, "extract-embeddings", "", {net_path, manifest_path});
  }
}

void Pipeline::ExtractStats() {
  const std::string net_path = Path("net.nivn");
  RequireInputs({net_path, TrainManifestPath(), EvalManifestPath()});
  std::unique_ptr<SpeakerNet> net = LoadCheckpoint(net_path);
  if (net->head().kind() == AggregationKind::kMeanStd)
    Fail(ErrorCode::kConfig,
         "extract-stats: aggregation 'meanstd' has no dictionary; use lde-iso, lde-shared-diag, "
         "netvlad or hybrid for neural i-vectors");
  for (const auto &[name, manifest_path] :
       {std::pair<std::string, std::string>{"train", TrainManifestPath()},
        {"eval", EvalManifestPath()}}) {
    const std::string out = Path("stats/" + name + ".nivs");
    GuardOutputs({out});
    CorpusManifest manifest = ReadManifest(manifest_path);
    std::vector<Matrix> feats = LoadFeatures(manifest);
    StatsArchive archive;
    archive.stats.resize(feats.size());
    for (const auto &e : manifest.entries) archive.ids.push_back(e.utterance_id);
    ParallelFor(feats.size(), jobs_, [&](size_t i) {
      Matrix x = net->FrameFeatures(feats[i]);
      archive.stats[i] =
          AccumulateStats(x, net->head().Posteriors(x), config_.ivector.diagonal_stats);
    });
    Log("extract-stats: " + name + " " + std::to_string(feats.size()) + " utterances");
    WriteStatsArchive(archive, out);
    WriteProvenance(out, "extract-stats", "", {net_path, manifest_path});
  }
}

void Pipeline::TrainIvector() {
  const std::string stats_path = Path("stats/train.nivs");
  RequireInputs({stats_path});
  const std::string out = Path("ivector.nivx"), curve = Path("ivector-objective.csv");
  GuardOutputs({out, curve});
  StatsArchive archive = ReadStatsArchive(stats_path);
  NIVEC_CHECK(!archive.stats.empty(), ErrorCode::kMissingInput, "train-ivector: no statistics");
  SufficientStats total = archive.stats[0];
  for (size_t i = 1; i < archive.stats.size(); ++i) total = MergeStats(total, archive.stats[i]);
  Rng rng(config_.StageSeed("ivector-init"));
  IVectorExtractor ext = InitExtractor(total, config_.ivector.rank, &rng);
  std::ostringstream csv;
  csv << "iteration,log_likelihood\n";
  char buf[64];
  for (int it = 0; it < config_.ivector.iterations; ++it) {
    EmIterationResult r = EmIterate(archive.stats, ext, jobs_);
    std::snprintf(buf, sizeof(buf), "%d,%.10g\n", it, r.objective);
    csv << buf;
    Log("train-ivector: iteration " + std::to_string(it) + " log-likelihood " +
        std::to_string(r.objective));
    if (!r.ridged_components.empty())
      Log("  ridge applied to " + std::to_string(r.ridged_components.size()) + " components");
    ext = std::move(r.extractor);
  }
  std::snprintf(buf, sizeof(buf), "%d,%.10g\n", config_.ivector.iterations,
                CorpusLogLikelihood(archive.stats, ext, jobs_));
  csv << buf;
  SaveExtractor(ext, out);
  WriteFileBytes(curve, csv.str());
  WriteProvenance(out, "train-ivector", "ivector-init", {stats_path});
  WriteProvenance(curve, "train-ivector", "ivector-init", {stats_path});
}

void Pipeline::ExtractIvectors() {
  const std::string ext_path = Path("ivector.nivx"), net_path = Path("net.nivn");
  const std::string train_stats = Path("stats/train.nivs"), eval_stats = Path("stats/eval.nivs");
  RequireInputs({ext_path, net_path, train_stats, eval_stats, TrainManifestPath(),
                 EvalManifestPath()});
  const std::string samples_path = Path("ivectors/samples.csv");
  const std::string trace_path = Path("ivectors/trace.csv");
  GuardOutputs({Path("ivectors/train.nive"), Path("ivectors/eval.nive"), samples_path, trace_path});
  IVectorExtractor ext = LoadExtractor(ext_path);

  std::vector<IVectorPosterior> eval_posteriors;
  for (const auto &[name, stats_path, manifest_path] :
       {std::tuple<std::string, std::string, std::string>{"train", train_stats,
                                                          TrainManifestPath()},
        {"eval", eval_stats, EvalManifestPath()}}) {
    StatsArchive stats = ReadStatsArchive(stats_path);
    CorpusManifest manifest = ReadManifest(manifest_path);
    NIVEC_CHECK(stats.ids.size() == manifest.entries.size(), ErrorCode::kCheckFailed,
                "extract-ivectors: " + stats_path + " does not match " + manifest_path);
    EmbeddingArchive archive = ArchiveSkeleton(manifest, ext.Rank());
    std::vector<IVectorPosterior> posts(stats.stats.size());
    ParallelFor(posts.size(), jobs_, [&](size_t i) {
      NIVEC_CHECK(stats.ids[i] == archive.ids[i], ErrorCode::kCheckFailed,
                  "extract-ivectors: utterance order differs from manifest");
      posts[i] = ComputePosterior(stats.stats[i], ext);
      archive.vectors.row(i) = posts[i].mean.transpose();
    });
    const std::string out = Path("ivectors/" + name + ".nive");
    WriteEmbeddingArchive(archive, out);
    WriteProvenance(out, "extract-ivectors", "", {ext_path, stats_path});
    Log("extract-ivectors: " + name + " " + std::to_string(posts.size()) + " utterances");
    if (name == "eval") eval_posteriors = std::move(posts);
  }

  CorpusManifest eval = ReadManifest(EvalManifestPath());
  const size_t num_samples =
      std::min(eval.entries.size(), static_cast<size_t>(config_.ivector.sample_utterances));
  std::vector<std::string> sample_ids;
  std::vector<Matrix> samples;
  Rng sample_root(config_.StageSeed("ivector-samples"));
  for (size_t i = 0; i < num_samples; ++i) {
    Rng rng = sample_root.Derive(eval.entries[i].utterance_id);
    sample_ids.push_back(eval.entries[i].utterance_id);
    samples.push_back(SampleIvectors(eval_posteriors[i], config_.ivector.samples_per_utterance, &rng));
  }
  WriteSampleCsv(sample_ids, samples, samples_path);
  WriteProvenance(samples_path, "extract-ivectors", "ivector-samples", {ext_path, eval_stats});

  // Posterior covariance trace over nested frame prefixes.
  std::unique_ptr<SpeakerNet> net = LoadCheckpoint(net_path);
  const size_t num_trace =
      std::min(eval.entries.size(), static_cast<size_t>(config_.ivector.trace_utterances));
  CorpusManifest subset = eval;
  subset.entries.resize(num_trace);
  std::vector<Matrix> feats = LoadFeatures(subset);
  std::vector<std::string> ids;
  std::vector<double> frames, traces;
  for (size_t u = 0; u < num_trace; ++u) {
    Matrix x = net->FrameFeatures(feats[u]);
    Matrix gamma = net->head().Posteriors(x);
    const int t_total = static_cast<int>(x.rows());
    std::vector<int> lengths;
    for (int len = 10; len < t_total; len *= 2) lengths.push_back(len);
    lengths.push_back(t_total);
    for (int len : lengths) {
      SufficientStats s = AccumulateStats(x.topRows(len), gamma.topRows(len),
                                          config_.ivector.diagonal_stats);
      ids.push_back(subset.entries[u].utterance_id);
      frames.push_back(len);
      traces.push_back(PosteriorTrace(ComputePosterior(s, ext)));
    }
  }
  WriteTraceCsv(ids, frames, traces, trace_path);
  WriteProvenance(trace_path, "extract-ivectors", "", {ext_path, net_path, EvalManifestPath()});
}

void Pipeline::TrainBackend(System system) {
  const std::string sys = SystemName(system);
  const std::string dir = system == System::kEmbedding ? "embeddings/" : "ivectors/";
  const std::string train_path = Path(dir + "train.nive");
  RequireInputs({train_path});
  const std::string out = Path("backend-" + sys + ".nivb"), curve = Path("plda-" + sys + ".csv");
  GuardOutputs({out, curve});
  EmbeddingArchive train = ReadEmbeddingArchive(train_path);
  Backend backend;
  std::string warning;
  backend.preprocessor = FitPreprocessor(train.vectors, &warning);
  if (!warning.empty()) Log("train-backend: " + warning);
  Matrix x = backend.preprocessor.Transform(train.vectors);
  PldaFitResult fit =
      FitPlda(x, LabelsFromStrings(train.speakers), {config_.backend.plda_iterations});
  backend.plda = fit.model;

  std::vector<Eigen::Index> order(static_cast<size_t>(x.rows()));
  for (size_t i = 0; i < order.size(); ++i) order[i] = static_cast<Eigen::Index>(i);
  Rng rng(config_.StageSeed("cohort"));
  rng.Shuffle(&order);
  const size_t cohort = std::min(order.size(), static_cast<size_t>(config_.backend.cohort_size));
  if (cohort < static_cast<size_t>(config_.backend.cohort_size))
    Log("train-backend: cohort limited to " + std::to_string(cohort) + " embeddings");
  backend.cohort.resize(static_cast<Eigen::Index>(cohort), x.cols());
  for (size_t i = 0; i < cohort; ++i) backend.cohort.row(i) = x.row(order[i]);

  std::ostringstream csv;
  csv << "iteration,log_likelihood\n";
  char buf[64];
  for (size_t i = 0; i < fit.objective.size(); ++i) {
    std::snprintf(buf, sizeof(buf), "%zu,%.10g\n", i, fit.objective[i]);
    csv << buf;
  }
  SaveBackend(backend, out);
  WriteFileBytes(curve, csv.str());
  Log("train-backend: " + sys + " PLDA on " + std::to_string(x.rows()) + " embeddings");
  WriteProvenance(out, "train-backend", "cohort", {train_path});
  WriteProvenance(curve, "train-backend", "cohort", {train_path});
}

void Pipeline::Score(System system) {
  const std::string sys = SystemName(system);
  const std::string dir = system == System::kEmbedding ? "embeddings/" : "ivectors/";
  const std::string backend_path = Path("backend-" + sys + ".nivb");
  const std::string eval_path = Path(dir + "eval.nive");
  RequireInputs({backend_path, eval_path, TrialsPath()});
  const std::string out = Path("scores/" + sys + ".tsv");
  GuardOutputs({out});
  Backend backend = LoadBackend(backend_path);
  EmbeddingArchive eval = ReadEmbeddingArchive(eval_path);
  TrialList trials = ReadTrials(TrialsPath());
  Matrix x = backend.preprocessor.Transform(eval.vectors);
  std::map<std::string, Eigen::Index> row;
  for (size_t i = 0; i < eval.ids.size(); ++i) row[eval.ids[i]] = static_cast<Eigen::Index>(i);
  for (const Trial &t : trials)
    for (const std::string &id : {t.enroll_id, t.test_id})
      if (!row.count(id)) Fail(ErrorCode::kMissingInput, "score: no embedding for " + id);

  const int cohort_rows = static_cast<int>(backend.cohort.rows());
  int top_k = config_.backend.top_k;
  if (top_k > cohort_rows) {
    if (!config_.backend.clip_top_k)
      Fail(ErrorCode::kConfig, "score: top_k=" + std::to_string(top_k) + " exceeds cohort size " +
                                   std::to_string(cohort_rows) + " (set backend.clip_top_k)");
    top_k = cohort_rows;
  }
  PldaScorer scorer(backend.plda);
  std::vector<CohortSideStats> side(eval.ids.size());
  ParallelFor(side.size(), jobs_, [&](size_t i) {
    Vector s(cohort_rows);
    for (int c = 0; c < cohort_rows; ++c)
      s(c) = scorer.Score(x.row(i).transpose(), backend.cohort.row(c).transpose());
    side[i] = TopKStats(s, top_k);
  });
  std::vector<ScoreLine> scores(trials.size());
  ParallelFor(trials.size(), jobs_, [&](size_t i) {
    const Eigen::Index a = row.at(trials[i].enroll_id), b = row.at(trials[i].test_id);
    ScoreLine &s = scores[i];
    s.enroll = trials[i].enroll_id;
    s.test = trials[i].test_id;
    s.raw = scorer.Score(x.row(a).transpose(), x.row(b).transpose());
    s.normalized = AsNorm(s.raw, side[a], side[b]);
  });
  WriteScores(scores, out);
  Log("score: " + sys + " " + std::to_string(scores.size()) + " trials");
  WriteProvenance(out, "score", "", {backend_path, eval_path, TrialsPath()});
}

SystemResult Pipeline::Eval(System system) {
  const std::string sys = SystemName(system);
  const std::string scores_path = Path("scores/" + sys + ".tsv");
  RequireInputs({scores_path, TrialsPath()});
  const std::string out = Path("metrics/" + sys + ".json");
  const std::string det = Path("metrics/" + sys + "-det.csv");
  GuardOutputs({out, det});
  std::vector<ScoreLine> scores = ReadScores(scores_path);
  TrialList trials = ReadTrials(TrialsPath());
  SystemResult result;
  std::vector<double> tgt, non;
  SplitScores(scores, trials, true, &tgt, &non);
  result.raw = ComputeMetrics(tgt, non);
  SplitScores(scores, trials, false, &tgt, &non);
  result.normalized = ComputeMetrics(tgt, non);

  nlohmann::ordered_json j;
  j["system"] = sys;
  j["num_target"] = result.raw.num_target;
  j["num_nontarget"] = result.raw.num_nontarget;
  j["raw"] = {{"eer", result.raw.eer}, {"min_dcf", result.raw.min_dcf}};
  j["as_norm"] = {{"eer", result.normalized.eer}, {"min_dcf", result.normalized.min_dcf}};
  WriteFileBytes(out, j.dump(2) + "\n");
  WriteFileBytes(det, DetCsv(DetPoints(tgt, non)));
  Log("eval: " + sys + " EER " + Percent(result.normalized.eer) + "% (raw " +
      Percent(result.raw.eer) + "%), minDCF " + Fixed4(result.normalized.min_dcf));
  WriteProvenance(out, "eval", "", {scores_path, TrialsPath()});
  WriteProvenance(det, "eval", "", {scores_path, TrialsPath()});
  return result;
}

void Pipeline::WriteReport(const SystemResult &emb, const SystemResult &ivec) {
  const std::string md = Path("report.md"), js = Path("report.json");
  GuardOutputs({md, js});
  const auto &net = config_.network;
  const std::string name = std::string(ArchitectureName(net.frame.architecture)) + " (" +
                           AggregationKindName(net.aggregation.kind) + ")";
  std::ostringstream os;
  os << "# Verification results\n\n";
  os << "| System | Representation | EER (%) | minDCF | EER AS-norm (%) | minDCF AS-norm |\n";
  os << "|---|---|---|---|---|---|\n";
  auto line = [&](const char *what, const SystemResult &r) {
    os << "| " << name << " | " << what << " | " << Percent(r.raw.eer) << " | "
       << Fixed4(r.raw.min_dcf) << " | " << Percent(r.normalized.eer) << " | "
       << Fixed4(r.normalized.min_dcf) << " |\n";
  };
  line("deep embedding", emb);
  line("neural i-vector", ivec);
  os << "\nTrials: " << emb.raw.num_target << " target, " << emb.raw.num_nontarget
     << " nontarget. minDCF with C_miss = C_fa = 1, P_target = 0.05.\n";
  WriteFileBytes(md, os.str());

  nlohmann::ordered_json j;
  j["architecture"] = ArchitectureName(net.frame.architecture);
  j["aggregation"] = AggregationKindName(net.aggregation.kind);
  j["config_hash"] = ConfigHash(config_);
  for (const auto &[key, r] : {std::pair<const char *, const SystemResult *>{"embedding", &emb},
                               {"ivector", &ivec}}) {
    j[key] = {{"eer", r->raw.eer},
              {"min_dcf", r->raw.min_dcf},
              {"eer_as_norm", r->normalized.eer},
              {"min_dcf_as_norm", r->normalized.min_dcf}};
  }
  WriteFileBytes(js, j.dump(2) + "\n");
  const std::vector<std::string> inputs = {Path("metrics/embedding.json"),
                                           Path("metrics/ivector.json")};
  WriteProvenance(md, "run-all", "", inputs);
  WriteProvenance(js, "run-all", "", inputs);
}

void Pipeline::RunAll() {
  Synth();
  TrainNet();
  ExtractEmbeddings();
  ExtractStats();
  TrainIvector();
  ExtractIvectors();
  SystemResult results[2];
  for (System s : {System::kEmbedding, System::kIvector}) {
    TrainBackend(s);
    Score(s);
    results[static_cast<int>(s)] = Eval(s);
  }
  WriteReport(results[0], results[1]);
}

}  // namespace nivec
