// nivec/corpus.cc

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

#include "nivec/corpus.h"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <map>
#include <set>
#include <sstream>

#include "nivec/binary-io.h"
#include "nivec/error.h"

namespace nivec {

namespace fs = std::filesystem;

void WriteFeatures(const FeatureSequence &seq, const std::string &path) {
  NIVEC_CHECK(seq.NumFrames() >= 1, ErrorCode::kInvalidArgument, "feature sequence has no frames");
  NIVEC_CHECK(seq.frames.allFinite(), ErrorCode::kNonFinite,
              "non-finite features in " + seq.utterance_id);
  std::ofstream os(path, std::ios::binary | std::ios::trunc);
  if (!os) Fail(ErrorCode::kIo, "cannot write " + path);
  BinaryWriter w(os);
  w.WriteMagic("NIVF");
  w.WriteU32(kFeatureFileVersion);
  w.WriteU32(static_cast<uint32_t>(seq.frames.rows()));
  w.WriteU32(static_cast<uint32_t>(seq.frames.cols()));
  for (Eigen::Index t = 0; t < seq.frames.rows(); ++t)
    for (Eigen::Index d = 0; d < seq.frames.cols(); ++d)
      w.WriteF32(static_cast<float>(seq.frames(t, d)));
}

namespace {

std::pair<uint32_t, uint32_t> ReadFeatureHeader(BinaryReader *r) {
  r->ExpectMagic("NIVF");
  r->ExpectVersion(kFeatureFileVersion);
  uint32_t t = r->ReadU32();
  uint32_t d = r->ReadU32();
  if (t < 1 || d < 1) Fail(ErrorCode::kDimensionMismatch, "feature file with empty dimension");
  return {t, d};
}

std::string StemOf(const std::string &path) { return fs::path(path).stem().string(); }

}  // namespace

FeatureSequence ReadFeatures(const std::string &path, std::optional<int> expected_dim) {
  std::ifstream is(path, std::ios::binary);
  if (!is) Fail(ErrorCode::kMissingInput, "cannot open " + path);
  BinaryReader r(is);
  auto [t, d] = ReadFeatureHeader(&r);
  if (expected_dim && static_cast<int>(d) != *expected_dim)
    Fail(ErrorCode::kDimensionMismatch, "dimension mismatch in " + path + ": " +
                                            std::to_string(d) + " vs " +
                                            std::to_string(*expected_dim));
  FeatureSequence seq;
  seq.utterance_id = StemOf(path);
  seq.frames.resize(t, d);
  for (uint32_t i = 0; i < t; ++i)
    for (uint32_t j = 0; j < d; ++j) seq.frames(i, j) = r.ReadF32();
  return seq;
}

std::pair<int, int> ReadFeatureShape(const std::string &path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) Fail(ErrorCode::kMissingInput, "cannot open " + path);
  BinaryReader r(is);
  auto [t, d] = ReadFeatureHeader(&r);
  return {static_cast<int>(t), static_cast<int>(d)};
}

FeatureSequence ApplyCmn(const FeatureSequence &seq, std::optional<int> window) {
  const Eigen::Index num_frames = seq.frames.rows();
  NIVEC_CHECK(num_frames >= 1, ErrorCode::kInvalidArgument, "CMN on empty sequence");
  FeatureSequence out = seq;
  if (!window) {
    Eigen::RowVectorXd mean = seq.frames.colwise().mean();
    out.frames.rowwise() -= mean;
    return out;
  }
  const int w = *window;
  NIVEC_CHECK(w >= 1, ErrorCode::kInvalidArgument, "CMN window must be >= 1");
  // Prefix sums give each window mean in O(D).
  Matrix prefix = Matrix::Zero(num_frames + 1, seq.frames.cols());
  for (Eigen::Index t = 0; t < num_frames; ++t)
    prefix.row(t + 1) = prefix.row(t) + seq.frames.row(t);
  for (Eigen::Index t = 0; t < num_frames; ++t) {
    Eigen::Index begin = std::max<Eigen::Index>(0, t - w / 2);
    Eigen::Index end = std::min<Eigen::Index>(num_frames, t - w / 2 + w);
    out.frames.row(t) -=
        (prefix.row(end) - prefix.row(begin)) / static_cast<double>(end - begin);
  }
  return out;
}

std::string CorpusManifest::ResolvePath(const ManifestEntry &e) const {
  fs::path p(e.path);
  if (p.is_absolute() || base_dir.empty()) return p.string();
  return (fs::path(base_dir) / p).string();
}

int CorpusManifest::IndexOf(const std::string &utterance_id) const {
  for (size_t i = 0; i < entries.size(); ++i)
    if (entries[i].utterance_id == utterance_id) return static_cast<int>(i);
  return -1;
}

std::vector<std::string> CorpusManifest::SpeakerIds() const {
  std::set<std::string> ids;
  for (const auto &e : entries) ids.insert(e.speaker_id);
  return {ids.begin(), ids.end()};
}

void WriteManifest(const CorpusManifest &manifest, const std::string &path) {
  std::ostringstream ss;
  for (const auto &e : manifest.entries)
    ss << e.utterance_id << '\t' << e.speaker_id << '\t' << e.path << '\n';
  WriteFileBytes(path, ss.str());
}

CorpusManifest ReadManifest(const std::string &path) {
  std::ifstream is(path);
  if (!is) Fail(ErrorCode::kMissingInput, "cannot open manifest " + path);
  CorpusManifest m;
  m.base_dir = fs::path(path).parent_path().string();
  std::set<std::string> seen;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    ManifestEntry e;
    if (!std::getline(ls, e.utterance_id, '\t') || !std::getline(ls, e.speaker_id, '\t') ||
        !std::getline(ls, e.path) || e.path.empty())
      Fail(ErrorCode::kConfig, path + ":" + std::to_string(lineno) + ": malformed manifest line");
    if (!seen.insert(e.utterance_id).second)
      Fail(ErrorCode::kConfig, path + ": duplicate utterance id " + e.utterance_id);
    e.num_frames = ReadFeatureShape(m.ResolvePath(e)).first;
    m.entries.push_back(std::move(e));
  }
  return m;
}

namespace {

const char *LabelToken(TrialLabel l) {
  switch (l) {
    case TrialLabel::kTarget: return "tgt";
    case TrialLabel::kNonTarget: return "non";
    case TrialLabel::kUnknown: return "unk";
  }
  return "unk";
}

}  // namespace

void WriteTrials(const TrialList &trials, const std::string &path) {
  std::ostringstream ss;
  for (const auto &t : trials)
    ss << t.enroll_id << '\t' << t.test_id << '\t' << LabelToken(t.label) << '\n';
  WriteFileBytes(path, ss.str());
}

TrialList ReadTrials(const std::string &path) {
  std::ifstream is(path);
  if (!is) Fail(ErrorCode::kMissingInput, "cannot open trial list " + path);
  TrialList trials;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::istringstream ls(line);
    Trial t;
    std::string label;
    if (!std::getline(ls, t.enroll_id, '\t') || !std::getline(ls, t.test_id, '\t') ||
        !std::getline(ls, label))
      Fail(ErrorCode::kConfig, path + ":" + std::to_string(lineno) + ": malformed trial line");
    if (label == "tgt") t.label = TrialLabel::kTarget;
    else if (label == "non") t.label = TrialLabel::kNonTarget;
    else if (label == "unk") t.label = TrialLabel::kUnknown;
    else Fail(ErrorCode::kConfig, path + ":" + std::to_string(lineno) + ": bad label " + label);
    trials.push_back(std::move(t));
  }
  return trials;
}

TrialList MakeTrials(const CorpusManifest &manifest, int num_target, int num_nontarget,
                     uint64_t seed) {
  NIVEC_CHECK(num_target >= 0 && num_nontarget >= 0, ErrorCode::kInvalidArgument,
              "negative trial counts");
  const auto &entries = manifest.entries;
  const int64_t n = static_cast<int64_t>(entries.size());
  std::map<std::string, int> per_speaker;
  for (const auto &e : entries) per_speaker[e.speaker_id]++;
  int64_t available_target = 0;
  for (const auto &[spk, count] : per_speaker) available_target += int64_t{count} * (count - 1) / 2;
  int64_t available_nontarget = n * (n - 1) / 2 - available_target;
  if (num_target > available_target)
    Fail(ErrorCode::kInvalidArgument, "requested " + std::to_string(num_target) +
                                          " target trials but only " +
                                          std::to_string(available_target) + " exist");
  if (num_nontarget > available_nontarget)
    Fail(ErrorCode::kInvalidArgument, "requested " + std::to_string(num_nontarget) +
                                          " nontarget trials but only " +
                                          std::to_string(available_nontarget) + " exist");

  Rng rng(seed);
  Rng target_rng = rng.Derive("target");
  Rng nontarget_rng = rng.Derive("nontarget");
  TrialList trials;

  std::vector<std::pair<int, int>> target_pairs;
  for (int i = 0; i < n; ++i)
    for (int j = i + 1; j < n; ++j)
      if (entries[i].speaker_id == entries[j].speaker_id) target_pairs.emplace_back(i, j);
  for (int k = 0; k < num_target; ++k) {
    // Partial Fisher-Yates.
    size_t pick = k + target_rng.UniformInt(static_cast<uint32_t>(target_pairs.size() - k));
    std::swap(target_pairs[k], target_pairs[pick]);
    trials.push_back({entries[target_pairs[k].first].utterance_id,
                      entries[target_pairs[k].second].utterance_id, TrialLabel::kTarget});
  }

  if (available_nontarget <= 4 * int64_t{num_nontarget}) {
    std::vector<std::pair<int, int>> pairs;
    for (int i = 0; i < n; ++i)
      for (int j = i + 1; j < n; ++j)
        if (entries[i].speaker_id != entries[j].speaker_id) pairs.emplace_back(i, j);
    for (int k = 0; k < num_nontarget; ++k) {
      size_t pick = k + nontarget_rng.UniformInt(static_cast<uint32_t>(pairs.size() - k));
      std::swap(pairs[k], pairs[pick]);
      trials.push_back({entries[pairs[k].first].utterance_id,
                        entries[pairs[k].second].utterance_id, TrialLabel::kNonTarget});
    }
  } else {
    std::set<std::pair<int, int>> used;
    while (static_cast<int>(used.size()) < num_nontarget) {
      int i = static_cast<int>(nontarget_rng.UniformInt(static_cast<uint32_t>(n)));
      int j = static_cast<int>(nontarget_rng.UniformInt(static_cast<uint32_t>(n)));
      if (i == j || entries[i].speaker_id == entries[j].speaker_id) continue;
      if (i > j) std::swap(i, j);
      if (!used.insert({i, j}).second) continue;
      trials.push_back({entries[i].utterance_id, entries[j].utterance_id,
                        TrialLabel::kNonTarget});
    }
  }
  rng.Derive("order").Shuffle(&trials);
  return trials;
}

void SynthSpec::Validate() const {
  auto require = [](bool ok, const char *what) {
    if (!ok) Fail(ErrorCode::kConfig, std::string("invalid synth spec: ") + what);
  };
  require(num_speakers >= 1, "num_speakers >= 1");
  require(utts_per_speaker >= 1, "utts_per_speaker >= 1");
  require(min_frames >= 1 && max_frames >= min_frames, "1 <= min_frames <= max_frames");
  require(feature_dim >= 1, "feature_dim >= 1");
  require(speaker_dim >= 1, "speaker_dim >= 1");
  require(num_components >= 1, "num_components >= 1");
  require(component_spread >= 0 && speaker_scale >= 0 && channel_scale >= 0 &&
              noise_scale >= 0 && augment_noise_scale >= 0 && occupancy_spread >= 0 &&
              noise_spread >= 0,
          "scales >= 0");
  require(stay_prob >= 0 && stay_prob < 1, "0 <= stay_prob < 1");
  require(num_augment >= 0, "num_augment >= 0");
}

namespace {

std::string SpeakerName(int s) {
  char buf[32];
  std::snprintf(buf, sizeof(buf), "spk%03d", s);
  return buf;
}

std::string UtteranceName(int s, int u) {
  char buf[48];
  std::snprintf(buf, sizeof(buf), "spk%03d-utt%03d", s, u);
  return buf;
}

}  // namespace

std::vector<SynthUtterance> GenerateSyntheticUtterances(const SynthSpec &spec) {
  spec.Validate();
  const int dim = spec.feature_dim;
  const int num_comp = spec.num_components;
  Rng root(spec.seed);

  Rng model_rng = root.Derive("model");
  std::vector<Vector> means(num_comp);
  std::vector<Matrix> loadings(num_comp);
  for (int k = 0; k < num_comp; ++k) {
    means[k] = spec.component_spread * model_rng.NormalMatrix(dim, 1).col(0);
    loadings[k] = model_rng.NormalMatrix(dim, spec.speaker_dim,
                                         spec.speaker_scale / std::sqrt(spec.speaker_dim));
  }

  std::vector<SynthUtterance> out;
  out.reserve(static_cast<size_t>(spec.num_speakers) * spec.utts_per_speaker *
              (1 + spec.num_augment));
  for (int s = 0; s < spec.num_speakers; ++s) {
    Rng spk_rng = root.Derive("speaker/" + std::to_string(s));
    Vector latent = spk_rng.NormalMatrix(spec.speaker_dim, 1).col(0);
    std::vector<Vector> shifted(num_comp);
    for (int k = 0; k < num_comp; ++k) shifted[k] = means[k] + loadings[k] * latent;
    Vector noise = Vector::Constant(dim, spec.noise_scale);
    if (spec.noise_spread > 0.0) {
      Rng r = spk_rng.Derive("noise");
      for (int d = 0; d < dim; ++d) noise(d) *= std::exp(spec.noise_spread * r.Normal());
    }
    std::vector<double> jump_cdf;
    if (spec.occupancy_spread > 0.0) {
      Rng r = spk_rng.Derive("occupancy");
      Vector p = StableSoftmax(spec.occupancy_spread * r.NormalMatrix(num_comp, 1).col(0));
      double acc = 0.0;
      for (int k = 0; k < num_comp; ++k) jump_cdf.push_back(acc += p(k));
    }
    auto draw_component = [&](Rng *r) {
      if (jump_cdf.empty()) return static_cast<int>(r->UniformInt(static_cast<uint32_t>(num_comp)));
      const double v = r->Uniform() * jump_cdf.back();
      const auto it = std::upper_bound(jump_cdf.begin(), jump_cdf.end(), v);
      return std::min(static_cast<int>(it - jump_cdf.begin()), num_comp - 1);
    };

    for (int u = 0; u < spec.utts_per_speaker; ++u) {
      Rng utt_rng = root.Derive("utterance/" + std::to_string(s) + "/" + std::to_string(u));
      int num_frames = spec.min_frames +
                       static_cast<int>(utt_rng.UniformInt(
                           static_cast<uint32_t>(spec.max_frames - spec.min_frames + 1)));
      Vector channel = spec.channel_scale * utt_rng.NormalMatrix(dim, 1).col(0);
      SynthUtterance utt;
      utt.speaker_id = SpeakerName(s);
      utt.speaker_index = s;
      utt.features.utterance_id = UtteranceName(s, u);
      utt.features.frames.resize(num_frames, dim);
      int comp = draw_component(&utt_rng);
      for (int t = 0; t < num_frames; ++t) {
        if (t > 0 && utt_rng.Uniform() >= spec.stay_prob) comp = draw_component(&utt_rng);
        for (int d = 0; d < dim; ++d)
          utt.features.frames(t, d) = shifted[comp](d) + channel(d) + noise(d) * utt_rng.Normal();
      }
      out.push_back(utt);
      for (int a = 1; a <= spec.num_augment; ++a) {
        Rng aug_rng = utt_rng.Derive("augment/" + std::to_string(a));
        SynthUtterance copy = utt;
        copy.features.utterance_id += "-aug" + std::to_string(a);
        copy.features.frames +=
            aug_rng.NormalMatrix(num_frames, dim, spec.augment_noise_scale);
        out.push_back(std::move(copy));
      }
    }
  }
  return out;
}

CorpusManifest GenerateSyntheticCorpus(const SynthSpec &spec, const std::string &out_dir) {
  std::vector<SynthUtterance> utts = GenerateSyntheticUtterances(spec);
  fs::create_directories(fs::path(out_dir) / "feats");
  CorpusManifest manifest;
  manifest.base_dir = out_dir;
  for (const auto &u : utts) {
    ManifestEntry e;
    e.utterance_id = u.features.utterance_id;
    e.speaker_id = u.speaker_id;
    e.path = "feats/" + e.utterance_id + ".nivf";
    e.num_frames = u.features.NumFrames();
    WriteFeatures(u.features, manifest.ResolvePath(e));
    manifest.entries.push_back(std::move(e));
  }
  WriteManifest(manifest, (fs::path(out_dir) / "manifest.tsv").string());
  return manifest;
}

}  // namespace nivec
