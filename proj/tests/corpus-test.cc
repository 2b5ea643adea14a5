// tests/corpus-test.cc

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

#include <fstream>
#include <map>
#include <set>

#include "doctest.h"
#include "nivec/binary-io.h"
#include "nivec/corpus.h"
#include "nivec/error.h"
#include "test-util.h"

using namespace nivec;
using namespace nivec::testing;

namespace {

SynthSpec SmallSpec() {
  SynthSpec s;
  s.num_speakers = 5;
  s.utts_per_speaker = 4;
  s.min_frames = 20;
  s.max_frames = 40;
  s.feature_dim = 6;
  s.speaker_dim = 3;
  s.num_components = 4;
  s.seed = 9;
  return s;
}

}  // namespace

TEST_CASE("feature files round-trip bit for bit") {
  Rng rng(71);
  FeatureSequence seq;
  seq.utterance_id = "u1";
  seq.frames = rng.NormalMatrix(13, 7);
  const std::string dir = TempDir("corpus-io");
  WriteFeatures(seq, dir + "/a.nivf");
  FeatureSequence back = ReadFeatures(dir + "/a.nivf", 7);
  CHECK(MaxAbsDiff(back.frames, seq.frames) <= 1e-6);
  WriteFeatures(back, dir + "/b.nivf");
  CHECK(ReadFileBytes(dir + "/a.nivf") == ReadFileBytes(dir + "/b.nivf"));
  CHECK(ReadFeatureShape(dir + "/a.nivf") == std::make_pair(13, 7));
}

TEST_CASE("feature reader classifies damaged files") {
  Rng rng(72);
  FeatureSequence seq;
  seq.frames = rng.NormalMatrix(4, 3);
  const std::string dir = TempDir("corpus-bad");
  WriteFeatures(seq, dir + "/ok.nivf");
  const std::string bytes = ReadFileBytes(dir + "/ok.nivf");

  CHECK(ThrownCode([&] { ReadFeatures(dir + "/ok.nivf", 4); }) == ErrorCode::kDimensionMismatch);
  CHECK(ThrownCode([&] { ReadFeatures(dir + "/none.nivf"); }) == ErrorCode::kMissingInput);

  std::string magic = bytes;
  magic[0] = 'X';
  WriteFileBytes(dir + "/magic.nivf", magic);
  CHECK(ThrownCode([&] { ReadFeatures(dir + "/magic.nivf"); }) == ErrorCode::kBadMagic);

  std::string version = bytes;
  version[4] = 9;
  WriteFileBytes(dir + "/version.nivf", version);
  CHECK(ThrownCode([&] { ReadFeatures(dir + "/version.nivf"); }) == ErrorCode::kBadVersion);

  WriteFileBytes(dir + "/short.nivf", bytes.substr(0, bytes.size() - 1));
  CHECK(ThrownCode([&] { ReadFeatures(dir + "/short.nivf"); }) == ErrorCode::kTruncated);
}

TEST_CASE("utterance cmn removes the mean and windowed cmn follows its definition") {
  Rng rng(73);
  FeatureSequence seq;
  seq.frames = rng.NormalMatrix(11, 3, 2.0);
  seq.frames.rowwise() += Vector::Constant(3, 5.0).transpose();
  FeatureSequence whole = ApplyCmn(seq);
  CHECK(whole.frames.colwise().mean().cwiseAbs().maxCoeff() <= 1e-12);

  const int w = 4;
  FeatureSequence win = ApplyCmn(seq, w);
  for (int t = 0; t < 11; ++t) {
    const int lo = std::max(0, t - w / 2), hi = std::min(11, t - w / 2 + w);
    Vector mean = seq.frames.middleRows(lo, hi - lo).colwise().mean().transpose();
    Vector want = seq.frames.row(t).transpose() - mean;
    CHECK((win.frames.row(t).transpose() - want).cwiseAbs().maxCoeff() <= 1e-12);
  }
  FeatureSequence wide = ApplyCmn(seq, 1000);
  CHECK(MaxAbsDiff(wide.frames, whole.frames) <= 1e-12);
}

TEST_CASE("synthetic corpus is a function of its spec") {
  SynthSpec spec = SmallSpec();
  std::vector<SynthUtterance> a = GenerateSyntheticUtterances(spec);
  std::vector<SynthUtterance> b = GenerateSyntheticUtterances(spec);
  REQUIRE(a.size() == 20);
  std::set<std::string> ids;
  for (size_t i = 0; i < a.size(); ++i) {
    CHECK(a[i].features.frames == b[i].features.frames);
    CHECK(a[i].features.NumFrames() >= spec.min_frames);
    CHECK(a[i].features.NumFrames() <= spec.max_frames);
    CHECK(a[i].features.Dim() == spec.feature_dim);
    ids.insert(a[i].features.utterance_id);
  }
  CHECK(ids.size() == a.size());
  spec.seed = 10;
  CHECK(GenerateSyntheticUtterances(spec)[0].features.frames != a[0].features.frames);
}

TEST_CASE("synthetic speakers are separable by their means") {
  SynthSpec spec = SmallSpec();
  spec.speaker_scale = 3.0;
  spec.channel_scale = 0.1;
  spec.stay_prob = 0.0;
  spec.min_frames = spec.max_frames = 1000;
  std::vector<SynthUtterance> utts = GenerateSyntheticUtterances(spec);
  int correct = 0;
  for (const SynthUtterance &u : utts) {
    Vector mu = u.features.frames.colwise().mean().transpose();
    double best = 1e300;
    int best_spk = -1;
    for (const SynthUtterance &v : utts) {
      if (&v == &u) continue;
      const double d = (v.features.frames.colwise().mean().transpose() - mu).squaredNorm();
      if (d < best) best = d, best_spk = v.speaker_index;
    }
    correct += best_spk == u.speaker_index;
  }
  CHECK(correct >= 18);
}

TEST_CASE("manifest and trials round-trip") {
  const std::string dir = TempDir("corpus-manifest");
  CorpusManifest m = GenerateSyntheticCorpus(SmallSpec(), dir);
  CorpusManifest back = ReadManifest(dir + "/manifest.tsv");
  REQUIRE(back.entries.size() == m.entries.size());
  for (size_t i = 0; i < m.entries.size(); ++i) {
    CHECK(back.entries[i].utterance_id == m.entries[i].utterance_id);
    CHECK(back.entries[i].speaker_id == m.entries[i].speaker_id);
    CHECK(back.entries[i].num_frames == ReadFeatureShape(back.ResolvePath(back.entries[i])).first);
  }
  CHECK(back.SpeakerIds().size() == 5);
  CHECK(back.IndexOf("missing") == -1);

  TrialList trials = MakeTrials(back, 15, 25, 3);
  CHECK(trials.size() == 40);
  std::set<std::pair<std::string, std::string>> pairs;
  int targets = 0;
  for (const Trial &t : trials) {
    const auto &e = back.entries[back.IndexOf(t.enroll_id)];
    const auto &s = back.entries[back.IndexOf(t.test_id)];
    CHECK(t.enroll_id != t.test_id);
    CHECK((e.speaker_id == s.speaker_id) == (t.label == TrialLabel::kTarget));
    targets += t.label == TrialLabel::kTarget;
    pairs.insert(std::minmax(t.enroll_id, t.test_id));
  }
  CHECK(targets == 15);
  CHECK(pairs.size() == 40);
  CHECK(MakeTrials(back, 15, 25, 3).front().test_id == trials.front().test_id);

  WriteTrials(trials, dir + "/trials.tsv");
  TrialList read = ReadTrials(dir + "/trials.tsv");
  REQUIRE(read.size() == trials.size());
  CHECK(read[7].label == trials[7].label);
  CHECK(ThrownCode([&] { MakeTrials(back, 1000, 1, 3); }) == ErrorCode::kInvalidArgument);
}

TEST_CASE("trial parser rejects unknown labels") {
  const std::string dir = TempDir("corpus-trials");
  std::ofstream(dir + "/t.tsv") << "a\tb\tmaybe\n";
  CHECK(ThrownCode([&] { ReadTrials(dir + "/t.tsv"); }).has_value());
}

TEST_CASE("synth spec validation") {
  SynthSpec s = SmallSpec();
  s.min_frames = 50;
  s.max_frames = 10;
  CHECK(ThrownCode([&] { s.Validate(); }).has_value());
  s = SmallSpec();
  s.num_speakers = 0;
  CHECK(ThrownCode([&] { s.Validate(); }).has_value());
}

TEST_CASE("speaker noise spread gives each speaker its own frame variance") {
  SynthSpec spec = SmallSpec();
  spec.component_spread = 0.0;
  spec.speaker_scale = 0.0;
  spec.channel_scale = 0.0;
  spec.noise_spread = 1.0;
  spec.min_frames = spec.max_frames = 4000;
  spec.utts_per_speaker = 2;
  std::vector<SynthUtterance> utts = GenerateSyntheticUtterances(spec);
  auto log_var = [](const Matrix &x) {
    Matrix c = x.rowwise() - x.colwise().mean();
    return Vector((c.array().square().colwise().mean()).log().transpose());
  };
  double within = 0.0, between = 0.0;
  for (int s = 0; s < spec.num_speakers; ++s) {
    Vector a = log_var(utts[2 * s].features.frames), b = log_var(utts[2 * s + 1].features.frames);
    within = std::max(within, (a - b).cwiseAbs().maxCoeff());
    if (s > 0) between += (a - log_var(utts[2 * s - 2].features.frames)).cwiseAbs().mean();
  }
  CHECK(within < 0.15);
  CHECK(between / (spec.num_speakers - 1) > 0.5);
}

TEST_CASE("speaker occupancy spread skews component usage per speaker") {
  SynthSpec spec = SmallSpec();
  spec.speaker_scale = 0.0;
  spec.channel_scale = 0.0;
  spec.noise_scale = 0.0;
  spec.occupancy_spread = 2.0;
  spec.stay_prob = 0.0;
  spec.min_frames = spec.max_frames = 2000;
  spec.utts_per_speaker = 2;
  std::vector<SynthUtterance> utts = GenerateSyntheticUtterances(spec);
  // With no noise every frame equals its component mean; key on the first coordinate.
  std::map<double, int> ids;
  for (const SynthUtterance &u : utts)
    for (int t = 0; t < u.features.NumFrames(); ++t) ids.emplace(u.features.frames(t, 0), ids.size());
  REQUIRE(ids.size() == static_cast<size_t>(spec.num_components));
  auto histogram = [&](const Matrix &x) {
    Vector h = Vector::Zero(spec.num_components);
    for (int t = 0; t < x.rows(); ++t) h(ids.at(x(t, 0))) += 1.0 / x.rows();
    return h;
  };
  double within = 0.0, between = 0.0;
  for (int s = 0; s < spec.num_speakers; ++s) {
    Vector a = histogram(utts[2 * s].features.frames);
    within = std::max(within, (a - histogram(utts[2 * s + 1].features.frames)).cwiseAbs().sum());
    if (s > 0) between += (a - histogram(utts[2 * s - 2].features.frames)).cwiseAbs().sum();
  }
  CHECK(within < 0.15);
  CHECK(between / (spec.num_speakers - 1) > 0.4);
}
