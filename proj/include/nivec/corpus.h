// nivec/corpus.h

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

#ifndef NIVEC_CORPUS_H_
#define NIVEC_CORPUS_H_

#include <optional>
#include <string>
#include <vector>

#include "nivec/numerics.h"

namespace nivec {

struct FeatureSequence {
  std::string utterance_id;
  Matrix frames;  // T x D
  double frame_shift = 0.01;

  int NumFrames() const { return static_cast<int>(frames.rows()); }
  int Dim() const { return static_cast<int>(frames.cols()); }
};

/*
  Feature file layout (all little-endian):
     "NIVF"            4 bytes
     version           u32, currently 1
     T                 u32, number of frames
     D                 u32, feature dimension
     payload           T*D IEEE-754 float32, row-major
  Values are stored in single precision; reading widens to double, so a
  write -> read -> write cycle reproduces the file bit for bit.
*/
constexpr uint32_t kFeatureFileVersion = 1;

void WriteFeatures(const FeatureSequence &seq, const std::string &path);
/// If expected_dim is set, a file with a different D raises kDimensionMismatch.
FeatureSequence ReadFeatures(const std::string &path,
                             std::optional<int> expected_dim = std::nullopt);
/// Reads only the header; returns (T, D).
std::pair<int, int> ReadFeatureShape(const std::string &path);

/// Cepstral mean normalization.  With no window the whole-utterance mean is
/// removed.  With a window of w frames each frame has the mean of the
/// window [t - w/2, t - w/2 + w) removed, truncated at the utterance edges.
FeatureSequence ApplyCmn(const FeatureSequence &seq, std::optional<int> window = std::nullopt);

struct ManifestEntry {
  std::string utterance_id;
  std::string speaker_id;
  std::string path;  // as written in the manifest (relative to its directory)
  int num_frames = 0;
};

struct CorpusManifest {
  std::vector<ManifestEntry> entries;
  std::string base_dir;  // directory paths are relative to

  std::string ResolvePath(const ManifestEntry &e) const;
  int IndexOf(const std::string &utterance_id) const;  // -1 if absent
  std::vector<std::string> SpeakerIds() const;         // sorted, unique
};

/// Text format: utt_id<TAB>speaker_id<TAB>relative_path, one per line.
void WriteManifest(const CorpusManifest &manifest, const std::string &path);
/// Resolves every path and fills num_frames from the feature headers.
CorpusManifest ReadManifest(const std::string &path);

enum class TrialLabel { kTarget, kNonTarget, kUnknown };

struct Trial {
  std::string enroll_id;
  std::string test_id;
  TrialLabel label = TrialLabel::kUnknown;
};

using TrialList = std::vector<Trial>;

/// Text format: enroll_id<TAB>test_id<TAB>{tgt|non|unk}.
void WriteTrials(const TrialList &trials, const std::string &path);
TrialList ReadTrials(const std::string &path);

/// Samples distinct unordered pairs.  Throws kInvalidArgument when the
/// manifest cannot supply the requested counts.
TrialList MakeTrials(const CorpusManifest &manifest, int num_target, int num_nontarget,
                     uint64_t seed);

struct SynthSpec {
  int num_speakers = 40;
  int utts_per_speaker = 20;
  int min_frames = 200;
  int max_frames = 500;
  int feature_dim = 20;
  int speaker_dim = 8;
  int num_components = 16;
  double component_spread = 3.0;  // stddev of the global component means
  double speaker_scale = 1.0;     // per-dimension stddev of speaker offsets
  double channel_scale = 0.5;     // per-dimension stddev of utterance offsets
  double noise_scale = 1.0;       // per-frame white noise stddev
  double stay_prob = 0.9;         // component persistence between frames
  double occupancy_spread = 0.0;  // stddev of per-speaker component log-preferences
  double noise_spread = 0.0;      // stddev of per-speaker, per-dimension log noise scale
  int num_augment = 0;            // extra noisy copies per utterance
  double augment_noise_scale = 0.5;
  uint64_t seed = 1;

  void Validate() const;
};

struct SynthUtterance {
  FeatureSequence features;
  std::string speaker_id;
  int speaker_index = 0;
};

/*
  Each speaker s gets a latent v_s ~ N(0, I).  Frames follow a sticky
  Markov chain over the C generator components; frame t of utterance u is

     x_t = m_{k_t} + V_{k_t} v_s + channel_scale * c_u + noise_scale * e_t

  with global means m_k, component-specific speaker loadings V_k, a
  per-utterance channel offset c_u ~ N(0, I) and white noise e_t.
  Optionally speakers also differ beyond their means: a component jump
  picks k with probability softmax(occupancy_spread * a_s) and the noise of
  dimension d is scaled by exp(noise_spread * b_sd), with a_s, b_s ~ N(0, I).
  Speakers and utterances draw from substreams keyed by their index, so the
  output depends only on the spec.
*/
std::vector<SynthUtterance> GenerateSyntheticUtterances(const SynthSpec &spec);

/// Writes feats/<utt>.nivf under out_dir and out_dir/manifest.tsv.
CorpusManifest GenerateSyntheticCorpus(const SynthSpec &spec, const std::string &out_dir);

}  // namespace nivec

#endif  // NIVEC_CORPUS_H_
