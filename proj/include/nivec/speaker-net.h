// nivec/speaker-net.h

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

#ifndef NIVEC_SPEAKER_NET_H_
#define NIVEC_SPEAKER_NET_H_

#include <memory>
#include <string>
#include <vector>

#include "nivec/aggregation.h"
#include "nivec/frame-net.h"

namespace nivec {

struct SpeakerNetConfig {
  FrameNetConfig frame;
  AggregationConfig aggregation;
  int embedding_dim = 512;
  int num_speakers = 2;

  void Validate() const;
};

/*
  Frame processor -> aggregation head -> embedding FC -> LReLU -> BN ->
  output FC.  The speaker embedding is the embedding FC output, taken before
  its nonlinearity.
*/
class SpeakerNet {
 public:
  SpeakerNet(const SpeakerNetConfig &config, Rng *rng);

  const SpeakerNetConfig &config() const { return config_; }
  FrameNetwork &frame_net() { return frame_net_; }
  const FrameNetwork &frame_net() const { return frame_net_; }
  AggregationHead &head() { return *head_; }
  const AggregationHead &head() const { return *head_; }
  Sequential &classifier() { return classifier_; }

  struct Tapes {
    std::vector<std::unique_ptr<Tape>> frame;
    std::unique_ptr<Tape> head;
    std::vector<std::unique_ptr<Tape>> classifier;
  };

  /// Logits (num_seqs x num_speakers) for a batch of equal-length crops.
  Matrix Forward(const Matrix &x, SeqShape shape, bool training, Tapes *tapes) const;
  /// Back-propagates dL/dlogits through every component.
  void Backward(const Tapes &tapes, const Matrix &dlogits);

  /// Eval-mode quantities of one utterance.
  Vector Embedding(const Matrix &frames) const;
  Matrix FrameFeatures(const Matrix &frames) const;

  /// Trainable tensors in a fixed order: frame net, head, classifier.
  std::vector<Param *> Params();
  std::vector<Matrix *> Buffers();

 private:
  SpeakerNetConfig config_;
  FrameNetwork frame_net_;
  std::unique_ptr<AggregationHead> head_;
  Sequential classifier_;  // FC(agg -> E), LReLU, BN, FC(E -> S)
};

/*
  Checkpoint layout (little-endian):
     "NIVN", u32 version = 1
     frame section: architecture name, input/hidden/output dims, kernel count
       and kernels, SE bottleneck, then the expanded layer specs (kind name,
       in, out, kernel, bottleneck) for inspection
     head section: aggregation name, C, bias flag
     classifier section: E, number of speakers
     tensor section: u32 count, then per tensor name string + matrix (u32
       rows, u32 cols, f64 payload) for every Param in Params() order
     buffer section: u32 count, then matrices in Buffers() order
*/
constexpr uint32_t kCheckpointVersion = 1;

void SaveCheckpoint(SpeakerNet &net, const std::string &path);
std::unique_ptr<SpeakerNet> LoadCheckpoint(const std::string &path);

}  // namespace nivec

#endif  // NIVEC_SPEAKER_NET_H_
