// nivec/frame-net.h

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

#ifndef NIVEC_FRAME_NET_H_
#define NIVEC_FRAME_NET_H_

#include <memory>
#include <string>
#include <vector>

#include "nivec/layers.h"

namespace nivec {

enum class Architecture { kTdnn, kTdnnSe, kTdnnResSe };

const char *ArchitectureName(Architecture a);
Architecture ParseArchitecture(const std::string &name);  // "tdnn" | "tdnn-se" | "tdnn-res-se"

/*
  Frame-level processor layout.  `kernels` has one entry per TDNN layer for
  tdnn and tdnn-se; every layer outputs hidden_dim except the last, which
  outputs output_dim.  For tdnn-res-se the first and last entries belong to
  the outer TDNN-SE layers and each middle entry adds one residual block:
  the default {5, 5, 7, 1, 1} gives TDNN-SE, three RES-SE blocks, TDNN-SE.
*/
struct FrameNetConfig {
  Architecture architecture = Architecture::kTdnnResSe;
  int input_dim = 20;
  int hidden_dim = 512;
  int output_dim = 128;
  std::vector<int> kernels = {5, 5, 7, 1, 1};
  int se_bottleneck = 0;  // 0: ceil(dim / 8)

  void Validate() const;
};

std::vector<LayerSpec> BuildLayerSpecs(const FrameNetConfig &config);

class FrameNetwork {
 public:
  FrameNetwork(const FrameNetConfig &config, Rng *rng);

  const FrameNetConfig &config() const { return config_; }
  int input_dim() const { return config_.input_dim; }
  int output_dim() const { return config_.output_dim; }

  /// x holds shape.num_seqs sequences of shape.seq_len frames.
  Matrix Forward(const Matrix &x, SeqShape shape, bool training,
                 std::vector<std::unique_ptr<Tape>> *tapes) const;
  Matrix Backward(const std::vector<std::unique_ptr<Tape>> &tapes, const Matrix &dy);

  /// Eval-mode forward of one utterance.
  Matrix Apply(const Matrix &frames) const;

  std::vector<Param *> Params() { return layers_.Params(); }
  std::vector<Matrix *> Buffers() { return layers_.Buffers(); }
  Sequential &layers() { return layers_; }

 private:
  FrameNetConfig config_;
  Sequential layers_;
};

}  // namespace nivec

#endif  // NIVEC_FRAME_NET_H_
