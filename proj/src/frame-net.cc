// nivec/frame-net.cc

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

#include "nivec/frame-net.h"

#include "nivec/error.h"

namespace nivec {

const char *ArchitectureName(Architecture a) {
  switch (a) {
    case Architecture::kTdnn: return "tdnn";
    case Architecture::kTdnnSe: return "tdnn-se";
    case Architecture::kTdnnResSe: return "tdnn-res-se";
  }
  return "unknown";
}

Architecture ParseArchitecture(const std::string &name) {
  if (name == "tdnn") return Architecture::kTdnn;
  if (name == "tdnn-se") return Architecture::kTdnnSe;
  if (name == "tdnn-res-se") return Architecture::kTdnnResSe;
  Fail(ErrorCode::kConfig, "unknown architecture '" + name + "'");
}

void FrameNetConfig::Validate() const {
  NIVEC_CHECK(input_dim >= 1 && hidden_dim >= 1 && output_dim >= 1, ErrorCode::kConfig,
              "frame network dimensions must be >= 1");
  NIVEC_CHECK(se_bottleneck >= 0, ErrorCode::kConfig, "negative SE bottleneck");
  NIVEC_CHECK(!kernels.empty(), ErrorCode::kConfig, "frame network needs at least one layer");
  if (architecture == Architecture::kTdnnResSe)
    NIVEC_CHECK(kernels.size() >= 2, ErrorCode::kConfig,
                "tdnn-res-se needs first and last TDNN-SE kernels");
  for (int k : kernels)
    NIVEC_CHECK(k >= 1 && k % 2 == 1, ErrorCode::kConfig, "kernel sizes must be odd and >= 1");
}

std::vector<LayerSpec> BuildLayerSpecs(const FrameNetConfig &c) {
  c.Validate();
  std::vector<LayerSpec> specs;
  const int n = static_cast<int>(c.kernels.size());
  auto out_of = [&](int i) { return i == n - 1 ? c.output_dim : c.hidden_dim; };
  auto in_of = [&](int i) { return i == 0 ? c.input_dim : c.hidden_dim; };
  switch (c.architecture) {
    case Architecture::kTdnn:
      for (int i = 0; i < n; ++i) {
        specs.push_back({LayerKind::kConv1d, in_of(i), out_of(i), c.kernels[i], 0});
        specs.push_back({LayerKind::kLRelu, out_of(i), out_of(i), 1, 0});
        specs.push_back({LayerKind::kBatchNorm, out_of(i), out_of(i), 1, 0});
      }
      break;
    case Architecture::kTdnnSe:
      for (int i = 0; i < n; ++i)
        specs.push_back({LayerKind::kTdnnSeBlock, in_of(i), out_of(i), c.kernels[i], c.se_bottleneck});
      break;
    case Architecture::kTdnnResSe:
      specs.push_back({LayerKind::kTdnnSeBlock, c.input_dim, n == 1 ? c.output_dim : c.hidden_dim,
                       c.kernels[0], c.se_bottleneck});
      for (int i = 1; i + 1 < n; ++i)
        specs.push_back({LayerKind::kResSeBlock, c.hidden_dim, c.hidden_dim, c.kernels[i],
                         c.se_bottleneck});
      specs.push_back({LayerKind::kTdnnSeBlock, c.hidden_dim, c.output_dim, c.kernels[n - 1],
                       c.se_bottleneck});
      break;
  }
  return specs;
}

FrameNetwork::FrameNetwork(const FrameNetConfig &config, Rng *rng) : config_(config) {
  for (const LayerSpec &spec : BuildLayerSpecs(config)) layers_.Add(MakeLayer(spec, rng));
}

Matrix FrameNetwork::Forward(const Matrix &x, SeqShape shape, bool training,
                             std::vector<std::unique_ptr<Tape>> *tapes) const {
  if (x.cols() != config_.input_dim)
    Fail(ErrorCode::kDimensionMismatch, "frame network: input dim " + std::to_string(x.cols()) +
                                            ", expected " + std::to_string(config_.input_dim));
  return layers_.Forward(x, shape, training, tapes);
}

Matrix FrameNetwork::Backward(const std::vector<std::unique_ptr<Tape>> &tapes, const Matrix &dy) {
  return layers_.Backward(tapes, dy);
}

Matrix FrameNetwork::Apply(const Matrix &frames) const {
  return Forward(frames, SeqShape{1, static_cast<int>(frames.rows())}, false, nullptr);
}

}  // namespace nivec
