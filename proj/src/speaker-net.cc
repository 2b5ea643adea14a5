// nivec/speaker-net.cc

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

#include "nivec/speaker-net.h"

#include <fstream>
#include <sstream>

#include "nivec/binary-io.h"
#include "nivec/error.h"

namespace nivec {

void SpeakerNetConfig::Validate() const {
  frame.Validate();
  aggregation.Validate();
  NIVEC_CHECK(embedding_dim >= 1, ErrorCode::kConfig, "embedding_dim must be >= 1");
  NIVEC_CHECK(num_speakers >= 2, ErrorCode::kConfig, "training needs at least 2 speakers");
}

SpeakerNet::SpeakerNet(const SpeakerNetConfig &config, Rng *rng)
    : config_(config), frame_net_((config.Validate(), config.frame), rng) {
  head_ = MakeAggregationHead(config.aggregation, config.frame.output_dim, rng);
  const int agg = head_->output_dim(), emb = config.embedding_dim;
  classifier_.Add(std::make_unique<FullyConnected>(agg, emb, rng));
  classifier_.Add(std::make_unique<LRelu>(emb));
  classifier_.Add(std::make_unique<BatchNorm>(emb));
  classifier_.Add(std::make_unique<FullyConnected>(emb, config.num_speakers, rng));
}

Matrix SpeakerNet::Forward(const Matrix &x, SeqShape shape, bool training, Tapes *tapes) const {
  Matrix h = frame_net_.Forward(x, shape, training, tapes ? &tapes->frame : nullptr);
  Matrix pooled = head_->Forward(h, shape, tapes ? &tapes->head : nullptr);
  return classifier_.Forward(pooled, SeqShape{shape.num_seqs, 1}, training,
                             tapes ? &tapes->classifier : nullptr);
}

void SpeakerNet::Backward(const Tapes &tapes, const Matrix &dlogits) {
  NIVEC_CHECK(tapes.head != nullptr, ErrorCode::kInvalidArgument, "speaker net: missing tape");
  Matrix dpooled = classifier_.Backward(tapes.classifier, dlogits);
  Matrix dh = head_->Backward(*tapes.head, dpooled);
  frame_net_.Backward(tapes.frame, dh);
}

Matrix SpeakerNet::FrameFeatures(const Matrix &frames) const { return frame_net_.Apply(frames); }

Vector SpeakerNet::Embedding(const Matrix &frames) const {
  Matrix h = frame_net_.Apply(frames);
  Matrix pooled = head_->Forward(h, SeqShape{1, static_cast<int>(frames.rows())}, nullptr);
  Matrix e = classifier_.at(0).Forward(pooled, SeqShape{1, 1}, false, nullptr);
  return e.row(0).transpose();
}

std::vector<Param *> SpeakerNet::Params() {
  std::vector<Param *> out = frame_net_.Params();
  for (Param *p : head_->Params()) out.push_back(p);
  for (Param *p : classifier_.Params()) out.push_back(p);
  return out;
}

std::vector<Matrix *> SpeakerNet::Buffers() {
  std::vector<Matrix *> out = frame_net_.Buffers();
  for (Matrix *b : classifier_.Buffers()) out.push_back(b);
  return out;
}

void SaveCheckpoint(SpeakerNet &net, const std::string &path) {
  std::ostringstream os;
  BinaryWriter w(os);
  const SpeakerNetConfig &c = net.config();
  w.WriteMagic("NIVN");
  w.WriteU32(kCheckpointVersion);
  w.WriteString(ArchitectureName(c.frame.architecture));
  w.WriteU32(c.frame.input_dim);
  w.WriteU32(c.frame.hidden_dim);
  w.WriteU32(c.frame.output_dim);
  w.WriteU32(static_cast<uint32_t>(c.frame.kernels.size()));
  for (int k : c.frame.kernels) w.WriteU32(k);
  w.WriteU32(c.frame.se_bottleneck);
  std::vector<LayerSpec> specs = BuildLayerSpecs(c.frame);
  w.WriteU32(static_cast<uint32_t>(specs.size()));
  for (const LayerSpec &s : specs) {
    w.WriteString(LayerKindName(s.kind));
    w.WriteU32(s.in_dim);
    w.WriteU32(s.out_dim);
    w.WriteU32(s.kernel_size);
    w.WriteU32(s.Bottleneck());
  }
  w.WriteString(AggregationKindName(c.aggregation.kind));
  w.WriteU32(c.aggregation.num_components);
  w.WriteU32(c.aggregation.use_bias ? 1 : 0);
  w.WriteU32(c.embedding_dim);
  w.WriteU32(c.num_speakers);
  std::vector<Param *> params = net.Params();
  w.WriteU32(static_cast<uint32_t>(params.size()));
  for (Param *p : params) {
    w.WriteString(p->name);
    w.WriteMatrix(p->value);
  }
  std::vector<Matrix *> buffers = net.Buffers();
  w.WriteU32(static_cast<uint32_t>(buffers.size()));
  for (Matrix *b : buffers) w.WriteMatrix(*b);
  WriteFileBytes(path, os.str());
}

std::unique_ptr<SpeakerNet> LoadCheckpoint(const std::string &path) {
  std::istringstream is(ReadFileBytes(path));
  BinaryReader r(is);
  r.ExpectMagic("NIVN");
  r.ExpectVersion(kCheckpointVersion);
  SpeakerNetConfig c;
  c.frame.architecture = ParseArchitecture(r.ReadString());
  c.frame.input_dim = static_cast<int>(r.ReadU32());
  c.frame.hidden_dim = static_cast<int>(r.ReadU32());
  c.frame.output_dim = static_cast<int>(r.ReadU32());
  c.frame.kernels.resize(r.ReadU32());
  for (int &k : c.frame.kernels) k = static_cast<int>(r.ReadU32());
  c.frame.se_bottleneck = static_cast<int>(r.ReadU32());
  const uint32_t num_specs = r.ReadU32();
  for (uint32_t i = 0; i < num_specs; ++i) {
    r.ReadString();
    for (int j = 0; j < 4; ++j) r.ReadU32();
  }
  c.aggregation.kind = ParseAggregationKind(r.ReadString());
  c.aggregation.num_components = static_cast<int>(r.ReadU32());
  c.aggregation.use_bias = r.ReadU32() != 0;
  c.embedding_dim = static_cast<int>(r.ReadU32());
  c.num_speakers = static_cast<int>(r.ReadU32());
  Rng rng(0);
  auto net = std::make_unique<SpeakerNet>(c, &rng);
  std::vector<Param *> params = net->Params();
  NIVEC_CHECK(r.ReadU32() == params.size(), ErrorCode::kDimensionMismatch,
              "checkpoint: tensor count mismatch");
  for (Param *p : params) {
    std::string name = r.ReadString();
    NIVEC_CHECK(name == p->name, ErrorCode::kDimensionMismatch,
                "checkpoint: expected tensor '" + p->name + "', found '" + name + "'");
    p->value = r.ReadMatrix(p->value.rows(), p->value.cols(), p->name);
  }
  std::vector<Matrix *> buffers = net->Buffers();
  NIVEC_CHECK(r.ReadU32() == buffers.size(), ErrorCode::kDimensionMismatch,
              "checkpoint: buffer count mismatch");
  for (Matrix *b : buffers) *b = r.ReadMatrix(b->rows(), b->cols(), "buffer");
  return net;
}

}  // namespace nivec
