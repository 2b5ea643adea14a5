// nivec/layers.h

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

#ifndef NIVEC_LAYERS_H_
#define NIVEC_LAYERS_H_

#include <memory>
#include <string>
#include <vector>

#include "nivec/numerics.h"

namespace nivec {

// Activations travel as a single (num_seqs * seq_len) x dim matrix in which
// sequence b occupies rows [b * seq_len, (b + 1) * seq_len).  Utterance-level
// tensors (SE excitation, classifier head) use seq_len == 1.
struct SeqShape {
  int num_seqs = 1;
  int seq_len = 1;
  int Rows() const { return num_seqs * seq_len; }
};

/// A trainable tensor and its gradient accumulator.
struct Param {
  std::string name;
  Matrix value;
  Matrix grad;
  bool decay = true;  // false for BN scale/shift, dictionary biases and log-scales

  Param() = default;
  Param(std::string n, Matrix v, bool d)
      : name(std::move(n)), value(std::move(v)), decay(d) {
    grad = Matrix::Zero(value.rows(), value.cols());
  }
};

/// Activations cached by a forward pass for the matching backward pass.
struct Tape {
  virtual ~Tape() = default;
};

enum class LayerKind {
  kConv1d,
  kBatchNorm,
  kLRelu,
  kFullyConnected,
  kSeModule,
  kTdnnSeBlock,
  kResSeBlock,
};

const char *LayerKindName(LayerKind kind);

struct LayerSpec {
  LayerKind kind = LayerKind::kConv1d;
  int in_dim = 1;
  int out_dim = 1;
  int kernel_size = 1;    // conv, TDNN-SE and RES-SE blocks
  int se_bottleneck = 0;  // SE-bearing layers; 0 selects ceil(out_dim / 8)

  void Validate() const;
  int Bottleneck() const { return se_bottleneck > 0 ? se_bottleneck : (out_dim + 7) / 8; }
};

constexpr double kLReluSlope = 0.01;
constexpr double kBatchNormEpsilon = 1e-5;
constexpr double kBatchNormMomentum = 0.1;
constexpr double kSeStdEpsilon = 1e-9;

class Layer {
 public:
  virtual ~Layer() = default;

  virtual LayerSpec spec() const = 0;

  /// When `tape` is non-null the activations needed by Backward are stored
  /// there.  Training-mode batch norm also updates its running statistics.
  virtual Matrix Forward(const Matrix &x, SeqShape shape, bool training,
                         std::unique_ptr<Tape> *tape) const = 0;

  /// Accumulates parameter gradients and returns dL/dx.  Throws if the tape
  /// was not produced by this layer type.
  virtual Matrix Backward(const Tape &tape, const Matrix &dy) = 0;

  virtual std::vector<Param *> Params() { return {}; }
  /// Non-trainable state saved in checkpoints (batch-norm running stats).
  virtual std::vector<Matrix *> Buffers() { return {}; }
};

std::unique_ptr<Layer> MakeLayer(const LayerSpec &spec, Rng *rng);

/// Zero-padded 1-D convolution over time; output length equals input length.
/// The kernel is stored as a (kernel_size * in_dim) x out_dim matrix whose
/// row j * in_dim + i multiplies input feature i at time offset
/// j - (kernel_size - 1) / 2.
class Conv1d : public Layer {
 public:
  Conv1d(int in_dim, int out_dim, int kernel_size, Rng *rng);

  LayerSpec spec() const override;
  Matrix Forward(const Matrix &x, SeqShape shape, bool training,
                 std::unique_ptr<Tape> *tape) const override;
  Matrix Backward(const Tape &tape, const Matrix &dy) override;
  std::vector<Param *> Params() override { return {&weight_, &bias_}; }

  Param &weight() { return weight_; }
  Param &bias() { return bias_; }

 private:
  int in_dim_, out_dim_, kernel_size_;
  Param weight_, bias_;
};

class FullyConnected : public Layer {
 public:
  FullyConnected(int in_dim, int out_dim, Rng *rng);

  LayerSpec spec() const override;
  Matrix Forward(const Matrix &x, SeqShape shape, bool training,
                 std::unique_ptr<Tape> *tape) const override;
  Matrix Backward(const Tape &tape, const Matrix &dy) override;
  std::vector<Param *> Params() override { return {&weight_, &bias_}; }

  Param &weight() { return weight_; }
  Param &bias() { return bias_; }

 private:
  int in_dim_, out_dim_;
  Param weight_, bias_;  // in x out, 1 x out
};

class LRelu : public Layer {
 public:
  explicit LRelu(int dim) : dim_(dim) {}

  LayerSpec spec() const override;
  Matrix Forward(const Matrix &x, SeqShape shape, bool training,
                 std::unique_ptr<Tape> *tape) const override;
  Matrix Backward(const Tape &tape, const Matrix &dy) override;

 private:
  int dim_;
};

/// Per-feature normalization over all rows (batch and time).
class BatchNorm : public Layer {
 public:
  explicit BatchNorm(int dim);

  LayerSpec spec() const override;
  Matrix Forward(const Matrix &x, SeqShape shape, bool training,
                 std::unique_ptr<Tape> *tape) const override;
  Matrix Backward(const Tape &tape, const Matrix &dy) override;
  std::vector<Param *> Params() override { return {&scale_, &shift_}; }
  std::vector<Matrix *> Buffers() override { return {&running_mean_, &running_var_}; }

  Param &scale() { return scale_; }
  Param &shift() { return shift_; }
  const Matrix &running_mean() const { return running_mean_; }
  const Matrix &running_var() const { return running_var_; }

 private:
  int dim_;
  Param scale_, shift_;
  mutable Matrix running_mean_, running_var_;
};

/// Applies its children in order.
class Sequential {
 public:
  void Add(std::unique_ptr<Layer> layer) { layers_.push_back(std::move(layer)); }

  Matrix Forward(const Matrix &x, SeqShape shape, bool training,
                 std::vector<std::unique_ptr<Tape>> *tapes) const;
  Matrix Backward(const std::vector<std::unique_ptr<Tape>> &tapes, const Matrix &dy);
  std::vector<Param *> Params();
  std::vector<Matrix *> Buffers();

  size_t size() const { return layers_.size(); }
  Layer &at(size_t i) { return *layers_.at(i); }
  const Layer &at(size_t i) const { return *layers_.at(i); }

 private:
  std::vector<std::unique_ptr<Layer>> layers_;
};

/*
  Squeeze-and-excitation with a mean + standard-deviation squeeze:
     s_b  = [mean_t x_bt, sqrt(var_t x_bt + 1e-9)]          (2F)
     w_b  = sigmoid(FC(LReLU-BN path of FC(s_b)))             (F)
     y_bt = x_bt * w_b
  The excitation is FC(2F -> b) -> LReLU -> BN -> FC(b -> F) -> sigmoid, its
  batch norm normalizing across the sequences of the batch.
*/
class SeModule : public Layer {
 public:
  SeModule(int dim, int bottleneck, Rng *rng);

  LayerSpec spec() const override;
  Matrix Forward(const Matrix &x, SeqShape shape, bool training,
                 std::unique_ptr<Tape> *tape) const override;
  Matrix Backward(const Tape &tape, const Matrix &dy) override;
  std::vector<Param *> Params() override { return excite_.Params(); }
  std::vector<Matrix *> Buffers() override { return excite_.Buffers(); }

  FullyConnected &squeeze_fc() { return static_cast<FullyConnected &>(excite_.at(0)); }
  FullyConnected &excite_fc() { return static_cast<FullyConnected &>(excite_.at(3)); }

 private:
  int dim_, bottleneck_;
  Sequential excite_;
};

/// conv1d -> LReLU -> BN -> SE.
class TdnnSeBlock : public Layer {
 public:
  TdnnSeBlock(int in_dim, int out_dim, int kernel_size, int bottleneck, Rng *rng);

  LayerSpec spec() const override;
  Matrix Forward(const Matrix &x, SeqShape shape, bool training,
                 std::unique_ptr<Tape> *tape) const override;
  Matrix Backward(const Tape &tape, const Matrix &dy) override;
  std::vector<Param *> Params() override { return body_.Params(); }
  std::vector<Matrix *> Buffers() override { return body_.Buffers(); }

  Sequential &body() { return body_; }

 private:
  LayerSpec spec_;
  Sequential body_;
};

/// y = x + SE(BN(LReLU(conv1d(LReLU(FC(x)))))).
class ResSeBlock : public Layer {
 public:
  ResSeBlock(int dim, int kernel_size, int bottleneck, Rng *rng);

  LayerSpec spec() const override;
  Matrix Forward(const Matrix &x, SeqShape shape, bool training,
                 std::unique_ptr<Tape> *tape) const override;
  Matrix Backward(const Tape &tape, const Matrix &dy) override;
  std::vector<Param *> Params() override { return branch_.Params(); }
  std::vector<Matrix *> Buffers() override { return branch_.Buffers(); }

  Sequential &branch() { return branch_; }

 private:
  LayerSpec spec_;
  Sequential branch_;
};

}  // namespace nivec

#endif  // NIVEC_LAYERS_H_
