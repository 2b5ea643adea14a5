// nivec/layers.cc

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

#include "nivec/layers.h"

#include <cmath>

#include "nivec/error.h"

namespace nivec {

namespace {

// Column sums as a GEMV; the reduction over a row-major matrix is strided.
Eigen::RowVectorXd ColSum(const Matrix &m) { return Eigen::RowVectorXd::Ones(m.rows()) * m; }

}  // namespace

namespace {

template <class T>
const T &TapeAs(const Tape &tape, const char *layer) {
  const T *t = dynamic_cast<const T *>(&tape);
  if (t == nullptr) Fail(ErrorCode::kInvalidArgument, std::string(layer) + ": tape mismatch");
  return *t;
}

void CheckInput(const Matrix &x, SeqShape shape, int dim, const char *layer) {
  if (shape.num_seqs < 1 || shape.seq_len < 1)
    Fail(ErrorCode::kInvalidArgument, std::string(layer) + ": empty input (T < 1)");
  if (x.rows() != shape.Rows() || x.cols() != dim)
    Fail(ErrorCode::kDimensionMismatch,
         std::string(layer) + ": input is " + std::to_string(x.rows()) + "x" +
             std::to_string(x.cols()) + ", expected " + std::to_string(shape.Rows()) + "x" +
             std::to_string(dim));
}

Matrix HeInit(int fan_in, int rows, int cols, Rng *rng) {
  return rng->NormalMatrix(rows, cols, std::sqrt(2.0 / fan_in));
}

struct MatrixTape : Tape {
  Matrix x;
};

}  // namespace

const char *LayerKindName(LayerKind kind) {
  switch (kind) {
    case LayerKind::kConv1d: return "conv1d";
    case LayerKind::kBatchNorm: return "batch_norm";
    case LayerKind::kLRelu: return "lrelu";
    case LayerKind::kFullyConnected: return "fully_connected";
    case LayerKind::kSeModule: return "se_module";
    case LayerKind::kTdnnSeBlock: return "tdnn_se_block";
    case LayerKind::kResSeBlock: return "res_se_block";
  }
  return "unknown";
}

void LayerSpec::Validate() const {
  auto bad = [this](const std::string &why) {
    Fail(ErrorCode::kConfig, std::string(LayerKindName(kind)) + " layer: " + why);
  };
  if (in_dim < 1 || out_dim < 1) bad("dimensions must be >= 1");
  if (kernel_size < 1 || kernel_size % 2 == 0) bad("kernel size must be odd and >= 1");
  if (se_bottleneck < 0) bad("negative SE bottleneck");
  switch (kind) {
    case LayerKind::kBatchNorm:
    case LayerKind::kLRelu:
    case LayerKind::kSeModule:
    case LayerKind::kResSeBlock:
      if (in_dim != out_dim) bad("requires in_dim == out_dim");
      break;
    default:
      break;
  }
}

std::unique_ptr<Layer> MakeLayer(const LayerSpec &spec, Rng *rng) {
  spec.Validate();
  switch (spec.kind) {
    case LayerKind::kConv1d:
      return std::make_unique<Conv1d>(spec.in_dim, spec.out_dim, spec.kernel_size, rng);
    case LayerKind::kBatchNorm: return std::make_unique<BatchNorm>(spec.in_dim);
    case LayerKind::kLRelu: return std::make_unique<LRelu>(spec.in_dim);
    case LayerKind::kFullyConnected:
      return std::make_unique<FullyConnected>(spec.in_dim, spec.out_dim, rng);
    case LayerKind::kSeModule:
      return std::make_unique<SeModule>(spec.in_dim, spec.Bottleneck(), rng);
    case LayerKind::kTdnnSeBlock:
      return std::make_unique<TdnnSeBlock>(spec.in_dim, spec.out_dim, spec.kernel_size,
                                           spec.Bottleneck(), rng);
    case LayerKind::kResSeBlock:
      return std::make_unique<ResSeBlock>(spec.in_dim, spec.kernel_size, spec.Bottleneck(), rng);
  }
  Fail(ErrorCode::kConfig, "unknown layer kind");
}

// ---------------------------------------------------------------- Conv1d

Conv1d::Conv1d(int in_dim, int out_dim, int kernel_size, Rng *rng)
    : in_dim_(in_dim), out_dim_(out_dim), kernel_size_(kernel_size) {
  spec().Validate();
  weight_ = Param("weight", HeInit(kernel_size * in_dim, kernel_size * in_dim, out_dim, rng), true);
  bias_ = Param("bias", Matrix::Zero(1, out_dim), false);
}

LayerSpec Conv1d::spec() const {
  return {LayerKind::kConv1d, in_dim_, out_dim_, kernel_size_, 0};
}

namespace {

struct ConvTape : Tape {
  Matrix columns;
  SeqShape shape;
};

// Row (b, t) of the result holds x[b, t + j - half] for j = 0..k-1, zeros
// outside the sequence.
Matrix Im2Col(const Matrix &x, SeqShape shape, int kernel_size) {
  const int dim = static_cast<int>(x.cols());
  const int half = (kernel_size - 1) / 2;
  Matrix col = Matrix::Zero(x.rows(), static_cast<Eigen::Index>(kernel_size) * dim);
  for (int b = 0; b < shape.num_seqs; ++b) {
    const int base = b * shape.seq_len;
    for (int j = 0; j < kernel_size; ++j) {
      const int offset = j - half;
      const int t_begin = std::max(0, -offset);
      const int t_end = std::min(shape.seq_len, shape.seq_len - offset);
      if (t_end <= t_begin) continue;
      col.block(base + t_begin, j * dim, t_end - t_begin, dim) =
          x.block(base + t_begin + offset, 0, t_end - t_begin, dim);
    }
  }
  return col;
}

Matrix Col2Im(const Matrix &col, SeqShape shape, int kernel_size, int dim) {
  const int half = (kernel_size - 1) / 2;
  Matrix x = Matrix::Zero(col.rows(), dim);
  for (int b = 0; b < shape.num_seqs; ++b) {
    const int base = b * shape.seq_len;
    for (int j = 0; j < kernel_size; ++j) {
      const int offset = j - half;
      const int t_begin = std::max(0, -offset);
      const int t_end = std::min(shape.seq_len, shape.seq_len - offset);
      if (t_end <= t_begin) continue;
      x.block(base + t_begin + offset, 0, t_end - t_begin, dim) +=
          col.block(base + t_begin, j * dim, t_end - t_begin, dim);
    }
  }
  return x;
}

}  // namespace

Matrix Conv1d::Forward(const Matrix &x, SeqShape shape, bool, std::unique_ptr<Tape> *tape) const {
  CheckInput(x, shape, in_dim_, "conv1d");
  Matrix col = Im2Col(x, shape, kernel_size_);
  Matrix y = col * weight_.value;
  y.rowwise() += bias_.value.row(0);
  if (tape) {
    auto t = std::make_unique<ConvTape>();
    t->columns = std::move(col);
    t->shape = shape;
    *tape = std::move(t);
  }
  return y;
}

Matrix Conv1d::Backward(const Tape &tape, const Matrix &dy) {
  const auto &t = TapeAs<ConvTape>(tape, "conv1d");
  weight_.grad.noalias() += t.columns.transpose() * dy;
  bias_.grad += ColSum(dy);
  Matrix dcol = dy * weight_.value.transpose();
  return Col2Im(dcol, t.shape, kernel_size_, in_dim_);
}

// ---------------------------------------------------------------- FullyConnected

FullyConnected::FullyConnected(int in_dim, int out_dim, Rng *rng)
    : in_dim_(in_dim), out_dim_(out_dim) {
  spec().Validate();
  weight_ = Param("weight", HeInit(in_dim, in_dim, out_dim, rng), true);
  bias_ = Param("bias", Matrix::Zero(1, out_dim), false);
}

LayerSpec FullyConnected::spec() const {
  return {LayerKind::kFullyConnected, in_dim_, out_dim_, 1, 0};
}

Matrix FullyConnected::Forward(const Matrix &x, SeqShape shape, bool,
                               std::unique_ptr<Tape> *tape) const {
  CheckInput(x, shape, in_dim_, "fully_connected");
  Matrix y = x * weight_.value;
  y.rowwise() += bias_.value.row(0);
  if (tape) {
    auto t = std::make_unique<MatrixTape>();
    t->x = x;
    *tape = std::move(t);
  }
  return y;
}

Matrix FullyConnected::Backward(const Tape &tape, const Matrix &dy) {
  const auto &t = TapeAs<MatrixTape>(tape, "fully_connected");
  weight_.grad.noalias() += t.x.transpose() * dy;
  bias_.grad += ColSum(dy);
  return dy * weight_.value.transpose();
}

// ---------------------------------------------------------------- LRelu

LayerSpec LRelu::spec() const { return {LayerKind::kLRelu, dim_, dim_, 1, 0}; }

Matrix LRelu::Forward(const Matrix &x, SeqShape shape, bool, std::unique_ptr<Tape> *tape) const {
  CheckInput(x, shape, dim_, "lrelu");
  if (tape) {
    auto t = std::make_unique<MatrixTape>();
    t->x = x;
    *tape = std::move(t);
  }
  return x.cwiseMax(kLReluSlope * x);
}

Matrix LRelu::Backward(const Tape &tape, const Matrix &dy) {
  const auto &t = TapeAs<MatrixTape>(tape, "lrelu");
  Matrix dx = dy;
  const double *xs = t.x.data();
  double *d = dx.data();
  for (Eigen::Index i = 0; i < dx.size(); ++i)
    if (xs[i] < 0.0) d[i] *= kLReluSlope;
  return dx;
}

// ---------------------------------------------------------------- BatchNorm


BatchNorm::BatchNorm(int dim) : dim_(dim) {
  scale_ = Param("scale", Matrix::Ones(1, dim), false);
  shift_ = Param("shift", Matrix::Zero(1, dim), false);
  running_mean_ = Matrix::Zero(1, dim);
  running_var_ = Matrix::Ones(1, dim);
}

LayerSpec BatchNorm::spec() const { return {LayerKind::kBatchNorm, dim_, dim_, 1, 0}; }

namespace {

struct BatchNormTape : Tape {
  Matrix normalized;  // x-hat
  Matrix inv_std;     // 1 x dim
  bool training = true;
};

}  // namespace

Matrix BatchNorm::Forward(const Matrix &x, SeqShape shape, bool training,
                          std::unique_ptr<Tape> *tape) const {
  CheckInput(x, shape, dim_, "batch_norm");
  const double n = static_cast<double>(x.rows());
  Matrix mean, var;
  if (training) {
    if (x.rows() < 2)
      Fail(ErrorCode::kInvalidArgument, "batch_norm: training mode needs batch*time >= 2");
    mean = ColSum(x) / n;
    var = ColSum((x.rowwise() - mean.row(0)).array().square().matrix()) / n;
    running_mean_ = (1.0 - kBatchNormMomentum) * running_mean_ + kBatchNormMomentum * mean;
    running_var_ = (1.0 - kBatchNormMomentum) * running_var_ +
                   kBatchNormMomentum * (var * (n / (n - 1.0)));
  } else {
    mean = running_mean_;
    var = running_var_;
  }
  Matrix inv_std = (var.array() + kBatchNormEpsilon).rsqrt().matrix();
  Matrix xhat = (x.rowwise() - mean.row(0)).array().rowwise() * inv_std.row(0).array();
  Matrix y = (xhat.array().rowwise() * scale_.value.row(0).array()).rowwise() +
             shift_.value.row(0).array();
  if (tape) {
    auto t = std::make_unique<BatchNormTape>();
    t->normalized = std::move(xhat);
    t->inv_std = std::move(inv_std);
    t->training = training;
    *tape = std::move(t);
  }
  return y;
}

Matrix BatchNorm::Backward(const Tape &tape, const Matrix &dy) {
  const auto &t = TapeAs<BatchNormTape>(tape, "batch_norm");
  const double n = static_cast<double>(dy.rows());
  const Eigen::RowVectorXd sum_dy = ColSum(dy);
  const Eigen::RowVectorXd sum_dy_xhat = ColSum((dy.array() * t.normalized.array()).matrix());
  shift_.grad += sum_dy;
  scale_.grad += sum_dy_xhat;
  Matrix dxhat = dy.array().rowwise() * scale_.value.row(0).array();
  if (!t.training) return dxhat.array().rowwise() * t.inv_std.row(0).array();
  Eigen::RowVectorXd sum_dxhat = sum_dy.array() * scale_.value.row(0).array();
  Eigen::RowVectorXd sum_dxhat_xhat = sum_dy_xhat.array() * scale_.value.row(0).array();
  Matrix dx = (n * dxhat).rowwise() - sum_dxhat;
  dx -= (t.normalized.array().rowwise() * sum_dxhat_xhat.array()).matrix();
  return (dx.array().rowwise() * (t.inv_std.row(0).array() / n)).matrix();
}

// ---------------------------------------------------------------- Sequential

Matrix Sequential::Forward(const Matrix &x, SeqShape shape, bool training,
                           std::vector<std::unique_ptr<Tape>> *tapes) const {
  if (tapes) {
    tapes->clear();
    tapes->resize(layers_.size());
  }
  Matrix h = x;
  for (size_t i = 0; i < layers_.size(); ++i)
    h = layers_[i]->Forward(h, shape, training, tapes ? &(*tapes)[i] : nullptr);
  return h;
}

Matrix Sequential::Backward(const std::vector<std::unique_ptr<Tape>> &tapes, const Matrix &dy) {
  if (tapes.size() != layers_.size()) Fail(ErrorCode::kInvalidArgument, "sequential: tape mismatch");
  Matrix g = dy;
  for (size_t i = layers_.size(); i-- > 0;) {
    if (!tapes[i]) Fail(ErrorCode::kInvalidArgument, "sequential: missing tape");
    g = layers_[i]->Backward(*tapes[i], g);
  }
  return g;
}

std::vector<Param *> Sequential::Params() {
  std::vector<Param *> out;
  for (auto &l : layers_)
    for (Param *p : l->Params()) out.push_back(p);
  return out;
}

std::vector<Matrix *> Sequential::Buffers() {
  std::vector<Matrix *> out;
  for (auto &l : layers_)
    for (Matrix *b : l->Buffers()) out.push_back(b);
  return out;
}

namespace {

struct SequentialTape : Tape {
  std::vector<std::unique_ptr<Tape>> tapes;
};

}  // namespace

// ---------------------------------------------------------------- SeModule

SeModule::SeModule(int dim, int bottleneck, Rng *rng) : dim_(dim), bottleneck_(bottleneck) {
  NIVEC_CHECK(dim >= 1 && bottleneck >= 1, ErrorCode::kConfig, "se_module: bad dimensions");
  excite_.Add(std::make_unique<FullyConnected>(2 * dim, bottleneck, rng));
  excite_.Add(std::make_unique<LRelu>(bottleneck));
  excite_.Add(std::make_unique<BatchNorm>(bottleneck));
  excite_.Add(std::make_unique<FullyConnected>(bottleneck, dim, rng));
}

LayerSpec SeModule::spec() const {
  return {LayerKind::kSeModule, dim_, dim_, 1, bottleneck_};
}

namespace {

struct SeTape : Tape {
  Matrix x;
  Matrix mean;   // B x F
  Matrix std;    // B x F
  Matrix gates;  // B x F
  SeqShape shape;
  std::vector<std::unique_ptr<Tape>> excite;
};

}  // namespace

Matrix SeModule::Forward(const Matrix &x, SeqShape shape, bool training,
                         std::unique_ptr<Tape> *tape) const {
  CheckInput(x, shape, dim_, "se_module");
  const int num_seqs = shape.num_seqs, len = shape.seq_len;
  Matrix mean(num_seqs, dim_), stddev(num_seqs, dim_);
  for (int b = 0; b < num_seqs; ++b) {
    auto block = x.middleRows(static_cast<Eigen::Index>(b) * len, len);
    mean.row(b) = block.colwise().mean();
    Eigen::RowVectorXd var =
        (block.rowwise() - mean.row(b)).array().square().colwise().sum().matrix() / len;
    stddev.row(b) = (var.array() + kSeStdEpsilon).sqrt().matrix();
  }
  Matrix squeezed(num_seqs, 2 * dim_);
  squeezed << mean, stddev;
  std::vector<std::unique_ptr<Tape>> excite_tapes;
  Matrix logits = excite_.Forward(squeezed, SeqShape{num_seqs, 1}, training,
                                  tape ? &excite_tapes : nullptr);
  Matrix gates = (1.0 / (1.0 + (-logits.array()).exp())).matrix();
  Matrix y(x.rows(), x.cols());
  for (int b = 0; b < num_seqs; ++b)
    y.middleRows(static_cast<Eigen::Index>(b) * len, len) =
        x.middleRows(static_cast<Eigen::Index>(b) * len, len).array().rowwise() *
        gates.row(b).array();
  if (tape) {
    auto t = std::make_unique<SeTape>();
    t->x = x;
    t->mean = std::move(mean);
    t->std = std::move(stddev);
    t->gates = std::move(gates);
    t->shape = shape;
    t->excite = std::move(excite_tapes);
    *tape = std::move(t);
  }
  return y;
}

Matrix SeModule::Backward(const Tape &tape, const Matrix &dy) {
  const auto &t = TapeAs<SeTape>(tape, "se_module");
  const int num_seqs = t.shape.num_seqs, len = t.shape.seq_len;
  Matrix dgates(num_seqs, dim_);
  Matrix dx(dy.rows(), dy.cols());
  for (int b = 0; b < num_seqs; ++b) {
    auto dy_b = dy.middleRows(static_cast<Eigen::Index>(b) * len, len);
    auto x_b = t.x.middleRows(static_cast<Eigen::Index>(b) * len, len);
    dgates.row(b) = (dy_b.array() * x_b.array()).colwise().sum();
    dx.middleRows(static_cast<Eigen::Index>(b) * len, len) =
        dy_b.array().rowwise() * t.gates.row(b).array();
  }
  Matrix dlogits = (dgates.array() * t.gates.array() * (1.0 - t.gates.array())).matrix();
  Matrix dsqueezed = excite_.Backward(t.excite, dlogits);
  for (int b = 0; b < num_seqs; ++b) {
    auto dmean = dsqueezed.row(b).head(dim_);
    auto dstd = dsqueezed.row(b).tail(dim_);
    Eigen::RowVectorXd coef = dstd.array() / (t.std.row(b).array() * len);
    for (int i = 0; i < len; ++i) {
      Eigen::Index r = static_cast<Eigen::Index>(b) * len + i;
      dx.row(r).array() += dmean.array() / len +
                           coef.array() * (t.x.row(r).array() - t.mean.row(b).array());
    }
  }
  return dx;
}

// ---------------------------------------------------------------- TdnnSeBlock

TdnnSeBlock::TdnnSeBlock(int in_dim, int out_dim, int kernel_size, int bottleneck, Rng *rng)
    : spec_{LayerKind::kTdnnSeBlock, in_dim, out_dim, kernel_size, bottleneck} {
  spec_.Validate();
  body_.Add(std::make_unique<Conv1d>(in_dim, out_dim, kernel_size, rng));
  body_.Add(std::make_unique<LRelu>(out_dim));
  body_.Add(std::make_unique<BatchNorm>(out_dim));
  body_.Add(std::make_unique<SeModule>(out_dim, bottleneck, rng));
}

LayerSpec TdnnSeBlock::spec() const { return spec_; }

Matrix TdnnSeBlock::Forward(const Matrix &x, SeqShape shape, bool training,
                            std::unique_ptr<Tape> *tape) const {
  if (!tape) return body_.Forward(x, shape, training, nullptr);
  auto t = std::make_unique<SequentialTape>();
  Matrix y = body_.Forward(x, shape, training, &t->tapes);
  *tape = std::move(t);
  return y;
}

Matrix TdnnSeBlock::Backward(const Tape &tape, const Matrix &dy) {
  return body_.Backward(TapeAs<SequentialTape>(tape, "tdnn_se_block").tapes, dy);
}

// ---------------------------------------------------------------- ResSeBlock

ResSeBlock::ResSeBlock(int dim, int kernel_size, int bottleneck, Rng *rng)
    : spec_{LayerKind::kResSeBlock, dim, dim, kernel_size, bottleneck} {
  spec_.Validate();
  branch_.Add(std::make_unique<FullyConnected>(dim, dim, rng));
  branch_.Add(std::make_unique<LRelu>(dim));
  branch_.Add(std::make_unique<Conv1d>(dim, dim, kernel_size, rng));
  branch_.Add(std::make_unique<LRelu>(dim));
  branch_.Add(std::make_unique<BatchNorm>(dim));
  branch_.Add(std::make_unique<SeModule>(dim, bottleneck, rng));
}

LayerSpec ResSeBlock::spec() const { return spec_; }

Matrix ResSeBlock::Forward(const Matrix &x, SeqShape shape, bool training,
                           std::unique_ptr<Tape> *tape) const {
  CheckInput(x, shape, spec_.in_dim, "res_se_block");
  if (!tape) return x + branch_.Forward(x, shape, training, nullptr);
  auto t = std::make_unique<SequentialTape>();
  Matrix y = x + branch_.Forward(x, shape, training, &t->tapes);
  *tape = std::move(t);
  return y;
}

Matrix ResSeBlock::Backward(const Tape &tape, const Matrix &dy) {
  return dy + branch_.Backward(TapeAs<SequentialTape>(tape, "res_se_block").tapes, dy);
}

}  // namespace nivec
