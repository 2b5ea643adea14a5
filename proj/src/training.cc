// nivec/training.cc

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

#include "nivec/training.h"

#include <cmath>
#include <cstdio>
#include <sstream>

#include "nivec/binary-io.h"
#include "nivec/error.h"

namespace nivec {

void TrainConfig::Validate() const {
  NIVEC_CHECK(crop_frames >= 1, ErrorCode::kConfig, "crop_frames must be >= 1");
  // Batch norm in training mode needs at least two utterance-level rows.
  NIVEC_CHECK(batch_size >= 2, ErrorCode::kConfig, "batch_size must be >= 2");
  NIVEC_CHECK(weight_decay >= 0.0, ErrorCode::kConfig, "weight_decay must be >= 0");
  NIVEC_CHECK(lr_end > 0.0 && lr_start >= lr_end, ErrorCode::kConfig,
              "learning rates must satisfy lr_start >= lr_end > 0");
  NIVEC_CHECK(momentum >= 0.0 && momentum < 1.0, ErrorCode::kConfig, "momentum must be in [0, 1)");
  NIVEC_CHECK(epochs >= 1 && segments_per_speaker >= 1, ErrorCode::kConfig,
              "epochs and segments_per_speaker must be >= 1");
}

int TrainConfig::StepsPerEpoch(int num_speakers) const {
  const long long segments = static_cast<long long>(num_speakers) * segments_per_speaker;
  return static_cast<int>((segments + batch_size - 1) / batch_size);
}

TrainConfig TrainConfigFromJson(const nlohmann::json &j) {
  TrainConfig c;
  try {
    c.crop_frames = j.value("crop_frames", c.crop_frames);
    c.batch_size = j.value("batch_size", c.batch_size);
    c.weight_decay = j.value("weight_decay", c.weight_decay);
    c.lr_start = j.value("lr_start", c.lr_start);
    c.lr_end = j.value("lr_end", c.lr_end);
    std::string schedule = j.value("schedule", std::string("geometric"));
    if (schedule == "geometric")
      c.schedule = LrScheduleKind::kGeometric;
    else if (schedule == "linear")
      c.schedule = LrScheduleKind::kLinear;
    else
      Fail(ErrorCode::kConfig, "unknown schedule '" + schedule + "'");
    c.momentum = j.value("momentum", c.momentum);
    c.epochs = j.value("epochs", c.epochs);
    c.segments_per_speaker = j.value("segments_per_speaker", c.segments_per_speaker);
    c.seed = j.value("seed", c.seed);
  } catch (const nlohmann::json::exception &e) {
    Fail(ErrorCode::kConfig, std::string("train config: ") + e.what());
  }
  c.Validate();
  return c;
}

nlohmann::json TrainConfigToJson(const TrainConfig &c) {
  return {{"crop_frames", c.crop_frames},
          {"batch_size", c.batch_size},
          {"weight_decay", c.weight_decay},
          {"lr_start", c.lr_start},
          {"lr_end", c.lr_end},
          {"schedule", c.schedule == LrScheduleKind::kGeometric ? "geometric" : "linear"},
          {"momentum", c.momentum},
          {"epochs", c.epochs},
          {"segments_per_speaker", c.segments_per_speaker},
          {"seed", c.seed}};
}

Matrix SampleCrop(const Matrix &frames, int crop_frames, Rng *rng) {
  const int len = static_cast<int>(frames.rows());
  NIVEC_CHECK(len >= 1, ErrorCode::kInvalidArgument, "cannot crop an empty utterance");
  NIVEC_CHECK(crop_frames >= 1, ErrorCode::kInvalidArgument, "crop length must be >= 1");
  Matrix out(crop_frames, frames.cols());
  if (len >= crop_frames) {
    const int offset = static_cast<int>(rng->UniformInt(static_cast<uint32_t>(len - crop_frames + 1)));
    out = frames.middleRows(offset, crop_frames);
  } else {
    for (int t = 0; t < crop_frames; ++t) out.row(t) = frames.row(t % len);
  }
  return out;
}

double CrossEntropyLoss(const Vector &logits, int label, Vector *grad) {
  NIVEC_CHECK(label >= 0 && label < logits.size(), ErrorCode::kInvalidArgument,
              "label out of range");
  const double max = logits.maxCoeff();
  const double log_sum = max + std::log((logits.array() - max).exp().sum());
  if (grad) {
    *grad = (logits.array() - log_sum).exp();
    (*grad)(label) -= 1.0;
  }
  return log_sum - logits(label);
}

BatchLoss CrossEntropyBatch(const Matrix &logits, const std::vector<int> &labels) {
  NIVEC_CHECK(static_cast<size_t>(logits.rows()) == labels.size() && !labels.empty(),
              ErrorCode::kDimensionMismatch, "cross entropy: label count mismatch");
  BatchLoss out;
  out.grad.resize(logits.rows(), logits.cols());
  const double n = static_cast<double>(labels.size());
  int correct = 0;
  for (Eigen::Index b = 0; b < logits.rows(); ++b) {
    Vector row = logits.row(b).transpose();
    Vector g;
    out.loss += CrossEntropyLoss(row, labels[b], &g);
    out.grad.row(b) = g.transpose() / n;
    Eigen::Index best;
    row.maxCoeff(&best);
    if (best == labels[b]) ++correct;
  }
  out.loss /= n;
  out.accuracy = correct / n;
  return out;
}

void SgdStep(const std::vector<Param *> &params, double lr, double weight_decay, double momentum,
             std::vector<Matrix> *velocity) {
  for (const Param *p : params)
    if (!AllFinite(p->grad)) Fail(ErrorCode::kNonFinite, "non-finite gradient in '" + p->name + "'");
  if (momentum > 0.0) {
    NIVEC_CHECK(velocity != nullptr, ErrorCode::kInvalidArgument, "momentum needs velocity state");
    if (velocity->size() != params.size()) {
      velocity->clear();
      for (const Param *p : params) velocity->push_back(Matrix::Zero(p->value.rows(), p->value.cols()));
    }
  }
  for (size_t i = 0; i < params.size(); ++i) {
    Param *p = params[i];
    Matrix step = p->grad;
    if (p->decay && weight_decay > 0.0) step += weight_decay * p->value;
    if (momentum > 0.0) {
      (*velocity)[i] = momentum * (*velocity)[i] + step;
      step = (*velocity)[i];
    }
    p->value -= lr * step;
    p->grad.setZero();
  }
}

double LearningRate(int step, int total_steps, const TrainConfig &c) {
  NIVEC_CHECK(total_steps >= 0 && step >= 0 && step <= total_steps, ErrorCode::kInvalidArgument,
              "learning rate step out of range");
  if (total_steps == 0 || step == 0) return c.lr_start;
  if (step == total_steps) return c.lr_end;
  const double frac = static_cast<double>(step) / total_steps;
  if (c.schedule == LrScheduleKind::kLinear) return c.lr_start + frac * (c.lr_end - c.lr_start);
  return c.lr_start * std::pow(c.lr_end / c.lr_start, frac);
}

std::vector<TrainStep> Train(SpeakerNet *net, const TrainingData &data, const TrainConfig &config,
                             const std::function<void(const TrainStep &)> &on_step) {
  config.Validate();
  NIVEC_CHECK(data.num_classes >= 2, ErrorCode::kInvalidArgument, "training needs >= 2 speakers");
  NIVEC_CHECK(data.num_classes == net->config().num_speakers, ErrorCode::kDimensionMismatch,
              "network output size does not match the number of speakers");
  NIVEC_CHECK(data.utterances.size() == data.labels.size() && !data.utterances.empty(),
              ErrorCode::kDimensionMismatch, "training data: label count mismatch");
  std::vector<std::vector<int>> by_speaker(data.num_classes);
  for (size_t u = 0; u < data.labels.size(); ++u) {
    NIVEC_CHECK(data.labels[u] >= 0 && data.labels[u] < data.num_classes,
                ErrorCode::kInvalidArgument, "training data: label out of range");
    by_speaker[data.labels[u]].push_back(static_cast<int>(u));
  }
  for (int s = 0; s < data.num_classes; ++s)
    NIVEC_CHECK(!by_speaker[s].empty(), ErrorCode::kInvalidArgument,
                "training data: speaker " + std::to_string(s) + " has no utterances");

  const int steps_per_epoch = config.StepsPerEpoch(data.num_classes);
  const int total_steps = steps_per_epoch * config.epochs;
  const int dim = net->frame_net().input_dim();
  Rng root(config.seed);
  std::vector<Param *> params = net->Params();
  std::vector<Matrix *> buffers = net->Buffers();
  std::vector<Matrix> velocity;
  std::vector<TrainStep> curve;
  int step = 0;
  for (int epoch = 0; epoch < config.epochs; ++epoch) {
    Rng rng = root.Derive("epoch-" + std::to_string(epoch));
    std::vector<int> order;
    order.reserve(static_cast<size_t>(data.num_classes) * config.segments_per_speaker);
    for (int s = 0; s < data.num_classes; ++s)
      for (int k = 0; k < config.segments_per_speaker; ++k) order.push_back(s);
    rng.Shuffle(&order);
    for (int i = 0; i < steps_per_epoch; ++i, ++step) {
      const size_t begin = static_cast<size_t>(i) * config.batch_size;
      const size_t end = std::min(order.size(), begin + config.batch_size);
      int batch = static_cast<int>(end - begin);
      // A trailing batch of one cannot be batch-normalized; borrow a row.
      size_t first = batch < 2 ? end - 2 : begin;
      batch = static_cast<int>(end - first);
      Matrix x(static_cast<Eigen::Index>(batch) * config.crop_frames, dim);
      std::vector<int> labels(batch);
      for (int b = 0; b < batch; ++b) {
        const int speaker = order[first + b];
        const std::vector<int> &utts = by_speaker[speaker];
        const int u = utts[rng.UniformInt(static_cast<uint32_t>(utts.size()))];
        x.middleRows(static_cast<Eigen::Index>(b) * config.crop_frames, config.crop_frames) =
            SampleCrop(data.utterances[u], config.crop_frames, &rng);
        labels[b] = speaker;
      }
      std::vector<Matrix> saved_params, saved_buffers;
      for (Param *p : params) saved_params.push_back(p->value);
      for (Matrix *m : buffers) saved_buffers.push_back(*m);

      SpeakerNet::Tapes tapes;
      Matrix logits = net->Forward(x, SeqShape{batch, config.crop_frames}, true, &tapes);
      BatchLoss loss = CrossEntropyBatch(logits, labels);
      auto restore = [&]() {
        for (size_t k = 0; k < params.size(); ++k) {
          params[k]->value = saved_params[k];
          params[k]->grad.setZero();
        }
        for (size_t k = 0; k < buffers.size(); ++k) *buffers[k] = saved_buffers[k];
      };
      if (!std::isfinite(loss.loss)) {
        restore();
        Fail(ErrorCode::kNonFinite, "training diverged at step " + std::to_string(step) +
                                        " (non-finite loss)");
      }
      net->Backward(tapes, loss.grad);
      const double lr = LearningRate(step, total_steps, config);
      try {
        SgdStep(params, lr, config.weight_decay, config.momentum, &velocity);
      } catch (const Error &) {
        restore();
        throw;
      }
      TrainStep record{step, lr, loss.loss, loss.accuracy};
      curve.push_back(record);
      if (on_step) on_step(record);
    }
  }
  return curve;
}

void WriteLossCurve(const std::vector<TrainStep> &curve, const std::string &path) {
  std::ostringstream os;
  os << "step,lr,loss,accuracy\n";
  char line[128];
  for (const TrainStep &s : curve) {
    std::snprintf(line, sizeof(line), "%d,%.9g,%.9g,%.6f\n", s.step, s.lr, s.loss, s.accuracy);
    os << line;
  }
  WriteFileBytes(path, os.str());
}

}  // namespace nivec
