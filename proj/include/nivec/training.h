// nivec/training.h

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

#ifndef NIVEC_TRAINING_H_
#define NIVEC_TRAINING_H_

#include <functional>
#include <string>
#include <vector>

#include "json.hpp"
#include "nivec/speaker-net.h"

namespace nivec {

enum class LrScheduleKind { kGeometric, kLinear };

struct TrainConfig {
  int crop_frames = 400;
  int batch_size = 64;
  double weight_decay = 0.001;
  double lr_start = 0.05;
  double lr_end = 0.0002;
  LrScheduleKind schedule = LrScheduleKind::kGeometric;
  double momentum = 0.0;
  int epochs = 1;
  int segments_per_speaker = 14000;
  uint64_t seed = 1;

  void Validate() const;
  int StepsPerEpoch(int num_speakers) const;
};

TrainConfig TrainConfigFromJson(const nlohmann::json &j);
nlohmann::json TrainConfigToJson(const TrainConfig &c);

/// crop_frames consecutive frames starting at a uniform offset in
/// [0, T - crop_frames]; shorter utterances are tiled (wrap-padded).
Matrix SampleCrop(const Matrix &frames, int crop_frames, Rng *rng);

/// -log softmax(logits)[label]; *grad receives softmax - one_hot.
double CrossEntropyLoss(const Vector &logits, int label, Vector *grad);

struct BatchLoss {
  double loss = 0.0;      // mean over the batch
  double accuracy = 0.0;  // fraction of rows whose argmax equals the label
  Matrix grad;            // d(mean loss)/d logits
};

BatchLoss CrossEntropyBatch(const Matrix &logits, const std::vector<int> &labels);

/// theta <- theta - lr * (g + wd * theta) for decayed tensors, plain
/// gradient step otherwise.  Optional momentum keeps one velocity per
/// tensor in *velocity.  Gradients are zeroed afterwards.  A non-finite
/// gradient raises kNonFinite before any tensor is touched.
void SgdStep(const std::vector<Param *> &params, double lr, double weight_decay,
             double momentum = 0.0, std::vector<Matrix> *velocity = nullptr);

/// Learning rate at `step` of `total_steps`; lr(0) = lr_start and
/// lr(total_steps) = lr_end.
double LearningRate(int step, int total_steps, const TrainConfig &c);

struct TrainingData {
  std::vector<Matrix> utterances;  // T_u x D
  std::vector<int> labels;         // speaker index per utterance
  int num_classes = 0;
};

struct TrainStep {
  int step = 0;
  double lr = 0.0;
  double loss = 0.0;
  double accuracy = 0.0;
};

/// Minibatch SGD over random crops.  Each epoch draws segments_per_speaker
/// crops per speaker in a seeded shuffled order.  If a loss turns
/// non-finite, the parameters of the last good step are restored and
/// kNonFinite is raised.
std::vector<TrainStep> Train(SpeakerNet *net, const TrainingData &data, const TrainConfig &config,
                             const std::function<void(const TrainStep &)> &on_step = {});

/// CSV with header step,lr,loss,accuracy.
void WriteLossCurve(const std::vector<TrainStep> &curve, const std::string &path);

}  // namespace nivec

#endif  // NIVEC_TRAINING_H_
