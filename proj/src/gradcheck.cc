// nivec/gradcheck.cc

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

#include "nivec/gradcheck.h"

#include <cmath>
#include <functional>
#include <memory>

#include "nivec/aggregation.h"
#include "nivec/error.h"
#include "nivec/speaker-net.h"
#include "nivec/training.h"

namespace nivec {

namespace {

constexpr int kSeqs = 3;
constexpr int kLen = 5;
constexpr int kInDim = 4;
constexpr int kOutDim = 5;
constexpr int kComponents = 3;

struct Probe {
  std::function<Matrix(const Matrix &, std::unique_ptr<Tape> *)> forward;
  std::function<Matrix(const Tape &, const Matrix &)> backward;
  std::vector<Param *> params;
  Matrix x;
};

std::vector<std::pair<int, int>> PickCoords(const Matrix &m, int max_coords, Rng *rng) {
  std::vector<std::pair<int, int>> all;
  for (int i = 0; i < m.rows(); ++i)
    for (int j = 0; j < m.cols(); ++j) all.emplace_back(i, j);
  if (static_cast<int>(all.size()) > max_coords) {
    rng->Shuffle(&all);
    all.resize(max_coords);
  }
  return all;
}

double CoordError(double analytic, double numeric) {
  return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), 1e-3});
}

void CheckProbe(Probe &probe, const GradCheckOptions &opt, Rng *rng, GradCheckReport *report) {
  std::unique_ptr<Tape> tape;
  Matrix y = probe.forward(probe.x, &tape);
  Matrix r = rng->NormalMatrix(static_cast<int>(y.rows()), static_cast<int>(y.cols()));
  for (Param *p : probe.params) p->grad.setZero();
  Matrix dx = probe.backward(*tape, r);
  std::vector<Matrix> grads;
  for (Param *p : probe.params) grads.push_back(p->grad);

  auto loss = [&](const Matrix &x) { return (probe.forward(x, nullptr).array() * r.array()).sum(); };
  auto note = [&](double err, const std::string &what) {
    if (err > report->max_error) {
      report->max_error = err;
      report->worst = what;
    }
  };
  Matrix x = probe.x;
  for (auto [i, j] : PickCoords(x, opt.max_coords_per_tensor, rng)) {
    const double orig = x(i, j), h = 1e-5 * std::max(1.0, std::abs(orig));
    x(i, j) = orig + h;
    const double up = loss(x);
    x(i, j) = orig - h;
    const double down = loss(x);
    x(i, j) = orig;
    note(CoordError(dx(i, j), (up - down) / (2.0 * h)),
         "input(" + std::to_string(i) + "," + std::to_string(j) + ")");
  }
  for (size_t k = 0; k < probe.params.size(); ++k) {
    Param *p = probe.params[k];
    for (auto [i, j] : PickCoords(p->value, opt.max_coords_per_tensor, rng)) {
      const double orig = p->value(i, j), h = 1e-5 * std::max(1.0, std::abs(orig));
      p->value(i, j) = orig + h;
      const double up = loss(probe.x);
      p->value(i, j) = orig - h;
      const double down = loss(probe.x);
      p->value(i, j) = orig;
      note(CoordError(grads[k](i, j), (up - down) / (2.0 * h)),
           p->name + "(" + std::to_string(i) + "," + std::to_string(j) + ")");
    }
  }
}

// Moves entries away from the LReLU kink so that +-h never crosses it.
Matrix AwayFromZero(Matrix x) {
  for (Eigen::Index i = 0; i < x.size(); ++i) {
    double &v = x.data()[i];
    if (std::abs(v) < 0.05) v = v < 0 ? v - 0.05 : v + 0.05;
  }
  return x;
}

// Randomizes parameters that start at constants (BN scale/shift, biases,
// log-scales) so every code path carries a generic value.
void Jitter(const std::vector<Param *> &params, Rng *rng) {
  for (Param *p : params)
    p->value += rng->NormalMatrix(static_cast<int>(p->value.rows()),
                                  static_cast<int>(p->value.cols()), 0.2);
}

Probe LayerProbe(std::shared_ptr<Layer> layer, SeqShape shape, Matrix x) {
  Probe p;
  p.forward = [layer, shape](const Matrix &in, std::unique_ptr<Tape> *tape) {
    return layer->Forward(in, shape, true, tape);
  };
  p.backward = [layer](const Tape &t, const Matrix &dy) { return layer->Backward(t, dy); };
  p.params = layer->Params();
  p.x = std::move(x);
  return p;
}

Probe HeadProbe(std::shared_ptr<AggregationHead> head, SeqShape shape, Matrix x) {
  Probe p;
  p.forward = [head, shape](const Matrix &in, std::unique_ptr<Tape> *tape) {
    return head->Forward(in, shape, tape);
  };
  p.backward = [head](const Tape &t, const Matrix &dy) { return head->Backward(t, dy); };
  p.params = head->Params();
  p.x = std::move(x);
  return p;
}

struct LossTape : Tape {
  Matrix grad;
};

struct NetTape : Tape {
  SpeakerNet::Tapes tapes;
};

// Keeps the owning object alive inside the probe closures.
struct Holder {
  std::shared_ptr<void> owner;
};

Probe MakeProbe(const std::string &target, Rng *rng, Holder *holder) {
  const SeqShape shape{kSeqs, kLen};
  auto input = [&](int dim) { return rng->NormalMatrix(shape.Rows(), dim); };
  if (target == "conv1d")
    return LayerProbe(std::make_shared<Conv1d>(kInDim, kOutDim, 3, rng), shape, input(kInDim));
  if (target == "fully_connected")
    return LayerProbe(std::make_shared<FullyConnected>(kInDim, kOutDim, rng), shape, input(kInDim));
  if (target == "lrelu")
    return LayerProbe(std::make_shared<LRelu>(kInDim), shape, AwayFromZero(input(kInDim)));
  if (target == "batch_norm") {
    auto layer = std::make_shared<BatchNorm>(kInDim);
    Jitter(layer->Params(), rng);
    return LayerProbe(layer, shape, input(kInDim));
  }
  if (target == "se_module") {
    auto layer = std::make_shared<SeModule>(kInDim, 2, rng);
    Jitter(layer->Params(), rng);
    return LayerProbe(layer, shape, input(kInDim));
  }
  if (target == "tdnn_se_block") {
    auto layer = std::make_shared<TdnnSeBlock>(kInDim, kOutDim, 3, 2, rng);
    Jitter(layer->Params(), rng);
    return LayerProbe(layer, shape, input(kInDim));
  }
  if (target == "res_se_block") {
    auto layer = std::make_shared<ResSeBlock>(kInDim, 3, 2, rng);
    Jitter(layer->Params(), rng);
    return LayerProbe(layer, shape, input(kInDim));
  }
  if (target == "meanstd")
    return HeadProbe(std::make_shared<MeanStdHead>(kInDim), shape, input(kInDim));
  for (AggregationKind kind : {AggregationKind::kLdeIsotropic, AggregationKind::kLdeSharedDiag,
                               AggregationKind::kNetVlad, AggregationKind::kHybrid}) {
    if (target != AggregationKindName(kind)) continue;
    AggregationConfig config{kind, kComponents, true};
    std::shared_ptr<AggregationHead> head = MakeAggregationHead(config, kInDim, rng);
    Jitter(head->Params(), rng);
    return HeadProbe(head, shape, input(kInDim));
  }
  if (target == "cross_entropy") {
    const int classes = 4;
    std::vector<int> labels(kSeqs);
    for (int &l : labels) l = static_cast<int>(rng->UniformInt(classes));
    Probe p;
    p.forward = [labels](const Matrix &logits, std::unique_ptr<Tape> *tape) {
      BatchLoss loss = CrossEntropyBatch(logits, labels);
      if (tape) {
        auto t = std::make_unique<LossTape>();
        t->grad = loss.grad;
        *tape = std::move(t);
      }
      return Matrix::Constant(1, 1, loss.loss);
    };
    p.backward = [](const Tape &t, const Matrix &dy) {
      return Matrix(dynamic_cast<const LossTape &>(t).grad * dy(0, 0));
    };
    p.x = rng->NormalMatrix(kSeqs, classes, 2.0);
    return p;
  }
  if (target == "speaker_net") {
    SpeakerNetConfig config;
    config.frame.architecture = Architecture::kTdnnResSe;
    config.frame.input_dim = kInDim;
    config.frame.hidden_dim = 6;
    config.frame.output_dim = kOutDim;
    config.frame.kernels = {3, 3, 1};
    config.aggregation = {AggregationKind::kLdeSharedDiag, kComponents, true};
    config.embedding_dim = 4;
    config.num_speakers = 3;
    auto net = std::make_shared<SpeakerNet>(config, rng);
    Jitter(net->Params(), rng);
    holder->owner = net;
    Probe p;
    p.forward = [net, shape](const Matrix &in, std::unique_ptr<Tape> *tape) {
      if (!tape) return net->Forward(in, shape, true, nullptr);
      auto t = std::make_unique<NetTape>();
      Matrix y = net->Forward(in, shape, true, &t->tapes);
      *tape = std::move(t);
      return y;
    };
    p.backward = [net](const Tape &t, const Matrix &dy) {
      net->Backward(dynamic_cast<const NetTape &>(t).tapes, dy);
      return Matrix();
    };
    p.params = net->Params();
    p.x = input(kInDim);
    return p;
  }
  Fail(ErrorCode::kInvalidArgument, "unknown gradcheck target '" + target + "'");
}

}  // namespace

std::vector<std::string> GradCheckTargets() {
  return {"conv1d",  "batch_norm", "lrelu",           "fully_connected", "se_module",
          "tdnn_se_block", "res_se_block", "meanstd", "lde-iso", "lde-shared-diag",
          "netvlad", "hybrid",     "cross_entropy",   "speaker_net"};
}

GradCheckReport RunGradCheck(const std::string &target, const GradCheckOptions &options) {
  GradCheckReport report;
  report.name = target;
  for (int s = 0; s < options.seeds; ++s) {
    Rng rng(options.base_seed, static_cast<uint64_t>(s));
    rng = rng.Derive(target);
    Holder holder;
    Probe probe = MakeProbe(target, &rng, &holder);
    if (target == "speaker_net") {
      // The network probe returns no input gradient; check parameters only.
      std::unique_ptr<Tape> tape;
      Matrix y = probe.forward(probe.x, &tape);
      Matrix r = rng.NormalMatrix(static_cast<int>(y.rows()), static_cast<int>(y.cols()));
      for (Param *p : probe.params) p->grad.setZero();
      probe.backward(*tape, r);
      for (Param *p : probe.params) {
        for (auto [i, j] : PickCoords(p->value, options.max_coords_per_tensor, &rng)) {
          const double orig = p->value(i, j), h = 1e-5 * std::max(1.0, std::abs(orig));
          p->value(i, j) = orig + h;
          const double up = (probe.forward(probe.x, nullptr).array() * r.array()).sum();
          p->value(i, j) = orig - h;
          const double down = (probe.forward(probe.x, nullptr).array() * r.array()).sum();
          p->value(i, j) = orig;
          const double err = CoordError(p->grad(i, j), (up - down) / (2.0 * h));
          if (err > report.max_error) {
            report.max_error = err;
            report.worst = p->name + "(" + std::to_string(i) + "," + std::to_string(j) + ")";
          }
        }
      }
    } else {
      CheckProbe(probe, options, &rng, &report);
    }
    ++report.seeds;
  }
  report.passed = report.max_error < options.tolerance;
  return report;
}

std::vector<GradCheckReport> RunGradientSuite(const GradCheckOptions &options) {
  std::vector<GradCheckReport> out;
  for (const std::string &t : GradCheckTargets()) out.push_back(RunGradCheck(t, options));
  return out;
}

}  // namespace nivec
