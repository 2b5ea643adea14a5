// tools/nivec-cli.cc

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

#include <cstdio>
#include <functional>
#include <iostream>
#include <map>
#include <optional>
#include <string>

#include "CLI11.hpp"
#include "nivec/error.h"
#include "nivec/gradcheck.h"
#include "nivec/parallel.h"
#include "nivec/pipeline.h"

namespace {

using nivec::ErrorCode;

constexpr int kExitOk = 0;
constexpr int kExitConfig = 2;
constexpr int kExitMissingInput = 3;
constexpr int kExitNumeric = 4;
constexpr int kExitCheck = 5;

int ExitCodeFor(ErrorCode code) {
  switch (code) {
    case ErrorCode::kConfig:
    case ErrorCode::kInvalidArgument:
      return kExitConfig;
    case ErrorCode::kMissingInput:
    case ErrorCode::kIo:
      return kExitMissingInput;
    case ErrorCode::kNonFinite:
    case ErrorCode::kNotPositiveDefinite:
      return kExitNumeric;
    case ErrorCode::kDimensionMismatch:
    case ErrorCode::kBadMagic:
    case ErrorCode::kBadVersion:
    case ErrorCode::kTruncated:
    case ErrorCode::kCheckFailed:
      return kExitCheck;
  }
  return kExitCheck;
}

struct CommonFlags {
  std::string config;
  std::string workdir;
  int jobs = nivec::DefaultJobs();
  std::optional<uint64_t> seed;
  bool force = false;
};

void AddCommon(CLI::App *cmd, CommonFlags *f, bool needs_workdir = true) {
  cmd->add_option("--config", f->config, "pipeline config (JSON)");
  auto *w = cmd->add_option("--workdir", f->workdir, "work directory");
  if (needs_workdir) w->required();
  cmd->add_option("--jobs", f->jobs, "worker threads")->check(CLI::PositiveNumber);
  cmd->add_option("--seed", f->seed, "master seed (overrides the config)");
  cmd->add_flag("--force", f->force, "overwrite existing artifacts");
}

nivec::Pipeline MakePipeline(const CommonFlags &f) {
  nivec::PipelineConfig config =
      f.config.empty() ? nivec::PipelineConfig{} : nivec::LoadPipelineConfig(f.config);
  if (f.seed) config.seed = *f.seed;
  return nivec::Pipeline(std::move(config), f.workdir, f.jobs, f.force);
}

int RunGradcheck(const std::string &target, int seeds) {
  nivec::GradCheckOptions options;
  options.seeds = seeds;
  std::vector<std::string> targets =
      target.empty() ? nivec::GradCheckTargets() : std::vector<std::string>{target};
  bool ok = true;
  for (const std::string &t : targets) {
    nivec::GradCheckReport r = nivec::RunGradCheck(t, options);
    std::printf("%-16s %s  seeds=%d  max_rel_err=%.3e  worst=%s\n", r.name.c_str(),
                r.passed ? "PASS" : "FAIL", r.seeds, r.max_error, r.worst.c_str());
    ok = ok && r.passed;
  }
  return ok ? kExitOk : kExitCheck;
}

int RunEval(const CommonFlags &f, const std::string &system, const std::string &scores_path,
            const std::string &trials_path, bool raw) {
  if (!scores_path.empty()) {
    if (trials_path.empty()) nivec::Fail(ErrorCode::kConfig, "eval: --scores needs --trials");
    std::vector<double> tgt, non;
    nivec::SplitScores(nivec::ReadScores(scores_path), nivec::ReadTrials(trials_path), raw, &tgt,
                       &non);
    nivec::MetricsReport r = nivec::ComputeMetrics(tgt, non);
    std::printf("EER %.6g\nminDCF %.6g\n", r.eer, r.min_dcf);
    return kExitOk;
  }
  if (f.workdir.empty()) nivec::Fail(ErrorCode::kConfig, "eval: give --workdir or --scores");
  nivec::Pipeline p = MakePipeline(f);
  nivec::SystemResult r = p.Eval(nivec::ParseSystem(system));
  const nivec::MetricsReport &m = raw ? r.raw : r.normalized;
  std::printf("EER %.6g\nminDCF %.6g\n", m.eer, m.min_dcf);
  return kExitOk;
}

}  // namespace

int main(int argc, char **argv) {
  CLI::App app{"nivec: deep speaker embeddings and neural i-vectors"};
  app.require_subcommand(1);
  std::map<std::string, CommonFlags> flags;
  std::map<std::string, std::function<int()>> actions;

  auto stage = [&](const std::string &name, const std::string &help,
                   std::function<void(nivec::Pipeline &)> body) {
    CLI::App *cmd = app.add_subcommand(name, help);
    AddCommon(cmd, &flags[name]);
    actions[name] = [&, name, body]() {
      nivec::Pipeline p = MakePipeline(flags[name]);
      body(p);
      return kExitOk;
    };
    return cmd;
  };

  std::string system = "embedding";
  stage("synth", "generate the synthetic corpus and trial list", [](auto &p) { p.Synth(); });
  stage("train-net", "train the speaker network", [](auto &p) { p.TrainNet(); });
  stage("extract-embeddings", "deep embeddings for train and eval",
        [](auto &p) { p.ExtractEmbeddings(); });
  stage("extract-stats", "sufficient statistics from the trained dictionary",
        [](auto &p) { p.ExtractStats(); });
  stage("train-ivector", "EM for the neural i-vector extractor", [](auto &p) { p.TrainIvector(); });
  stage("extract-ivectors", "posterior means, samples and traces",
        [](auto &p) { p.ExtractIvectors(); });
  stage("train-backend", "whitening, PLDA and AS-norm cohort", [&](auto &p) {
    p.TrainBackend(nivec::ParseSystem(system));
  })->add_option("--system", system, "embedding | ivector");
  CLI::App *score = stage("score", "PLDA + AS-norm scores for the trial list",
                          [&](auto &p) { p.Score(nivec::ParseSystem(system)); });
  score->add_option("--system", system, "embedding | ivector");
  stage("run-all", "every stage and the results report", [](auto &p) { p.RunAll(); });

  CLI::App *eval = app.add_subcommand("eval", "EER and minDCF");
  AddCommon(eval, &flags["eval"], false);
  std::string scores_path, trials_path;
  bool raw = false;
  eval->add_option("--system", system, "embedding | ivector");
  eval->add_option("--scores", scores_path, "score file (enroll test score [score])");
  eval->add_option("--trials", trials_path, "trial list for --scores");
  eval->add_flag("--raw", raw, "use raw scores instead of AS-normalized ones");
  actions["eval"] = [&]() { return RunEval(flags["eval"], system, scores_path, trials_path, raw); };

  CLI::App *grad = app.add_subcommand("gradcheck", "finite-difference gradient suite");
  std::string target;
  int seeds = 20;
  grad->add_option("--target", target, "single target (default: all)");
  grad->add_option("--seeds", seeds, "seeds per target")->check(CLI::PositiveNumber);
  actions["gradcheck"] = [&]() { return RunGradcheck(target, seeds); };

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError &e) {
    const int rc = app.exit(e);
    return rc == 0 ? kExitOk : kExitConfig;
  }
  try {
    for (CLI::App *sub : app.get_subcommands()) return actions.at(sub->get_name())();
  } catch (const nivec::Error &e) {
    std::cerr << "nivec: error: " << e.what() << std::endl;
    return ExitCodeFor(e.code());
  } catch (const std::exception &e) {
    std::cerr << "nivec: error: " << e.what() << std::endl;
    return kExitCheck;
  }
  return kExitOk;
}
