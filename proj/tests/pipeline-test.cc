// tests/pipeline-test.cc

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

#include <sys/wait.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>

#include "doctest.h"
#include "json.hpp"
#include "nivec/binary-io.h"
#include "nivec/error.h"
#include "nivec/pipeline.h"
#include "test-util.h"

using namespace nivec;
using namespace nivec::testing;
namespace fs = std::filesystem;

namespace {

const std::string kCli = NIVEC_CLI_PATH;
const std::string kConfigs = NIVEC_CONFIG_DIR;

int RunCli(const std::string &args) {
  const int status = std::system((kCli + " " + args + " >/dev/null 2>&1").c_str());
  return WIFEXITED(status) ? WEXITSTATUS(status) : -1;
}

std::string RunCliOutput(const std::string &args, const std::string &out) {
  if (std::system((kCli + " " + args + " >" + out + " 2>/dev/null").c_str()) != 0) return "";
  return ReadFileBytes(out);
}

nlohmann::json TinyJson() {
  std::ifstream in(kConfigs + "/tiny.json");
  return nlohmann::json::parse(in);
}

}  // namespace

TEST_CASE("bundled configs parse and round-trip") {
  for (const char *name : {"toy.json", "tiny.json"}) {
    PipelineConfig c = LoadPipelineConfig(kConfigs + "/" + name);
    nlohmann::json j = PipelineConfigToJson(c);
    CHECK(PipelineConfigToJson(PipelineConfigFromJson(j)) == j);
    CHECK(ConfigHash(PipelineConfigFromJson(j)) == ConfigHash(c));
  }
  PipelineConfig toy = LoadPipelineConfig(kConfigs + "/toy.json");
  CHECK(toy.corpus.synth.num_speakers == 40);
  CHECK(toy.corpus.synth.utts_per_speaker == 20);
  CHECK(toy.corpus.synth.feature_dim == 20);
  CHECK(toy.network.aggregation.kind == AggregationKind::kLdeSharedDiag);
  CHECK(toy.network.aggregation.num_components == 8);
  CHECK(toy.ivector.rank == 32);
  CHECK(toy.corpus.eval_speakers == 10);
}

TEST_CASE("config parser rejects unknown keys and bad values") {
  nlohmann::json j = TinyJson();
  j["corpus"]["num_speakerz"] = 3;
  CHECK(ThrownCode([&] { PipelineConfigFromJson(j); }) == ErrorCode::kConfig);
  j = TinyJson();
  j["extra"] = 1;
  CHECK(ThrownCode([&] { PipelineConfigFromJson(j); }) == ErrorCode::kConfig);
  j = TinyJson();
  j["corpus"]["cmn"] = "sometimes";
  CHECK(ThrownCode([&] { PipelineConfigFromJson(j); }) == ErrorCode::kConfig);
  j = TinyJson();
  j["corpus"]["eval_speakers"] = 8;
  CHECK(ThrownCode([&] { PipelineConfigFromJson(j); }) == ErrorCode::kConfig);
}

TEST_CASE("cmn settings and seeds are reflected in the config") {
  nlohmann::json j = TinyJson();
  j["corpus"]["cmn"] = 30;
  PipelineConfig windowed = PipelineConfigFromJson(j);
  CHECK(windowed.corpus.cmn);
  CHECK(windowed.corpus.cmn_window == 30);
  j["corpus"]["cmn"] = "none";
  CHECK_FALSE(PipelineConfigFromJson(j).corpus.cmn);

  PipelineConfig a = PipelineConfigFromJson(TinyJson());
  PipelineConfig b = a;
  b.seed = a.seed + 1;
  CHECK(ConfigHash(a) != ConfigHash(b));
  CHECK(a.StageSeed("train") != b.StageSeed("train"));
  CHECK(a.StageSeed("train") != a.StageSeed("synth"));
  CHECK(a.StageSeed("train") == PipelineConfigFromJson(TinyJson()).StageSeed("train"));
}

TEST_CASE("score and embedding files round-trip") {
  const std::string dir = TempDir("pipeline-files");
  std::vector<ScoreLine> scores = {{"a", "b", 1.5, -0.25}, {"a", "c", -2.0, 3.125}};
  WriteScores(scores, dir + "/s.tsv");
  std::vector<ScoreLine> back = ReadScores(dir + "/s.tsv");
  REQUIRE(back.size() == 2);
  CHECK(back[1].raw == -2.0);
  CHECK(back[1].normalized == 3.125);

  std::ofstream(dir + "/three.tsv") << "a\tb\t0.5\n";
  CHECK(ReadScores(dir + "/three.tsv")[0].normalized == 0.5);

  TrialList trials = {{"a", "b", TrialLabel::kTarget}, {"a", "d", TrialLabel::kNonTarget}};
  std::vector<double> tgt, non;
  CHECK(ThrownCode([&] { SplitScores(scores, trials, true, &tgt, &non); }).has_value());

  Rng rng(101);
  EmbeddingArchive arc{{"u1", "u2"}, {"s1", "s2"}, rng.NormalMatrix(2, 3)};
  WriteEmbeddingArchive(arc, dir + "/e.nive");
  EmbeddingArchive e = ReadEmbeddingArchive(dir + "/e.nive");
  CHECK(e.ids == arc.ids);
  CHECK(e.speakers == arc.speakers);
  CHECK(e.vectors == arc.vectors);
  CHECK(ParseSystem(SystemName(System::kIvector)) == System::kIvector);
  CHECK(ThrownCode([] { ParseSystem("gmm"); }) == ErrorCode::kConfig);
}

TEST_CASE("tiny pipeline writes every artifact with provenance") {
  const std::string dir = TempDir("pipeline-run");
  PipelineConfig config = LoadPipelineConfig(kConfigs + "/tiny.json");
  Pipeline p(config, dir, 1, false);
  p.verbose = false;
  p.RunAll();
  for (const char *f :
       {"net.nivn", "loss.csv", "embeddings/train.nive", "embeddings/eval.nive", "stats/train.nivs",
        "stats/eval.nivs", "ivector.nivx", "ivector-objective.csv", "ivectors/eval.nive",
        "ivectors/samples.csv", "ivectors/trace.csv", "backend-embedding.nivb",
        "scores/embedding.tsv", "scores/ivector.tsv", "metrics/embedding.json",
        "metrics/ivector-det.csv", "report.md", "report.json"}) {
    CAPTURE(f);
    REQUIRE(fs::exists(fs::path(dir) / f));
    nlohmann::json prov = nlohmann::json::parse(ReadFileBytes(dir + "/" + f + ".prov.json"));
    CHECK(prov["artifact"] == f);
    CHECK(prov["config_hash"] == ConfigHash(config));
    CHECK(prov["output_hash"] == HexU64(Fnv1a64(ReadFileBytes(dir + "/" + f))));
  }
  nlohmann::json metrics = nlohmann::json::parse(ReadFileBytes(dir + "/metrics/ivector.json"));
  CHECK(metrics["num_target"] == 20);
  CHECK(metrics["num_nontarget"] == 40);
  CHECK(metrics["as_norm"]["eer"].get<double>() >= 0.0);

  Pipeline again(config, dir, 1, false);
  again.verbose = false;
  CHECK(ThrownCode([&] { again.Score(System::kEmbedding); }) == ErrorCode::kConfig);

  std::string bytes = ReadFileBytes(dir + "/embeddings/eval.nive");
  bytes[bytes.size() - 1] ^= 1;
  WriteFileBytes(dir + "/embeddings/eval.nive", bytes);
  Pipeline forced(config, dir, 1, true);
  forced.verbose = false;
  CHECK(ThrownCode([&] { forced.Score(System::kEmbedding); }) == ErrorCode::kCheckFailed);

  fs::remove(dir + "/ivector.nivx");
  CHECK(ThrownCode([&] { forced.ExtractIvectors(); }) == ErrorCode::kMissingInput);
}

TEST_CASE("worker count does not change the scores") {
  PipelineConfig config = LoadPipelineConfig(kConfigs + "/tiny.json");
  const std::string a = TempDir("pipeline-jobs1"), b = TempDir("pipeline-jobs3");
  Pipeline p1(config, a, 1, false), p3(config, b, 3, false);
  p1.verbose = p3.verbose = false;
  p1.RunAll();
  p3.RunAll();
  CHECK(ReadFileBytes(a + "/scores/ivector.tsv") == ReadFileBytes(b + "/scores/ivector.tsv"));
  CHECK(ReadFileBytes(a + "/report.json") == ReadFileBytes(b + "/report.json"));
}

TEST_CASE("cli exit codes") {
  const std::string dir = TempDir("pipeline-cli");
  const std::string cfg = " --config " + kConfigs + "/tiny.json";
  CHECK(RunCli("") == 2);
  CHECK(RunCli("--help") == 0);
  CHECK(RunCli("synth --workdir " + dir + " --config " + dir + "/absent.json") == 3);
  std::ofstream(dir + "/bad.json") << "{\"corpus\": {\"bogus\": 1}}";
  CHECK(RunCli("synth --workdir " + dir + " --config " + dir + "/bad.json") == 2);
  CHECK(RunCli("train-net --workdir " + dir + cfg) == 3);
  CHECK(RunCli("synth --workdir " + dir + cfg) == 0);
  CHECK(RunCli("synth --workdir " + dir + cfg) == 2);
  CHECK(RunCli("synth --force --workdir " + dir + cfg) == 0);
  CHECK(RunCli("score --system plda --workdir " + dir + cfg) == 2);
  CHECK(RunCli("gradcheck --target lrelu --seeds 2") == 0);
}

TEST_CASE("cli eval reproduces the hand case") {
  const std::string dir = TempDir("pipeline-eval");
  std::ofstream(dir + "/scores.tsv") << "e\ta\t2.0\ne\tb\t0.0\ne\tc\t1.0\ne\td\t-1.0\n";
  std::ofstream(dir + "/trials.tsv") << "e\ta\ttgt\ne\tb\ttgt\ne\tc\tnon\ne\td\tnon\n";
  const std::string out = RunCliOutput(
      "eval --scores " + dir + "/scores.tsv --trials " + dir + "/trials.tsv", dir + "/out.txt");
  CHECK(out.rfind("EER 0.25\n", 0) == 0);
  CHECK(RunCli("eval --scores " + dir + "/scores.tsv") == 2);
  std::ofstream(dir + "/short.tsv") << "e\ta\t2.0\n";
  CHECK(RunCli("eval --scores " + dir + "/short.tsv --trials " + dir + "/trials.tsv") != 0);
}
