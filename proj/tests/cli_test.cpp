/* Copyright 2026 The svae Authors. All Rights Reserved.

Licensed under the Apache License, Version 2.0 (the "License");
you may not use this file except in compliance with the License.
You may obtain a copy of the License at

    http://www.apache.org/licenses/LICENSE-2.0

Unless required by applicable law or agreed to in writing, software
distributed under the License is distributed on an "AS IS" BASIS,
WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
See the License for the specific language governing permissions and
limitations under the License.
==============================================================================*/

#include <gtest/gtest.h>

#include <sstream>

#include "svae/cli.hpp"
#include "test_support.hpp"

namespace svae {
namespace {

struct CliResult {
  int code;
  std::string out;
  std::string err;
};

CliResult run_cli(std::vector<std::string> args) {
  args.insert(args.begin(), "svae");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::vector<std::string> lines_of(const std::string& text) {
  std::vector<std::string> lines;
  std::istringstream is(text);
  for (std::string l; std::getline(is, l);) lines.push_back(l);
  return lines;
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    std::string corpus;
    for (const auto& s : testing::toy_corpus()) corpus += s + "\n";
    testing::write_text(corpus_path(), corpus);
    testing::write_word2vec(vec_path(), testing::corpus_words(testing::toy_corpus()), 6, 11);
  }

  std::string corpus_path() const { return (dir_ / "corpus.txt").string(); }
  std::string vec_path() const { return (dir_ / "toy.vec").string(); }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  CliResult train_cli(const std::string& model, const std::string& out, std::vector<std::string> extra = {}) {
    std::vector<std::string> args = {"train", "--corpus", corpus_path(), "--embeddings", vec_path(),
                                     "--model", model, "--out", path(out), "--epochs", "3"};
    args.insert(args.end(), extra.begin(), extra.end());
    return run_cli(args);
  }

  testing::TempDir dir_;
};

TEST_F(CliTest, MissingRequiredFlagIsAUsageError) {
  const CliResult r = run_cli({"train", "--embeddings", vec_path(), "--model", "basic", "--out", path("m.ckpt")});
  EXPECT_EQ(r.code, cli::kExitUsage);
  EXPECT_NE(r.err.find("--corpus"), std::string::npos);
  EXPECT_EQ(run_cli({}).code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"bogus"}).code, cli::kExitUsage);
  EXPECT_EQ(train_cli("fancy", "m.ckpt").code, cli::kExitUsage);
  EXPECT_EQ(run_cli({"train", "--epochs", "abc"}).code, cli::kExitUsage);
}

TEST_F(CliTest, HelpExitsCleanly) {
  const CliResult r = run_cli({"--help"});
  EXPECT_EQ(r.code, cli::kExitOk);
  EXPECT_NE(r.out.find("train"), std::string::npos);
}

TEST_F(CliTest, TrainingIsDeterministicForAFixedSeed) {
  const CliResult a = train_cli("nvi", "a.ckpt", {"--seed", "7"});
  const CliResult b = train_cli("nvi", "b.ckpt", {"--seed", "7"});
  ASSERT_EQ(a.code, 0) << a.err;
  ASSERT_EQ(b.code, 0) << b.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(testing::read_text(path("a.ckpt")), testing::read_text(path("b.ckpt")));
  const auto log = lines_of(a.out);
  ASSERT_EQ(log.size(), 3u);
  EXPECT_EQ(log[0].substr(0, 2), "1\t");
  const CliResult c = train_cli("nvi", "c.ckpt", {"--seed", "8"});
  EXPECT_NE(testing::read_text(path("a.ckpt")), testing::read_text(path("c.ckpt")));
}

TEST_F(CliTest, ZeroWeightNviLogMatchesBasic) {
  const CliResult basic = train_cli("basic", "basic.ckpt");
  const CliResult nvi = train_cli("nvi", "nvi.ckpt", {"--beta", "0", "--lambda", "0", "--smoothing", "0"});
  ASSERT_EQ(basic.code, 0) << basic.err;
  ASSERT_EQ(nvi.code, 0) << nvi.err;
  EXPECT_EQ(basic.out, nvi.out);
}

TEST_F(CliTest, EmbedWritesOneRowPerNonEmptyLine) {
  ASSERT_EQ(train_cli("basic", "m.ckpt").code, 0);
  testing::write_text(path("in.txt"), "the cat sat .\n\nthe cat sat .\nunknownword\n");
  const CliResult r = run_cli({"embed", "--checkpoint", path("m.ckpt"), "--input", path("in.txt")});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines_of(r.out);
  ASSERT_EQ(rows.size(), 3u);
  EXPECT_EQ(rows[0], rows[1]);
  EXPECT_NE(r.err.find(":2: no tokens"), std::string::npos);
  const std::string values = rows[0].substr(rows[0].find('\t') + 1);
  std::istringstream is(values);
  std::size_t n = 0;
  for (double v; is >> v;) ++n;
  EXPECT_EQ(n, 12u);

  testing::write_text(path("empty.txt"), "");
  const CliResult e = run_cli({"embed", "--checkpoint", path("m.ckpt"), "--input", path("empty.txt"), "--out",
                         path("e.tsv")});
  EXPECT_EQ(e.code, 0);
  EXPECT_EQ(testing::read_text(path("e.tsv")), "");
}

TEST_F(CliTest, EvalReportsPearsonAndRejectsDegenerateData) {
  ASSERT_EQ(train_cli("basic", "m.ckpt").code, 0);
  const std::string sick =
      "pair_ID\tsentence_A\tsentence_B\trelatedness_score\tentailment_judgment\n"
      "1\tthe cat sat on the mat .\ta cat sat on a mat .\t4.5\tENTAILMENT\n"
      "2\ta dog runs in the park .\tthe bird sings at dawn .\t1.2\tNEUTRAL\n"
      "3\tshe reads a long book .\the reads a short book .\t3.6\tNEUTRAL\n"
      "4\tthe sun shines .\tthe cat sat .\t0.4\tNEUTRAL\n";
  testing::write_text(path("sick.txt"), sick);
  const CliResult r = run_cli({"eval", "--checkpoint", path("m.ckpt"), "--pairs", path("sick.txt"), "--format", "sick"});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto rows = lines_of(r.out);
  ASSERT_EQ(rows.size(), 6u);
  EXPECT_EQ(rows.back().substr(0, 8), "pearson\t");
  EXPECT_LE(std::abs(std::stod(rows.back().substr(8))), 1.0);

  std::string rescaled = sick;
  for (auto [from, to] : {std::pair{"4.5", "5"}, {"1.2", "1.7"}, {"3.6", "4.1"}, {"0.4", "0.9"}}) {
    rescaled.replace(rescaled.find(from), std::string(from).size(), to);
  }
  testing::write_text(path("shift.txt"), rescaled);
  const CliResult s = run_cli({"eval", "--checkpoint", path("m.ckpt"), "--pairs", path("shift.txt"), "--format", "sick"});
  ASSERT_EQ(s.code, 0);
  EXPECT_EQ(lines_of(s.out).back(), rows.back());

  testing::write_text(path("self.txt"),
                      "pair_ID\tsentence_A\tsentence_B\trelatedness_score\tentailment_judgment\n"
                      "1\tthe cat sat .\tthe cat sat .\t3\tE\n2\tthe dog ran .\tthe dog ran .\t3\tE\n");
  const CliResult d = run_cli({"eval", "--checkpoint", path("m.ckpt"), "--pairs", path("self.txt"), "--format", "sick"});
  EXPECT_EQ(d.code, cli::kExitRuntime);
  EXPECT_EQ(run_cli({"eval", "--checkpoint", path("m.ckpt"), "--pairs", path("sick.txt"), "--format", "csv"}).code,
            cli::kExitUsage);
}

TEST_F(CliTest, StsPairsUseTheSiblingGoldFile) {
  ASSERT_EQ(train_cli("basic", "m.ckpt").code, 0);
  testing::write_text(path("STS.input.toy.txt"),
                      "the cat sat .\ta dog runs .\nshe reads a book .\the reads a book .\nthe sun .\tthe bird .\n");
  testing::write_text(path("STS.gs.toy.txt"), "1.0\n4.8\n2.0\n");
  const CliResult r =
      run_cli({"eval", "--checkpoint", path("m.ckpt"), "--pairs", path("STS.input.toy.txt"), "--format", "sts"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(lines_of(r.out).size(), 5u);
}

TEST_F(CliTest, ConfigFileIsOverriddenByFlags) {
  testing::write_text(path("run.cfg"), "# toy run\nmodel = ce_kld\nepochs=2\nmax_len=30\nseed=3\n");
  const CliResult from_file = run_cli({"train", "--config", path("run.cfg"), "--corpus", corpus_path(), "--embeddings",
                                 vec_path(), "--out", path("a.ckpt")});
  ASSERT_EQ(from_file.code, 0) << from_file.err;
  EXPECT_EQ(lines_of(from_file.out).size(), 2u);
  const CliResult overridden = run_cli({"train", "--config", path("run.cfg"), "--epochs", "1", "--corpus", corpus_path(),
                                  "--embeddings", vec_path(), "--out", path("b.ckpt")});
  ASSERT_EQ(overridden.code, 0) << overridden.err;
  EXPECT_EQ(lines_of(overridden.out).size(), 1u);
  EXPECT_EQ(lines_of(overridden.out)[0], lines_of(from_file.out)[0]);

  testing::write_text(path("bad.cfg"), "epochz=2\n");
  const CliResult bad = run_cli({"train", "--config", path("bad.cfg"), "--corpus", corpus_path(), "--embeddings",
                           vec_path(), "--model", "basic", "--out", path("c.ckpt")});
  EXPECT_EQ(bad.code, cli::kExitUsage);
  EXPECT_NE(bad.err.find("epochz"), std::string::npos);
}

TEST_F(CliTest, RuntimeFailuresExitWithOne) {
  testing::write_text(path("junk.ckpt"), "not a checkpoint");
  testing::write_text(path("in.txt"), "the cat\n");
  EXPECT_EQ(run_cli({"embed", "--checkpoint", path("junk.ckpt"), "--input", path("in.txt")}).code, cli::kExitRuntime);
  EXPECT_EQ(run_cli({"embed", "--checkpoint", path("missing.ckpt"), "--input", path("in.txt")}).code,
            cli::kExitRuntime);
  EXPECT_EQ(run_cli({"train", "--corpus", path("nope.txt"), "--embeddings", vec_path(), "--model", "basic", "--out",
                     path("m.ckpt")})
                .code,
            cli::kExitRuntime);
}

}  // namespace
}  // namespace svae
