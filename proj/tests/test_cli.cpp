// test_cli.cpp
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.
//
// Drives the command line in-process through cli::run with string streams,
// plus one smoke test of the installed binary.

#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include "support.hpp"
#include "thaiasr/cli.hpp"
#include "thaiasr/process.hpp"

namespace {

namespace fs = std::filesystem;
using namespace thaiasr;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args, const std::string& input = "") {
  args.insert(args.begin(), "thaiasr");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::istringstream in(input);
  std::ostringstream out, err;
  const int code = cli::run(static_cast<int>(argv.size()), argv.data(), in, out, err);
  return {code, out.str(), err.str()};
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("thaiasr_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()) +
            "_" + std::to_string(::getpid()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& content) {
    const auto p = dir_ / name;
    fs::create_directories(p.parent_path());
    std::ofstream(p, std::ios::binary) << content;
    return p.string();
  }
  static std::string read(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), std::istreambuf_iterator<char>()};
  }
  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  // Vocab "_ | a b" and a directory of one-hot emission matrices.
  std::string vocab() { return write("vocab.txt", "#blank=0\n#delimiter=1\n_\n|\na\nb\n"); }
  std::string emissions_dir(const std::map<std::string, std::vector<int>>& utts) {
    for (const auto& [id, labels] : utts) {
      std::string text;
      for (int l : labels) {
        for (int v = 0; v < 4; ++v) text += (v ? " " : "") + std::string(v == l ? "0" : "-inf");
        text += "\n";
      }
      write("em/" + id + ".txt", text);
    }
    return path("em");
  }

  fs::path dir_;
};

TEST_F(Cli, NoSubcommandPrintsUsage) {
  auto r = run_cli({});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Subcommands"), std::string::npos) << r.err;
}

TEST_F(Cli, UnknownSubcommandIsUsageError) {
  auto r = run_cli({"transmogrify"});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("Usage"), std::string::npos) << r.err;
}

TEST_F(Cli, MissingRequiredOption) {
  EXPECT_EQ(run_cli({"lm-train"}).code, 1);
  EXPECT_EQ(run_cli({"split", "--v8", "x"}).code, 1);
}

TEST_F(Cli, Version) {
  auto r = run_cli({"--version"});
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "thaiasr 0.1.0 (arpa 1, npy 1-3, manifest 1)\n");
}

TEST_F(Cli, HelpExitsZero) {
  auto r = run_cli({"decode", "--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("--beam-width"), std::string::npos);
}

TEST_F(Cli, ThreadsRangeChecked) { EXPECT_EQ(run_cli({"--threads", "0", "tokenize"}).code, 1); }

TEST_F(Cli, MissingFileExitsTwo) {
  auto r = run_cli({"lm-score", "--lm", path("missing.arpa")}, "ไป\n");
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("cannot open"), std::string::npos);
}

TEST_F(Cli, ConfigErrorExitsOne) {
  auto r = run_cli({"tokenize"}, "ไป\n");  // no tokenizer configured
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("error:"), std::string::npos);
}

TEST_F(Cli, BothTokenizersRejected) {
  const auto dict = write("d.txt", "ไป\n");
  EXPECT_EQ(run_cli({"tokenize", "--dict", dict, "--tokenizer-cmd", "cat"}, "x\n").code, 1);
}

TEST_F(Cli, Normalize) {
  const auto dict = write("d.txt", "ไป\nมา\n");
  auto r = run_cli({"normalize", "--dict", dict}, "  ไป   มา ๆ \nสวัสดี!\nๆ\n");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "ไป มามา\nสวัสดี\n\n");
  EXPECT_NE(r.err.find("warning:"), std::string::npos);
}

TEST_F(Cli, NormalizeTsvWithSubstitutions) {
  const auto subs = write("subs.tsv", "กิน ข้าว\tกินข้าว\n");
  const auto corpus = write("c.tsv", "client_id\tpath\tsentence\ns1\ta.mp3\tกิน ข้าว!\ns1\tb.mp3\t???\n");
  auto r = run_cli({"normalize", "--tsv", "--in", corpus, "--substitutions", subs});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("s1\ta.mp3\tกินข้าว"), std::string::npos) << r.out;
  EXPECT_EQ(r.out.find("b.mp3"), std::string::npos);
  EXPECT_NE(r.err.find("dropped 1"), std::string::npos);
}

TEST_F(Cli, NormalizeAllowedRanges) {
  auto r = run_cli({"normalize", "--allowed-ranges", "61-7A"}, "abc ไป XYZ\n");
  EXPECT_EQ(r.out, "abc\n");
  EXPECT_EQ(run_cli({"normalize", "--allowed-ranges", "zz-top"}).code, 1);
}

TEST_F(Cli, Tokenize) {
  const auto dict = write("d.txt", "ไป\nมา\nดี\n");
  auto r = run_cli({"tokenize", "--dict", dict, "--separator", "|"}, "ไปมาดี\n ไป ดี\n");
  EXPECT_EQ(r.code, 0);
  EXPECT_EQ(r.out, "ไป|มา|ดี\nไป|ดี\n");
  auto ext = run_cli({"tokenize", "--tokenizer-cmd", "cat"}, "ไปมา\n");
  EXPECT_EQ(ext.out, "ไปมา\n");
}

TEST_F(Cli, LmTrainAndScore) {
  const auto text = write("train.txt", "a b\na b\n\na c\n");
  const auto arpa = path("lm.arpa");
  auto train = run_cli({"--out", arpa, "lm-train", "--text", text});
  ASSERT_EQ(train.code, 0) << train.err;
  EXPECT_EQ(train.out, "");
  EXPECT_NE(train.err.find("3 sentences"), std::string::npos) << train.err;
  const auto model = read_arpa_file(arpa);
  const double expected = model.score_sentence(std::vector<std::string>{"a", "b"});
  auto score = run_cli({"lm-score", "--lm", arpa}, "a b\n");
  ASSERT_EQ(score.code, 0);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%.7f\ta b\n", expected);
  EXPECT_EQ(score.out, buf);
  EXPECT_NE(score.err.find("total log10"), std::string::npos);
}

TEST_F(Cli, LmTrainRejectsBadDiscount) {
  const auto text = write("train.txt", "a b\n");
  EXPECT_EQ(run_cli({"lm-train", "--text", text, "--discount", "1.5"}).code, 1);
}

TEST_F(Cli, LmTrainWithDictionaryRetokenizes) {
  const auto text = write("train.txt", "ไปมา\n");
  const auto dict = write("d.txt", "ไป\nมา\n");
  auto r = run_cli({"lm-train", "--text", text, "--dict", dict, "--order", "2"});
  ASSERT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("ไป มา"), std::string::npos) << r.out;
}

TEST_F(Cli, DecodeSingleFile) {
  vocab();
  emissions_dir({{"u1", {2, 0, 2, 1, 3}}});
  auto r = run_cli({"decode", "--emissions", path("em/u1.txt"), "--vocab", path("vocab.txt")});
  EXPECT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "aa b\n");
  auto g = run_cli({"decode", "--greedy", "--emissions", path("em/u1.txt"), "--vocab", path("vocab.txt")});
  EXPECT_EQ(g.out, "aa b\n");
}

TEST_F(Cli, DecodeNbestPrintsScores) {
  fixture::Rng rng(1);
  auto e = fixture::random_emissions(rng, 4, 4);
  {
    std::ofstream f(path("e.npy"), std::ios::binary);
    write_npy(f, e);
  }
  vocab();
  auto r = run_cli({"decode", "--emissions", path("e.npy"), "--vocab", path("vocab.txt"), "--nbest", "3"});
  ASSERT_EQ(r.code, 0) << r.err;
  std::istringstream lines(r.out);
  std::string line;
  int n = 0;
  double prev = 1;
  while (std::getline(lines, line)) {
    const double s = std::stod(line.substr(0, line.find('\t')));
    EXPECT_LE(s, prev);
    prev = s;
    ++n;
  }
  EXPECT_EQ(n, 3);
}

TEST_F(Cli, DecodeNeedsExactlyOneSource) {
  vocab();
  EXPECT_EQ(run_cli({"decode", "--vocab", path("vocab.txt")}).code, 1);
  EXPECT_EQ(run_cli({"decode", "--emissions", "a", "--emissions-dir", "b", "--vocab", path("vocab.txt")}).code, 1);
}

TEST_F(Cli, DecodeAlphaWithoutLmIsConfigError) {
  vocab();
  emissions_dir({{"u1", {2}}});
  auto r = run_cli({"decode", "--emissions", path("em/u1.txt"), "--vocab", path("vocab.txt"), "--alpha", "0.5"});
  EXPECT_EQ(r.code, 1);
}

TEST_F(Cli, DecodeDirectoryWithReferences) {
  vocab();
  emissions_dir({{"u2", {3, 3}}, {"u1", {2, 1, 3}}});
  const auto refs = write("refs.tsv", "id\treference\nu1\ta b\nu2\tb\n");
  auto r = run_cli({"decode", "--emissions-dir", path("em"), "--vocab", path("vocab.txt"), "--references", refs});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "id\treference\thypothesis\nu1\ta b\ta b\nu2\tb\tb\n");
  auto plain = run_cli({"decode", "--emissions-dir", path("em"), "--vocab", path("vocab.txt")});
  EXPECT_EQ(plain.out, "id\thypothesis\nu1\ta b\nu2\tb\n");
}

TEST_F(Cli, DecodeDirectoryReferenceMismatch) {
  vocab();
  emissions_dir({{"u1", {2}}});
  const auto extra = write("refs.tsv", "id\treference\nu1\ta\nu9\tb\n");
  EXPECT_EQ(run_cli({"decode", "--emissions-dir", path("em"), "--vocab", path("vocab.txt"), "--references", extra}).code,
            1);
  const auto missing = write("refs2.tsv", "id\treference\nu5\ta\n");
  EXPECT_EQ(
      run_cli({"decode", "--emissions-dir", path("em"), "--vocab", path("vocab.txt"), "--references", missing}).code, 1);
}

TEST_F(Cli, EvaluatePairs) {
  const auto dict = write("d.txt", "ไป\nมา\nดี\n");
  const auto pairs = write("pairs.tsv", "id\treference\thypothesis\n1\tไป มา ดี\tไปมาดี\n2\tไป มา\tไป\n3\t\tไป\n");
  auto r = run_cli({"evaluate", "--pairs", pairs, "--dict", dict});
  ASSERT_EQ(r.code, 0) << r.err;
  auto j = nlohmann::json::parse(r.out);
  EXPECT_DOUBLE_EQ(j["wer"].get<double>(), 1.0 / 5.0);
  EXPECT_EQ(j["tokenizer_id"], "maxmatch");
  EXPECT_NE(r.err.find("excluded: 3"), std::string::npos) << r.err;
}

TEST_F(Cli, EvaluateNeedsTokenizer) {
  const auto pairs = write("pairs.tsv", "id\treference\thypothesis\n1\ta\ta\n");
  EXPECT_EQ(run_cli({"evaluate", "--pairs", pairs}).code, 1);
}

TEST_F(Cli, DecodeThenEvaluateCompose) {
  // decode writes the pairs file that evaluate reads back; the one-step
  // evaluate path must agree with it.
  vocab();
  emissions_dir({{"u1", {2, 1, 3}}, {"u2", {3, 0, 3}}, {"u3", {2}}});
  const auto refs = write("refs.tsv", "id\treference\nu1\ta b\nu2\tb\nu3\ta\n");
  const auto dict = write("d.txt", "a\nb\n");
  const auto pairs = path("pairs.tsv");
  ASSERT_EQ(run_cli({"--out", pairs, "decode", "--emissions-dir", path("em"), "--vocab", path("vocab.txt"),
                     "--references", refs})
                .code,
            0);
  auto two_step = run_cli({"evaluate", "--pairs", pairs, "--dict", dict});
  auto one_step = run_cli({"evaluate", "--emissions-dir", path("em"), "--vocab", path("vocab.txt"), "--references",
                           refs, "--dict", dict});
  ASSERT_EQ(two_step.code, 0) << two_step.err;
  ASSERT_EQ(one_step.code, 0) << one_step.err;
  EXPECT_EQ(two_step.out, one_step.out);
  EXPECT_DOUBLE_EQ(nlohmann::json::parse(one_step.out)["wer"].get<double>(), 1.0 / 4.0);
}

TEST_F(Cli, ThreadCountDoesNotChangeOutput) {
  fixture::Rng rng(5);
  fs::create_directories(path("em"));
  for (int i = 0; i < 24; ++i) {
    std::ofstream f(path("em/u" + std::to_string(i) + ".npy"), std::ios::binary);
    write_npy(f, fixture::random_emissions(rng, 30, 4));
  }
  vocab();
  const auto lm_text = write("lm.txt", "a b\nab ba\nb\n");
  const auto arpa = path("lm.arpa");
  ASSERT_EQ(run_cli({"--out", arpa, "lm-train", "--text", lm_text}).code, 0);
  std::vector<std::string> base = {"decode", "--emissions-dir", path("em"), "--vocab", path("vocab.txt"),
                                   "--lm", arpa, "--alpha", "0.7", "--beta", "0.2", "--beam-width", "6"};
  auto one = run_cli(base);
  auto many_args = base;
  many_args.insert(many_args.end(), {"--threads", "8"});  // global flag after the subcommand
  auto many = run_cli(many_args);
  ASSERT_EQ(one.code, 0) << one.err;
  ASSERT_EQ(many.code, 0) << many.err;
  EXPECT_EQ(one.out, many.out);
}

TEST_F(Cli, JsonConfigWithOverride) {
  const auto dict = write("d.txt", "ไป\nมา\n");
  const auto cfg = write("cfg.json", "{\"tokenize\": {\"dict\": \"" + dict + "\", \"separator\": \"+\"}}");
  auto from_cfg = run_cli({"--config", cfg, "tokenize"}, "ไปมา\n");
  EXPECT_EQ(from_cfg.code, 0) << from_cfg.err;
  EXPECT_EQ(from_cfg.out, "ไป+มา\n");
  auto overridden = run_cli({"--config", cfg, "tokenize", "--separator", "/"}, "ไปมา\n");
  EXPECT_EQ(overridden.out, "ไป/มา\n");
}

TEST_F(Cli, JsonConfigMalformed) {
  const auto cfg = write("cfg.json", "{not json");
  EXPECT_EQ(run_cli({"--config", cfg, "tokenize"}).code, 1);
}

TEST_F(Cli, SplitWritesManifests) {
  const std::string header = "client_id\tpath\tsentence\tduration_ms\n";
  write("v7_train.tsv", header + "old\ta.mp3\tx\t1000\n");
  write("v7_valid.tsv", header);
  write("v7_test.tsv", header + "tester\tt.mp3\tx\t1000\n");
  write("v8.tsv", header + "old\ta.mp3\tx\t1000\ntester\tt.mp3\tx\t1000\ntester\tt2.mp3\tx\t500\n"
                           "fresh1\tf1.mp3\tx\t4000\nfresh2\tf2.mp3\tx\t300\nfresh3\tf3.mp3\tx\t300\n");
  std::vector<std::string> args = {"split",      "--v8",         path("v8.tsv"), "--v7-train", path("v7_train.tsv"),
                                   "--v7-valid", path("v7_valid.tsv"), "--v7-test",  path("v7_test.tsv"),
                                   "--out-dir",  path("out")};
  auto r = run_cli(args);
  ASSERT_EQ(r.code, 0) << r.err;
  auto report = nlohmann::json::parse(r.out);
  EXPECT_TRUE(report["offending_speakers"].empty());
  const std::string test = read(path("out/test.tsv"));
  EXPECT_NE(test.find("tester\tt.mp3\tx\t1000\tlegacy"), std::string::npos) << test;
  EXPECT_NE(test.find("tester\tt2.mp3\tx\t500\tnew"), std::string::npos) << test;
  EXPECT_NE(read(path("out/train.tsv")).find("fresh1\tf1.mp3"), std::string::npos);
  // Re-running gives identical bytes.
  const std::string first = read(path("out/train.tsv")) + read(path("out/valid.tsv")) + test;
  ASSERT_EQ(run_cli(args).code, 0);
  EXPECT_EQ(read(path("out/train.tsv")) + read(path("out/valid.tsv")) + read(path("out/test.tsv")), first);
}

TEST_F(Cli, SplitLeakyLegacyExitsOne) {
  const std::string header = "client_id\tpath\tsentence\n";
  write("v7_train.tsv", header + "s\ta.mp3\tx\n");
  write("v7_valid.tsv", header);
  write("v7_test.tsv", header + "s\tb.mp3\tx\n");
  write("v8.tsv", header + "s\ta.mp3\tx\ns\tb.mp3\tx\n");
  auto r = run_cli({"split", "--v8", path("v8.tsv"), "--v7-train", path("v7_train.tsv"), "--v7-valid",
                    path("v7_valid.tsv"), "--v7-test", path("v7_test.tsv"), "--out-dir", path("out")});
  EXPECT_EQ(r.code, 1);
  EXPECT_NE(r.err.find("s"), std::string::npos);
}

TEST_F(Cli, SplitBadTargets) {
  const std::string header = "client_id\tpath\tsentence\n";
  for (auto n : {"v8", "v7_train", "v7_valid", "v7_test"}) write(std::string(n) + ".tsv", header);
  auto r = run_cli({"split", "--v8", path("v8.tsv"), "--v7-train", path("v7_train.tsv"), "--v7-valid",
                    path("v7_valid.tsv"), "--v7-test", path("v7_test.tsv"), "--targets", "0.5,0.5"});
  EXPECT_EQ(r.code, 1);
}

TEST_F(Cli, BinarySmokeTest) {
  const std::string bin = std::string("'") + THAIASR_CLI_PATH + "'";
  auto r = detail::run_filter(bin + " --version", "");
  EXPECT_EQ(r.exit_status, 0);
  EXPECT_EQ(r.output, "thaiasr 0.1.0 (arpa 1, npy 1-3, manifest 1)\n");
  EXPECT_EQ(detail::run_filter(bin + " nope 2>/dev/null", "").exit_status, 1);
  EXPECT_EQ(detail::run_filter(bin + " lm-score --lm /nonexistent 2>/dev/null", "").exit_status, 2);
}

}  // namespace
