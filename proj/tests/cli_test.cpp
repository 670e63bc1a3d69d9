#include <gtest/gtest.h>

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>

#include "ipakit/cli.hpp"
#include "ipakit/curation.hpp"
#include "ipakit/metrics.hpp"

using namespace ipakit;
namespace fs = std::filesystem;

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run_cli(std::vector<std::string> args, const std::string& stdin_text = "") {
  std::istringstream in(stdin_text);
  std::ostringstream out, err;
  const int code = cli::run(args, in, out, err);
  return {code, out.str(), err.str()};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() / ("ipakit_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const std::string& text) {
    const auto path = dir_ / name;
    std::ofstream(path, std::ios::binary) << text;
    return path.string();
  }

  static std::string read(const fs::path& path) {
    std::ifstream in(path, std::ios::binary);
    return {std::istreambuf_iterator<char>(in), {}};
  }

  fs::path dir_;
};

}  // namespace

TEST_F(CliTest, UsageErrorsExitOne) {
  EXPECT_EQ(run_cli({}).code, cli::kUsageError);
  EXPECT_EQ(run_cli({"no-such-command"}).code, cli::kUsageError);
  auto r = run_cli({"normalize", "--no-such-flag"});
  EXPECT_EQ(r.code, cli::kUsageError);
  EXPECT_NE(r.err.find("Usage"), std::string::npos);
  EXPECT_EQ(run_cli({"normalize", "--input", (dir_ / "missing.jsonl").string()}).code, cli::kUsageError);
  EXPECT_EQ(run_cli({"--help"}).code, cli::kSuccess);
}

TEST_F(CliTest, DataErrorNamesFirstBadRecord) {
  auto r = run_cli({"tokenize"}, "{\"id\":\"ok\",\"ipa\":\"pa\"}\n{\"id\":\"bad1\",\"ipa\":\"p£\"}\n{\"id\":\"bad2\",\"ipa\":\"£\"}\n");
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("bad1"), std::string::npos);
  EXPECT_EQ(r.err.find("bad2"), std::string::npos);
  EXPECT_NE(r.out.find("\"ok\""), std::string::npos);
}

TEST_F(CliTest, MalformedJsonReportsLine) {
  auto r = run_cli({"normalize"}, "{\"id\":\"a\",\"ipa\":\"pa\"}\nnot json\n");
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("line 2"), std::string::npos);
}

TEST_F(CliTest, NormalizeUnifiesAndEmitsVocab) {
  const auto vocab = (dir_ / "vocab.txt").string();
  auto r = run_cli({"normalize", "--emit-vocab", vocab}, "{\"id\":\"a\",\"ipa\":\"gʰa\",\"duration_s\":1.5}\n");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "{\"id\":\"a\",\"ipa\":\"ɡʰ a\",\"duration_s\":1.5,\"phones\":[\"ɡʰ\",\"a\"]}\n");
  EXPECT_TRUE(fs::exists(vocab));
  auto t = run_cli({"tokenize", "--vocab", vocab}, "{\"id\":\"a\",\"ipa\":\"ɡʰa\"}\n");
  EXPECT_EQ(t.code, 0) << t.err;
}

TEST_F(CliTest, JobsPreserveOrder) {
  std::string input;
  const char* samples[] = {"pa", "tʰa", "ʧiː", "kʷa", "ŋ˥˩"};
  for (int i = 0; i < 1500; ++i) {
    input += "{\"id\":\"u" + std::to_string(i) + "\",\"ipa\":\"" + samples[i % 5] + "\"}\n";
  }
  auto one = run_cli({"normalize"}, input);
  auto four = run_cli({"normalize", "--jobs", "4"}, input);
  ASSERT_EQ(one.code, 0);
  EXPECT_EQ(one.out, four.out);
}

TEST_F(CliTest, EvalPferFromHypRefFiles) {
  const auto hyp = write("h.jsonl", "{\"id\":\"2\",\"ipa\":\"pat\"}\n{\"id\":\"1\",\"ipa\":\"ba\"}\n");
  const auto ref = write("r.jsonl", "{\"id\":\"1\",\"ipa\":\"pa\"}\n{\"id\":\"2\",\"ipa\":\"pa\"}\n");
  auto r = run_cli({"eval-pfer", "--hyp", hyp, "--ref", ref});
  ASSERT_EQ(r.code, 0) << r.err;
  const auto& table = features::bundled_feature_table();
  const auto& parser = ipa::bundled_parser();
  const double s1 = metrics::pfer(parser.parse("ba"), parser.parse("pa"), table);
  const double s2 = metrics::pfer(parser.parse("pat"), parser.parse("pa"), table);
  EXPECT_NE(r.out.find("\"mean_pfer\": "), std::string::npos);
  // Parse back the mean rather than matching digits.
  const auto pos = r.out.find("\"mean_pfer\": ") + 13;
  EXPECT_NEAR(std::stod(r.out.substr(pos)), (s1 + s2) / 2.0, 1e-15);
  EXPECT_LT(r.out.find("\"id\": \"1\""), r.out.find("\"id\": \"2\""));  // reference order
}

TEST_F(CliTest, EvalPferUnmatchedIdIsDataError) {
  const auto hyp = write("h.jsonl", "{\"id\":\"1\",\"ipa\":\"pa\"}\n");
  const auto ref = write("r.jsonl", "{\"id\":\"9\",\"ipa\":\"pa\"}\n");
  auto r = run_cli({"eval-pfer", "--hyp", hyp, "--ref", ref});
  EXPECT_EQ(r.code, cli::kDataError);
  EXPECT_NE(r.err.find("9"), std::string::npos);
}

TEST_F(CliTest, FeatureTableFlagAndEnvironment) {
  const auto table = write("t.tsv", "phone\tvoi\tlab\np\t-\t+\nb\t+\t+\na\t0\t-\n");
  const std::string input = "{\"id\":\"x\",\"hyp\":\"ba\",\"ref\":\"pa\"}\n";
  auto r = run_cli({"eval-pfer", "--feature-table", table}, input);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"mean_pfer\": 0.5"), std::string::npos);

  ::setenv("IPAKIT_FEATURE_TABLE", table.c_str(), 1);
  auto env = run_cli({"eval-pfer"}, input);
  ::setenv("IPAKIT_FEATURE_TABLE", (dir_ / "missing.tsv").c_str(), 1);
  auto missing = run_cli({"eval-pfer"}, input);
  ::unsetenv("IPAKIT_FEATURE_TABLE");
  EXPECT_EQ(env.out, r.out);
  EXPECT_EQ(missing.code, cli::kUsageError);
}

TEST_F(CliTest, AnalyzeErrorsSymbolLevel) {
  auto r = run_cli({"analyze-errors", "--symbol-level"}, "{\"id\":\"x\",\"hyp\":\"a\",\"ref\":\"aː\"}\n");
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("\"unit\": \"ː\""), std::string::npos);
  EXPECT_NE(r.out.find("\"deletions\": 1"), std::string::npos);
}

TEST_F(CliTest, FilterKeepsAndRejects) {
  const auto rejects = (dir_ / "rejects.jsonl").string();
  std::string input = "{\"id\":\"short\",\"duration_s\":0.5,\"ipa\":\"pa pa pa\"}\n"
                      "{\"id\":\"good\",\"duration_s\":2.0,\"ipa\":\"pa pa pa\"}\n";
  auto r = run_cli({"filter", "--rejects", rejects}, input);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(r.out, "{\"id\":\"good\",\"duration_s\":2.0,\"ipa\":\"pa pa pa\"}\n");
  EXPECT_EQ(read(rejects), "{\"id\":\"short\",\"reason\":\"TooShort\"}\n");
}

TEST_F(CliTest, SegmentStream) {
  std::string input;
  double t = 0.0;
  auto phones = [&](int n) {
    for (int i = 0; i < n; ++i, t += 0.05) {
      input += "{\"type\":\"phone\",\"symbol\":\"a\",\"start_s\":" + std::to_string(t) +
               ",\"end_s\":" + std::to_string(t + 0.05) + "}\n";
    }
  };
  phones(25);
  input += "{\"type\":\"silence\",\"start_s\":" + std::to_string(t) + ",\"end_s\":" + std::to_string(t + 0.3) + "}\n";
  t += 0.3;
  phones(5);
  auto r = run_cli({"segment", "--stream-id", "s1"}, input);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_EQ(std::count(r.out.begin(), r.out.end(), '\n'), 1);
  EXPECT_NE(r.out.find("\"id\":\"s1_0\""), std::string::npos);
}

TEST_F(CliTest, ChunkIsSeeded) {
  const std::string input = "{\"id\":\"rec\",\"duration_s\":95.5}\n";
  auto a = run_cli({"chunk", "--seed", "7"}, input);
  auto b = run_cli({"chunk", "--seed", "7"}, input);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  EXPECT_EQ(run_cli({"chunk", "--total", "0.5"}).code, cli::kDataError);
}

TEST_F(CliTest, ConsistencyFilterMatchesLibrary) {
  const std::vector<std::vector<std::string>> sets{{"pa", "pa"}, {"pa", "ba"}, {"pa", "ta"}, {"pat", "pa"},
                                                  {"a", "pata"}};
  std::string input;
  std::map<std::string, double> scores;
  features::FeatureCache cache(features::bundled_feature_table());
  for (std::size_t i = 0; i < sets.size(); ++i) {
    const std::string id = "u" + std::to_string(i);
    input += "{\"id\":\"" + id + "\",\"transcriptions\":[\"" + sets[i][0] + "\",\"" + sets[i][1] + "\"]}\n";
    scores[id] = curation::pairwise_consistency({id, sets[i], 0}, ipa::bundled_parser(),
                                                ipa::bundled_normalization_table(), cache);
  }
  auto r = run_cli({"consistency-filter", "--percentile", "80"}, input);
  ASSERT_EQ(r.code, 0) << r.err;
  const auto kept = curation::percentile_filter(scores, 80.0);
  std::size_t lines = 0;
  for (const auto& [id, _] : scores) {
    const bool printed = r.out.find("\"id\":\"" + id + "\"") != std::string::npos;
    EXPECT_EQ(printed, kept.contains(id)) << id;
    lines += printed;
  }
  EXPECT_EQ(static_cast<std::size_t>(std::count(r.out.begin(), r.out.end(), '\n')), lines);
}

TEST_F(CliTest, ShardWritesFilesAndManifest) {
  std::string input;
  for (int i = 0; i < 5; ++i) input += "{\"id\":\"r" + std::to_string(i) + "\",\"duration_s\":1.0,\"ipa\":\"pa\"}\n";
  const auto out_dir = dir_ / "shards";
  auto r = run_cli({"shard", "--output", out_dir.string(), "--shard-size", "2"}, input);
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_TRUE(fs::exists(out_dir / "shard-000002.jsonl"));
  EXPECT_EQ(read(out_dir / "shard-000002.jsonl"), "{\"id\":\"r4\",\"duration_s\":1.0,\"ipa\":\"pa\"}\n");
  EXPECT_EQ(run_cli({"shard"}, input).code, cli::kUsageError);
}

TEST_F(CliTest, CtcDemoIsByteIdentical) {
  const std::vector<std::string> args{"ctc-demo", "--seed", "7", "--steps", "15", "--utterances", "20"};
  auto a = run_cli(args);
  auto b = run_cli(args);
  ASSERT_EQ(a.code, 0) << a.err;
  EXPECT_EQ(a.out, b.out);
  for (const char* key : {"\"step\"", "\"loss\"", "\"ctc_a\"", "\"ctc_b\"", "\"cr\"", "\"decode_exact_match_rate\""}) {
    EXPECT_NE(a.out.find(key), std::string::npos) << key;
  }
  auto c = run_cli({"ctc-demo", "--seed", "8", "--steps", "15", "--utterances", "20"});
  EXPECT_NE(a.out, c.out);
}
