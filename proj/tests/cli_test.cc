#include "cli.h"

#include <gtest/gtest.h>

#include <cstdio>
#include <cstdlib>
#include <sys/wait.h>

#include "comparison_logs.h"
#include "test_support.h"

namespace hallucheck {
namespace {

using testing::TempDir;

struct Outcome {
  int code = -1;
  std::string out;
  std::string err;
};

Outcome Invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "hallucheck");
  std::vector<char*> argv;
  for (auto& a : args) argv.push_back(a.data());
  std::ostringstream out, err;
  Outcome o;
  o.code = cli::run(static_cast<int>(argv.size()), argv.data(), out, err);
  o.out = out.str();
  o.err = err.str();
  return o;
}

class CliTest : public ::testing::Test {
 protected:
  CliTest() {
    Json cfg = {
        {"backends",
         {{"replay",
           {{"type", "replay"},
            {"model", "fixture-model"},
            {"temperature", 0.0},
            {"fixtures", testing::fixture_path("mixed_replay.jsonl").string()}}},
          {"remote",
           {{"type", "http"},
            {"base_url", "http://127.0.0.1:9"},
            {"model", "m"},
            {"api_key_env", "HALLUCHECK_CLI_TEST_UNSET_KEY"}}}}},
        {"workdir", (dir_ / "runs").string()},
        {"cache_dir", (dir_ / "cache").string()}};
    testing::write_file(config_path(), cfg.dump(2));
    ::unsetenv("HALLUCHECK_CLI_TEST_UNSET_KEY");
  }

  std::string config_path() const { return (dir_ / "config.json").string(); }
  std::string mixed() const { return testing::data_path("data/samples/mixed.jsonl").string(); }

  Outcome InvokeWithConfig(std::vector<std::string> args) {
    args.insert(args.begin(), {"--config", config_path()});
    return Invoke(std::move(args));
  }

  TempDir dir_;
};

TEST_F(CliTest, UnknownStrategyListsTheValidNames) {
  const auto o = InvokeWithConfig(
      {"run", "--dataset", mixed(), "--backend", "replay", "--strategy", "cove"});
  EXPECT_EQ(o.code, cli::kConfigError);
  for (const char* name : {"halluclean", "direct_ask", "chatprotect", "plan_and_solve"}) {
    EXPECT_NE(o.err.find(name), std::string::npos) << o.err;
  }
}

TEST_F(CliTest, ExitCodesFollowErrorClass) {
  EXPECT_EQ(InvokeWithConfig({"run", "--dataset", (dir_ / "none.jsonl").string(), "--backend",
                           "replay"})
                .code,
            cli::kIoError);
  EXPECT_EQ(InvokeWithConfig({"run", "--dataset", mixed(), "--backend", "missing"}).code,
            cli::kConfigError);
  EXPECT_EQ(InvokeWithConfig({"run", "--dataset", mixed(), "--backend", "replay", "--sample-pos",
                           "2", "--sample-neg", "2"})
                .code,
            cli::kConfigError);
  EXPECT_EQ(Invoke({"--config", (dir_ / "absent.json").string(), "cache", "stats"}).code,
            cli::kIoError);
  EXPECT_EQ(Invoke({"run"}).code, cli::kConfigError);
}

TEST_F(CliTest, MissingApiKeyIsFatal) {
  const auto o = InvokeWithConfig({"run", "--dataset", mixed(), "--backend", "remote",
                                "--strategy", "direct_ask", "--concurrency", "1"});
  EXPECT_EQ(o.code, cli::kBackendFatal);
  EXPECT_NE(o.err.find("HALLUCHECK_CLI_TEST_UNSET_KEY is not set"), std::string::npos) << o.err;
}

TEST_F(CliTest, ReplayRunThenEvaluate) {
  auto o = InvokeWithConfig({"--output", "json", "run", "--dataset", mixed(), "--backend",
                          "replay", "--revise", "--judge-backend", "replay", "--run-id", "m"});
  ASSERT_EQ(o.code, cli::kOk) << o.err;
  const auto summary = Json::parse(o.out);
  EXPECT_EQ(summary.at("records"), 10);
  EXPECT_EQ(summary.at("errors"), 1);

  const auto log = (dir_ / "runs" / "m.jsonl").string();
  o = InvokeWithConfig({"--output", "json", "eval", log, "--judge-backend", "replay",
                     "--report-out", (dir_ / "report.json").string()});
  ASSERT_EQ(o.code, cli::kOk) << o.err;
  const auto report = Json::parse(o.out);
  EXPECT_EQ(report.at("overall").at("f1_pct"), 80.0);
  EXPECT_EQ(report.at("overall").at("R"), 0.75);
  EXPECT_EQ(Json::parse(testing::read_file(dir_ / "report.json")), report);

  o = InvokeWithConfig({"eval", log, "--judge-backend", "replay"});
  ASSERT_EQ(o.code, cli::kOk) << o.err;
  EXPECT_NE(o.out.find("Detection"), std::string::npos);
}

TEST_F(CliTest, CacheStatsAndClear) {
  testing::write_file(dir_ / "config.json",
                      Json{{"cache_dir", (dir_ / "cache").string()}}.dump());
  auto o = Invoke({"--config", config_path(), "--output", "json", "cache", "stats"});
  ASSERT_EQ(o.code, cli::kOk) << o.err;
  EXPECT_EQ(Json::parse(o.out).at("entries"), 0);
  o = Invoke({"--config", config_path(), "cache", "clear"});
  EXPECT_EQ(o.code, cli::kOk) << o.err;
}

TEST_F(CliTest, SampleRequiresSeedAndIsDeterministic) {
  EXPECT_EQ(Invoke({"sample", "--dataset", mixed(), "--pos", "2", "--neg", "2", "--out",
                 (dir_ / "s.jsonl").string()})
                .code,
            cli::kConfigError);
  for (const char* name : {"s1.jsonl", "s2.jsonl"}) {
    const auto o = Invoke({"sample", "--dataset", mixed(), "--pos", "3", "--neg", "3", "--seed",
                        "11", "--out", (dir_ / name).string()});
    ASSERT_EQ(o.code, cli::kOk) << o.err;
  }
  const auto s1 = testing::read_file(dir_ / "s1.jsonl");
  EXPECT_EQ(s1, testing::read_file(dir_ / "s2.jsonl"));
  EXPECT_EQ(testing::read_records(dir_ / "s1.jsonl").size(), 6u);
}

TEST_F(CliTest, RenderPromptMatchesGolden) {
  auto o = Invoke({"render-prompt", "--record", testing::fixture_path("prompt_records.jsonl").string(),
                "--id", "qa-1", "--stage", "plan"});
  ASSERT_EQ(o.code, cli::kOk) << o.err;
  EXPECT_EQ(o.out, testing::read_file(testing::golden_path("halluclean.question_answering.plan.txt")) + "\n");

  o = Invoke({"render-prompt", "--routing", "--kind", "dialogue"});
  ASSERT_EQ(o.code, cli::kOk) << o.err;
  EXPECT_EQ(o.out, testing::read_file(testing::golden_path("routing.dialogue.txt")) + "\n");

  o = Invoke({"render-prompt", "--record", testing::fixture_path("prompt_records.jsonl").string(),
           "--id", "qa-1", "--stage", "reason"});
  EXPECT_EQ(o.code, cli::kConfigError);
}

TEST_F(CliTest, CompareReportsStatistic) {
  testing::write_comparison_logs(dir_ / "a.jsonl", dir_ / "b.jsonl", 112, 83, 400);
  auto o = Invoke({"--output", "json", "compare", (dir_ / "a.jsonl").string(),
                (dir_ / "b.jsonl").string()});
  ASSERT_EQ(o.code, cli::kOk) << o.err;
  const auto j = Json::parse(o.out);
  EXPECT_EQ(j.at("n01"), 112);
  EXPECT_EQ(j.at("n10"), 83);
  EXPECT_NEAR(j.at("chi2").get<double>(), 4.02, 0.01);

  o = Invoke({"compare", (dir_ / "a.jsonl").string(), (dir_ / "a.jsonl").string()});
  EXPECT_EQ(o.code, cli::kConfigError);
  o = Invoke({"--output", "json", "compare", (dir_ / "a.jsonl").string(),
           (dir_ / "absent.jsonl").string()});
  EXPECT_EQ(o.code, cli::kIoError);
  EXPECT_EQ(Json::parse(o.out).at("exit_code"), cli::kIoError);
}

TEST(CliBinaryTest, HelpAndExitStatus) {
  const std::string cmd = std::string(HALLUCHECK_CLI_PATH) + " --help > /dev/null 2>&1";
  const int status = std::system(cmd.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), 0);
  const std::string bad = std::string(HALLUCHECK_CLI_PATH) + " run --strategy nope > /dev/null 2>&1";
  const int bad_status = std::system(bad.c_str());
  ASSERT_TRUE(WIFEXITED(bad_status));
  EXPECT_EQ(WEXITSTATUS(bad_status), 1);
}

}  // namespace
}  // namespace hallucheck
