#include <sys/wait.h>

#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <string>

#include <gtest/gtest.h>

#include "fxcor/config.hpp"

namespace {

namespace fs = std::filesystem;
using nlohmann::json;

struct Outcome {
  int code;
  std::string output;
};

// Runs cor with the given arguments, capturing stdout and stderr together.
Outcome cor(const std::string& args) {
  const std::string cmd = std::string(COR_BINARY) + " " + args + " 2>&1";
  FILE* pipe = popen(cmd.c_str(), "r");
  if (!pipe) return {-1, "popen failed"};
  std::string out;
  char buf[4096];
  while (std::fgets(buf, sizeof buf, pipe)) out += buf;
  const int status = pclose(pipe);
  return {WIFEXITED(status) ? WEXITSTATUS(status) : -1, out};
}

class CliTest : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("fxcor_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::remove_all(dir_);
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string write(const std::string& name, const json& doc) const {
    const fs::path p = dir_ / name;
    std::ofstream(p) << doc.dump(2);
    return p.string();
  }

  static std::string scenario(const std::string& name) {
    return std::string(FXCOR_SCENARIO_DIR) + "/" + name;
  }

  fs::path dir_;
};

TEST_F(CliTest, ValidateScheduleRejectsAnEarlyOneSecondAttack) {
  const std::string s = write("s.json", json::parse(R"([{"start_seconds": 0, "end_seconds": 1}])"));
  const Outcome r = cor("validate-schedule --schedule " + s);
  EXPECT_EQ(r.code, 5) << r.output;
  EXPECT_NE(r.output.find("violation"), std::string::npos);
}

TEST_F(CliTest, ValidateScheduleAcceptsNoAttacks) {
  const Outcome r = cor("validate-schedule --schedule " + write("s.json", json::array()));
  EXPECT_EQ(r.code, 0) << r.output;
}

TEST_F(CliTest, ValidateScheduleRejectsThePrintedFixture) {
  const Outcome r = cor("validate-schedule --schedule " + scenario("printed_schedule.json"));
  EXPECT_EQ(r.code, 5) << r.output;
}

TEST_F(CliTest, ValidateScheduleUsesTheBudgetOverride) {
  const std::string s = write("s.json", json::parse(R"([{"start_seconds": 0, "end_seconds": 1}])"));
  EXPECT_EQ(cor("validate-schedule --schedule " + s + " --nu-d 1.5").code, 0);
  EXPECT_EQ(cor("validate-schedule --schedule " + s + " --p-d 0.5").code, 2);
}

TEST_F(CliTest, MalformedScenarioIsAParseFailure) {
  json doc = fxcor::serialize_scenario(fxcor::benchmark_scenario());
  doc["graph"]["edges"][3]["to"] = 9;
  const Outcome r = cor("design --config " + write("bad.json", doc));
  EXPECT_EQ(r.code, 2) << r.output;
  EXPECT_NE(r.output.find("graph.edges[3].to"), std::string::npos) << r.output;
}

TEST_F(CliTest, UsageErrorsAreParseFailures) {
  EXPECT_EQ(cor("").code, 2);
  EXPECT_EQ(cor("design").code, 2);
  EXPECT_EQ(cor("frobnicate").code, 2);
  EXPECT_EQ(cor("simulate --config " + scenario("inverted_pendulum_5.json") + " --h -1").code, 2);
  EXPECT_EQ(cor("--help").code, 0);
}

TEST_F(CliTest, DesignCertifiesTheBenchmark) {
  const Outcome r = cor("design --config " + scenario("inverted_pendulum_5.json"));
  EXPECT_EQ(r.code, 0) << r.output;
}

TEST_F(CliTest, DesignFailsWhenTheBudgetBreaksTheCertificate) {
  json doc = fxcor::serialize_scenario(fxcor::benchmark_scenario());
  doc["attack"]["p_d"] = 1.01;
  const std::string cfg = write("tight.json", doc);
  EXPECT_EQ(cor("design --config " + cfg).code, 3);
  EXPECT_EQ(cor("simulate --config " + cfg + " --horizon 1").code, 3);
}

TEST_F(CliTest, ShortSimulationIsNotSettledYet) {
  const fs::path out = dir_ / "run";
  const Outcome r = cor("simulate --config " + scenario("inverted_pendulum_5.json") +
                        " --horizon 10 --out " + out.string());
  EXPECT_EQ(r.code, 6) << r.output;
  for (const char* f : {"result.csv", "summary.txt", "schedule.json"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const fxcor::AttackSchedule s = fxcor::parse_schedule(fxcor::read_json_file((out / "schedule.json").string()));
  EXPECT_EQ(s.horizon(), 10.0);
}

TEST_F(CliTest, SimulationOutputIsDeterministicPerSeed) {
  auto csv = [&](const std::string& name, int seed) {
    const fs::path out = dir_ / name;
    cor("simulate --config " + scenario("inverted_pendulum_5.json") + " --horizon 2 --seed " +
        std::to_string(seed) + " --out " + out.string());
    std::ifstream in(out / "result.csv");
    return std::string(std::istreambuf_iterator<char>(in), {});
  };
  const std::string a = csv("a", 4), b = csv("b", 4), c = csv("c", 5);
  EXPECT_FALSE(a.empty());
  EXPECT_EQ(a, b);
  EXPECT_NE(a, c);
}

TEST_F(CliTest, CompareObserversPrintsTheRatio) {
  const Outcome r = cor("compare-observers --config " + scenario("inverted_pendulum_5.json") +
                        " --seeds 2 --horizon 20");
  EXPECT_EQ(r.code, 0) << r.output;
  EXPECT_NE(r.output.find("stddev ratio"), std::string::npos) << r.output;
}

TEST_F(CliTest, ReproduceWritesTheReferenceTable) {
  const fs::path out = dir_ / "repro";
  const Outcome r = cor("reproduce-paper --horizon 5 --out " + out.string());
  EXPECT_EQ(r.code, 6) << r.output;
  for (const char* f : {"scenario.json", "design_report.txt", "constants.txt", "result.csv"})
    EXPECT_TRUE(fs::exists(out / f)) << f;
  const fxcor::ScenarioConfig cfg = fxcor::load_scenario((out / "scenario.json").string());
  EXPECT_EQ(cfg.run.horizon_seconds, 5.0);
}

}  // namespace
