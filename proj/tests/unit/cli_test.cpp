#include <gtest/gtest.h>

#include <sstream>
#include <vector>

#include "mfcp/cli.hpp"
#include "workspace.hpp"

namespace {

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result invoke(std::vector<std::string> args) {
  args.insert(args.begin(), "mfcp");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = mfcp::cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

}  // namespace

TEST(Cli, HelpExitsZero) {
  const auto r = invoke({"--help"});
  EXPECT_EQ(r.code, 0);
  EXPECT_NE(r.out.find("calibrate"), std::string::npos);
}

TEST(Cli, UsageErrorsExitTwo) {
  EXPECT_EQ(invoke({}).code, 2);
  EXPECT_EQ(invoke({"train"}).code, 2);
  EXPECT_EQ(invoke({"degrade"}).code, 2);
  EXPECT_EQ(invoke({"degrade", "--config", "c.txt", "--workers", "x"}).code, 2);
}

TEST(Cli, ValidationErrorExitsTwo) {
  workspace::Scratch dir("cli_validation");
  const auto r = invoke({"pretrain", "--config", (dir / "absent.txt").string()});
  EXPECT_EQ(r.code, 2);
  EXPECT_NE(r.err.find("absent.txt"), std::string::npos);
}

TEST(Cli, NumericErrorExitsThree) {
  workspace::Scratch dir("cli_numeric");
  auto c = workspace::write_inputs(dir.path());
  c.learning_rate = 1e300;
  const auto cfg = workspace::write_config(c, dir / "config.txt").string();
  ASSERT_EQ(invoke({"degrade", "--config", cfg}).code, 0);
  const auto r = invoke({"pretrain", "--config", cfg});
  EXPECT_EQ(r.code, 3) << r.err;
}

TEST(Cli, FullChainWithOverrides) {
  workspace::Scratch dir("cli_chain");
  const auto c = workspace::write_inputs(dir.path());
  const auto cfg = workspace::write_config(c, dir / "config.txt").string();
  const std::string out = (dir / "other").string();
  for (const char* cmd : {"degrade", "pretrain", "calibrate", "finetune", "evaluate"}) {
    const auto r = invoke({cmd, "--config", cfg, "--out", out, "--workers", "2", "--seed", "9"});
    ASSERT_EQ(r.code, 0) << cmd << ": " << r.err;
    EXPECT_NE(r.out.find(std::string(cmd) + ": done"), std::string::npos);
  }
  EXPECT_TRUE(std::filesystem::exists(dir / "other" / "report.json"));
  EXPECT_FALSE(std::filesystem::exists(dir / "out"));
  const auto report = mfcp::pipeline::read_json_file(dir / "other" / "report.json");
  EXPECT_EQ(report["seed"], 9);
}
