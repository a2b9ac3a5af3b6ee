#include <gtest/gtest.h>
#include <sys/wait.h>

#include <array>
#include <cstdio>
#include <fstream>
#include <nlohmann/json.hpp>

#include "beamwatch/binary_io.hpp"
#include "support.hpp"

namespace beamwatch {
namespace {

struct RunResult {
  int exit_code = -1;
  std::string output;
};

RunResult run(const std::string& args) {
  const std::string cmd = std::string(BEAMWATCH_CLI) + " " + args + " 2>&1";
  RunResult r;
  FILE* pipe = ::popen(cmd.c_str(), "r");
  if (!pipe) return r;
  std::array<char, 4096> buf{};
  while (std::fgets(buf.data(), buf.size(), pipe)) r.output += buf.data();
  const int status = ::pclose(pipe);
  r.exit_code = WIFEXITED(status) ? WEXITSTATUS(status) : -1;
  return r;
}

constexpr const char* kTinyConfig = R"({
  "scenarios": [{"raster_width": 16, "raster_height": 16, "max_users": 1}],
  "dataset": {"episodes": 12},
  "model": {"conv_blocks": 1, "conv_channels": 2, "conv_kernel": 3, "conv_padding": 1,
            "pool_window": 2, "pool_stride": 2, "dense_hidden": 8, "embed_dim": 6, "hidden_dim": 5},
  "train": {"epochs": 1, "batch_size": 8, "eval_every": 3}
})";

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    std::ofstream(dir_ / "tiny.json") << kTinyConfig;
    config_ = (dir_ / "tiny.json").string();
  }
  std::string flags(const std::string& out) const { return "--config " + config_ + " --out " + (dir_ / out).string(); }

  testing::TempDir dir_{"cli"};
  std::string config_;
};

TEST_F(Cli, NoSubcommandOrUnknownFlagIsConfigError) {
  EXPECT_EQ(run("").exit_code, 2);
  EXPECT_EQ(run("train --bogus").exit_code, 2);
  EXPECT_EQ(run("train --model lidar").exit_code, 2);
}

TEST_F(Cli, HelpSucceeds) {
  const auto r = run("--help");
  EXPECT_EQ(r.exit_code, 0);
  for (const char* cmd : {"generate", "train", "eval", "report", "selftest"}) {
    EXPECT_NE(r.output.find(cmd), std::string::npos) << cmd;
  }
}

TEST_F(Cli, BadConfigFileIsConfigError) {
  std::ofstream(dir_ / "bad.json") << R"({"train": {"epoch": 3}})";
  const auto r = run("generate --config " + (dir_ / "bad.json").string());
  EXPECT_EQ(r.exit_code, 2);
  EXPECT_NE(r.output.find("train.epoch"), std::string::npos) << r.output;
}

TEST_F(Cli, TrainWithoutDatasetPointsAtGenerate) {
  const auto r = run("train " + flags("empty"));
  EXPECT_EQ(r.exit_code, 3);
  EXPECT_NE(r.output.find("beamwatch generate"), std::string::npos) << r.output;
}

TEST_F(Cli, GenerateIsByteIdenticalAcrossRuns) {
  ASSERT_EQ(run("generate " + flags("a")).exit_code, 0);
  ASSERT_EQ(run("generate " + flags("b") + " --workers 2").exit_code, 0);
  for (const char* f : {"train.bwds", "val.bwds"}) {
    EXPECT_EQ(io::read_file((dir_ / "a" / f).string()), io::read_file((dir_ / "b" / f).string())) << f;
  }
  ASSERT_EQ(run("generate " + flags("c") + " --seed 43").exit_code, 0);
  EXPECT_NE(io::read_file((dir_ / "a" / "train.bwds").string()), io::read_file((dir_ / "c" / "train.bwds").string()));
}

TEST_F(Cli, FullWorkflow) {
  ASSERT_EQ(run("generate " + flags("run")).exit_code, 0);
  const auto generation = nlohmann::json::parse(std::ifstream(dir_ / "run" / "generation.json"));
  EXPECT_EQ(generation.at("seed"), 42);

  for (const char* model : {"vision", "baseline"}) {
    const auto r = run("train " + flags("run") + " --model " + model);
    ASSERT_EQ(r.exit_code, 0) << r.output;
    for (const std::string suffix : {".ckpt", "_curve.csv", "_metrics.json", "_summary.txt"}) {
      EXPECT_TRUE(std::filesystem::exists(dir_ / "run" / (model + suffix))) << model << suffix;
    }
  }

  const auto eval = run("eval --checkpoint " + (dir_ / "run" / "vision.ckpt").string() + " --dataset " +
                        (dir_ / "run" / "val.bwds").string());
  ASSERT_EQ(eval.exit_code, 0) << eval.output;
  const auto metrics = nlohmann::json::parse(eval.output);
  const auto stored = nlohmann::json::parse(std::ifstream(dir_ / "run" / "vision_metrics.json"));
  EXPECT_EQ(metrics.at("top1"), stored.at("validation").at("top1"));

  const auto report = run("report " + flags("run"));
  ASSERT_EQ(report.exit_code, 0) << report.output;
  EXPECT_TRUE(std::filesystem::exists(dir_ / "run" / "comparison.csv"));
}

TEST_F(Cli, TrainTwiceGivesIdenticalMetrics) {
  ASSERT_EQ(run("generate " + flags("det")).exit_code, 0);
  ASSERT_EQ(run("train " + flags("det") + " --model baseline").exit_code, 0);
  const auto first = io::read_file((dir_ / "det" / "baseline_metrics.json").string());
  const auto first_ckpt = io::read_file((dir_ / "det" / "baseline.ckpt").string());
  ASSERT_EQ(run("train " + flags("det") + " --model baseline").exit_code, 0);
  EXPECT_EQ(io::read_file((dir_ / "det" / "baseline_metrics.json").string()), first);
  EXPECT_EQ(io::read_file((dir_ / "det" / "baseline.ckpt").string()), first_ckpt);
}

TEST_F(Cli, EvalOnCorruptDatasetIsDataError) {
  ASSERT_EQ(run("generate " + flags("bad")).exit_code, 0);
  ASSERT_EQ(run("train " + flags("bad") + " --model baseline").exit_code, 0);
  auto bytes = io::read_file((dir_ / "bad" / "val.bwds").string());
  bytes[bytes.size() - 10] ^= 0xff;
  io::write_file((dir_ / "bad" / "val.bwds").string(), bytes);
  const auto r = run("eval --checkpoint " + (dir_ / "bad" / "baseline.ckpt").string() + " --dataset " +
                     (dir_ / "bad" / "val.bwds").string());
  EXPECT_EQ(r.exit_code, 3) << r.output;
}

TEST_F(Cli, SelftestPassesAndCatchesInjectedFault) {
  const auto ok = run("selftest");
  EXPECT_EQ(ok.exit_code, 0) << ok.output;
  const auto bad = run("selftest --inject-fault gru");
  EXPECT_EQ(bad.exit_code, 4);
  EXPECT_NE(bad.output.find("grad.gru_cell"), std::string::npos);
}

}  // namespace
}  // namespace beamwatch
