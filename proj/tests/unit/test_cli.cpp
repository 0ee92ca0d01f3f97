#include <gtest/gtest.h>

#include <filesystem>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "articnav/evalkit.hpp"
#include "articnav/scenario.hpp"
#include "cli.hpp"

namespace articnav {
namespace {

namespace fs = std::filesystem;

int run(std::vector<std::string> args) {
  args.insert(args.begin(), "artic-nav");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  return cli::run(static_cast<int>(argv.size()), argv.data());
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::stringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

fs::path scratch(const std::string& name) {
  const auto dir = fs::temp_directory_path() / "articnav_cli_test" / name;
  fs::remove_all(dir);
  fs::create_directories(dir);
  return dir;
}

const char* kTinyConfig = R"({
  "scenarios": [{"diameter": 16, "arms": 4, "routes": [0, 5]}],
  "sac": {"total_steps": 600, "warmup_steps": 200, "batch_size": 16, "workers": 2,
          "q_hidden": [8], "policy_hidden": [8], "buffer_capacity": 1000,
          "epsilon_timesteps": 400},
  "train": {"log_every": 0, "checkpoint_interval": 400}
})";

TEST(Cli, UsageErrorsExitWithTwo) {
  EXPECT_EQ(run({}), 2);
  EXPECT_EQ(run({"frobnicate"}), 2);
  EXPECT_EQ(run({"train"}), 2);
  EXPECT_EQ(run({"eval", "--checkpoint", "x", "--out", "y", "--bogus"}), 2);
  EXPECT_EQ(run({"eval", "--checkpoint", "x", "--out", "y", "--traces", "pdf"}), 2);
  EXPECT_EQ(run({"inspect-obs", "--pose", "1,2,x,4"}), 2);
}

TEST(Cli, HelpOnEverySubcommand) {
  ::testing::internal::CaptureStdout();
  EXPECT_EQ(run({"--help"}), 0);
  for (const char* sub : {"scenario", "inspect-obs", "pid-tune", "train", "eval", "replay"}) {
    EXPECT_EQ(run({sub, "--help"}), 0) << sub;
  }
  EXPECT_EQ(run({"scenario", "gen", "--help"}), 0);
  const std::string out = ::testing::internal::GetCapturedStdout();
  EXPECT_NE(out.find("--checkpoint"), std::string::npos);
  EXPECT_NE(out.find("--diameter"), std::string::npos);
}

TEST(Cli, MissingConfigIsARuntimeError) {
  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run({"train", "--config", "missing.toml", "--out", scratch("missing").string()}), 1);
  const std::string err = ::testing::internal::GetCapturedStderr();
  EXPECT_EQ(err.rfind("file-not-found: ", 0), 0u) << err;
}

TEST(Cli, ScenarioGenWritesALoadableFile) {
  const auto file = scratch("gen") / "r20.json";
  ::testing::internal::CaptureStdout();
  EXPECT_EQ(run({"scenario", "gen", "--diameter", "20", "--entries", "3", "--spacing", "1.0", "-o", file.string()}), 0);
  ::testing::internal::GetCapturedStdout();
  ASSERT_TRUE(fs::exists(file));
  const Scenario s = load_scenario(file);
  EXPECT_EQ(s.spec.diameter, 20.0);
  EXPECT_EQ(s.spec.entries.size(), 3u);
  EXPECT_EQ(s.name, "roundabout_20m_3arm");
}

TEST(Cli, InspectAndPidTune) {
  ::testing::internal::CaptureStdout();
  EXPECT_EQ(run({"inspect-obs", "--route", "2", "--pose", "40,5.55,3.14159,3.14159", "--json"}), 0);
  const auto j = nlohmann::json::parse(::testing::internal::GetCapturedStdout());
  EXPECT_EQ(j["truck_rays"].size(), 13u);
  EXPECT_EQ(j["perp_line_dist"].size(), 2u);
  ::testing::internal::CaptureStdout();
  EXPECT_EQ(run({"pid-tune"}), 0);
  EXPECT_NE(::testing::internal::GetCapturedStdout().find("kp = 6.25"), std::string::npos);
}

TEST(Cli, TrainEvalReplayRoundTrip) {
  const auto dir = scratch("pipeline");
  {
    std::ofstream(dir / "tiny.json") << kTinyConfig;
  }
  ::testing::internal::CaptureStdout();
  ASSERT_EQ(run({"train", "--config", (dir / "tiny.json").string(), "--out", (dir / "a").string(), "--seed", "4",
                 "--set", "sac.lr=0.001"}),
            0);
  ASSERT_EQ(run({"train", "--config", (dir / "tiny.json").string(), "--out", (dir / "b").string(), "--seed", "4",
                 "--set", "sac.lr=0.001", "--threads", "2"}),
            0);
  EXPECT_TRUE(fs::exists(dir / "a" / "final.ckpt"));
  EXPECT_TRUE(fs::exists(dir / "a" / "checkpoint_400.ckpt"));
  EXPECT_EQ(slurp(dir / "a" / "metrics.csv"), slurp(dir / "b" / "metrics.csv"));
  const auto resolved = nlohmann::json::parse(slurp(dir / "a" / "config.json"));
  EXPECT_EQ(resolved["sac"]["lr"], 0.001);
  EXPECT_EQ(resolved["train"]["seed"], 4);

  fs::create_directories(dir / "maps");
  ASSERT_EQ(run({"scenario", "gen", "--diameter", "20", "--entries", "4", "-o", (dir / "maps" / "r20.json").string()}),
            0);
  ASSERT_EQ(run({"eval", "--checkpoint", (dir / "a" / "final.ckpt").string(), "--scenarios", (dir / "maps").string(),
                 "--episodes", "2", "--seed", "3", "--out", (dir / "eval").string()}),
            0);
  ASSERT_EQ(run({"eval", "--checkpoint", (dir / "a" / "final.ckpt").string(), "--scenarios", (dir / "maps").string(),
                 "--episodes", "2", "--seed", "3", "--out", (dir / "eval2").string(), "--threads", "3"}),
            0);
  ::testing::internal::GetCapturedStdout();
  const auto report = nlohmann::json::parse(slurp(dir / "eval" / "report.json"));
  EXPECT_EQ(report["episodes"], 40);
  EXPECT_EQ(slurp(dir / "eval" / "report.csv"), slurp(dir / "eval2" / "report.csv"));
  const auto trace = dir / "eval" / "traces" / "roundabout_20m_4arm_r03_e01.csv";
  ASSERT_TRUE(fs::exists(trace));
  EXPECT_TRUE(fs::exists(dir / "eval" / "traces" / "roundabout_20m_4arm_r03_e01.svg"));
  EXPECT_EQ(slurp(trace), slurp(dir / "eval2" / "traces" / "roundabout_20m_4arm_r03_e01.csv"));

  ::testing::internal::CaptureStdout();
  EXPECT_EQ(run({"replay", "--trace", trace.string(), "--scenario", (dir / "maps" / "r20.json").string(), "-o",
                 (dir / "replay.svg").string()}),
            0);
  ::testing::internal::GetCapturedStdout();
  EXPECT_EQ(slurp(dir / "replay.svg"), slurp(dir / "eval" / "traces" / "roundabout_20m_4arm_r03_e01.svg"));

  ::testing::internal::CaptureStderr();
  EXPECT_EQ(run({"eval", "--checkpoint", (dir / "a" / "final.ckpt").string(), "--out", (dir / "e3").string(),
                 "--deviation", "nonsense"}),
            2);
  EXPECT_EQ(run({"eval", "--checkpoint", (dir / "nope.ckpt").string(), "--out", (dir / "e3").string()}), 1);
  EXPECT_EQ(run({"replay", "--trace", (dir / "nope.csv").string(), "-o", (dir / "x.svg").string()}), 1);
  ::testing::internal::GetCapturedStderr();
}

}  // namespace
}  // namespace articnav
