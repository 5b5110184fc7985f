#include <gtest/gtest.h>

#include <sys/wait.h>

#include <algorithm>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <sstream>
#include <string>
#include <vector>

#include "fixtures.h"
#include "netwm/cli.h"
#include "netwm/design.h"
#include "netwm/errors.h"

namespace netwm {
namespace {

namespace fs = std::filesystem;

struct Result {
  int code;
  std::string out;
  std::string err;
};

Result run(std::vector<std::string> args) {
  args.insert(args.begin(), "netwm");
  std::vector<const char*> argv;
  for (const auto& a : args) argv.push_back(a.c_str());
  std::ostringstream out, err;
  const int code = cli::run_cli(static_cast<int>(argv.size()), argv.data(), out, err);
  return {code, out.str(), err.str()};
}

std::string slurp(const fs::path& p) {
  std::ifstream in(p, std::ios::binary);
  std::ostringstream s;
  s << in.rdbuf();
  return s.str();
}

class Cli : public ::testing::Test {
 protected:
  void SetUp() override {
    dir_ = fs::temp_directory_path() /
           ("netwm_cli_" + std::string(::testing::UnitTest::GetInstance()->current_test_info()->name()));
    fs::create_directories(dir_);
  }
  void TearDown() override { fs::remove_all(dir_); }

  std::string path(const std::string& name) const { return (dir_ / name).string(); }

  /// Platoon scenario with a short run and a cheap calibration.
  std::string calibrated_platoon(bool attack) {
    const std::string p = path(attack ? "attack.json" : "clean.json");
    std::vector<std::string> args{"--out", p, "platoon-preset"};
    if (attack) args.push_back("--with-attack");
    EXPECT_EQ(run(args).code, 0);
    Scenario s = load_scenario(p);
    s.run.windows = 6;
    save_scenario(s, p);
    const Result r = run({"--scenario", p, "calibrate", "--windows", "200"});
    EXPECT_EQ(r.code, 0) << r.err;
    return p;
  }

  fs::path dir_;
};

TEST_F(Cli, HelpAndUsageErrors) {
  EXPECT_EQ(run({"--help"}).code, cli::kExitOk);
  EXPECT_EQ(run({}).code, cli::kExitError);
  EXPECT_EQ(run({"frobnicate"}).code, cli::kExitError);
  EXPECT_EQ(run({"--seed", "-3", "platoon-preset"}).code, cli::kExitError);
  EXPECT_EQ(run({"detect"}).code, cli::kExitError);
  const Result missing = run({"--scenario", path("nope.json"), "simulate"});
  EXPECT_EQ(missing.code, cli::kExitError);
  EXPECT_EQ(missing.err.rfind("error: ", 0), 0u);
}

TEST_F(Cli, PresetPrintsScenario) {
  const Result r = run({"platoon-preset"});
  ASSERT_EQ(r.code, 0);
  const Scenario s = parse_scenario(r.out);
  EXPECT_TRUE(s.attack.empty());
  const Scenario attacked = parse_scenario(run({"platoon-preset", "--with-attack"}).out);
  EXPECT_NE(attacked.attack.sensor(0), nullptr);
}

TEST_F(Cli, CalibrationNeedsEnoughWindows) {
  const std::string p = path("s.json");
  ASSERT_EQ(run({"--out", p, "platoon-preset"}).code, 0);
  EXPECT_EQ(run({"--scenario", p, "calibrate", "--windows", "10"}).code, cli::kExitError);
  const Result r = run({"--scenario", p, "detect"});
  EXPECT_EQ(r.code, cli::kExitError);
  EXPECT_NE(r.err.find("calibrate"), std::string::npos);
}

TEST_F(Cli, DesignSquareOnDoubleIntegrator) {
  Scenario s;
  s.plant = testing::double_integrator();
  const std::string p = path("di.json");
  save_scenario(s, p);
  EXPECT_EQ(run({"--scenario", p, "simulate"}).code, cli::kExitError);
  const Result r = run({"--scenario", p, "design", "--method", "square", "--lambda", "0.5"});
  ASSERT_EQ(r.code, 0) << r.err;
  EXPECT_NE(r.out.find("gains verified"), std::string::npos) << r.out;
  const Scenario designed = load_scenario(p);
  ASSERT_TRUE(designed.gains.complete());
  const GainSet g = designed.gains.gain_set();
  EXPECT_TRUE(verify_gain_triple(designed.plant, g).ok);
  EXPECT_NO_THROW(compute_watermark_lags(designed.plant.a, designed.plant.b_blocks,
                                         designed.plant.c_blocks, g.stacked_k()));
  EXPECT_EQ(run({"--scenario", p, "design", "--method", "shared-range"}).code,
            cli::kExitError);
  EXPECT_EQ(run({"--scenario", p, "design", "--method", "other"}).code, cli::kExitError);
}

TEST_F(Cli, DetectionIsReproducible) {
  const std::string clean = calibrated_platoon(false);
  const std::string csv1 = path("r1.csv"), csv2 = path("r2.csv");
  const Result a = run({"--scenario", clean, "--seed", "11", "--out", csv1, "detect"});
  const Result b = run({"--scenario", clean, "--seed", "11", "--out", csv2, "detect"});
  EXPECT_LE(a.code, cli::kExitAttack);
  EXPECT_EQ(a.code, b.code);
  EXPECT_EQ(slurp(csv1), slurp(csv2));
  EXPECT_EQ(a.out, b.out);
  std::istringstream rows(slurp(csv1));
  std::string line;
  std::getline(rows, line);
  EXPECT_EQ(line, "subcontroller,window_start,nll,tau,decision");
  int count = 0;
  while (std::getline(rows, line)) ++count;
  EXPECT_EQ(count, 18);

  const Result to_stdout = run({"--scenario", clean, "--seed", "11", "detect"});
  EXPECT_EQ(to_stdout.out, slurp(csv1));
  EXPECT_NE(to_stdout.err.find("run-level limit"), std::string::npos);
}

TEST_F(Cli, AttackExitsWithDistinctCode) {
  const std::string attacked = calibrated_platoon(true);
  const Result r = run({"--scenario", attacked, "detect"});
  EXPECT_EQ(r.code, cli::kExitAttack) << r.err;
  EXPECT_NE(r.err.find("ATTACK"), std::string::npos);
}

TEST_F(Cli, SimulateIsReproducible) {
  const std::string p = path("s.json");
  ASSERT_EQ(run({"--out", p, "platoon-preset"}).code, 0);
  const Result a = run({"--scenario", p, "--seed", "4", "simulate", "--steps", "25"});
  const Result b = run({"--scenario", p, "--seed", "4", "simulate", "--steps", "25"});
  const Result c = run({"--scenario", p, "--seed", "5", "simulate", "--steps", "25"});
  ASSERT_EQ(a.code, 0);
  EXPECT_EQ(a.out, b.out);
  EXPECT_NE(a.out, c.out);
  EXPECT_EQ(std::count(a.out.begin(), a.out.end(), '\n'), 26);
}

TEST_F(Cli, ExecutableRunsAsSubprocess) {
  const std::string out = path("preset.json");
  const std::string cmd = std::string("\"") + NETWM_BINARY + "\" --out \"" + out +
                          "\" platoon-preset > /dev/null 2>&1";
  ASSERT_EQ(std::system(cmd.c_str()), 0);
  EXPECT_EQ(slurp(out), write_scenario(platoon_preset()));
  const std::string bad = std::string("\"") + NETWM_BINARY + "\" detect > /dev/null 2>&1";
  const int status = std::system(bad.c_str());
  ASSERT_TRUE(WIFEXITED(status));
  EXPECT_EQ(WEXITSTATUS(status), cli::kExitError);
}

}  // namespace
}  // namespace netwm
