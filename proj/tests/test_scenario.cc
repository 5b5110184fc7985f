#include <gtest/gtest.h>

#include <cstdio>
#include <filesystem>
#include <fstream>

#include "fixtures.h"
#include "netwm/errors.h"
#include "netwm/scenario.h"

namespace netwm {
namespace {

constexpr const char* kMinimal = R"({
  "plant": {
    "A": [[1, 1], [0, 1]],
    "B_blocks": [[[1], [0]], [[0], [1]]],
    "C_blocks": [[[1, 0]], [[0, 1]]],
    "sigma_W": [[0.01, 0], [0, 0.01]],
    "sigma_Z_blocks": [0.01, 0.01]
  }
}
)";

int error_line(const std::string& text) {
  try {
    parse_scenario(text, "case.json");
  } catch (const ScenarioError& e) {
    return e.line();
  }
  return -1;
}

std::string error_text(const std::string& text) {
  try {
    parse_scenario(text, "case.json");
  } catch (const ScenarioError& e) {
    return e.what();
  }
  return "";
}

std::string replace(std::string text, const std::string& from, const std::string& to) {
  const auto at = text.find(from);
  EXPECT_NE(at, std::string::npos) << from;
  return text.replace(at, from.size(), to);
}

TEST(Scenario, MinimalDefaults) {
  const Scenario s = parse_scenario(kMinimal);
  EXPECT_TRUE(s.plant.a.isApprox(testing::double_integrator().a));
  EXPECT_EQ(s.plant.sigma_z_blocks[1](0, 0), 0.01);
  EXPECT_FALSE(s.gains.complete());
  EXPECT_THROW(s.gains.gain_set(), InputError);
  EXPECT_EQ(s.detector.ell, 100);
  EXPECT_EQ(s.detector.alpha, 0.05);
  EXPECT_TRUE(s.detector.tau.empty());
  EXPECT_TRUE(s.attack.empty());
  EXPECT_EQ(s.run.windows, 20);
}

TEST(Scenario, PresetCarriesReferenceValues) {
  const Scenario s = platoon_preset();
  const Matrix row = (Matrix(1, 5) << -0.05, 1, 0.05, 0, 0).finished();
  EXPECT_TRUE(s.plant.a.row(1) == row);
  const Matrix k2 = (Matrix(1, 5) << 1, -1, -2, 0.1, 0).finished();
  EXPECT_TRUE(s.gains.k_blocks[1] == k2);
  EXPECT_EQ(s.plant.outputs(0), 1);
  EXPECT_EQ(s.plant.outputs(2), 2);
  EXPECT_TRUE(s.attack.empty());
  EXPECT_NO_THROW(s.plant.validate());
  EXPECT_NO_THROW(s.gains.gain_set().validate(s.plant));
  const AttackScenario attack = platoon_attack();
  ASSERT_NE(attack.sensor(0), nullptr);
  EXPECT_EQ((*attack.sensor(0))(0, 0), 0.5);
  ASSERT_NE(attack.comm(1, 2), nullptr);
  EXPECT_TRUE(attack.comm(1, 2)->isApprox(0.2 * Matrix::Identity(2, 2)));
  EXPECT_EQ(attack.comm(2, 1), nullptr);
}

TEST(Scenario, RoundTripIsExact) {
  Scenario s = platoon_preset();
  s.attack = platoon_attack();
  s.detector.tau = {1.0 / 3.0, -2.5e-17, 123456.789};
  s.detector.coefficient = CoefficientVariant::kDimensionConsistent;
  s.detector.scaling = ScatterScaling::kWindowMean;
  s.run.seed = 18446744073709551615ull;
  s.run.x0 = (Vector(5) << 0.1, 0.2, 1.0 / 7.0, 0, -3).finished();
  const std::string text = write_scenario(s);
  const Scenario back = parse_scenario(text);
  EXPECT_EQ(write_scenario(back), text);
  EXPECT_TRUE(back.plant.a == s.plant.a);
  EXPECT_TRUE(back.gains.l_blocks[2] == s.gains.l_blocks[2]);
  EXPECT_EQ(back.detector.tau, s.detector.tau);
  EXPECT_EQ(back.detector.coefficient, CoefficientVariant::kDimensionConsistent);
  EXPECT_EQ(back.detector.scaling, ScatterScaling::kWindowMean);
  EXPECT_EQ(back.run.seed, s.run.seed);
  EXPECT_TRUE(back.run.x0 == s.run.x0);
  ASSERT_NE(back.attack.comm(1, 2), nullptr);
  EXPECT_TRUE(*back.attack.comm(1, 2) == *s.attack.comm(1, 2));
}

TEST(Scenario, SaveAndLoad) {
  const auto path = std::filesystem::temp_directory_path() / "netwm_scenario_test.json";
  save_scenario(platoon_preset(), path);
  const Scenario s = load_scenario(path);
  EXPECT_EQ(write_scenario(s), write_scenario(platoon_preset()));
  std::filesystem::remove(path);
  EXPECT_THROW(load_scenario(path), InputError);
}

TEST(Scenario, ErrorsNameTheLine) {
  const std::string bad_shape = replace(kMinimal, "[[1, 1], [0, 1]]", "[[1, 1], [0]]");
  EXPECT_EQ(error_line(bad_shape), 3);
  EXPECT_EQ(error_text(bad_shape).rfind("case.json:3: /plant/A", 0), 0u)
      << error_text(bad_shape);

  const std::string bad_cov = replace(kMinimal, "[0.01, 0.01]", "[0.01, -0.01]");
  EXPECT_EQ(error_line(bad_cov), 7);

  const std::string unknown = replace(kMinimal, "\"A\":", "\"bogus\": 1,\n    \"A\":");
  EXPECT_EQ(error_line(unknown), 3);
  EXPECT_NE(error_text(unknown).find("bogus"), std::string::npos);

  const std::string missing = replace(kMinimal, "    \"sigma_W\": [[0.01, 0], [0, 0.01]],\n", "");
  EXPECT_EQ(error_line(missing), 2);
  EXPECT_NE(error_text(missing).find("sigma_W"), std::string::npos);

  EXPECT_EQ(error_line("{\n  \"plant\": [1,\n"), 3);
  EXPECT_EQ(error_line("{\n  \"plant\": {\n    \"A\": [1 2]\n  }\n}\n"), 3);
}

TEST(Scenario, SectionValidation) {
  const std::string with = std::string(kMinimal).substr(0, std::string(kMinimal).rfind('}'));
  auto variant = [&](const std::string& tail) {
    std::string t = with;
    t.insert(t.rfind('}') + 1, ",\n" + tail);
    return t + "}\n";
  };
  EXPECT_NO_THROW(parse_scenario(variant(R"("detector": {"ell": 50, "alpha": 0.1})")));
  EXPECT_EQ(error_line(variant(R"("detector": {"alpha": 1.5})")), 9);
  EXPECT_EQ(error_line(variant(R"("detector": {"coefficient_variant": "nope"})")), 9);
  EXPECT_EQ(error_line(variant(R"("detector": {"tau": [1]})")), 9);
  EXPECT_EQ(error_line(variant(R"("attack": {"sensor": [{"subcontroller": 3, "cov": 1}]})")), 9);
  EXPECT_EQ(error_line(variant(R"("attack": {"comm": [{"receiver": 1, "sender": 1, "cov": 1}]})")), 9);
  EXPECT_EQ(error_line(variant(R"("gains": {"K_blocks": [[[1, 2]]]})")), 9);
  EXPECT_EQ(error_line(variant(R"("run": {"x0": [1, 2, 3]})")), 9);
  EXPECT_EQ(error_line(variant(R"("gains": {"sigma_E_blocks": [1, -1]})")), 9);
  EXPECT_EQ(error_line(variant(R"("attack": {"sensor": [{"subcontroller": 1, "cov": -2}]})")), 9);
  const Scenario s = parse_scenario(variant(R"("attack": {"comm": [{"receiver": 2, "sender": 1, "cov": 0.3}]})"));
  ASSERT_NE(s.attack.comm(1, 0), nullptr);
  EXPECT_EQ((*s.attack.comm(1, 0))(0, 0), 0.3);
}

}  // namespace
}  // namespace netwm
