#pragma once

// Scenario documents: plant, gains, detector settings, attack and run
// parameters in one JSON file. Matrices are arrays of rows; a bare number is
// accepted for a 1x1 matrix. Subcontrollers are numbered from 1 in files.

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

#include "netwm/errors.h"
#include "netwm/linalg.h"
#include "netwm/model.h"
#include "netwm/sim.h"
#include "netwm/stats.h"

namespace netwm {

/// Malformed or invalid scenario document. line() is 1-based, 0 if unknown.
class ScenarioError : public InputError {
 public:
  ScenarioError(const std::string& what, int line) : InputError(what), line_(line) {}
  int line() const { return line_; }

 private:
  int line_;
};

/// Gains as stored in a file; any of the three lists may be absent (empty).
struct ScenarioGains {
  std::vector<Matrix> k_blocks;
  std::vector<Matrix> l_blocks;
  std::vector<Matrix> sigma_e_blocks;

  bool complete() const {
    return !k_blocks.empty() && !l_blocks.empty() && !sigma_e_blocks.empty();
  }
  /// Throws InputError naming the first missing list.
  GainSet gain_set() const;
};

struct DetectorConfig {
  int ell = 100;
  double alpha = 0.05;
  int calibration_windows = 2000;
  CoefficientVariant coefficient = CoefficientVariant::kOwnOutputs;
  ScatterScaling scaling = ScatterScaling::kWindowSum;
  /// Calibrated thresholds, one per subcontroller; empty if uncalibrated.
  std::vector<double> tau;

  DetectorOptions options() const { return {ell, alpha, coefficient, scaling}; }
};

struct RunConfig {
  long steps = 10000;
  long burn_in = 500;
  int windows = 20;
  std::uint64_t seed = 1;
  Vector x0;                  // empty means zero
  std::vector<Vector> xhat0;  // empty means zero
};

struct Scenario {
  PlantModel plant;
  ScenarioGains gains;
  DetectorConfig detector;
  AttackScenario attack;
  RunConfig run;
};

/// Parses and validates a scenario. Errors carry the line of the offending
/// value and read "<source>:<line>: <json pointer>: <problem>".
Scenario parse_scenario(std::string_view text, const std::string& source = "<scenario>");
Scenario load_scenario(const std::filesystem::path& path);

/// Serializes with every number printed so that it parses back exactly.
std::string write_scenario(const Scenario& scenario);
void save_scenario(const Scenario& scenario, const std::filesystem::path& path);

/// Three-car platoon: 5-state error kinematics at a 0.05 s step with the
/// reference gains, noise levels and detector settings, and no attack.
Scenario platoon_preset();

/// The platoon attack: variance 0.5 on subcontroller 1's sensor and
/// covariance 0.2 I on the channel carrying output 3 to subcontroller 2.
AttackScenario platoon_attack();

}  // namespace netwm
