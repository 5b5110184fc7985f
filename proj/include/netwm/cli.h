#pragma once

// Command-line front end. run_cli is the whole program; the executable only
// forwards argv to it, so tests can drive every subcommand in-process.

#include <cstdint>
#include <iosfwd>
#include <vector>

#include "netwm/scenario.h"
#include "netwm/stats.h"

namespace netwm::cli {

inline constexpr int kExitOk = 0;
inline constexpr int kExitError = 2;
inline constexpr int kExitAttack = 3;

/// Parses argv and runs one subcommand. Returns 0, 2 (any failure) or 3
/// (detect flagged an attack). Never throws.
int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err);

struct ReportRow {
  int subcontroller = 0;  // 0-based
  long window_start = 0;
  double nll = 0.0;
  Decision decision = Decision::kAccept;
};

/// Per-window verdicts of one detection run plus the run-level summary. A
/// subcontroller is flagged when its rejected-window count reaches
/// run_limit, the smallest count a clean loop exceeds with probability at
/// most alpha / kappa.
struct DetectionReport {
  std::vector<ReportRow> rows;  // window-major, then subcontroller
  std::vector<double> tau;
  double alpha = 0.0;
  int windows = 0;
  int run_limit = 0;
  std::vector<int> rejections;
  std::vector<double> rejection_rate;

  bool flagged(int i) const { return rejections.at(i) >= run_limit; }
  bool attack_detected() const;
};

/// Builds the scenario's detector with its stored thresholds. Throws
/// StateError when the scenario is not calibrated.
DetectorModel scenario_detector(const Scenario& scenario);

/// Simulates burn_in + windows * ell steps under the scenario's attack.
DetectionReport run_detection(const Scenario& scenario, std::uint64_t seed);

/// Columns subcontroller, window_start, nll, tau, decision; subcontrollers
/// numbered from 1, reals with 17 significant digits.
void write_report_csv(std::ostream& out, const DetectionReport& report);

}  // namespace netwm::cli
