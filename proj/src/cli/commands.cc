#include "netwm/cli.h"

#include <cstdio>
#include <fstream>
#include <iostream>
#include <optional>
#include <sstream>
#include <string>

#include <CLI11.hpp>

#include "netwm/design.h"
#include "netwm/errors.h"
#include "netwm/random.h"
#include "netwm/sim.h"

namespace netwm::cli {
namespace {

// Salt separating held-out null windows from the calibration pool.
constexpr std::uint64_t kHeldOutSalt = 0x686f6c646f7574ULL;

std::string format_real(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

struct GlobalFlags {
  std::optional<std::uint64_t> seed;
  std::string scenario;
  std::string out;
};

Scenario require_scenario(const GlobalFlags& g) {
  if (g.scenario.empty()) throw InputError("--scenario <path> is required");
  return load_scenario(g.scenario);
}

// Writes to --out when given, else to `fallback`.
template <typename F>
void emit(const std::string& path, std::ostream& fallback, F&& write) {
  if (path.empty()) {
    write(fallback);
    return;
  }
  std::ofstream file(path, std::ios::binary | std::ios::trunc);
  if (!file) throw InputError("cannot open output file " + path);
  write(file);
  if (!file) throw InputError("failed writing " + path);
}

void print_gain_report(std::ostream& out, const GainReport& r) {
  out << "rho(A+BK)    = " << format_real(r.rho_bk) << '\n'
      << "rho(A+LC)    = " << format_real(r.rho_lc) << '\n'
      << "rho(A+BK+LC) = " << format_real(r.rho_bklc) << '\n'
      << "gains " << (r.ok ? "verified" : "NOT stable") << '\n';
}

LagTable scenario_lags(const Scenario& s, const GainSet& gains) {
  return compute_watermark_lags(s.plant.a, s.plant.b_blocks, s.plant.c_blocks,
                                gains.stacked_k());
}

int cmd_platoon_preset(const GlobalFlags& g, bool with_attack, std::ostream& out) {
  Scenario s = platoon_preset();
  if (with_attack) s.attack = platoon_attack();
  if (g.seed) s.run.seed = *g.seed;
  emit(g.out, out, [&](std::ostream& o) { o << write_scenario(s); });
  return kExitOk;
}

int cmd_design(const GlobalFlags& g, const std::string& method, double lambda,
               double pole_radius, int attempts, std::ostream& out) {
  Scenario s = require_scenario(g);
  const PlantModel& plant = s.plant;
  Matrix k;
  if (method == "square") {
    const Matrix b = plant.stacked_b();
    if (b.rows() != b.cols()) {
      throw SynthesisError("design --method square: stacked B is " +
                           std::to_string(b.rows()) + "x" + std::to_string(b.cols()) +
                           ", not square");
    }
    k = design_feedback_square(plant.a, b, lambda);
  } else {
    k = design_feedback_shared_range(plant.a, plant.b_blocks, pole_radius).k;
  }
  const std::uint64_t seed = g.seed.value_or(s.run.seed);
  const Matrix l = search_observer_gain(plant, k, attempts, seed);

  s.gains.k_blocks = split_rows(k, plant.b_blocks);
  s.gains.l_blocks = split_cols(l, plant.c_blocks);
  if (s.gains.sigma_e_blocks.empty()) {
    for (int i = 0; i < plant.subcontrollers(); ++i) {
      s.gains.sigma_e_blocks.push_back(Matrix::Identity(plant.inputs(i), plant.inputs(i)));
    }
  }
  const GainSet gains = s.gains.gain_set();
  const LagTable lags = scenario_lags(s, gains);
  s.detector.tau.clear();

  const GainReport report = verify_gain_triple(plant, gains);
  print_gain_report(out, report);
  out << "watermark lags (row = subcontroller, column = output):\n";
  for (int i = 0; i < lags.size(); ++i) {
    out << ' ';
    for (int j = 0; j < lags.size(); ++j) out << ' ' << lags.at(i, j);
    out << '\n';
  }
  save_scenario(s, g.out.empty() ? g.scenario : g.out);
  return kExitOk;
}

int cmd_calibrate(const GlobalFlags& g, std::optional<int> windows, std::ostream& out) {
  Scenario s = require_scenario(g);
  const GainSet gains = s.gains.gain_set();
  const GainReport report = verify_gain_triple(s.plant, gains);
  if (!report.ok) throw StabilityError("calibrate: gains do not pass verification");

  DetectorModel det =
      build_detector(s.plant, gains, scenario_lags(s, gains), s.detector.options());
  const int n = windows.value_or(s.detector.calibration_windows);
  const std::uint64_t seed = g.seed.value_or(s.run.seed);
  CalibrationOptions opts;
  opts.burn_in = s.run.burn_in;
  const Calibration cal = calibrate_threshold(s.plant, gains, det, n, seed, opts);
  det.tau = cal.tau;
  const std::vector<double> rates =
      null_rejection_rate(s.plant, gains, det, n, derive_seed(seed, kHeldOutSalt), opts);

  s.detector.tau = cal.tau;
  s.detector.calibration_windows = n;
  out << "calibrated on " << n << " null windows of length " << det.window_len
      << " (alpha = " << det.alpha << ")\n";
  for (int i = 0; i < det.subcontrollers(); ++i) {
    out << "subcontroller " << i + 1 << ": tau = " << format_real(cal.tau[i])
        << ", held-out null rejection rate = " << rates[i] << '\n';
  }
  save_scenario(s, g.out.empty() ? g.scenario : g.out);
  return kExitOk;
}

int cmd_detect(const GlobalFlags& g, std::ostream& out, std::ostream& err) {
  const Scenario s = require_scenario(g);
  const DetectionReport report = run_detection(s, g.seed.value_or(s.run.seed));
  emit(g.out, out, [&](std::ostream& o) { write_report_csv(o, report); });
  std::ostream& summary = g.out.empty() ? err : out;
  for (std::size_t i = 0; i < report.tau.size(); ++i) {
    const int ii = static_cast<int>(i);
    summary << "subcontroller " << i + 1 << ": " << report.rejections[i] << "/"
            << report.windows << " windows rejected (rate "
            << report.rejection_rate[i] << ")"
            << (report.flagged(ii) ? " -> ATTACK" : "") << '\n';
  }
  summary << "run-level limit: " << report.run_limit << " rejected windows\n";
  return report.attack_detected() ? kExitAttack : kExitOk;
}

int cmd_simulate(const GlobalFlags& g, std::optional<long> steps, std::ostream& out) {
  const Scenario s = require_scenario(g);
  const GainSet gains = s.gains.gain_set();
  SimulationOptions opts;
  opts.noise.seed = g.seed.value_or(s.run.seed);
  opts.x0 = s.run.x0;
  opts.xhat0 = s.run.xhat0;
  Simulator sim(s.plant, gains, s.attack, opts);
  const long n = steps.value_or(s.run.steps);
  emit(g.out, out, [&](std::ostream& o) {
    TraceCsvWriter writer(o, s.plant);
    for (long k = 0; k < n; ++k) writer.write(sim.step());
  });
  return kExitOk;
}

}  // namespace

bool DetectionReport::attack_detected() const {
  for (std::size_t i = 0; i < rejections.size(); ++i) {
    if (flagged(static_cast<int>(i))) return true;
  }
  return false;
}

DetectorModel scenario_detector(const Scenario& scenario) {
  const GainSet gains = scenario.gains.gain_set();
  DetectorModel det = build_detector(scenario.plant, gains, scenario_lags(scenario, gains),
                                     scenario.detector.options());
  if (static_cast<int>(scenario.detector.tau.size()) != det.subcontrollers()) {
    throw StateError("detector is not calibrated; run calibrate first");
  }
  det.tau = scenario.detector.tau;
  return det;
}

DetectionReport run_detection(const Scenario& scenario, std::uint64_t seed) {
  const GainSet gains = scenario.gains.gain_set();
  const DetectorModel det = scenario_detector(scenario);
  WindowRunOptions opts;
  opts.burn_in = scenario.run.burn_in;
  opts.seed = seed;
  opts.x0 = scenario.run.x0;
  opts.xhat0 = scenario.run.xhat0;
  const int windows = scenario.run.windows;
  const auto stats =
      run_window_statistics(scenario.plant, gains, scenario.attack, det, windows, opts);

  DetectionReport report;
  const int kappa = det.subcontrollers();
  report.tau = det.tau;
  report.alpha = det.alpha;
  report.windows = windows;
  report.run_limit = run_rejection_limit(windows, det.alpha, kappa);
  report.rejections.assign(kappa, 0);
  for (int w = 0; w < windows; ++w) {
    for (int i = 0; i < kappa; ++i) {
      ReportRow row;
      row.subcontroller = i;
      row.window_start = opts.burn_in + static_cast<long>(w) * det.window_len;
      row.nll = stats[i][w];
      row.decision = decide(row.nll, det, i);
      report.rejections[i] += row.decision == Decision::kReject;
      report.rows.push_back(row);
    }
  }
  for (int i = 0; i < kappa; ++i) {
    report.rejection_rate.push_back(static_cast<double>(report.rejections[i]) / windows);
  }
  return report;
}

void write_report_csv(std::ostream& out, const DetectionReport& report) {
  out << "subcontroller,window_start,nll,tau,decision\n";
  for (const auto& row : report.rows) {
    out << row.subcontroller + 1 << ',' << row.window_start << ',' << format_real(row.nll)
        << ',' << format_real(report.tau.at(row.subcontroller)) << ','
        << (row.decision == Decision::kReject ? "reject" : "accept") << '\n';
  }
}

int run_cli(int argc, const char* const* argv, std::ostream& out, std::ostream& err) {
  CLI::App app{"Watermark-based attack detection for networked LTI control loops", "netwm"};
  app.require_subcommand(1);
  app.fallthrough();

  GlobalFlags g;
  std::uint64_t seed_value = 0;
  auto* seed_opt = app.add_option("--seed", seed_value, "Random seed (overrides run.seed)");
  app.add_option("--scenario", g.scenario, "Scenario JSON file");
  app.add_option("--out", g.out, "Output path");

  bool with_attack = false;
  auto* preset = app.add_subcommand("platoon-preset", "Write the three-car platoon scenario");
  preset->add_flag("--with-attack", with_attack,
                   "Include the sensor and channel attack of the platoon experiment");

  std::string method = "square";
  double lambda = 0.5;
  double pole_radius = 0.5;
  int attempts = 200;
  auto* design = app.add_subcommand("design", "Synthesize K and L and store them");
  design->add_option("--method", method, "square | shared-range")
      ->check(CLI::IsMember({"square", "shared-range"}));
  design->add_option("--lambda", lambda, "Closed-loop eigenvalue modulus for --method square");
  design->add_option("--pole-radius", pole_radius,
                     "Pole location for --method shared-range");
  design->add_option("--attempts", attempts, "Observer search attempts")
      ->check(CLI::PositiveNumber);

  int windows_value = 0;
  auto* calibrate = app.add_subcommand("calibrate", "Calibrate detector thresholds");
  auto* windows_opt =
      calibrate->add_option("--windows", windows_value, "Number of null windows");

  auto* detect = app.add_subcommand("detect", "Run detection and write the report CSV");

  long steps_value = 0;
  auto* simulate = app.add_subcommand("simulate", "Simulate and write the trace CSV");
  auto* steps_opt = simulate->add_option("--steps", steps_value, "Number of time steps")
                        ->check(CLI::NonNegativeNumber);

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e, out, err);
    return code == 0 ? kExitOk : kExitError;
  }
  if (*seed_opt) g.seed = seed_value;

  try {
    if (*preset) return cmd_platoon_preset(g, with_attack, out);
    if (*design) return cmd_design(g, method, lambda, pole_radius, attempts, out);
    if (*calibrate) {
      return cmd_calibrate(
          g, *windows_opt ? std::optional<int>(windows_value) : std::nullopt, out);
    }
    if (*detect) return cmd_detect(g, out, err);
    if (*simulate) {
      return cmd_simulate(
          g, *steps_opt ? std::optional<long>(steps_value) : std::nullopt, out);
    }
  } catch (const std::exception& e) {
    err << "error: " << e.what() << '\n';
    return kExitError;
  }
  return kExitError;
}

}  // namespace netwm::cli
