#pragma once

// Watermark detector. Under no attack the observer errors Delta = [delta_1;
// ...; delta_kappa] (delta_i = xhat_i - x) obey
//
//   Delta_{n+1} = Abar Delta_n + (blkdiag(B_i) - 1 (x) B) E_n
//                 - 1 (x) (w_n + sum_j L_j z_{j,n}),
//   Abar = I (x) (A+BK+LC) - 1 (x) [B_1 K_1, ..., B_kappa K_kappa],
//
// from which the stationary second moments of the test vectors
//   psi_{n,i,j} = [e_{i, n-k'_{ij}-1}; C_j xhat_{i,n} - s_{i,j,n}]
// follow in closed form. Windowed scatter matrices of psi are then scored
// with a Wishart negative log-likelihood and compared with a threshold
// calibrated by simulation.

#include <cstdint>
#include <vector>

#include "netwm/linalg.h"
#include "netwm/model.h"
#include "netwm/sim.h"

namespace netwm {

/// Abar, the kappa p x kappa p transition of the stacked observer errors.
Matrix delta_dynamics_matrix(const PlantModel& model, const GainSet& gains);

/// Exact covariance of the driving noise of Delta, including the correlation
/// between the blkdiag(B_i) E_n and 1 (x) B E_n terms.
Matrix delta_noise_covariance(const PlantModel& model, const GainSet& gains);

struct DeltaStationaryCov {
  Matrix sigma_delta;            // kappa p x kappa p
  std::vector<Matrix> d_blocks;  // diagonal p x p blocks D_i
};

/// Solves Sigma = Abar Sigma Abar^T + Q_noise. Throws StabilityError when Abar
/// is not Schur stable.
DeltaStationaryCov stationary_delta_covariance(const PlantModel& model,
                                               const GainSet& gains,
                                               const Tolerance& tol = {});

struct ExcitationCrossCov {
  int i = 0;
  int k = 0;
  Matrix sigma;                  // E[Delta_n e_{i,n-k-1}^T], kappa p x q_i
  std::vector<Matrix> q_blocks;  // its kappa vertical p x q_i blocks
};

/// Abar^k (f_i (x) B_i Sigma_E,i - 1 (x) B_i Sigma_E,i).
ExcitationCrossCov delta_excitation_cross_covariance(const PlantModel& model,
                                                     const GainSet& gains, int i, int k);

/// Which subcontroller's output count enters the log-det coefficient
/// (1 - l + m + q_i): the measuring subcontroller's own m_i, or m_j, the
/// dimension of the second block of psi_{i,j}.
enum class CoefficientVariant { kOwnOutputs, kDimensionConsistent };

/// What the likelihood is evaluated at. The window sum sum psi psi^T is the
/// Wishart(l, R) distributed quantity; the window mean is that divided by l.
enum class ScatterScaling { kWindowSum, kWindowMean };

struct DetectorOptions {
  int window_len = 100;
  double alpha = 0.05;
  CoefficientVariant coefficient = CoefficientVariant::kOwnOutputs;
  ScatterScaling scaling = ScatterScaling::kWindowSum;
};

struct DetectorModel {
  LagTable lags;
  /// r[i][j]: stationary second moment of psi_{n,i,j}, (q_i+m_j) square.
  std::vector<std::vector<Matrix>> r;
  std::vector<int> q;  // input count per subcontroller
  std::vector<int> m;  // output count per subcontroller
  int window_len = 100;
  double alpha = 0.05;
  CoefficientVariant coefficient = CoefficientVariant::kOwnOutputs;
  ScatterScaling scaling = ScatterScaling::kWindowSum;
  /// One threshold per subcontroller once calibrated, empty before.
  std::vector<double> tau;

  int subcontrollers() const { return static_cast<int>(q.size()); }
  bool calibrated() const { return static_cast<int>(tau.size()) == subcontrollers(); }
  /// Log-det coefficient for the (i, j) term.
  double log_det_coefficient(int i, int j) const;
};

/// Assembles R_{i,j} = [Sigma_E,i, (C_j Q)^T; C_j Q, C_j D_i C_j^T + Sigma_Z,j]
/// where Q is the delta_i block of Sigma_{Delta,i,k'_{ij}} (psi's residual
/// equals C_j delta_i - z_j). Throws InputError for l < q_i + m_j and
/// ModelError for a non-positive-definite R.
DetectorModel build_detector(const PlantModel& model, const GainSet& gains,
                             const LagTable& lags, const DetectorOptions& options,
                             const Tolerance& tol = {});

/// psi_{n,i,j} read from a recorded trace. Throws RangeError when
/// n - k'_{ij} - 1 < 0 or n is past the end of the trace.
Vector psi_vector(const SimulationTrace& trace, const PlantModel& model, long n, int i,
                  int j, const LagTable& lags);

/// (1/l) sum_{n=start}^{start+l-1} psi psi^T, accumulated in ascending n.
Matrix window_scatter(const SimulationTrace& trace, const PlantModel& model, long start,
                      int len, int i, int j, const LagTable& lags);

/// sum_j c_ij log det S_j + sum_j tr(R_ij^{-1} S_j) for subcontroller i, where
/// scatters[j] is S_{n,i,j}. Throws DegenerateWindowError for a singular S
/// and ModelError for a singular R.
double wishart_nll(const std::vector<Matrix>& scatters, const DetectorModel& detector,
                   int i);

/// Likelihood of the window [start, start+l) of a recorded trace, with the
/// detector's scatter scaling applied.
double window_statistic(const SimulationTrace& trace, const PlantModel& model,
                        long start, int i, const DetectorModel& detector);

enum class Decision { kAccept, kReject };

/// Reject iff nll > tau_i. Throws StateError for an uncalibrated detector.
Decision decide(double nll, const DetectorModel& detector, int i);

/// Consumes simulator steps and emits one likelihood per subcontroller for
/// every complete window. Windows are disjoint, start at first_window and
/// have the detector's length. Produces exactly the values window_statistic
/// would compute on the recorded trace.
class WindowStatisticStream {
 public:
  WindowStatisticStream(const PlantModel& model, const DetectorModel& detector,
                        long first_window);

  /// Returns true when rec closed a window; the values are then in last().
  bool push(const StepRecord& rec);
  /// Likelihood per subcontroller for the most recently closed window.
  const std::vector<double>& last() const { return last_; }
  long last_window_start() const { return last_start_; }

 private:
  const PlantModel& model_;
  const DetectorModel& detector_;
  long first_window_;
  std::vector<std::vector<Vector>> e_history_;  // [i] ring buffer
  std::vector<std::vector<std::vector<double>>> sums_;  // [i][j] d x d
  std::vector<double> last_;
  long last_start_ = -1;
  Vector psi_;
};

/// Empirical (1 - alpha) quantile: the ceil((1-alpha) N)-th smallest sample.
double empirical_quantile(std::vector<double> samples, double level);

struct WindowRunOptions {
  long burn_in = 500;
  std::uint64_t seed = 0;
  Vector x0;
  std::vector<Vector> xhat0;
};

/// Simulates burn_in + windows * l steps and returns, per subcontroller, the
/// likelihood of each window in time order.
std::vector<std::vector<double>> run_window_statistics(
    const PlantModel& model, const GainSet& gains, const AttackScenario& attack,
    const DetectorModel& detector, int windows, const WindowRunOptions& options);

struct CalibrationOptions {
  long burn_in = 500;
  /// Windows per independently seeded simulation chunk; chunks may run
  /// concurrently and are pooled in chunk order.
  int chunk_windows = 250;
  /// 0 selects std::thread::hardware_concurrency().
  unsigned threads = 0;
};

struct Calibration {
  std::vector<double> tau;                    // per subcontroller
  std::vector<std::vector<double>> samples;   // null likelihoods per subcontroller
};

/// Null-hypothesis threshold per subcontroller: simulates the un-attacked
/// loop, scores `windows` disjoint windows and takes the empirical
/// (1 - alpha) quantile. Deterministic given seed. Throws InputError for
/// fewer than 100 windows.
Calibration calibrate_threshold(const PlantModel& model, const GainSet& gains,
                                const DetectorModel& detector, int windows,
                                std::uint64_t seed, const CalibrationOptions& options = {});

/// Fraction of freshly simulated null windows rejected by the calibrated
/// detector, per subcontroller. Uses the same chunking as calibration.
std::vector<double> null_rejection_rate(const PlantModel& model, const GainSet& gains,
                                        const DetectorModel& detector, int windows,
                                        std::uint64_t seed,
                                        const CalibrationOptions& options = {});

/// Smallest count c with P(Binomial(windows, alpha) >= c) <= alpha / family,
/// or windows + 1 when even all windows rejecting is not that unlikely.
int run_rejection_limit(int windows, double alpha, int family);

}  // namespace netwm
