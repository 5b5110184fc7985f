#pragma once

// Seeded simulation of the networked closed loop
//
//   x_{n+1}      = A x_n + sum_j B_j (K_j xhat_{j,n} + e_{j,n}) + w_n
//   y_{j,n}      = C_j x_n + z_{j,n} + v_{j,n}
//   s_{i,j,n}    = y_{j,n} + nu_{i,j,n}                 (nu_{i,i} = 0)
//   xhat_{i,n+1} = (A+BK+LC) xhat_{i,n} - sum_j L_j s_{i,j,n} + B_i e_{i,n}
//
// with every subcontroller running its own observer on the measurements it
// received.

#include <cstdint>
#include <iosfwd>
#include <map>
#include <optional>
#include <utility>
#include <vector>

#include "netwm/linalg.h"
#include "netwm/model.h"

namespace netwm {

/// Sensor disturbances v_i and channel disturbances nu_{i,j} (value of
/// output j as received by subcontroller i), each either absent or zero-mean
/// Gaussian with a fixed covariance. A subcontroller has no channel to itself,
/// so nu_{i,i} cannot be configured.
class AttackScenario {
 public:
  void set_sensor(int i, Matrix cov);
  /// Throws InputError when receiver == sender.
  void set_comm(int receiver, int sender, Matrix cov);

  const Matrix* sensor(int i) const;
  const Matrix* comm(int receiver, int sender) const;

  const std::map<int, Matrix>& sensor_attacks() const { return sensor_; }
  const std::map<std::pair<int, int>, Matrix>& comm_attacks() const { return comm_; }
  bool empty() const { return sensor_.empty() && comm_.empty(); }

  /// Checks indices and covariance shapes against the plant.
  void validate(const PlantModel& model) const;

 private:
  std::map<int, Matrix> sensor_;
  std::map<std::pair<int, int>, Matrix> comm_;
};

/// Seed plus the fixed stream layout: every noise source draws from its own
/// counter stream, so adding or removing one source leaves the others intact.
struct SeededNoise {
  std::uint64_t seed = 0;

  static std::uint64_t process_stream() { return 0; }
  static std::uint64_t measurement_stream(int kappa, int j) { (void)kappa; return 1 + j; }
  static std::uint64_t watermark_stream(int kappa, int i) { return 1 + kappa + i; }
  static std::uint64_t sensor_attack_stream(int kappa, int i) { return 1 + 2 * kappa + i; }
  static std::uint64_t comm_attack_stream(int kappa, int i, int j) {
    return 1 + 3 * kappa + static_cast<std::uint64_t>(i) * kappa + j;
  }
};

struct SimulationOptions {
  SeededNoise noise;
  /// Defaults to zero when empty.
  Vector x0;
  /// Defaults to zero when empty; otherwise one p-vector per subcontroller.
  std::vector<Vector> xhat0;
  /// Refuse gains that fail verify_gain_triple.
  bool require_stable_gains = true;
  /// |x| or |xhat_i| beyond this raises DivergenceError.
  double divergence_limit = 1e12;
};

/// Every quantity of one time step. Vectors indexed [i] are per
/// subcontroller; s and nu are indexed [receiver][sender].
struct StepRecord {
  long n = 0;
  Vector x;
  std::vector<Vector> xhat;
  std::vector<Vector> y;
  std::vector<std::vector<Vector>> s;
  std::vector<Vector> e;
  std::vector<Vector> u;
  Vector w;
  std::vector<Vector> z;
  std::vector<Vector> v;
  std::vector<std::vector<Vector>> nu;
};

/// Steps the closed loop one sample at a time. Used directly by streaming
/// consumers (calibration, Monte Carlo checks, CSV export) so long runs never
/// hold the whole trajectory in memory.
class Simulator {
 public:
  Simulator(const PlantModel& model, const GainSet& gains, const AttackScenario& attack,
            const SimulationOptions& options);

  /// Draws the noise of the current time n, records everything at time n and
  /// advances the state to n+1.
  const StepRecord& step();

  long time() const { return n_; }
  const PlantModel& model() const { return model_; }
  const GainSet& gains() const { return gains_; }

 private:
  void draw(std::uint64_t stream, const Matrix& factor, Vector& out);

  PlantModel model_;
  GainSet gains_;
  Matrix observer_;  // A + BK + LC
  Matrix w_factor_;
  std::vector<Matrix> z_factor_;
  std::vector<Matrix> e_factor_;
  std::vector<std::optional<Matrix>> v_factor_;
  std::vector<std::vector<std::optional<Matrix>>> nu_factor_;
  SimulationOptions options_;
  long n_ = 0;
  Vector x_;
  std::vector<Vector> xhat_;
  StepRecord rec_;
  Vector scratch_;
};

/// Full trajectory, one column per time step.
struct SimulationTrace {
  long steps = 0;
  Matrix x;                               // p x N
  std::vector<Matrix> xhat;               // [i] p x N
  std::vector<Matrix> y;                  // [j] m_j x N
  std::vector<std::vector<Matrix>> s;     // [i][j] m_j x N
  std::vector<Matrix> e;                  // [i] q_i x N
  std::vector<Matrix> u;                  // [i] q_i x N
  Matrix w;                               // p x N
  std::vector<Matrix> z;                  // [j] m_j x N
  std::vector<Matrix> v;                  // [j] m_j x N
  std::vector<std::vector<Matrix>> nu;    // [i][j] m_j x N

  void append(const StepRecord& rec);
  void reserve(const PlantModel& model, long steps);
};

SimulationTrace simulate(const PlantModel& model, const GainSet& gains,
                         const AttackScenario& attack, long steps,
                         const SimulationOptions& options);

/// Delta_n = [xhat_{1,n} - x_n; ...; xhat_{kappa,n} - x_n], one column per n.
Matrix derived_delta(const SimulationTrace& trace);

/// Uncentered second moment (1/N) sum s_n s_n^T of the columns of samples.
/// Throws InputError for fewer than two samples.
Matrix empirical_covariance(const Matrix& samples);

/// Streaming uncentered moment accumulator, E[a b^T] over added pairs.
class MomentAccumulator {
 public:
  MomentAccumulator(Eigen::Index rows, Eigen::Index cols);
  /// Adds a b^T; a has `rows` entries and b has `cols`.
  void add(const Vector& a, const Vector& b);
  void add(const Vector& a) { add(a, a); }
  long count() const { return count_; }
  Matrix mean() const;

 private:
  Eigen::Index rows_, cols_;
  // Column-major rows x cols running sum.
  std::vector<double> sum_;
  long count_ = 0;
};

/// CSV export of a trajectory: header then one row per step with columns
/// x[k], xhat{i}[k], y{i}[k], s{i}{j}[k], e{i}[k], u{i}[k] (subcontrollers
/// numbered from 1), values printed with 17 significant digits.
class TraceCsvWriter {
 public:
  TraceCsvWriter(std::ostream& out, const PlantModel& model);
  void write(const StepRecord& rec);

 private:
  std::ostream& out_;
};

void write_trace_csv(std::ostream& out, const PlantModel& model,
                     const SimulationTrace& trace);

}  // namespace netwm
