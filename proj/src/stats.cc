#include "netwm/stats.h"

#include <algorithm>
#include <cmath>
#include <future>
#include <string>
#include <thread>

#include "netwm/design.h"
#include "netwm/errors.h"
#include "netwm/kernels.h"
#include "netwm/random.h"

namespace netwm {
namespace {

void require_subcontroller(int i, int kappa, const char* what) {
  if (i < 0 || i >= kappa) {
    throw RangeError(std::string(what) + ": subcontroller index " + std::to_string(i) +
                     " out of range");
  }
}

// [e; C xhat - s], shared by the trace and streaming paths so both round the
// same way.
void fill_psi(const Vector& e, const Matrix& c, const Vector& xhat, const Vector& s,
              Vector& out) {
  out.resize(e.size() + s.size());
  out.head(e.size()) = e;
  out.tail(s.size()).noalias() = c * xhat;
  out.tail(s.size()) -= s;
}

void accumulate(const Vector& psi, std::vector<double>& sum) {
  const std::span<const double> v(psi.data(), static_cast<std::size_t>(psi.size()));
  kernels::add_outer(v, v, sum);
}

Matrix scatter_from_sum(const std::vector<double>& sum, Eigen::Index d, double divisor) {
  Matrix s = Eigen::Map<const Matrix>(sum.data(), d, d);
  if (divisor != 1.0) s /= divisor;
  return s;
}

double scaling_divisor(const DetectorModel& detector) {
  return detector.scaling == ScatterScaling::kWindowMean
             ? static_cast<double>(detector.window_len)
             : 1.0;
}

}  // namespace

Matrix delta_dynamics_matrix(const PlantModel& model, const GainSet& gains) {
  model.validate();
  gains.validate(model);
  const int kappa = model.subcontrollers();
  const Eigen::Index p = model.a.rows();
  const Matrix f = model.a + model.stacked_b() * gains.stacked_k() +
                   gains.stacked_l() * model.stacked_c();
  Matrix coupling(p, kappa * p);
  for (int j = 0; j < kappa; ++j) {
    coupling.middleCols(j * p, p) = model.b_blocks[j] * gains.k_blocks[j];
  }
  return kron(Matrix::Identity(kappa, kappa), f) -
         kron(Matrix::Ones(kappa, 1), coupling);
}

Matrix delta_noise_covariance(const PlantModel& model, const GainSet& gains) {
  model.validate();
  gains.validate(model);
  const int kappa = model.subcontrollers();
  const Matrix b = model.stacked_b();
  const Matrix m_e = block_diagonal(model.b_blocks) - kron(Matrix::Ones(kappa, 1), b);
  const Matrix sigma_e = block_diagonal(gains.sigma_e_blocks);

  Matrix common = model.sigma_w;
  for (int j = 0; j < kappa; ++j) {
    common += gains.l_blocks[j] * model.sigma_z_blocks[j] * gains.l_blocks[j].transpose();
  }
  Matrix q = m_e * sigma_e * m_e.transpose() + kron(Matrix::Ones(kappa, kappa), common);
  return 0.5 * (q + q.transpose());
}

DeltaStationaryCov stationary_delta_covariance(const PlantModel& model,
                                               const GainSet& gains,
                                               const Tolerance& tol) {
  const Matrix abar = delta_dynamics_matrix(model, gains);
  const Matrix q = delta_noise_covariance(model, gains);
  DeltaStationaryCov out;
  out.sigma_delta = solve_discrete_lyapunov(abar, q, tol);
  const Eigen::Index p = model.a.rows();
  for (int i = 0; i < model.subcontrollers(); ++i) {
    out.d_blocks.push_back(out.sigma_delta.block(i * p, i * p, p, p));
  }
  return out;
}

ExcitationCrossCov delta_excitation_cross_covariance(const PlantModel& model,
                                                     const GainSet& gains, int i, int k) {
  const int kappa = model.subcontrollers();
  require_subcontroller(i, kappa, "delta_excitation_cross_covariance");
  if (k < 0) throw InputError("delta_excitation_cross_covariance: negative lag");
  const Eigen::Index p = model.a.rows();
  const Matrix abar = delta_dynamics_matrix(model, gains);
  const Matrix bs = model.b_blocks[i] * gains.sigma_e_blocks[i];

  Matrix base = -kron(Matrix::Ones(kappa, 1), bs);
  base.middleRows(i * p, p) += bs;
  for (int n = 0; n < k; ++n) base = abar * base;

  ExcitationCrossCov out;
  out.i = i;
  out.k = k;
  out.sigma = base;
  for (int r = 0; r < kappa; ++r) out.q_blocks.push_back(base.middleRows(r * p, p));
  return out;
}

double DetectorModel::log_det_coefficient(int i, int j) const {
  const int m_used = coefficient == CoefficientVariant::kOwnOutputs ? m.at(i) : m.at(j);
  return 1.0 - window_len + m_used + q.at(i);
}

DetectorModel build_detector(const PlantModel& model, const GainSet& gains,
                             const LagTable& lags, const DetectorOptions& options,
                             const Tolerance& tol) {
  const int kappa = model.subcontrollers();
  if (lags.size() != kappa) {
    throw DimensionError("build_detector: lag table does not match the subcontroller count");
  }
  if (!(options.alpha > 0.0 && options.alpha < 1.0)) {
    throw InputError("build_detector: alpha must lie in (0, 1)");
  }
  DetectorModel det;
  det.lags = lags;
  det.window_len = options.window_len;
  det.alpha = options.alpha;
  det.coefficient = options.coefficient;
  det.scaling = options.scaling;
  for (int i = 0; i < kappa; ++i) {
    det.q.push_back(model.inputs(i));
    det.m.push_back(model.outputs(i));
  }
  for (int i = 0; i < kappa; ++i) {
    for (int j = 0; j < kappa; ++j) {
      if (lags.at(i, j) < 0 || lags.at(i, j) > model.states() - 1) {
        throw InputError("build_detector: lag out of range for pair (" +
                         std::to_string(i + 1) + ", " + std::to_string(j + 1) + ")");
      }
      if (options.window_len < det.q[i] + det.m[j]) {
        throw InputError("build_detector: window length " +
                         std::to_string(options.window_len) + " is below q_i + m_j = " +
                         std::to_string(det.q[i] + det.m[j]));
      }
    }
  }

  const DeltaStationaryCov stationary = stationary_delta_covariance(model, gains, tol);
  det.r.assign(kappa, {});
  for (int i = 0; i < kappa; ++i) {
    const int q = det.q[i];
    for (int j = 0; j < kappa; ++j) {
      const int m = det.m[j];
      const Matrix& c = model.c_blocks[j];
      const Matrix off =
          c * delta_excitation_cross_covariance(model, gains, i, lags.at(i, j)).q_blocks[i];
      Matrix r(q + m, q + m);
      r.topLeftCorner(q, q) = gains.sigma_e_blocks[i];
      r.bottomLeftCorner(m, q) = off;
      r.topRightCorner(q, m) = off.transpose();
      r.bottomRightCorner(m, m) =
          c * stationary.d_blocks[i] * c.transpose() + model.sigma_z_blocks[j];
      r = 0.5 * (r + r.transpose()).eval();
      if (!(min_symmetric_eigenvalue(r) > 0.0)) {
        throw ModelError("build_detector: R for pair (" + std::to_string(i + 1) + ", " +
                         std::to_string(j + 1) + ") is not positive definite");
      }
      det.r[i].push_back(std::move(r));
    }
  }
  return det;
}

Vector psi_vector(const SimulationTrace& trace, const PlantModel& model, long n, int i,
                  int j, const LagTable& lags) {
  const int kappa = model.subcontrollers();
  require_subcontroller(i, kappa, "psi_vector");
  require_subcontroller(j, kappa, "psi_vector");
  const long back = n - lags.at(i, j) - 1;
  if (back < 0) {
    throw RangeError("psi_vector: time " + std::to_string(n) +
                     " precedes the first usable excitation");
  }
  if (n >= trace.steps) {
    throw RangeError("psi_vector: time " + std::to_string(n) + " is past the trace end");
  }
  const Vector e = trace.e[i].col(back);
  const Vector xhat = trace.xhat[i].col(n);
  const Vector s = trace.s[i][j].col(n);
  Vector psi;
  fill_psi(e, model.c_blocks[j], xhat, s, psi);
  return psi;
}

Matrix window_scatter(const SimulationTrace& trace, const PlantModel& model, long start,
                      int len, int i, int j, const LagTable& lags) {
  if (len < 1) throw InputError("window_scatter: window length must be positive");
  const Eigen::Index d = model.inputs(i) + model.outputs(j);
  std::vector<double> sum(static_cast<std::size_t>(d * d), 0.0);
  for (long n = start; n < start + len; ++n) {
    accumulate(psi_vector(trace, model, n, i, j, lags), sum);
  }
  return scatter_from_sum(sum, d, static_cast<double>(len));
}

double wishart_nll(const std::vector<Matrix>& scatters, const DetectorModel& detector,
                   int i) {
  const int kappa = detector.subcontrollers();
  require_subcontroller(i, kappa, "wishart_nll");
  if (static_cast<int>(scatters.size()) != kappa) {
    throw DimensionError("wishart_nll: one scatter matrix per output block required");
  }
  double log_det_part = 0.0;
  double trace_part = 0.0;
  for (int j = 0; j < kappa; ++j) {
    const Matrix& s = scatters[j];
    const Matrix& r = detector.r[i][j];
    if (s.rows() != r.rows() || s.cols() != r.cols()) {
      throw DimensionError("wishart_nll: scatter " + std::to_string(j + 1) +
                           " has the wrong size");
    }
    const Eigen::LLT<Matrix> s_llt(s);
    if (s_llt.info() != Eigen::Success) {
      throw DegenerateWindowError("wishart_nll: scatter matrix for output " +
                                  std::to_string(j + 1) +
                                  " is singular; use a longer window");
    }
    const Matrix& l = s_llt.matrixLLT();
    double log_det = 0.0;
    for (Eigen::Index k = 0; k < l.rows(); ++k) log_det += 2.0 * std::log(l(k, k));
    if (!std::isfinite(log_det)) {
      throw DegenerateWindowError("wishart_nll: scatter matrix for output " +
                                  std::to_string(j + 1) + " is singular");
    }

    const Eigen::LLT<Matrix> r_llt(r);
    if (r_llt.info() != Eigen::Success) {
      throw ModelError("wishart_nll: R for pair (" + std::to_string(i + 1) + ", " +
                       std::to_string(j + 1) + ") is singular");
    }
    Matrix r_inv = r_llt.solve(Matrix::Identity(r.rows(), r.cols()));
    r_inv = 0.5 * (r_inv + r_inv.transpose()).eval();
    // tr(R^{-1} S) = sum of the elementwise product for symmetric S.
    const Matrix s_sym = 0.5 * (s + s.transpose());
    const auto n = static_cast<std::size_t>(s.size());
    log_det_part += detector.log_det_coefficient(i, j) * log_det;
    trace_part += kernels::dot({r_inv.data(), n}, {s_sym.data(), n});
  }
  return log_det_part + trace_part;
}

double window_statistic(const SimulationTrace& trace, const PlantModel& model,
                        long start, int i, const DetectorModel& detector) {
  const int kappa = detector.subcontrollers();
  require_subcontroller(i, kappa, "window_statistic");
  std::vector<Matrix> scatters;
  for (int j = 0; j < kappa; ++j) {
    const Eigen::Index d = detector.q[i] + detector.m[j];
    std::vector<double> sum(static_cast<std::size_t>(d * d), 0.0);
    for (long n = start; n < start + detector.window_len; ++n) {
      accumulate(psi_vector(trace, model, n, i, j, detector.lags), sum);
    }
    scatters.push_back(scatter_from_sum(sum, d, scaling_divisor(detector)));
  }
  return wishart_nll(scatters, detector, i);
}

Decision decide(double nll, const DetectorModel& detector, int i) {
  if (!detector.calibrated()) {
    throw StateError("decide: detector threshold has not been calibrated");
  }
  require_subcontroller(i, detector.subcontrollers(), "decide");
  return nll > detector.tau[i] ? Decision::kReject : Decision::kAccept;
}

WindowStatisticStream::WindowStatisticStream(const PlantModel& model,
                                             const DetectorModel& detector,
                                             long first_window)
    : model_(model), detector_(detector), first_window_(first_window) {
  const int kappa = detector.subcontrollers();
  if (model.subcontrollers() != kappa) {
    throw DimensionError("WindowStatisticStream: detector does not match the plant");
  }
  const int history = detector.lags.max_lag() + 1;
  if (first_window < history) {
    throw RangeError("WindowStatisticStream: first window must start at or after step " +
                     std::to_string(history));
  }
  e_history_.assign(kappa, std::vector<Vector>(history));
  sums_.assign(kappa, {});
  for (int i = 0; i < kappa; ++i) {
    for (int j = 0; j < kappa; ++j) {
      const int d = detector.q[i] + detector.m[j];
      sums_[i].emplace_back(static_cast<std::size_t>(d * d), 0.0);
    }
  }
  last_.assign(kappa, 0.0);
}

bool WindowStatisticStream::push(const StepRecord& rec) {
  const int kappa = detector_.subcontrollers();
  const long n = rec.n;
  const long history = static_cast<long>(e_history_[0].size());
  bool closed = false;
  if (n >= first_window_) {
    for (int i = 0; i < kappa; ++i) {
      for (int j = 0; j < kappa; ++j) {
        const long back = n - detector_.lags.at(i, j) - 1;
        const Vector& e = e_history_[i][static_cast<std::size_t>(back % history)];
        fill_psi(e, model_.c_blocks[j], rec.xhat[i], rec.s[i][j], psi_);
        accumulate(psi_, sums_[i][j]);
      }
    }
    if ((n - first_window_ + 1) % detector_.window_len == 0) {
      const double divisor = scaling_divisor(detector_);
      for (int i = 0; i < kappa; ++i) {
        std::vector<Matrix> scatters;
        for (int j = 0; j < kappa; ++j) {
          const Eigen::Index d = detector_.q[i] + detector_.m[j];
          scatters.push_back(scatter_from_sum(sums_[i][j], d, divisor));
          std::fill(sums_[i][j].begin(), sums_[i][j].end(), 0.0);
        }
        last_[i] = wishart_nll(scatters, detector_, i);
      }
      last_start_ = n - detector_.window_len + 1;
      closed = true;
    }
  }
  for (int i = 0; i < kappa; ++i) {
    e_history_[i][static_cast<std::size_t>(n % history)] = rec.e[i];
  }
  return closed;
}

double empirical_quantile(std::vector<double> samples, double level) {
  if (samples.empty()) throw InputError("empirical_quantile: no samples");
  if (!(level > 0.0 && level <= 1.0)) {
    throw InputError("empirical_quantile: level must lie in (0, 1]");
  }
  std::sort(samples.begin(), samples.end());
  const auto n = static_cast<double>(samples.size());
  auto rank = static_cast<std::size_t>(std::ceil(level * n - 1e-9));
  rank = std::clamp<std::size_t>(rank, 1, samples.size());
  return samples[rank - 1];
}

std::vector<std::vector<double>> run_window_statistics(
    const PlantModel& model, const GainSet& gains, const AttackScenario& attack,
    const DetectorModel& detector, int windows, const WindowRunOptions& options) {
  if (windows < 0) throw InputError("run_window_statistics: negative window count");
  SimulationOptions sim_options;
  sim_options.noise.seed = options.seed;
  sim_options.x0 = options.x0;
  sim_options.xhat0 = options.xhat0;
  Simulator sim(model, gains, attack, sim_options);
  WindowStatisticStream stream(sim.model(), detector, options.burn_in);

  const int kappa = detector.subcontrollers();
  std::vector<std::vector<double>> out(kappa);
  for (auto& v : out) v.reserve(static_cast<std::size_t>(windows));
  const long steps = options.burn_in + static_cast<long>(windows) * detector.window_len;
  for (long n = 0; n < steps; ++n) {
    if (stream.push(sim.step())) {
      for (int i = 0; i < kappa; ++i) out[i].push_back(stream.last()[i]);
    }
  }
  return out;
}

namespace {

// Null statistics pooled over independently seeded chunks, in chunk order.
std::vector<std::vector<double>> pooled_null_statistics(
    const PlantModel& model, const GainSet& gains, const DetectorModel& detector,
    int windows, std::uint64_t seed, const CalibrationOptions& options) {
  if (options.chunk_windows < 1) {
    throw InputError("calibration: chunk size must be positive");
  }
  const int chunks = (windows + options.chunk_windows - 1) / options.chunk_windows;
  unsigned threads = options.threads != 0 ? options.threads
                                          : std::max(1u, std::thread::hardware_concurrency());
  threads = std::min<unsigned>(threads, static_cast<unsigned>(std::max(chunks, 1)));

  const AttackScenario no_attack;
  auto run_chunk = [&](int c) {
    const int count = std::min(options.chunk_windows, windows - c * options.chunk_windows);
    WindowRunOptions run;
    run.burn_in = options.burn_in;
    run.seed = derive_seed(seed, static_cast<std::uint64_t>(c));
    return run_window_statistics(model, gains, no_attack, detector, count, run);
  };

  std::vector<std::vector<std::vector<double>>> results(static_cast<std::size_t>(chunks));
  for (int begin = 0; begin < chunks; begin += static_cast<int>(threads)) {
    const int end = std::min(chunks, begin + static_cast<int>(threads));
    if (threads == 1) {
      results[begin] = run_chunk(begin);
      continue;
    }
    std::vector<std::future<std::vector<std::vector<double>>>> futures;
    for (int c = begin; c < end; ++c) {
      futures.push_back(std::async(std::launch::async, run_chunk, c));
    }
    for (int c = begin; c < end; ++c) results[c] = futures[c - begin].get();
  }

  const int kappa = detector.subcontrollers();
  std::vector<std::vector<double>> pooled(kappa);
  for (const auto& chunk : results) {
    for (int i = 0; i < kappa; ++i) {
      pooled[i].insert(pooled[i].end(), chunk[i].begin(), chunk[i].end());
    }
  }
  return pooled;
}

}  // namespace

Calibration calibrate_threshold(const PlantModel& model, const GainSet& gains,
                                const DetectorModel& detector, int windows,
                                std::uint64_t seed, const CalibrationOptions& options) {
  if (windows < 100) {
    throw InputError("calibrate_threshold: at least 100 windows required, got " +
                     std::to_string(windows));
  }
  if (!verify_gain_triple(model, gains).ok) {
    throw StabilityError("calibrate_threshold: gains do not pass verification");
  }
  Calibration out;
  out.samples = pooled_null_statistics(model, gains, detector, windows, seed, options);
  for (const auto& s : out.samples) {
    out.tau.push_back(empirical_quantile(s, 1.0 - detector.alpha));
  }
  return out;
}

std::vector<double> null_rejection_rate(const PlantModel& model, const GainSet& gains,
                                        const DetectorModel& detector, int windows,
                                        std::uint64_t seed,
                                        const CalibrationOptions& options) {
  if (windows < 1) throw InputError("null_rejection_rate: no windows requested");
  const auto pooled = pooled_null_statistics(model, gains, detector, windows, seed, options);
  std::vector<double> rates;
  for (int i = 0; i < detector.subcontrollers(); ++i) {
    long rejected = 0;
    for (double v : pooled[i]) rejected += decide(v, detector, i) == Decision::kReject;
    rates.push_back(static_cast<double>(rejected) / static_cast<double>(pooled[i].size()));
  }
  return rates;
}

int run_rejection_limit(int windows, double alpha, int family) {
  if (windows < 1 || family < 1 || !(alpha > 0.0 && alpha < 1.0)) {
    throw InputError("run_rejection_limit: invalid arguments");
  }
  const double target = alpha / family;
  // Upper tail P(X >= c), accumulated from c = windows downwards.
  double tail = 0.0;
  int limit = windows + 1;
  for (int c = windows; c >= 1; --c) {
    const double log_pmf = std::lgamma(windows + 1.0) - std::lgamma(c + 1.0) -
                           std::lgamma(windows - c + 1.0) + c * std::log(alpha) +
                           (windows - c) * std::log1p(-alpha);
    tail += std::exp(log_pmf);
    if (tail > target) break;
    limit = c;
  }
  return limit;
}

}  // namespace netwm
