#include "netwm/sim.h"

#include <cstdio>
#include <ostream>
#include <string>

#include "netwm/design.h"
#include "netwm/errors.h"
#include "netwm/kernels.h"
#include "netwm/random.h"

namespace netwm {
namespace {

void require_index(int i, int kappa, const char* what) {
  if (i < 0 || i >= kappa) {
    throw RangeError(std::string(what) + ": subcontroller index " + std::to_string(i) +
                     " out of range");
  }
}

std::optional<Matrix> nonzero_factor(const Matrix* cov) {
  if (cov == nullptr) return std::nullopt;
  Matrix f = covariance_factor(*cov);
  if (f.isZero(0.0)) return std::nullopt;
  return f;
}

}  // namespace

void AttackScenario::set_sensor(int i, Matrix cov) { sensor_[i] = std::move(cov); }

void AttackScenario::set_comm(int receiver, int sender, Matrix cov) {
  if (receiver == sender) {
    throw InputError("AttackScenario: subcontroller " + std::to_string(receiver + 1) +
                     " has no communication channel to itself");
  }
  comm_[{receiver, sender}] = std::move(cov);
}

const Matrix* AttackScenario::sensor(int i) const {
  const auto it = sensor_.find(i);
  return it == sensor_.end() ? nullptr : &it->second;
}

const Matrix* AttackScenario::comm(int receiver, int sender) const {
  const auto it = comm_.find({receiver, sender});
  return it == comm_.end() ? nullptr : &it->second;
}

void AttackScenario::validate(const PlantModel& model) const {
  const int kappa = model.subcontrollers();
  for (const auto& [i, cov] : sensor_) {
    require_index(i, kappa, "sensor attack");
    if (cov.rows() != model.outputs(i) || cov.cols() != model.outputs(i)) {
      throw DimensionError("sensor attack on subcontroller " + std::to_string(i + 1) +
                           ": covariance must be m_i x m_i");
    }
    covariance_factor(cov);
  }
  for (const auto& [key, cov] : comm_) {
    require_index(key.first, kappa, "communication attack");
    require_index(key.second, kappa, "communication attack");
    const int m = model.outputs(key.second);
    if (cov.rows() != m || cov.cols() != m) {
      throw DimensionError("communication attack " + std::to_string(key.first + 1) + "<-" +
                           std::to_string(key.second + 1) +
                           ": covariance must match the sender's output size");
    }
    covariance_factor(cov);
  }
}

Simulator::Simulator(const PlantModel& model, const GainSet& gains,
                     const AttackScenario& attack, const SimulationOptions& options)
    : model_(model), gains_(gains), options_(options) {
  model_.validate();
  gains_.validate(model_);
  attack.validate(model_);
  if (options_.require_stable_gains && !verify_gain_triple(model_, gains_).ok) {
    throw StabilityError("simulate: gains do not stabilize A+BK, A+LC and A+BK+LC");
  }
  const int kappa = model_.subcontrollers();
  const Eigen::Index p = model_.a.rows();
  observer_ = model_.a + model_.stacked_b() * gains_.stacked_k() +
              gains_.stacked_l() * model_.stacked_c();

  w_factor_ = covariance_factor(model_.sigma_w);
  for (int i = 0; i < kappa; ++i) {
    z_factor_.push_back(covariance_factor(model_.sigma_z_blocks[i]));
    e_factor_.push_back(covariance_factor(gains_.sigma_e_blocks[i]));
    v_factor_.push_back(nonzero_factor(attack.sensor(i)));
    nu_factor_.emplace_back();
    for (int j = 0; j < kappa; ++j) {
      nu_factor_[i].push_back(i == j ? std::nullopt : nonzero_factor(attack.comm(i, j)));
    }
  }

  x_ = options_.x0.size() == 0 ? Vector(Vector::Zero(p)) : options_.x0;
  if (x_.size() != p) throw DimensionError("simulate: x0 must have p entries");
  if (options_.xhat0.empty()) {
    xhat_.assign(kappa, Vector::Zero(p));
  } else {
    if (static_cast<int>(options_.xhat0.size()) != kappa) {
      throw DimensionError("simulate: one initial estimate per subcontroller required");
    }
    xhat_ = options_.xhat0;
    for (const auto& xh : xhat_) {
      if (xh.size() != p) throw DimensionError("simulate: xhat0 entries must have p entries");
    }
  }

  rec_.xhat.resize(kappa);
  rec_.y.resize(kappa);
  rec_.z.resize(kappa);
  rec_.v.resize(kappa);
  rec_.e.resize(kappa);
  rec_.u.resize(kappa);
  rec_.s.assign(kappa, std::vector<Vector>(kappa));
  rec_.nu.assign(kappa, std::vector<Vector>(kappa));
  for (int j = 0; j < kappa; ++j) {
    rec_.z[j].resize(model_.outputs(j));
    rec_.v[j].resize(model_.outputs(j));
    rec_.e[j].resize(model_.inputs(j));
    for (int i = 0; i < kappa; ++i) rec_.nu[i][j].resize(model_.outputs(j));
  }
  rec_.w.resize(p);
}

void Simulator::draw(std::uint64_t stream, const Matrix& factor, Vector& out) {
  scratch_.resize(factor.cols());
  CounterRng(options_.noise.seed)
      .normals(stream, static_cast<std::uint64_t>(n_) * factor.cols(), scratch_);
  out.noalias() = factor * scratch_;
}

const StepRecord& Simulator::step() {
  const int kappa = model_.subcontrollers();
  rec_.n = n_;
  rec_.x = x_;

  draw(SeededNoise::process_stream(), w_factor_, rec_.w);
  for (int j = 0; j < kappa; ++j) {
    draw(SeededNoise::measurement_stream(kappa, j), z_factor_[j], rec_.z[j]);
    if (v_factor_[j]) {
      draw(SeededNoise::sensor_attack_stream(kappa, j), *v_factor_[j], rec_.v[j]);
    } else {
      rec_.v[j].setZero();
    }
  }
  for (int i = 0; i < kappa; ++i) {
    draw(SeededNoise::watermark_stream(kappa, i), e_factor_[i], rec_.e[i]);
    for (int j = 0; j < kappa; ++j) {
      if (nu_factor_[i][j]) {
        draw(SeededNoise::comm_attack_stream(kappa, i, j), *nu_factor_[i][j], rec_.nu[i][j]);
      } else {
        rec_.nu[i][j].setZero();
      }
    }
  }

  for (int j = 0; j < kappa; ++j) {
    rec_.y[j] = model_.c_blocks[j] * x_ + rec_.z[j] + rec_.v[j];
  }
  for (int i = 0; i < kappa; ++i) {
    rec_.xhat[i] = xhat_[i];
    for (int j = 0; j < kappa; ++j) {
      rec_.s[i][j] = i == j ? rec_.y[j] : Vector(rec_.y[j] + rec_.nu[i][j]);
    }
    rec_.u[i] = gains_.k_blocks[i] * xhat_[i] + rec_.e[i];
  }

  Vector next_x = model_.a * x_ + rec_.w;
  for (int i = 0; i < kappa; ++i) next_x += model_.b_blocks[i] * rec_.u[i];
  for (int i = 0; i < kappa; ++i) {
    Vector next = observer_ * xhat_[i] + model_.b_blocks[i] * rec_.e[i];
    for (int j = 0; j < kappa; ++j) next -= gains_.l_blocks[j] * rec_.s[i][j];
    xhat_[i] = std::move(next);
  }
  x_ = std::move(next_x);
  ++n_;

  bool finite = x_.allFinite() && x_.norm() <= options_.divergence_limit;
  for (const auto& xh : xhat_) {
    finite = finite && xh.allFinite() && xh.norm() <= options_.divergence_limit;
  }
  if (!finite) {
    throw DivergenceError(n_, "simulate: state diverged at step " + std::to_string(n_));
  }
  return rec_;
}

void SimulationTrace::reserve(const PlantModel& model, long n) {
  const int kappa = model.subcontrollers();
  const Eigen::Index p = model.a.rows();
  steps = 0;
  x.resize(p, n);
  w.resize(p, n);
  xhat.assign(kappa, Matrix(p, n));
  y.clear();
  z.clear();
  v.clear();
  e.clear();
  u.clear();
  s.assign(kappa, {});
  nu.assign(kappa, {});
  for (int j = 0; j < kappa; ++j) {
    y.emplace_back(model.outputs(j), n);
    z.emplace_back(model.outputs(j), n);
    v.emplace_back(model.outputs(j), n);
    e.emplace_back(model.inputs(j), n);
    u.emplace_back(model.inputs(j), n);
  }
  for (int i = 0; i < kappa; ++i) {
    for (int j = 0; j < kappa; ++j) {
      s[i].emplace_back(model.outputs(j), n);
      nu[i].emplace_back(model.outputs(j), n);
    }
  }
}

void SimulationTrace::append(const StepRecord& rec) {
  const long n = steps;
  if (n >= x.cols()) throw RangeError("SimulationTrace: capacity exceeded");
  x.col(n) = rec.x;
  w.col(n) = rec.w;
  const std::size_t kappa = rec.xhat.size();
  for (std::size_t i = 0; i < kappa; ++i) {
    xhat[i].col(n) = rec.xhat[i];
    y[i].col(n) = rec.y[i];
    z[i].col(n) = rec.z[i];
    v[i].col(n) = rec.v[i];
    e[i].col(n) = rec.e[i];
    u[i].col(n) = rec.u[i];
    for (std::size_t j = 0; j < kappa; ++j) {
      s[i][j].col(n) = rec.s[i][j];
      nu[i][j].col(n) = rec.nu[i][j];
    }
  }
  ++steps;
}

SimulationTrace simulate(const PlantModel& model, const GainSet& gains,
                         const AttackScenario& attack, long steps,
                         const SimulationOptions& options) {
  if (steps < 0) throw InputError("simulate: negative step count");
  Simulator sim(model, gains, attack, options);
  SimulationTrace trace;
  trace.reserve(model, steps);
  for (long n = 0; n < steps; ++n) trace.append(sim.step());
  return trace;
}

Matrix derived_delta(const SimulationTrace& trace) {
  const Eigen::Index p = trace.x.rows();
  const std::size_t kappa = trace.xhat.size();
  Matrix delta(static_cast<Eigen::Index>(kappa) * p, trace.steps);
  for (std::size_t i = 0; i < kappa; ++i) {
    delta.middleRows(static_cast<Eigen::Index>(i) * p, p) =
        trace.xhat[i].leftCols(trace.steps) - trace.x.leftCols(trace.steps);
  }
  return delta;
}

MomentAccumulator::MomentAccumulator(Eigen::Index rows, Eigen::Index cols)
    : rows_(rows), cols_(cols), sum_(static_cast<std::size_t>(rows * cols), 0.0) {}

void MomentAccumulator::add(const Vector& a, const Vector& b) {
  if (a.size() != rows_ || b.size() != cols_) {
    throw DimensionError("MomentAccumulator: sample size mismatch");
  }
  // Column-major rows x cols: entry (r, c) lives at c * rows + r.
  kernels::add_outer({b.data(), static_cast<std::size_t>(cols_)},
                     {a.data(), static_cast<std::size_t>(rows_)}, sum_);
  ++count_;
}

Matrix MomentAccumulator::mean() const {
  if (count_ == 0) throw InputError("MomentAccumulator: no samples");
  Matrix out = Eigen::Map<const Matrix>(sum_.data(), rows_, cols_);
  return out / static_cast<double>(count_);
}

Matrix empirical_covariance(const Matrix& samples) {
  if (samples.cols() < 2) {
    throw InputError("empirical_covariance: at least two samples required");
  }
  MomentAccumulator acc(samples.rows(), samples.rows());
  for (Eigen::Index n = 0; n < samples.cols(); ++n) acc.add(samples.col(n));
  return acc.mean();
}

namespace {

void put(std::ostream& out, double value, bool& first) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", value);
  if (!first) out << ',';
  out << buf;
  first = false;
}

void put_vector(std::ostream& out, const Vector& v, bool& first) {
  for (Eigen::Index k = 0; k < v.size(); ++k) put(out, v(k), first);
}

void put_names(std::ostream& out, const std::string& stem, Eigen::Index n, bool& first) {
  for (Eigen::Index k = 0; k < n; ++k) {
    if (!first) out << ',';
    out << stem << '[' << k << ']';
    first = false;
  }
}

}  // namespace

TraceCsvWriter::TraceCsvWriter(std::ostream& out, const PlantModel& model) : out_(out) {
  const int kappa = model.subcontrollers();
  const Eigen::Index p = model.a.rows();
  bool first = true;
  put_names(out_, "x", p, first);
  for (int i = 1; i <= kappa; ++i) put_names(out_, "xhat" + std::to_string(i), p, first);
  for (int j = 1; j <= kappa; ++j) {
    put_names(out_, "y" + std::to_string(j), model.outputs(j - 1), first);
  }
  for (int i = 1; i <= kappa; ++i) {
    for (int j = 1; j <= kappa; ++j) {
      put_names(out_, "s" + std::to_string(i) + std::to_string(j), model.outputs(j - 1),
                first);
    }
  }
  for (int i = 1; i <= kappa; ++i) {
    put_names(out_, "e" + std::to_string(i), model.inputs(i - 1), first);
  }
  for (int i = 1; i <= kappa; ++i) {
    put_names(out_, "u" + std::to_string(i), model.inputs(i - 1), first);
  }
  out_ << '\n';
}

void TraceCsvWriter::write(const StepRecord& rec) {
  bool first = true;
  put_vector(out_, rec.x, first);
  for (const auto& xh : rec.xhat) put_vector(out_, xh, first);
  for (const auto& y : rec.y) put_vector(out_, y, first);
  for (const auto& row : rec.s) {
    for (const auto& s : row) put_vector(out_, s, first);
  }
  for (const auto& e : rec.e) put_vector(out_, e, first);
  for (const auto& u : rec.u) put_vector(out_, u, first);
  out_ << '\n';
}

void write_trace_csv(std::ostream& out, const PlantModel& model,
                     const SimulationTrace& trace) {
  TraceCsvWriter writer(out, model);
  const std::size_t kappa = trace.xhat.size();
  StepRecord rec;
  for (long n = 0; n < trace.steps; ++n) {
    rec.x = trace.x.col(n);
    rec.xhat.resize(kappa);
    rec.y.resize(kappa);
    rec.e.resize(kappa);
    rec.u.resize(kappa);
    rec.s.assign(kappa, std::vector<Vector>(kappa));
    for (std::size_t i = 0; i < kappa; ++i) {
      rec.xhat[i] = trace.xhat[i].col(n);
      rec.y[i] = trace.y[i].col(n);
      rec.e[i] = trace.e[i].col(n);
      rec.u[i] = trace.u[i].col(n);
      for (std::size_t j = 0; j < kappa; ++j) rec.s[i][j] = trace.s[i][j].col(n);
    }
    writer.write(rec);
  }
}

}  // namespace netwm
