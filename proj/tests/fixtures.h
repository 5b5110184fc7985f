#pragma once

// Shared plants and independent reference computations for the tests. The
// oracles here deliberately avoid the library code they are used to check.

#include <algorithm>
#include <complex>
#include <cstdint>
#include <random>
#include <vector>

#include "netwm/linalg.h"
#include "netwm/model.h"
#include "netwm/scenario.h"

namespace netwm::testing {

/// Two-state double integrator with one actuator and one sensor per state.
inline PlantModel double_integrator() {
  PlantModel m;
  m.a = (Matrix(2, 2) << 1, 1, 0, 1).finished();
  m.b_blocks = {(Matrix(2, 1) << 1, 0).finished(), (Matrix(2, 1) << 0, 1).finished()};
  m.c_blocks = {(Matrix(1, 2) << 1, 0).finished(), (Matrix(1, 2) << 0, 1).finished()};
  m.sigma_w = 0.01 * Matrix::Identity(2, 2);
  m.sigma_z_blocks = {Matrix::Constant(1, 1, 0.01), Matrix::Constant(1, 1, 0.01)};
  return m;
}

/// K = -1/2 [[1, 1], [1, 1]] for the double integrator.
inline Matrix double_integrator_coupled_k() {
  return -0.5 * Matrix::Ones(2, 2);
}

inline PlantModel platoon_plant() { return platoon_preset().plant; }
inline GainSet platoon_gains() { return platoon_preset().gains.gain_set(); }

/// Sum_{k<terms} A^k Q (A^T)^k.
inline Matrix lyapunov_series(const Matrix& a, const Matrix& q, int terms) {
  Matrix sum = Matrix::Zero(q.rows(), q.cols());
  Matrix term = q;
  for (int k = 0; k < terms; ++k) {
    sum += term;
    term = a * term * a.transpose();
  }
  return sum;
}

/// Eigenvalues sorted by real then imaginary part.
inline std::vector<std::complex<double>> sorted_spectrum(const Matrix& m) {
  const Eigen::VectorXcd ev = m.eigenvalues();
  std::vector<std::complex<double>> out(ev.data(), ev.data() + ev.size());
  std::sort(out.begin(), out.end(), [](auto x, auto y) {
    if (std::abs(x.real() - y.real()) > 1e-9) return x.real() < y.real();
    return x.imag() < y.imag();
  });
  return out;
}

/// Random matrix with entries uniform in [-scale, scale].
inline Matrix random_matrix(std::mt19937_64& rng, Eigen::Index rows, Eigen::Index cols,
                            double scale = 1.0) {
  std::uniform_real_distribution<double> u(-scale, scale);
  Matrix m(rows, cols);
  for (Eigen::Index r = 0; r < rows; ++r) {
    for (Eigen::Index c = 0; c < cols; ++c) m(r, c) = u(rng);
  }
  return m;
}

/// Random matrix rescaled to the given spectral radius.
inline Matrix random_stable(std::mt19937_64& rng, Eigen::Index n, double radius) {
  Matrix m = random_matrix(rng, n, n);
  const double rho = m.eigenvalues().cwiseAbs().maxCoeff();
  return m * (radius / rho);
}

/// Naive uncentered second moment (1/N) sum a_n b_n^T over matching columns.
inline Matrix naive_moment(const Matrix& a, const Matrix& b) {
  Matrix out = Matrix::Zero(a.rows(), b.rows());
  for (Eigen::Index n = 0; n < a.cols(); ++n) {
    for (Eigen::Index r = 0; r < a.rows(); ++r) {
      for (Eigen::Index c = 0; c < b.rows(); ++c) out(r, c) += a(r, n) * b(c, n);
    }
  }
  return out / static_cast<double>(a.cols());
}

}  // namespace netwm::testing
