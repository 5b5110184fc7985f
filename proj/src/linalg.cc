#include "netwm/linalg.h"

#include <algorithm>
#include <cmath>
#include <complex>
#include <string>

#include "netwm/errors.h"

namespace netwm {

void Tolerance::validate() const {
  if (!(rank_tol >= 0) || !(stability_margin >= 0) || !(fixpoint_tol >= 0)) {
    throw InputError("Tolerance: all fields must be nonnegative");
  }
  if (!(stability_margin < 1)) {
    throw InputError("Tolerance: stability_margin must be < 1");
  }
}

void require_square(const Matrix& m, const char* what) {
  if (m.rows() != m.cols()) {
    throw DimensionError(std::string(what) + ": expected a square matrix, got " +
                         std::to_string(m.rows()) + "x" +
                         std::to_string(m.cols()));
  }
}

void require_finite(const Matrix& m, const char* what) {
  if (!m.allFinite()) {
    throw InputError(std::string(what) + ": matrix has non-finite entries");
  }
}

double spectral_radius(const Matrix& m) {
  require_square(m, "spectral_radius");
  require_finite(m, "spectral_radius");
  if (m.size() == 0) return 0.0;
  const Eigen::VectorXcd eig = m.eigenvalues();
  return eig.cwiseAbs().maxCoeff();
}

bool is_schur_stable(const Matrix& m, const Tolerance& tol) {
  return spectral_radius(m) <= 1.0 - tol.stability_margin;
}

Matrix kron(const Matrix& a, const Matrix& b) {
  Matrix out(a.rows() * b.rows(), a.cols() * b.cols());
  for (Eigen::Index i = 0; i < a.rows(); ++i) {
    for (Eigen::Index j = 0; j < a.cols(); ++j) {
      out.block(i * b.rows(), j * b.cols(), b.rows(), b.cols()) = a(i, j) * b;
    }
  }
  return out;
}

bool is_symmetric(const Matrix& m, double rel_tol) {
  if (m.rows() != m.cols()) return false;
  const double scale = 1.0 + m.cwiseAbs().maxCoeff();
  return (m - m.transpose()).cwiseAbs().maxCoeff() <= rel_tol * scale;
}

Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q,
                               const Tolerance& tol) {
  require_square(a, "solve_discrete_lyapunov(A)");
  require_square(q, "solve_discrete_lyapunov(Q)");
  if (a.rows() != q.rows()) {
    throw DimensionError("solve_discrete_lyapunov: A and Q sizes differ");
  }
  require_finite(a, "solve_discrete_lyapunov(A)");
  require_finite(q, "solve_discrete_lyapunov(Q)");
  if (!is_symmetric(q)) {
    throw InputError("solve_discrete_lyapunov: Q is not symmetric");
  }
  const double rho = spectral_radius(a);
  if (!(rho < 1.0)) {
    throw StabilityError("solve_discrete_lyapunov: A is not Schur stable (rho = " +
                         std::to_string(rho) + ")");
  }
  const Eigen::Index n = a.rows();
  if (n == 0) return Matrix(0, 0);

  // Column-major vec: vec(A X A^T) = (A (x) A) vec(X).
  const Matrix lhs =
      Matrix::Identity(n * n, n * n) - kron(a, a);
  const Vector rhs = Eigen::Map<const Vector>(q.data(), n * n);
  const Vector sol = lhs.partialPivLu().solve(rhs);
  Matrix x = Eigen::Map<const Matrix>(sol.data(), n, n);
  x = 0.5 * (x + x.transpose()).eval();

  const double residual = (x - a * x * a.transpose() - q).norm();
  if (residual > tol.fixpoint_tol * (1.0 + x.norm())) {
    throw NumericalError("solve_discrete_lyapunov: residual " +
                         std::to_string(residual) + " exceeds tolerance");
  }
  return x;
}

Matrix controllability_matrix(const Matrix& a, const Matrix& b) {
  require_square(a, "controllability_matrix(A)");
  if (b.rows() != a.rows()) {
    throw DimensionError("controllability_matrix: B has " +
                         std::to_string(b.rows()) + " rows, A is " +
                         std::to_string(a.rows()) + "x" +
                         std::to_string(a.cols()));
  }
  const Eigen::Index p = a.rows();
  Matrix out(p, p * b.cols());
  Matrix power_b = b;
  for (Eigen::Index k = 0; k < p; ++k) {
    out.middleCols(k * b.cols(), b.cols()) = power_b;
    if (k + 1 < p) power_b = a * power_b;
  }
  return out;
}

int matrix_rank(const Matrix& m, const Tolerance& tol) {
  if (m.size() == 0) return 0;
  const Eigen::JacobiSVD<Matrix> svd(m);
  const Vector& sv = svd.singularValues();
  const double largest = sv.size() > 0 ? sv(0) : 0.0;
  if (largest == 0.0) return 0;
  int rank = 0;
  for (Eigen::Index i = 0; i < sv.size(); ++i) {
    if (sv(i) > tol.rank_tol * largest) ++rank;
  }
  return rank;
}

bool is_controllable(const Matrix& a, const Matrix& b, const Tolerance& tol) {
  return matrix_rank(controllability_matrix(a, b), tol) == a.rows();
}

bool is_detectable(const Matrix& a, const Matrix& c, const Tolerance& tol) {
  require_square(a, "is_detectable(A)");
  if (c.cols() != a.rows()) {
    throw DimensionError("is_detectable: C column count does not match A");
  }
  const Eigen::Index p = a.rows();
  const Eigen::VectorXcd eig = a.eigenvalues();
  const Eigen::MatrixXcd ac = a.cast<std::complex<double>>();
  const Eigen::MatrixXcd cc = c.cast<std::complex<double>>();
  for (Eigen::Index k = 0; k < eig.size(); ++k) {
    if (std::abs(eig(k)) < 1.0 - tol.stability_margin) continue;
    Eigen::MatrixXcd pbh(p + c.rows(), p);
    pbh.topRows(p) = eig(k) * Eigen::MatrixXcd::Identity(p, p) - ac;
    pbh.bottomRows(c.rows()) = cc;
    const Eigen::JacobiSVD<Eigen::MatrixXcd> svd(pbh);
    const auto& sv = svd.singularValues();
    // Scale the cutoff by the problem size rather than by sv(0) alone: the
    // smallest singular value of an unobservable mode is round-off sized.
    const double scale = std::max({1.0, ac.norm(), cc.norm()});
    int rank = 0;
    for (Eigen::Index i = 0; i < sv.size(); ++i) {
      if (sv(i) > std::max(tol.rank_tol, 1e-7) * scale) ++rank;
    }
    if (rank < p) return false;
  }
  return true;
}

Matrix hstack(std::span<const Matrix> blocks) {
  if (blocks.empty()) return Matrix(0, 0);
  const Eigen::Index rows = blocks.front().rows();
  Eigen::Index cols = 0;
  for (const auto& b : blocks) {
    if (b.rows() != rows) throw DimensionError("hstack: row counts differ");
    cols += b.cols();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.middleCols(at, b.cols()) = b;
    at += b.cols();
  }
  return out;
}

Matrix vstack(std::span<const Matrix> blocks) {
  if (blocks.empty()) return Matrix(0, 0);
  const Eigen::Index cols = blocks.front().cols();
  Eigen::Index rows = 0;
  for (const auto& b : blocks) {
    if (b.cols() != cols) throw DimensionError("vstack: column counts differ");
    rows += b.rows();
  }
  Matrix out(rows, cols);
  Eigen::Index at = 0;
  for (const auto& b : blocks) {
    out.middleRows(at, b.rows()) = b;
    at += b.rows();
  }
  return out;
}

Matrix block_diagonal(std::span<const Matrix> blocks) {
  Eigen::Index rows = 0, cols = 0;
  for (const auto& b : blocks) {
    rows += b.rows();
    cols += b.cols();
  }
  Matrix out = Matrix::Zero(rows, cols);
  Eigen::Index r = 0, c = 0;
  for (const auto& b : blocks) {
    out.block(r, c, b.rows(), b.cols()) = b;
    r += b.rows();
    c += b.cols();
  }
  return out;
}

Matrix range_basis(const Matrix& m, const Tolerance& tol) {
  if (m.size() == 0) return Matrix(m.rows(), 0);
  const Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullU);
  const int r = matrix_rank(m, tol);
  return svd.matrixU().leftCols(r);
}

Matrix null_space(const Matrix& m, const Tolerance& tol) {
  if (m.cols() == 0) return Matrix(0, 0);
  if (m.rows() == 0) return Matrix::Identity(m.cols(), m.cols());
  const Eigen::JacobiSVD<Matrix> svd(m, Eigen::ComputeFullV);
  const int r = matrix_rank(m, tol);
  return svd.matrixV().rightCols(m.cols() - r);
}

double min_symmetric_eigenvalue(const Matrix& m) {
  require_square(m, "min_symmetric_eigenvalue");
  if (m.size() == 0) return 0.0;
  const Matrix sym = 0.5 * (m + m.transpose());
  const Eigen::SelfAdjointEigenSolver<Matrix> es(sym, Eigen::EigenvaluesOnly);
  return es.eigenvalues().minCoeff();
}

double relative_frobenius_error(const Matrix& a, const Matrix& b) {
  if (a.rows() != b.rows() || a.cols() != b.cols()) {
    throw DimensionError("relative_frobenius_error: shapes differ");
  }
  const double denom = b.norm();
  const double diff = (a - b).norm();
  return denom > 0 ? diff / denom : diff;
}

}  // namespace netwm
