#pragma once

// Dense linear-algebra helpers for desk-scale control problems (a few dozen
// states at most). Everything here is a pure function of its arguments.

#include <span>
#include <vector>

#include <Eigen/Dense>

namespace netwm {

using Matrix = Eigen::MatrixXd;
using Vector = Eigen::VectorXd;

/// Numerical thresholds shared by the stability, rank and fixed-point tests.
struct Tolerance {
  /// Singular values at or below rank_tol * sigma_max count as zero.
  double rank_tol = 1e-9;
  /// A matrix counts as Schur stable when rho <= 1 - stability_margin.
  double stability_margin = 1e-9;
  /// Allowed Frobenius residual of fixed-point solves, relative to 1+|X|.
  double fixpoint_tol = 1e-8;

  /// Throws InputError unless all fields are >= 0 and the margin is < 1.
  void validate() const;
};

/// Largest eigenvalue modulus, computed over the complex field.
double spectral_radius(const Matrix& m);

bool is_schur_stable(const Matrix& m, const Tolerance& tol = {});

/// Solves  X = A X A^T + Q  for Schur-stable A through the vectorized system
/// (I - A (x) A) vec(X) = vec(Q). The result is symmetrized and its residual
/// is checked against tol.fixpoint_tol.
Matrix solve_discrete_lyapunov(const Matrix& a, const Matrix& q,
                               const Tolerance& tol = {});

/// [B, AB, ..., A^{p-1} B].
Matrix controllability_matrix(const Matrix& a, const Matrix& b);

int matrix_rank(const Matrix& m, const Tolerance& tol = {});

bool is_controllable(const Matrix& a, const Matrix& b,
                     const Tolerance& tol = {});

/// PBH test: every eigenvalue with modulus >= 1 is observable through C.
bool is_detectable(const Matrix& a, const Matrix& c, const Tolerance& tol = {});

// Block assembly.
Matrix hstack(std::span<const Matrix> blocks);
Matrix vstack(std::span<const Matrix> blocks);
Matrix block_diagonal(std::span<const Matrix> blocks);
Matrix kron(const Matrix& a, const Matrix& b);

/// Orthonormal basis of the column space (columns of the result).
Matrix range_basis(const Matrix& m, const Tolerance& tol = {});
/// Orthonormal basis of the right null space.
Matrix null_space(const Matrix& m, const Tolerance& tol = {});

bool is_symmetric(const Matrix& m, double rel_tol = 1e-10);
/// Smallest eigenvalue of the symmetric part of m.
double min_symmetric_eigenvalue(const Matrix& m);

/// |a - b|_F / |b|_F, or |a|_F when b is zero.
double relative_frobenius_error(const Matrix& a, const Matrix& b);

/// Throws DimensionError unless m is square.
void require_square(const Matrix& m, const char* what);
/// Throws InputError if any entry is NaN or infinite.
void require_finite(const Matrix& m, const char* what);

}  // namespace netwm
