#pragma once

#include <string>
#include <vector>

#include "netwm/linalg.h"

namespace netwm {

/// Networked LTI plant: x+ = A x + sum_i B_i u_i + w,  y_j = C_j x + z_j + v_j.
struct PlantModel {
  Matrix a;
  std::vector<Matrix> b_blocks;        // p x q_i
  std::vector<Matrix> c_blocks;        // m_j x p
  Matrix sigma_w;                      // p x p
  std::vector<Matrix> sigma_z_blocks;  // m_j x m_j

  int states() const { return static_cast<int>(a.rows()); }
  int subcontrollers() const { return static_cast<int>(b_blocks.size()); }
  int inputs(int i) const { return static_cast<int>(b_blocks.at(i).cols()); }
  int outputs(int j) const { return static_cast<int>(c_blocks.at(j).rows()); }

  Matrix stacked_b() const { return hstack(b_blocks); }
  Matrix stacked_c() const { return vstack(c_blocks); }

  /// Checks shapes, finiteness and that the covariances are symmetric PSD.
  /// Throws DimensionError or InputError.
  void validate() const;
};

/// Controller, observer and watermark parameters of every subcontroller.
struct GainSet {
  std::vector<Matrix> k_blocks;        // q_i x p
  std::vector<Matrix> l_blocks;        // p x m_j
  std::vector<Matrix> sigma_e_blocks;  // q_i x q_i

  Matrix stacked_k() const { return vstack(k_blocks); }
  Matrix stacked_l() const { return hstack(l_blocks); }

  /// Checks shapes against the plant and that each sigma_E is symmetric PSD.
  void validate(const PlantModel& model) const;
};

/// Throws DimensionError unless m is n x n and InputError unless it is finite,
/// symmetric and positive semidefinite.
void require_covariance(const Matrix& m, Eigen::Index n, const std::string& what);

/// Splits a stacked (sum q_i) x p gain into per-subcontroller row blocks.
std::vector<Matrix> split_rows(const Matrix& stacked,
                               const std::vector<Matrix>& like_b_blocks);
/// Splits a stacked p x (sum m_j) gain into per-subcontroller column blocks.
std::vector<Matrix> split_cols(const Matrix& stacked,
                               const std::vector<Matrix>& like_c_blocks);

/// k'_{i,j}: the smallest k with C_j (A+BK)^k B_i != 0. Indexed [i][j].
struct LagTable {
  std::vector<std::vector<int>> k_prime;

  int at(int i, int j) const { return k_prime.at(i).at(j); }
  int size() const { return static_cast<int>(k_prime.size()); }
  int max_lag() const;
};

}  // namespace netwm
