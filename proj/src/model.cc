#include "netwm/model.h"

#include <algorithm>
#include <string>

#include "netwm/errors.h"

namespace netwm {

void require_covariance(const Matrix& m, Eigen::Index n, const std::string& what) {
  if (m.rows() != n || m.cols() != n) {
    throw DimensionError(what + ": expected " + std::to_string(n) + "x" +
                         std::to_string(n));
  }
  require_finite(m, what.c_str());
  if (!is_symmetric(m)) throw InputError(what + ": not symmetric");
  if (n > 0 &&
      min_symmetric_eigenvalue(m) < -1e-10 * (1.0 + m.cwiseAbs().maxCoeff())) {
    throw InputError(what + ": not positive semidefinite");
  }
}

void PlantModel::validate() const {
  require_square(a, "plant A");
  require_finite(a, "plant A");
  const Eigen::Index p = a.rows();
  if (p == 0) throw DimensionError("plant A: empty state");
  const std::size_t kappa = b_blocks.size();
  if (kappa == 0) throw DimensionError("plant: at least one subcontroller required");
  if (c_blocks.size() != kappa || sigma_z_blocks.size() != kappa) {
    throw DimensionError("plant: B, C and sigma_Z block counts differ");
  }
  for (std::size_t i = 0; i < kappa; ++i) {
    const std::string tag = std::to_string(i + 1);
    if (b_blocks[i].rows() != p || b_blocks[i].cols() == 0) {
      throw DimensionError("plant B_" + tag + ": expected " + std::to_string(p) +
                           " rows and at least one column");
    }
    if (c_blocks[i].cols() != p || c_blocks[i].rows() == 0) {
      throw DimensionError("plant C_" + tag + ": expected " + std::to_string(p) +
                           " columns and at least one row");
    }
    require_finite(b_blocks[i], "plant B");
    require_finite(c_blocks[i], "plant C");
    require_covariance(sigma_z_blocks[i], c_blocks[i].rows(), "plant sigma_Z_" + tag);
  }
  require_covariance(sigma_w, p, "plant sigma_W");
}

void GainSet::validate(const PlantModel& model) const {
  const std::size_t kappa = model.b_blocks.size();
  if (k_blocks.size() != kappa || l_blocks.size() != kappa ||
      sigma_e_blocks.size() != kappa) {
    throw DimensionError("gains: K, L and sigma_E block counts must equal " +
                         std::to_string(kappa));
  }
  const Eigen::Index p = model.a.rows();
  for (std::size_t i = 0; i < kappa; ++i) {
    const std::string tag = std::to_string(i + 1);
    if (k_blocks[i].rows() != model.b_blocks[i].cols() || k_blocks[i].cols() != p) {
      throw DimensionError("gains K_" + tag + ": shape does not match B_" + tag);
    }
    if (l_blocks[i].rows() != p || l_blocks[i].cols() != model.c_blocks[i].rows()) {
      throw DimensionError("gains L_" + tag + ": shape does not match C_" + tag);
    }
    require_finite(k_blocks[i], "gains K");
    require_finite(l_blocks[i], "gains L");
    require_covariance(sigma_e_blocks[i], model.b_blocks[i].cols(),
                       "gains sigma_E_" + tag);
  }
}

std::vector<Matrix> split_rows(const Matrix& stacked,
                               const std::vector<Matrix>& like_b_blocks) {
  std::vector<Matrix> out;
  Eigen::Index at = 0;
  for (const auto& b : like_b_blocks) {
    if (at + b.cols() > stacked.rows()) {
      throw DimensionError("split_rows: stacked gain has too few rows");
    }
    out.push_back(stacked.middleRows(at, b.cols()));
    at += b.cols();
  }
  if (at != stacked.rows()) throw DimensionError("split_rows: row count mismatch");
  return out;
}

std::vector<Matrix> split_cols(const Matrix& stacked,
                               const std::vector<Matrix>& like_c_blocks) {
  std::vector<Matrix> out;
  Eigen::Index at = 0;
  for (const auto& c : like_c_blocks) {
    if (at + c.rows() > stacked.cols()) {
      throw DimensionError("split_cols: stacked gain has too few columns");
    }
    out.push_back(stacked.middleCols(at, c.rows()));
    at += c.rows();
  }
  if (at != stacked.cols()) throw DimensionError("split_cols: column count mismatch");
  return out;
}

int LagTable::max_lag() const {
  int m = 0;
  for (const auto& row : k_prime) {
    for (int v : row) m = std::max(m, v);
  }
  return m;
}

}  // namespace netwm
