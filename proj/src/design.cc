#include "netwm/design.h"

#include <algorithm>
#include <cmath>
#include <string>

#include "netwm/errors.h"
#include "netwm/random.h"

namespace netwm {
namespace {

// Orthogonal projection onto the complement of span(columns of basis), where
// basis is orthonormal.
Vector project_out(const Matrix& basis, const Vector& x) {
  return x - basis * (basis.transpose() * x);
}

Matrix orthonormal_columns(const Matrix& m) {
  const Eigen::HouseholderQR<Matrix> qr(m);
  return qr.householderQ() * Matrix::Identity(m.rows(), m.cols());
}

// K = U X^{-1}, via X^T K^T = U^T.
Matrix right_divide(const Matrix& u, const Matrix& x) {
  return x.transpose().partialPivLu().solve(u.transpose()).transpose();
}

void require_block_rows(const std::vector<Matrix>& blocks, Eigen::Index p,
                        const char* what) {
  if (blocks.empty()) throw DimensionError(std::string(what) + ": no blocks");
  for (const auto& b : blocks) {
    if (b.rows() != p) {
      throw DimensionError(std::string(what) + ": block row count differs from A");
    }
  }
}

}  // namespace

Matrix heymann_feedback(const Matrix& a, const Matrix& b, const Vector& v,
                        const Tolerance& tol) {
  require_square(a, "heymann_feedback(A)");
  const Eigen::Index p = a.rows();
  if (b.rows() != p) throw DimensionError("heymann_feedback: B rows differ from A");
  if (v.size() != b.cols()) {
    throw DimensionError("heymann_feedback: v length differs from B columns");
  }
  const Vector target = b * v;
  if (target.norm() <= tol.rank_tol * std::max(1.0, b.norm() * v.norm()) ||
      target.norm() == 0.0) {
    throw InputError("heymann_feedback: B v is zero");
  }
  if (!is_controllable(a, b, tol)) {
    throw SynthesisError("heymann_feedback: (A, B) is not controllable");
  }

  const Eigen::Index q = b.cols();
  Matrix x(p, p);
  Matrix u = Matrix::Zero(q, p);
  x.col(0) = target;
  for (Eigen::Index k = 0; k + 1 < p; ++k) {
    const Matrix basis = orthonormal_columns(x.leftCols(k + 1));
    const Vector xk = x.col(k);
    const Vector ax = a * xk;

    const Vector drift = project_out(basis, ax);
    const double drift_gain = ax.norm() > 0 ? drift.norm() / ax.norm() : 0.0;

    Matrix pb(p, q);
    for (Eigen::Index c = 0; c < q; ++c) pb.col(c) = project_out(basis, b.col(c));
    const Eigen::JacobiSVD<Matrix> svd(pb, Eigen::ComputeThinU | Eigen::ComputeThinV);
    const double sigma = svd.singularValues()(0);

    Vector chosen = Vector::Zero(q);
    if (sigma > tol.rank_tol * std::max(1.0, b.norm())) {
      const Vector dir_out = svd.matrixU().col(0);
      const double sign = drift.dot(dir_out) < 0 ? -1.0 : 1.0;
      const Vector push = (sign * xk.norm() / sigma) * svd.matrixV().col(0);
      const Vector pushed = ax + b * push;
      const double push_gain = project_out(basis, pushed).norm() / pushed.norm();
      if (drift_gain < 0.1 && push_gain > drift_gain) chosen = push;
    }
    u.col(k) = chosen;
    x.col(k + 1) = ax + b * chosen;
  }

  Matrix k_prime = right_divide(u, x);
  if (!is_controllable(a + b * k_prime, target, tol)) {
    throw SynthesisError(
        "heymann_feedback: constructed feedback failed the controllability check");
  }
  return k_prime;
}

Matrix design_feedback_square(const Matrix& a, const Matrix& b, double lambda,
                              const Tolerance& tol) {
  require_square(a, "design_feedback_square(A)");
  require_square(b, "design_feedback_square(B)");
  const Eigen::Index p = a.rows();
  if (b.rows() != p) throw DimensionError("design_feedback_square: B must be p x p");
  if (!(std::abs(lambda) > 0.0 && std::abs(lambda) < 1.0)) {
    throw InputError("design_feedback_square: need 0 < |lambda| < 1");
  }
  if (matrix_rank(b, tol) != p) {
    throw InputError("design_feedback_square: B is rank deficient");
  }

  const auto lu = b.partialPivLu();
  auto unit = [&](Eigen::Index i) -> Vector { return b.col(i) / b.col(i).norm(); };

  Matrix x(p, p);
  Matrix u(p, p);
  x.col(0) = unit(0);
  double power = 1.0;
  for (Eigen::Index k = 1; k < p; ++k) {
    power *= lambda;
    x.col(k) = power * unit(k);
    u.col(k - 1) = lu.solve(x.col(k) - a * x.col(k - 1));
  }
  power *= lambda;
  u.col(p - 1) = lu.solve(power * unit(0) - a * x.col(p - 1));

  Matrix k = right_divide(u, x);
  const Matrix closed = a + b * k;
  for (Eigen::Index i = 0; i < p; ++i) {
    if (!is_controllable(closed, b.col(i), tol)) {
      throw SynthesisError("design_feedback_square: column " + std::to_string(i + 1) +
                           " does not control the closed loop");
    }
  }
  return k;
}

Vector shared_input_direction(const std::vector<Matrix>& b_blocks,
                              const Tolerance& tol) {
  if (b_blocks.empty()) throw DimensionError("shared_input_direction: no blocks");
  Matrix shared = range_basis(b_blocks.front(), tol);
  for (std::size_t i = 1; i < b_blocks.size() && shared.cols() > 0; ++i) {
    if (b_blocks[i].rows() != shared.rows()) {
      throw DimensionError("shared_input_direction: block row counts differ");
    }
    const Matrix other = range_basis(b_blocks[i], tol);
    if (other.cols() == 0) {
      shared.resize(shared.rows(), 0);
      break;
    }
    Matrix pair(shared.rows(), shared.cols() + other.cols());
    pair << shared, -other;
    const Matrix coeffs = null_space(pair, tol);
    if (coeffs.cols() == 0) {
      shared.resize(shared.rows(), 0);
      break;
    }
    shared = range_basis(shared * coeffs.topRows(shared.cols()), tol);
  }
  if (shared.cols() == 0) {
    throw SynthesisError(
        "shared_input_direction: the input ranges of the subcontrollers have no "
        "nonzero vector in common");
  }
  Vector d = shared.col(0);
  Eigen::Index big;
  d.cwiseAbs().maxCoeff(&big);
  if (d(big) < 0) d = -d;
  return d;
}

Matrix ackermann_gain(const Matrix& a, const Vector& b,
                      const std::vector<double>& poles) {
  require_square(a, "ackermann_gain(A)");
  const Eigen::Index p = a.rows();
  if (b.size() != p || static_cast<Eigen::Index>(poles.size()) != p) {
    throw DimensionError("ackermann_gain: b and pole count must match A");
  }
  const Matrix ctrb = controllability_matrix(a, b);
  const auto lu = ctrb.fullPivLu();
  if (!lu.isInvertible()) {
    throw SynthesisError("ackermann_gain: single-input pair is not controllable");
  }
  Matrix phi = Matrix::Identity(p, p);
  for (double pole : poles) phi = phi * (a - pole * Matrix::Identity(p, p));
  Vector last = Vector::Zero(p);
  last(p - 1) = 1.0;
  // g = -e_p^T ctrb^{-1} phi(A)
  const Vector row = ctrb.transpose().fullPivLu().solve(last);
  return -(row.transpose() * phi);
}

SharedRangeDesign design_feedback_shared_range(const Matrix& a,
                                               const std::vector<Matrix>& b_blocks,
                                               double pole_radius,
                                               const Tolerance& tol) {
  require_square(a, "design_feedback_shared_range(A)");
  require_block_rows(b_blocks, a.rows(), "design_feedback_shared_range");
  if (!(std::abs(pole_radius) < 1.0)) {
    throw InputError("design_feedback_shared_range: pole radius must lie inside the unit disk");
  }
  const Matrix b = hstack(b_blocks);
  if (!is_controllable(a, b, tol)) {
    throw SynthesisError("design_feedback_shared_range: (A, B) is not controllable");
  }
  const Vector direction = shared_input_direction(b_blocks, tol);

  SharedRangeDesign out;
  out.v = b.completeOrthogonalDecomposition().solve(direction);
  const Vector bv = b * out.v;
  out.k_heymann = heymann_feedback(a, b, out.v, tol);
  const Matrix shifted = a + b * out.k_heymann;
  out.g = ackermann_gain(shifted, bv,
                         std::vector<double>(static_cast<std::size_t>(a.rows()), pole_radius));
  out.k = out.k_heymann + out.v * out.g;

  const double rho = spectral_radius(a + b * out.k);
  if (!(rho < 1.0 - tol.stability_margin)) {
    throw SynthesisError("design_feedback_shared_range: closed loop is not Schur stable (rho = " +
                         std::to_string(rho) + ")");
  }
  return out;
}

LagTable compute_watermark_lags(const Matrix& a, const std::vector<Matrix>& b_blocks,
                                const std::vector<Matrix>& c_blocks, const Matrix& k,
                                const Tolerance& tol) {
  require_square(a, "compute_watermark_lags(A)");
  const Eigen::Index p = a.rows();
  require_block_rows(b_blocks, p, "compute_watermark_lags(B)");
  for (const auto& c : c_blocks) {
    if (c.cols() != p) throw DimensionError("compute_watermark_lags: C block has wrong width");
  }
  const Matrix b = hstack(b_blocks);
  if (k.rows() != b.cols() || k.cols() != p) {
    throw DimensionError("compute_watermark_lags: K must be (sum q_i) x p");
  }
  const Matrix closed = a + b * k;

  std::vector<Matrix> powers{Matrix::Identity(p, p)};
  for (Eigen::Index n = 1; n < p; ++n) powers.push_back(closed * powers.back());

  const int kappa = static_cast<int>(b_blocks.size());
  LagTable lags;
  lags.k_prime.assign(kappa, std::vector<int>(c_blocks.size(), 0));
  for (int i = 0; i < kappa; ++i) {
    for (int j = 0; j < static_cast<int>(c_blocks.size()); ++j) {
      const Matrix& bi = b_blocks[i];
      const Matrix& cj = c_blocks[j];
      double reference = 0.0;
      for (const auto& pw : powers) {
        reference = std::max(reference, cj.norm() * pw.norm() * bi.norm());
      }
      const double threshold = tol.rank_tol * reference;
      int found = -1;
      for (Eigen::Index n = 0; n < p && reference > 0.0; ++n) {
        const double mag = (cj * powers[n] * bi).cwiseAbs().maxCoeff();
        if (mag > threshold) {
          found = static_cast<int>(n);
          break;
        }
      }
      if (found < 0) {
        throw ConditionViolation(
            i, j,
            "watermark of subcontroller " + std::to_string(i + 1) +
                " never reaches output " + std::to_string(j + 1) +
                " (C_j (A+BK)^k B_i = 0 for every k <= p-1)");
      }
      lags.k_prime[i][j] = found;
    }
  }
  return lags;
}

GainReport verify_gain_triple(const PlantModel& model, const Matrix& k,
                              const Matrix& l, const Tolerance& tol) {
  const Matrix b = model.stacked_b();
  const Matrix c = model.stacked_c();
  const Eigen::Index p = model.a.rows();
  if (k.rows() != b.cols() || k.cols() != p) {
    throw DimensionError("verify_gain_triple: K must be (sum q_i) x p");
  }
  if (l.rows() != p || l.cols() != c.rows()) {
    throw DimensionError("verify_gain_triple: L must be p x (sum m_j)");
  }
  GainReport r;
  r.rho_bk = spectral_radius(model.a + b * k);
  r.rho_lc = spectral_radius(model.a + l * c);
  r.rho_bklc = spectral_radius(model.a + b * k + l * c);
  const double bound = 1.0 - tol.stability_margin;
  r.ok = r.rho_bk < bound && r.rho_lc < bound && r.rho_bklc < bound;
  return r;
}

GainReport verify_gain_triple(const PlantModel& model, const GainSet& gains,
                              const Tolerance& tol) {
  if (gains.k_blocks.size() != model.b_blocks.size() ||
      gains.l_blocks.size() != model.c_blocks.size()) {
    throw DimensionError("verify_gain_triple: gain block counts differ from the plant");
  }
  return verify_gain_triple(model, gains.stacked_k(), gains.stacked_l(), tol);
}

bool verify_observer_lmis(const PlantModel& model, const Matrix& k, const Matrix& l,
                          const Matrix& q, const Matrix& r, const Tolerance& tol) {
  const Eigen::Index p = model.a.rows();
  const Matrix b = model.stacked_b();
  const Matrix c = model.stacked_c();
  if (q.rows() != p || q.cols() != p || r.rows() != c.rows() || r.cols() != p ||
      k.rows() != b.cols() || k.cols() != p || l.rows() != p || l.cols() != c.rows()) {
    return false;
  }
  if (!q.allFinite() || !r.allFinite() || !is_symmetric(q)) return false;
  if (!(min_symmetric_eigenvalue(q) > 0.0)) return false;

  auto block_lmi_holds = [&](const Matrix& m) {
    Matrix lmi(2 * p, 2 * p);
    lmi << q, m.transpose() * q + c.transpose() * r,
        q.transpose() * m + r.transpose() * c, q;
    return min_symmetric_eigenvalue(lmi) > 0.0;
  };
  if (!block_lmi_holds(model.a) || !block_lmi_holds(model.a + b * k)) return false;

  const Matrix implied = q.ldlt().solve(r.transpose());
  const double scale = 1.0 + l.cwiseAbs().maxCoeff();
  return (implied - l).cwiseAbs().maxCoeff() <= std::max(tol.fixpoint_tol, 1e-9) * scale;
}

ObserverCertificate observer_certificate(const PlantModel& model, const Matrix& k,
                                         const Matrix& l) {
  const Eigen::Index p = model.a.rows();
  const Matrix b = model.stacked_b();
  const Matrix c = model.stacked_c();
  const Matrix f1 = model.a + l * c;
  const Matrix f2 = model.a + b * k + l * c;
  if (!(spectral_radius(f1) < 1.0) || !(spectral_radius(f2) < 1.0)) return {};
  // Q - F^T Q F = I for each loop; a convex mix may serve both.
  const Matrix q1 = solve_discrete_lyapunov(f1.transpose(), Matrix::Identity(p, p));
  const Matrix q2 = solve_discrete_lyapunov(f2.transpose(), Matrix::Identity(p, p));
  for (int step = 0; step <= 20; ++step) {
    const double t = step / 20.0;
    const Matrix q = t * q1 + (1.0 - t) * q2;
    const Matrix r = l.transpose() * q;
    if (verify_observer_lmis(model, k, l, q, r)) return {q, r};
  }
  return {};
}

Matrix search_observer_gain(const PlantModel& model, const Matrix& k, int attempts,
                            std::uint64_t seed, const Tolerance& tol) {
  if (attempts < 1) throw InputError("search_observer_gain: attempts must be positive");
  const Matrix& a = model.a;
  const Matrix b = model.stacked_b();
  const Matrix c = model.stacked_c();
  const Eigen::Index p = a.rows();
  const Eigen::Index m = c.rows();
  if (k.rows() != b.cols() || k.cols() != p) {
    throw DimensionError("search_observer_gain: K must be (sum q_i) x p");
  }
  if (!is_detectable(a, c, tol)) {
    throw SynthesisError(
        "search_observer_gain: (A, C) is not detectable, no observer gain exists");
  }

  auto accept = [&](const Matrix& l) {
    return l.allFinite() && verify_gain_triple(model, k, l, tol).ok;
  };

  Matrix l = Matrix::Zero(p, m);
  if (accept(l)) return l;

  const CounterRng rng(seed);
  const bool observable = is_controllable(a.transpose(), c.transpose(), tol);
  std::uint64_t draw = 0;
  auto normal = [&](std::uint64_t stream) { return rng.normal(stream, draw++); };

  for (int attempt = 1; attempt < attempts; ++attempt) {
    Matrix candidate;
    try {
      if (observable && attempt % 2 == 1) {
        // Dual pole placement: (A^T + C^T L^T) has the requested spectrum.
        Vector v(m);
        for (Eigen::Index r = 0; r < m; ++r) v(r) = normal(1);
        if ((c.transpose() * v).norm() == 0.0) continue;
        const Matrix kd = heymann_feedback(a.transpose(), c.transpose(), v, tol);
        std::vector<double> poles(static_cast<std::size_t>(p));
        for (auto& pole : poles) {
          const double radius = 0.9 * rng.uniform(2, draw++);
          pole = rng.uniform(3, draw++) < 0.5 ? -radius : radius;
        }
        const Matrix g =
            ackermann_gain(a.transpose() + c.transpose() * kd, c.transpose() * v, poles);
        candidate = (kd + v * g).transpose();
      } else {
        // Steady-state Kalman predictor gain with random weights.
        Matrix gw(p, p), gv(m, m);
        for (Eigen::Index r = 0; r < p * p; ++r) gw.data()[r] = normal(4);
        for (Eigen::Index r = 0; r < m * m; ++r) gv.data()[r] = normal(5);
        const double ratio = std::pow(10.0, 4.0 * rng.uniform(6, draw++) - 2.0);
        const Matrix w = ratio * (gw * gw.transpose() + 1e-3 * Matrix::Identity(p, p));
        const Matrix v = gv * gv.transpose() + 1e-3 * Matrix::Identity(m, m);
        Matrix pcov = w;
        for (int it = 0; it < 5000; ++it) {
          const Matrix s = c * pcov * c.transpose() + v;
          const Matrix gain = a * pcov * c.transpose() * s.inverse();
          Matrix next = a * pcov * a.transpose() + w - gain * c * pcov * a.transpose();
          next = 0.5 * (next + next.transpose()).eval();
          const double change = (next - pcov).norm();
          pcov = next;
          if (change <= 1e-13 * (1.0 + pcov.norm())) break;
        }
        candidate = -a * pcov * c.transpose() * (c * pcov * c.transpose() + v).inverse();
      }
    } catch (const Error&) {
      continue;
    }
    if (accept(candidate)) return candidate;
  }
  throw SynthesisError("search_observer_gain: no stabilizing observer gain found in " +
                       std::to_string(attempts) + " attempts");
}

Matrix assembled_closed_loop(const PlantModel& model, const GainSet& gains) {
  const Eigen::Index p = model.a.rows();
  const int kappa = model.subcontrollers();
  const Matrix b = model.stacked_b();
  const Matrix bk = b * gains.stacked_k();
  const Matrix lc = gains.stacked_l() * model.stacked_c();

  Matrix out = Matrix::Zero((kappa + 1) * p, (kappa + 1) * p);
  out.block(0, 0, p, p) = model.a + bk;
  out.block(0, p, p, p) = bk;
  out.block(p, p, p, p) = model.a + lc;
  for (int j = 1; j < kappa; ++j) {
    const Matrix bjkj = model.b_blocks[j] * gains.k_blocks[j];
    out.block(0, (j + 1) * p, p, p) = bjkj;
    out.block(p, (j + 1) * p, p, p) = -bjkj;
    out.block((j + 1) * p, (j + 1) * p, p, p) = model.a + bk + lc;
  }
  return out;
}

Matrix networked_closed_loop(const PlantModel& model, const GainSet& gains) {
  const Eigen::Index p = model.a.rows();
  const int kappa = model.subcontrollers();
  const Matrix bk = model.stacked_b() * gains.stacked_k();
  const Matrix lc = gains.stacked_l() * model.stacked_c();

  Matrix out = Matrix::Zero((kappa + 1) * p, (kappa + 1) * p);
  out.block(0, 0, p, p) = model.a;
  for (int i = 0; i < kappa; ++i) {
    out.block(0, (i + 1) * p, p, p) = model.b_blocks[i] * gains.k_blocks[i];
    out.block((i + 1) * p, 0, p, p) = -lc;
    out.block((i + 1) * p, (i + 1) * p, p, p) = model.a + bk + lc;
  }
  return out;
}

}  // namespace netwm
