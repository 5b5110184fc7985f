#pragma once

// Controller and observer synthesis for watermark-compatible feedback: every
// subcontroller's private excitation must reach every output.

#include <cstdint>
#include <vector>

#include "netwm/linalg.h"
#include "netwm/model.h"

namespace netwm {

/// Heymann's lemma, constructively: for controllable (A, B) and b = B v != 0
/// returns K' such that (A + B K', b) is controllable.
///
/// Builds a Krylov-like chain x_1 = b, x_{k+1} = A x_k + B u_k, taking
/// u_k = 0 whenever A x_k already leaves span(x_1..x_k) and otherwise the
/// input direction with the largest component outside that span. K' maps
/// x_k to u_k (u_p = 0). The postcondition is re-checked before returning.
///
/// Throws SynthesisError when (A, B) is uncontrollable or the check fails and
/// InputError when B v vanishes.
Matrix heymann_feedback(const Matrix& a, const Matrix& b, const Vector& v,
                        const Tolerance& tol = {});

/// Multi-input Heymann construction for square full-rank B. Chains
/// x_1 = b_1/|b_1| through lambda^k b_{k+1}/|b_{k+1}| and back to
/// lambda^p b_1/|b_1|, solving each step for u_k and returning K = U X^{-1}.
/// Every eigenvalue of A + B K then has modulus |lambda| and each column b_i
/// alone controls the closed loop.
Matrix design_feedback_square(const Matrix& a, const Matrix& b, double lambda,
                              const Tolerance& tol = {});

struct SharedRangeDesign {
  Matrix k;           // stacked (sum q_i) x p feedback
  Vector v;           // input combination with B v in every range(B_i)
  Matrix k_heymann;   // K' before the stabilizing rank-one term
  Matrix g;           // 1 x p single-input pole-placement gain
};

/// Unit vector spanning part of the intersection of range(B_i); throws
/// SynthesisError when the intersection is {0}.
Vector shared_input_direction(const std::vector<Matrix>& b_blocks,
                              const Tolerance& tol = {});

/// Design for blocks whose ranges share a direction: v with B v in all
/// range(B_i), K' from heymann_feedback, G placing every pole of the
/// single-input pair (A + B K', B v) at pole_radius, K = K' + v G.
SharedRangeDesign design_feedback_shared_range(const Matrix& a,
                                               const std::vector<Matrix>& b_blocks,
                                               double pole_radius = 0.5,
                                               const Tolerance& tol = {});

/// Ackermann's formula for a single-input pair. Returns the row gain g with
/// A + b g having characteristic polynomial prod_k (z - poles[k]); complex
/// poles are not supported, so only real targets are accepted.
Matrix ackermann_gain(const Matrix& a, const Vector& b,
                      const std::vector<double>& poles);

/// Watermark lags for stacked feedback K. Entry (i, j) is the smallest
/// k <= p-1 with C_j (A+BK)^k B_i nonzero; throws ConditionViolation naming
/// the first pair for which no such k exists.
LagTable compute_watermark_lags(const Matrix& a, const std::vector<Matrix>& b_blocks,
                                const std::vector<Matrix>& c_blocks, const Matrix& k,
                                const Tolerance& tol = {});

struct GainReport {
  double rho_bk = 0.0;
  double rho_lc = 0.0;
  double rho_bklc = 0.0;
  bool ok = false;
};

/// Spectral radii of A+BK, A+LC and A+BK+LC; ok iff all are below 1 - margin.
GainReport verify_gain_triple(const PlantModel& model, const GainSet& gains,
                              const Tolerance& tol = {});
/// Same check from stacked gains.
GainReport verify_gain_triple(const PlantModel& model, const Matrix& k,
                              const Matrix& l, const Tolerance& tol = {});

/// Certificate check for the observer LMI pair
///   [Q, M^T Q + C^T R; Q^T M + R^T C, Q] > 0  for M = A and M = A+BK,
/// with Q > 0 and L = Q^{-1} R^T matching the supplied L.
bool verify_observer_lmis(const PlantModel& model, const Matrix& k, const Matrix& l,
                          const Matrix& q, const Matrix& r, const Tolerance& tol = {});

/// LMI certificate (Q, R) for a given gain triple, built from the Lyapunov
/// solutions of both observer loops; empty when the triple is not stable.
struct ObserverCertificate {
  Matrix q;
  Matrix r;
};
ObserverCertificate observer_certificate(const PlantModel& model, const Matrix& k,
                                         const Matrix& l);

/// Randomized, verified search for a stacked observer gain L with A+LC and
/// A+BK+LC Schur stable. Tries L = 0, then alternates dual pole-placement
/// candidates on (A^T, C^T) and steady-state Kalman gains with random
/// weights. Deterministic given seed. Throws SynthesisError on failure.
Matrix search_observer_gain(const PlantModel& model, const Matrix& k, int attempts,
                            std::uint64_t seed, const Tolerance& tol = {});

/// Noise-free closed loop in the coordinates (x, delta_1, d_2, ..., d_kappa):
/// block upper triangular with A+BK, A+LC and kappa-1 copies of A+BK+LC on
/// the diagonal.
Matrix assembled_closed_loop(const PlantModel& model, const GainSet& gains);

/// Noise-free closed loop in the original coordinates (x, xhat_1..xhat_kappa).
Matrix networked_closed_loop(const PlantModel& model, const GainSet& gains);

}  // namespace netwm
