#pragma once

// Counter-based Gaussian noise. Every draw is a pure function of
// (seed, stream, index), so sources never share state and a run can be
// replayed or split across workers without changing a single bit.

#include <array>
#include <cstdint>

#include "netwm/linalg.h"

namespace netwm {

/// Philox4x32 with 10 rounds (Salmon et al., SC'11).
std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key);

class CounterRng {
 public:
  explicit CounterRng(std::uint64_t seed) : seed_(seed) {}

  std::uint64_t seed() const { return seed_; }

  /// Uniform on the open interval (0, 1).
  double uniform(std::uint64_t stream, std::uint64_t index) const;

  /// Standard normal; consecutive even/odd indices share one Box-Muller pair.
  double normal(std::uint64_t stream, std::uint64_t index) const;

  /// Fills out[c] = normal(stream, first + c).
  void normals(std::uint64_t stream, std::uint64_t first, Vector& out) const;

 private:
  std::array<std::uint32_t, 4> block(std::uint64_t stream,
                                     std::uint64_t block_index) const;

  std::uint64_t seed_;
};

/// Derives an independent child seed, e.g. one per calibration chunk.
std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt);

/// Returns F with F F^T = cov for a symmetric PSD covariance. Cholesky when
/// cov is positive definite, otherwise a clipped eigen-factor. Throws
/// InputError for asymmetric or clearly indefinite input.
Matrix covariance_factor(const Matrix& cov);

}  // namespace netwm
