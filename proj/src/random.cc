#include "netwm/random.h"

#include <cmath>
#include <numbers>

#include "netwm/errors.h"

namespace netwm {
namespace {

constexpr std::uint32_t kMul0 = 0xD2511F53u;
constexpr std::uint32_t kMul1 = 0xCD9E8D57u;
constexpr std::uint32_t kWeyl0 = 0x9E3779B9u;
constexpr std::uint32_t kWeyl1 = 0xBB67AE85u;

inline void mulhilo(std::uint32_t a, std::uint32_t b, std::uint32_t& hi,
                    std::uint32_t& lo) {
  const std::uint64_t prod = static_cast<std::uint64_t>(a) * b;
  hi = static_cast<std::uint32_t>(prod >> 32);
  lo = static_cast<std::uint32_t>(prod);
}

inline double to_open_unit(std::uint32_t hi, std::uint32_t lo) {
  const std::uint64_t bits =
      ((static_cast<std::uint64_t>(hi) << 32) | lo) >> 11;
  return (static_cast<double>(bits) + 0.5) * 0x1.0p-53;
}

}  // namespace

std::array<std::uint32_t, 4> philox4x32_10(std::array<std::uint32_t, 4> ctr,
                                           std::array<std::uint32_t, 2> key) {
  for (int round = 0; round < 10; ++round) {
    if (round > 0) {
      key[0] += kWeyl0;
      key[1] += kWeyl1;
    }
    std::uint32_t hi0, lo0, hi1, lo1;
    mulhilo(kMul0, ctr[0], hi0, lo0);
    mulhilo(kMul1, ctr[2], hi1, lo1);
    ctr = {hi1 ^ ctr[1] ^ key[0], lo1, hi0 ^ ctr[3] ^ key[1], lo0};
  }
  return ctr;
}

std::array<std::uint32_t, 4> CounterRng::block(std::uint64_t stream,
                                               std::uint64_t block_index) const {
  return philox4x32_10(
      {static_cast<std::uint32_t>(block_index),
       static_cast<std::uint32_t>(block_index >> 32),
       static_cast<std::uint32_t>(stream), static_cast<std::uint32_t>(stream >> 32)},
      {static_cast<std::uint32_t>(seed_), static_cast<std::uint32_t>(seed_ >> 32)});
}

double CounterRng::uniform(std::uint64_t stream, std::uint64_t index) const {
  const auto out = block(stream, index / 2);
  return index % 2 == 0 ? to_open_unit(out[0], out[1])
                        : to_open_unit(out[2], out[3]);
}

double CounterRng::normal(std::uint64_t stream, std::uint64_t index) const {
  const auto out = block(stream, index / 2);
  const double u1 = to_open_unit(out[0], out[1]);
  const double u2 = to_open_unit(out[2], out[3]);
  const double radius = std::sqrt(-2.0 * std::log(u1));
  const double angle = 2.0 * std::numbers::pi * u2;
  return index % 2 == 0 ? radius * std::cos(angle) : radius * std::sin(angle);
}

void CounterRng::normals(std::uint64_t stream, std::uint64_t first,
                         Vector& out) const {
  for (Eigen::Index c = 0; c < out.size(); ++c) {
    out(c) = normal(stream, first + static_cast<std::uint64_t>(c));
  }
}

std::uint64_t derive_seed(std::uint64_t seed, std::uint64_t salt) {
  // Stream id 2^63 is reserved for seed derivation.
  const auto out = philox4x32_10(
      {static_cast<std::uint32_t>(salt), static_cast<std::uint32_t>(salt >> 32), 0u,
       0x80000000u},
      {static_cast<std::uint32_t>(seed), static_cast<std::uint32_t>(seed >> 32)});
  return (static_cast<std::uint64_t>(out[0]) << 32) | out[1];
}

Matrix covariance_factor(const Matrix& cov) {
  require_square(cov, "covariance_factor");
  require_finite(cov, "covariance_factor");
  if (!is_symmetric(cov)) {
    throw InputError("covariance_factor: covariance is not symmetric");
  }
  const Eigen::Index n = cov.rows();
  if (n == 0 || cov.isZero(0.0)) return Matrix::Zero(n, n);
  const Eigen::LLT<Matrix> llt(cov);
  if (llt.info() == Eigen::Success) return llt.matrixL();

  const Eigen::SelfAdjointEigenSolver<Matrix> es(cov);
  const Vector& lambda = es.eigenvalues();
  const double floor = -1e-10 * (1.0 + lambda.cwiseAbs().maxCoeff());
  if (lambda.minCoeff() < floor) {
    throw InputError("covariance_factor: covariance is not positive semidefinite");
  }
  return es.eigenvectors() * lambda.cwiseMax(0.0).cwiseSqrt().asDiagonal();
}

}  // namespace netwm
