#include <cstddef>

#include "netwm/kernels.h"

namespace netwm::kernels::scalar {

void add_outer(std::span<const double> a, std::span<const double> b,
               std::span<double> acc) {
  const std::size_t nb = b.size();
  for (std::size_t r = 0; r < a.size(); ++r) {
    const double ar = a[r];
    double* row = acc.data() + r * nb;
    for (std::size_t c = 0; c < nb; ++c) {
      row[c] = row[c] + ar * b[c];
    }
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double sum = 0.0;
  for (std::size_t k = 0; k < a.size(); ++k) sum += a[k] * b[k];
  return sum;
}

}  // namespace netwm::kernels::scalar
