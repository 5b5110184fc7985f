#include <immintrin.h>

#include <cstddef>

#include "netwm/kernels.h"

namespace netwm::kernels::avx2 {

void add_outer(std::span<const double> a, std::span<const double> b,
               std::span<double> acc) {
  const std::size_t nb = b.size();
  const std::size_t vec_end = nb - nb % 4;
  for (std::size_t r = 0; r < a.size(); ++r) {
    const __m256d ar = _mm256_set1_pd(a[r]);
    double* row = acc.data() + r * nb;
    std::size_t c = 0;
    for (; c < vec_end; c += 4) {
      const __m256d prod = _mm256_mul_pd(ar, _mm256_loadu_pd(b.data() + c));
      _mm256_storeu_pd(row + c, _mm256_add_pd(_mm256_loadu_pd(row + c), prod));
    }
    for (; c < nb; ++c) row[c] = row[c] + a[r] * b[c];
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  const std::size_t vec_end = n - n % 4;
  __m256d sum = _mm256_setzero_pd();
  for (std::size_t k = 0; k < vec_end; k += 4) {
    sum = _mm256_add_pd(sum, _mm256_mul_pd(_mm256_loadu_pd(a.data() + k),
                                           _mm256_loadu_pd(b.data() + k)));
  }
  alignas(32) double lanes[4];
  _mm256_store_pd(lanes, sum);
  double total = (lanes[0] + lanes[1]) + (lanes[2] + lanes[3]);
  for (std::size_t k = vec_end; k < n; ++k) total += a[k] * b[k];
  return total;
}

}  // namespace netwm::kernels::avx2
