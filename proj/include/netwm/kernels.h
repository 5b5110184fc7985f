#pragma once

// Inner-loop arithmetic used by the Monte Carlo accumulators and the
// likelihood statistic. Each kernel has a portable scalar reference and, on
// x86-64, an AVX2 variant; the variant is picked once at runtime from CPUID.
//
// add_outer is element-wise (one multiply and one add per output entry, no
// fused multiply-add), so every variant is bit-identical to the scalar one.
// dot reorders its reduction and agrees only to round-off.

#include <span>
#include <string_view>

namespace netwm::kernels {

enum class Isa { kScalar, kAvx2 };

/// acc[r * b.size() + c] += a[r] * b[c]. In column-major terms, acc viewed as
/// a b.size() x a.size() matrix M receives M += b a^T.
/// acc.size() must equal a.size() * b.size().
void add_outer(std::span<const double> a, std::span<const double> b,
               std::span<double> acc);

/// Sum of a[k] * b[k]; sizes must match.
double dot(std::span<const double> a, std::span<const double> b);

/// Variant picked for the dispatching entry points above.
Isa active_isa();
std::string_view isa_name(Isa isa);
/// True when the running CPU can execute the given variant.
bool isa_supported(Isa isa);

namespace scalar {
void add_outer(std::span<const double> a, std::span<const double> b,
               std::span<double> acc);
double dot(std::span<const double> a, std::span<const double> b);
}  // namespace scalar

#if defined(__x86_64__) || defined(__i386__)
#define NETWM_HAVE_AVX2_KERNELS 1
namespace avx2 {
void add_outer(std::span<const double> a, std::span<const double> b,
               std::span<double> acc);
double dot(std::span<const double> a, std::span<const double> b);
}  // namespace avx2
#endif

}  // namespace netwm::kernels
