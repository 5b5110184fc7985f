#include <cstdlib>
#include <string>

#include "netwm/errors.h"
#include "netwm/kernels.h"

namespace netwm::kernels {
namespace {

struct Table {
  Isa isa;
  void (*add_outer)(std::span<const double>, std::span<const double>,
                    std::span<double>);
  double (*dot)(std::span<const double>, std::span<const double>);
};

Table make_table() {
  // NETWM_ISA=scalar forces the reference kernels (useful for A/B runs).
  const char* forced = std::getenv("NETWM_ISA");
  const bool force_scalar = forced != nullptr && std::string(forced) == "scalar";
#ifdef NETWM_HAVE_AVX2_KERNELS
  if (!force_scalar && isa_supported(Isa::kAvx2)) {
    return {Isa::kAvx2, &avx2::add_outer, &avx2::dot};
  }
#else
  (void)force_scalar;
#endif
  return {Isa::kScalar, &scalar::add_outer, &scalar::dot};
}

const Table& table() {
  static const Table t = make_table();
  return t;
}

}  // namespace

bool isa_supported(Isa isa) {
  switch (isa) {
    case Isa::kScalar:
      return true;
    case Isa::kAvx2:
#ifdef NETWM_HAVE_AVX2_KERNELS
      return __builtin_cpu_supports("avx2");
#else
      return false;
#endif
  }
  return false;
}

Isa active_isa() { return table().isa; }

std::string_view isa_name(Isa isa) {
  return isa == Isa::kAvx2 ? "avx2" : "scalar";
}

void add_outer(std::span<const double> a, std::span<const double> b,
               std::span<double> acc) {
  if (acc.size() != a.size() * b.size()) {
    throw DimensionError("kernels::add_outer: accumulator size mismatch");
  }
  table().add_outer(a, b, acc);
}

double dot(std::span<const double> a, std::span<const double> b) {
  if (a.size() != b.size()) {
    throw DimensionError("kernels::dot: operand sizes differ");
  }
  return table().dot(a, b);
}

}  // namespace netwm::kernels
