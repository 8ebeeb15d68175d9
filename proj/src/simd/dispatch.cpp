#include <atomic>

#include "scbf/simd/kernels.hpp"

namespace scbf::simd {
namespace {

bool detect_avx2() {
#if defined(SCBF_HAVE_AVX2) && (defined(__x86_64__) || defined(__i386__))
  __builtin_cpu_init();
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

Isa initial_isa() { return detect_avx2() ? Isa::avx2 : Isa::scalar; }

std::atomic<Isa>& active() {
  static std::atomic<Isa> isa{initial_isa()};
  return isa;
}

}  // namespace

std::string_view isa_name(Isa isa) {
  return isa == Isa::avx2 ? "avx2" : "scalar";
}

bool avx2_available() {
  static const bool available = detect_avx2();
  return available;
}

Isa active_isa() { return active().load(std::memory_order_relaxed); }

void set_active_isa(Isa isa) {
  if (isa == Isa::avx2 && !avx2_available()) isa = Isa::scalar;
  active().store(isa, std::memory_order_relaxed);
}

void se_kernel_row(std::span<const double> x, std::span<const double> columns,
                   std::size_t count, double sf2, double inv_two_el2,
                   std::span<double> out) {
#if defined(SCBF_HAVE_AVX2)
  if (active_isa() == Isa::avx2) {
    avx2::se_kernel_row(x, columns, count, sf2, inv_two_el2, out);
    return;
  }
#endif
  scalar::se_kernel_row(x, columns, count, sf2, inv_two_el2, out);
}

double dot(std::span<const double> a, std::span<const double> b) {
#if defined(SCBF_HAVE_AVX2)
  if (active_isa() == Isa::avx2) return avx2::dot(a, b);
#endif
  return scalar::dot(a, b);
}

#if !defined(SCBF_HAVE_AVX2)
// Keep the symbols linkable on builds without the AVX2 translation unit.
namespace avx2 {
void se_kernel_row(std::span<const double> x, std::span<const double> columns,
                   std::size_t count, double sf2, double inv_two_el2,
                   std::span<double> out) {
  scalar::se_kernel_row(x, columns, count, sf2, inv_two_el2, out);
}
double dot(std::span<const double> a, std::span<const double> b) {
  return scalar::dot(a, b);
}
}  // namespace avx2
#endif

}  // namespace scbf::simd
