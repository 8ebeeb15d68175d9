#pragma once
// Data-parallel inner loops of GP inference: the squared-exponential kernel
// row k(x, X_j), j = 0..M-1, and dense dot products.
//
// Training inputs are laid out structure-of-arrays: `columns` holds `dim`
// contiguous arrays of length `count` (column-major M x dim). Every entry
// point has a scalar reference implementation; an AVX2+FMA variant is
// compiled separately and selected once at runtime when the CPU supports
// it. The variants agree to a few ulp, not bit-for-bit.

#include <cstddef>
#include <span>
#include <string_view>

namespace scbf::simd {

enum class Isa { scalar, avx2 };

std::string_view isa_name(Isa isa);

// True if the AVX2 variant was compiled in and the CPU supports AVX2 and FMA.
bool avx2_available();

// The variant used by the dispatching entry points below.
Isa active_isa();

// Pins the dispatcher to `isa` (for benchmarking and equivalence checks).
// Requesting avx2 on a machine without it falls back to scalar.
void set_active_isa(Isa isa);

// out[j] = sf2 * exp(-|x - X_j|^2 * inv_two_el2)
void se_kernel_row(std::span<const double> x, std::span<const double> columns,
                   std::size_t count, double sf2, double inv_two_el2,
                   std::span<double> out);

double dot(std::span<const double> a, std::span<const double> b);

namespace scalar {
void se_kernel_row(std::span<const double> x, std::span<const double> columns,
                   std::size_t count, double sf2, double inv_two_el2,
                   std::span<double> out);
double dot(std::span<const double> a, std::span<const double> b);
}  // namespace scalar

namespace avx2 {
// Only callable when avx2_available() is true.
void se_kernel_row(std::span<const double> x, std::span<const double> columns,
                   std::size_t count, double sf2, double inv_two_el2,
                   std::span<double> out);
double dot(std::span<const double> a, std::span<const double> b);
}  // namespace avx2

}  // namespace scbf::simd
