#include "scbf/simd/kernels.hpp"

#include <cmath>

namespace scbf::simd::scalar {

void se_kernel_row(std::span<const double> x, std::span<const double> columns,
                   std::size_t count, double sf2, double inv_two_el2,
                   std::span<double> out) {
  const std::size_t dim = x.size();
  for (std::size_t j = 0; j < count; ++j) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = x[k] - columns[k * count + j];
      d2 += d * d;
    }
    out[j] = sf2 * std::exp(-d2 * inv_two_el2);
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  double s = 0.0;
  for (std::size_t i = 0; i < a.size(); ++i) s += a[i] * b[i];
  return s;
}

}  // namespace scbf::simd::scalar
