// Compiled with -mavx2 -mfma. Nothing in this file may run unless
// avx2_available() returned true.
#include "scbf/simd/kernels.hpp"

#include <immintrin.h>

#include <cmath>

namespace scbf::simd::avx2 {
namespace {

// exp() on four doubles: Cody-Waite range reduction by ln 2 followed by the
// Cephes (2,3) Pade form 1 + 2 r P(r^2) / (Q(r^2) - r P(r^2)). Inputs below
// the normal range flush to zero.
inline __m256d exp_pd(__m256d x) {
  const __m256d hi = _mm256_set1_pd(709.0);
  const __m256d lo = _mm256_set1_pd(-708.3964185322641);
  const __m256d log2e = _mm256_set1_pd(1.4426950408889634073599);
  const __m256d c1 = _mm256_set1_pd(6.93145751953125e-1);
  const __m256d c2 = _mm256_set1_pd(1.42860682030941723212e-6);
  const __m256d p0 = _mm256_set1_pd(1.26177193074810590878e-4);
  const __m256d p1 = _mm256_set1_pd(3.02994407707441961300e-2);
  const __m256d p2 = _mm256_set1_pd(9.99999999999999999910e-1);
  const __m256d q0 = _mm256_set1_pd(3.00198505138664455042e-6);
  const __m256d q1 = _mm256_set1_pd(2.52448340349684104192e-3);
  const __m256d q2 = _mm256_set1_pd(2.27265548208155028766e-1);
  const __m256d q3 = _mm256_set1_pd(2.00000000000000000009e0);
  const __m256d one = _mm256_set1_pd(1.0);
  const __m256d two = _mm256_set1_pd(2.0);

  const __m256d underflow = _mm256_cmp_pd(x, lo, _CMP_LT_OQ);
  x = _mm256_min_pd(_mm256_max_pd(x, lo), hi);

  const __m256d n = _mm256_round_pd(_mm256_mul_pd(x, log2e),
                                    _MM_FROUND_TO_NEAREST_INT | _MM_FROUND_NO_EXC);
  x = _mm256_fnmadd_pd(n, c1, x);
  x = _mm256_fnmadd_pd(n, c2, x);

  const __m256d xx = _mm256_mul_pd(x, x);
  const __m256d px =
      _mm256_mul_pd(x, _mm256_fmadd_pd(_mm256_fmadd_pd(p0, xx, p1), xx, p2));
  const __m256d qx = _mm256_fmadd_pd(
      _mm256_fmadd_pd(_mm256_fmadd_pd(q0, xx, q1), xx, q2), xx, q3);
  __m256d r = _mm256_div_pd(px, _mm256_sub_pd(qx, px));
  r = _mm256_fmadd_pd(two, r, one);

  // Scale by 2^n through the exponent field; n is within [-1022, 1023].
  __m256i e = _mm256_cvtepi32_epi64(_mm256_cvtpd_epi32(n));
  e = _mm256_slli_epi64(_mm256_add_epi64(e, _mm256_set1_epi64x(1023)), 52);
  r = _mm256_mul_pd(r, _mm256_castsi256_pd(e));
  return _mm256_blendv_pd(r, _mm256_setzero_pd(), underflow);
}

}  // namespace

void se_kernel_row(std::span<const double> x, std::span<const double> columns,
                   std::size_t count, double sf2, double inv_two_el2,
                   std::span<double> out) {
  const std::size_t dim = x.size();
  const __m256d vsf2 = _mm256_set1_pd(sf2);
  const __m256d vscale = _mm256_set1_pd(-inv_two_el2);
  std::size_t j = 0;
  for (; j + 4 <= count; j += 4) {
    __m256d d2 = _mm256_setzero_pd();
    for (std::size_t k = 0; k < dim; ++k) {
      const __m256d xk = _mm256_set1_pd(x[k]);
      const __m256d col = _mm256_loadu_pd(columns.data() + k * count + j);
      const __m256d d = _mm256_sub_pd(xk, col);
      d2 = _mm256_fmadd_pd(d, d, d2);
    }
    const __m256d kv = _mm256_mul_pd(vsf2, exp_pd(_mm256_mul_pd(d2, vscale)));
    _mm256_storeu_pd(out.data() + j, kv);
  }
  for (; j < count; ++j) {
    double d2 = 0.0;
    for (std::size_t k = 0; k < dim; ++k) {
      const double d = x[k] - columns[k * count + j];
      d2 = std::fma(d, d, d2);
    }
    out[j] = sf2 * std::exp(-d2 * inv_two_el2);
  }
}

double dot(std::span<const double> a, std::span<const double> b) {
  const std::size_t n = a.size();
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i),
                           _mm256_loadu_pd(b.data() + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i + 4),
                           _mm256_loadu_pd(b.data() + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a.data() + i),
                           _mm256_loadu_pd(b.data() + i), acc0);
  }
  const __m256d acc = _mm256_add_pd(acc0, acc1);
  const __m128d lo = _mm256_castpd256_pd128(acc);
  const __m128d hi = _mm256_extractf128_pd(acc, 1);
  const __m128d s2 = _mm_add_pd(lo, hi);
  double s = _mm_cvtsd_f64(_mm_add_sd(s2, _mm_unpackhi_pd(s2, s2)));
  for (; i < n; ++i) s = std::fma(a[i], b[i], s);
  return s;
}

}  // namespace scbf::simd::avx2
