// Compiled with -mavx2 -mfma. Only reached after a CPUID check.
#include <immintrin.h>

#include "tiltrotor/kernels.hpp"

namespace tiltrotor::kernels {

namespace {

inline double hsum(__m256d v) {
  const __m128d lo = _mm256_castpd256_pd128(v);
  const __m128d hi = _mm256_extractf128_pd(v, 1);
  const __m128d s = _mm_add_pd(lo, hi);
  return _mm_cvtsd_f64(_mm_add_sd(s, _mm_unpackhi_pd(s, s)));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(y + i, _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), _mm256_loadu_pd(y + i)));
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

// Four dot products of xr against consecutive weight rows, reduced into one vector.
inline __m256d dot4(const double* xr, const double* w0, std::size_t in) {
  const double* w1 = w0 + in;
  const double* w2 = w1 + in;
  const double* w3 = w2 + in;
  __m256d a0 = _mm256_setzero_pd(), a1 = _mm256_setzero_pd();
  __m256d a2 = _mm256_setzero_pd(), a3 = _mm256_setzero_pd();
  std::size_t k = 0;
  for (; k + 4 <= in; k += 4) {
    const __m256d xv = _mm256_loadu_pd(xr + k);
    a0 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w0 + k), a0);
    a1 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w1 + k), a1);
    a2 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w2 + k), a2);
    a3 = _mm256_fmadd_pd(xv, _mm256_loadu_pd(w3 + k), a3);
  }
  const __m256d t0 = _mm256_hadd_pd(a0, a1);
  const __m256d t1 = _mm256_hadd_pd(a2, a3);
  __m256d sum = _mm256_add_pd(_mm256_permute2f128_pd(t0, t1, 0x20),
                              _mm256_permute2f128_pd(t0, t1, 0x31));
  if (k < in) {
    alignas(32) double tail[4] = {0.0, 0.0, 0.0, 0.0};
    for (std::size_t j = k; j < in; ++j) {
      tail[0] += xr[j] * w0[j];
      tail[1] += xr[j] * w1[j];
      tail[2] += xr[j] * w2[j];
      tail[3] += xr[j] * w3[j];
    }
    sum = _mm256_add_pd(sum, _mm256_load_pd(tail));
  }
  return sum;
}

void affine_forward_avx2(const double* x, const double* w, const double* b, double* y,
                         AffineShape s) {
  for (std::size_t r = 0; r < s.batch; ++r) {
    const double* xr = x + r * s.in;
    double* yr = y + r * s.out;
    std::size_t o = 0;
    for (; o + 4 <= s.out; o += 4) {
      _mm256_storeu_pd(yr + o, _mm256_add_pd(_mm256_loadu_pd(b + o), dot4(xr, w + o * s.in, s.in)));
    }
    for (; o < s.out; ++o) yr[o] = b[o] + dot_avx2(xr, w + o * s.in, s.in);
  }
}

void affine_backward_input_avx2(const double* dy, const double* w, double* dx, AffineShape s) {
  for (std::size_t r = 0; r < s.batch; ++r) {
    double* dxr = dx + r * s.in;
    for (std::size_t i = 0; i < s.in; ++i) dxr[i] = 0.0;
    const double* dyr = dy + r * s.out;
    for (std::size_t o = 0; o < s.out; ++o) axpy_avx2(dyr[o], w + o * s.in, dxr, s.in);
  }
}

void affine_backward_params_avx2(const double* dy, const double* x, double* dw, double* db,
                                 AffineShape s) {
  for (std::size_t r = 0; r < s.batch; ++r) {
    const double* dyr = dy + r * s.out;
    const double* xr = x + r * s.in;
    for (std::size_t o = 0; o < s.out; ++o) {
      db[o] += dyr[o];
      axpy_avx2(dyr[o], xr, dw + o * s.in, s.in);
    }
  }
}

}  // namespace

const KernelTable* avx2_table() {
  static const KernelTable t{Backend::avx2,          "avx2",
                             dot_avx2,               axpy_avx2,
                             affine_forward_avx2,    affine_backward_input_avx2,
                             affine_backward_params_avx2};
  return &t;
}

}  // namespace tiltrotor::kernels
