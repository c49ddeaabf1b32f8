// AVX2 + FMA kernel variants. This translation unit is compiled with
// -mavx2 -mfma; callers reach it only through the dispatch table after the
// CPUID check in kernels.cpp.

#include "gada/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace gada::kernels::avx2 {

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
  }
  if (i + 4 <= n) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    i += 4;
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  const __m256d av = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d yv = _mm256_loadu_pd(y + i);
    yv = _mm256_fmadd_pd(av, _mm256_loadu_pd(x + i), yv);
    _mm256_storeu_pd(y + i, yv);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

namespace {

// Four rows at a time: independent accumulator chains hide FMA latency and
// the x loads are shared across rows.
inline void matvec4(const double* a, const double* x, double* y, std::size_t cols,
                    std::size_t stride) {
  const double* r0 = a;
  const double* r1 = a + stride;
  const double* r2 = a + 2 * stride;
  const double* r3 = a + 3 * stride;
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  __m256d acc2 = _mm256_setzero_pd();
  __m256d acc3 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= cols; i += 4) {
    const __m256d xv = _mm256_loadu_pd(x + i);
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(r0 + i), xv, acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(r1 + i), xv, acc1);
    acc2 = _mm256_fmadd_pd(_mm256_loadu_pd(r2 + i), xv, acc2);
    acc3 = _mm256_fmadd_pd(_mm256_loadu_pd(r3 + i), xv, acc3);
  }
  y[0] = hsum(acc0);
  y[1] = hsum(acc1);
  y[2] = hsum(acc2);
  y[3] = hsum(acc3);
  for (; i < cols; ++i) {
    y[0] += r0[i] * x[i];
    y[1] += r1[i] * x[i];
    y[2] += r2[i] * x[i];
    y[3] += r3[i] * x[i];
  }
}

}  // namespace

void matvec(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) matvec4(a + r * cols, x, y + r, cols, cols);
  for (; r < rows; ++r) y[r] = dot(a + r * cols, x, cols);
}

void matvec_add(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    double block[4];
    matvec4(a + r * cols, x, block, cols, cols);
    y[r] += block[0];
    y[r + 1] += block[1];
    y[r + 2] += block[2];
    y[r + 3] += block[3];
  }
  for (; r < rows; ++r) y[r] += dot(a + r * cols, x, cols);
}

void matvec_t_add(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols) {
  std::size_t r = 0;
  for (; r + 4 <= rows; r += 4) {
    const double* r0 = a + r * cols;
    const double* r1 = r0 + cols;
    const double* r2 = r1 + cols;
    const double* r3 = r2 + cols;
    const __m256d x0 = _mm256_set1_pd(x[r]);
    const __m256d x1 = _mm256_set1_pd(x[r + 1]);
    const __m256d x2 = _mm256_set1_pd(x[r + 2]);
    const __m256d x3 = _mm256_set1_pd(x[r + 3]);
    std::size_t i = 0;
    for (; i + 4 <= cols; i += 4) {
      __m256d yv = _mm256_loadu_pd(y + i);
      yv = _mm256_fmadd_pd(_mm256_loadu_pd(r0 + i), x0, yv);
      yv = _mm256_fmadd_pd(_mm256_loadu_pd(r1 + i), x1, yv);
      yv = _mm256_fmadd_pd(_mm256_loadu_pd(r2 + i), x2, yv);
      yv = _mm256_fmadd_pd(_mm256_loadu_pd(r3 + i), x3, yv);
      _mm256_storeu_pd(y + i, yv);
    }
    for (; i < cols; ++i) {
      y[i] += r0[i] * x[r] + r1[i] * x[r + 1] + r2[i] * x[r + 2] + r3[i] * x[r + 3];
    }
  }
  for (; r < rows; ++r) axpy(x[r], a + r * cols, y, cols);
}

void add_outer(double* a, const double* x, const double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(x[r], y, a + r * cols, cols);
}

}  // namespace gada::kernels::avx2

#endif  // x86_64
