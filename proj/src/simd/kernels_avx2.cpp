#include "metalab/simd.hpp"

// AVX2+FMA variants. This translation unit is compiled with -mavx2 -mfma
// on x86-64; availability is still checked at runtime before dispatch so
// the binary stays safe on older CPUs.

#if defined(__x86_64__) || defined(_M_X64)
#define METALAB_X86 1
#else
#define METALAB_X86 0
#endif

#if METALAB_X86
#include <immintrin.h>
#endif

#include <cmath>

namespace metalab::simd::avx2 {

#if METALAB_X86

bool available() {
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
}

namespace {

inline double hsum(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_add_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_add_sd(lo, swapped));
}

inline double hmax(__m256d v) {
  __m128d lo = _mm256_castpd256_pd128(v);
  __m128d hi = _mm256_extractf128_pd(v, 1);
  lo = _mm_max_pd(lo, hi);
  __m128d swapped = _mm_unpackhi_pd(lo, lo);
  return _mm_cvtsd_f64(_mm_max_sd(lo, swapped));
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  __m256d acc0 = _mm256_setzero_pd();
  __m256d acc1 = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 8 <= n; i += 8) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
    acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4),
                           _mm256_loadu_pd(b + i + 4), acc1);
  }
  for (; i + 4 <= n; i += 4) {
    acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i),
                           acc0);
  }
  double acc = hsum(_mm256_add_pd(acc0, acc1));
  for (; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    __m256d vy = _mm256_loadu_pd(y + i);
    vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
    _mm256_storeu_pd(y + i, vy);
  }
  for (; i < n; ++i) y[i] += alpha * x[i];
}

void scal(double alpha, double* x, std::size_t n) {
  __m256d va = _mm256_set1_pd(alpha);
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    _mm256_storeu_pd(x + i, _mm256_mul_pd(va, _mm256_loadu_pd(x + i)));
  }
  for (; i < n; ++i) x[i] *= alpha;
}

double sum(const double* x, std::size_t n) {
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) acc = _mm256_add_pd(acc, _mm256_loadu_pd(x + i));
  double s = hsum(acc);
  for (; i < n; ++i) s += x[i];
  return s;
}

double max_abs(const double* x, std::size_t n) {
  const __m256d mask = _mm256_set1_pd(-0.0);
  __m256d acc = _mm256_setzero_pd();
  std::size_t i = 0;
  for (; i + 4 <= n; i += 4) {
    acc = _mm256_max_pd(acc, _mm256_andnot_pd(mask, _mm256_loadu_pd(x + i)));
  }
  double m = hmax(acc);
  for (; i < n; ++i) {
    double v = std::fabs(x[i]);
    if (v > m) m = v;
  }
  return m;
}

void matvec(const double* a, const double* x, double* y, std::size_t rows,
            std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) {
    y[r] = dot(a + r * cols, x, cols);
  }
}

#else  // !METALAB_X86

bool available() { return false; }
double dot(const double* a, const double* b, std::size_t n) {
  return scalar::dot(a, b, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  scalar::axpy(alpha, x, y, n);
}
void scal(double alpha, double* x, std::size_t n) { scalar::scal(alpha, x, n); }
double sum(const double* x, std::size_t n) { return scalar::sum(x, n); }
double max_abs(const double* x, std::size_t n) {
  return scalar::max_abs(x, n);
}
void matvec(const double* a, const double* x, double* y, std::size_t rows,
            std::size_t cols) {
  scalar::matvec(a, x, y, rows, cols);
}

#endif

}  // namespace metalab::simd::avx2
