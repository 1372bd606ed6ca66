#include "metalab/simd.hpp"

#include <cmath>

namespace metalab::simd {

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void scal(double alpha, double* x, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) x[i] *= alpha;
}

double sum(const double* x, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += x[i];
  return acc;
}

double max_abs(const double* x, std::size_t n) {
  double m = 0.0;
  for (std::size_t i = 0; i < n; ++i) {
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

}  // namespace scalar

namespace {

struct KernelTable {
  double (*dot)(const double*, const double*, std::size_t);
  void (*axpy)(double, const double*, double*, std::size_t);
  void (*scal)(double, double*, std::size_t);
  double (*sum)(const double*, std::size_t);
  double (*max_abs)(const double*, std::size_t);
  void (*matvec)(const double*, const double*, double*, std::size_t,
                 std::size_t);
  const char* name;
};

KernelTable select_kernels() {
  if (avx2::available()) {
    return {avx2::dot, avx2::axpy, avx2::scal, avx2::sum,
            avx2::max_abs, avx2::matvec, "avx2"};
  }
  return {scalar::dot, scalar::axpy, scalar::scal, scalar::sum,
          scalar::max_abs, scalar::matvec, "scalar"};
}

const KernelTable& kernels() {
  static const KernelTable table = select_kernels();
  return table;
}

}  // namespace

double dot(const double* a, const double* b, std::size_t n) {
  return kernels().dot(a, b, n);
}
void axpy(double alpha, const double* x, double* y, std::size_t n) {
  kernels().axpy(alpha, x, y, n);
}
void scal(double alpha, double* x, std::size_t n) {
  kernels().scal(alpha, x, n);
}
double sum(const double* x, std::size_t n) { return kernels().sum(x, n); }
double max_abs(const double* x, std::size_t n) {
  return kernels().max_abs(x, n);
}
void matvec(const double* a, const double* x, double* y, std::size_t rows,
            std::size_t cols) {
  kernels().matvec(a, x, y, rows, cols);
}
const char* active_kernels() { return kernels().name; }

}  // namespace metalab::simd
