#pragma once

#include <cstddef>

// Small dense kernels used by the spectral solver and the Monte Carlo
// engine. Scalar reference implementations always exist; an AVX2+FMA
// variant is selected at runtime when the CPU supports it. The two
// variants are equivalence-tested against each other.

namespace metalab::simd {

// Dispatched entry points.
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);  // y += alpha*x
void scal(double alpha, double* x, std::size_t n);
double sum(const double* x, std::size_t n);
double max_abs(const double* x, std::size_t n);
// y = A*x, A row-major (rows x cols)
void matvec(const double* a, const double* x, double* y, std::size_t rows,
            std::size_t cols);

// Name of the kernel set in use: "avx2" or "scalar".
const char* active_kernels();

// Reference implementations (always compiled, used directly by tests).
namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scal(double alpha, double* x, std::size_t n);
double sum(const double* x, std::size_t n);
double max_abs(const double* x, std::size_t n);
void matvec(const double* a, const double* x, double* y, std::size_t rows,
            std::size_t cols);
}  // namespace scalar

namespace avx2 {
bool available();
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void scal(double alpha, double* x, std::size_t n);
double sum(const double* x, std::size_t n);
double max_abs(const double* x, std::size_t n);
void matvec(const double* a, const double* x, double* y, std::size_t rows,
            std::size_t cols);
}  // namespace avx2

}  // namespace metalab::simd
