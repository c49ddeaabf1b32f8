#pragma once

#include <cstddef>

// Small dense double-precision kernels behind runtime CPU dispatch.
//
// The scalar namespace is the reference semantics. Vector backends are
// allowed to reassociate reductions and contract multiply-add to FMA, so they
// agree with the scalar kernels to a few ulps rather than bit-for-bit; the
// equivalence tests pin that tolerance. The active backend is chosen once at
// startup from CPUID and can be forced with the GADA_KERNELS environment
// variable ("scalar" or "avx2"). Matrices are row-major.

namespace gada::kernels {

enum class Backend { kScalar, kAvx2 };

namespace scalar {
double dot(const double* a, const double* b, std::size_t n);
// y += alpha * x
void axpy(double alpha, const double* x, double* y, std::size_t n);
// y = A x               (A: rows x cols, x: cols, y: rows)
void matvec(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);
// y += A x
void matvec_add(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);
// y += A^T x            (x: rows, y: cols)
void matvec_t_add(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);
// A += x y^T            (x: rows, y: cols)
void add_outer(double* a, const double* x, const double* y, std::size_t rows, std::size_t cols);
}  // namespace scalar

#if defined(__x86_64__) || defined(_M_X64)
namespace avx2 {
double dot(const double* a, const double* b, std::size_t n);
void axpy(double alpha, const double* x, double* y, std::size_t n);
void matvec(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);
void matvec_add(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);
void matvec_t_add(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols);
void add_outer(double* a, const double* x, const double* y, std::size_t rows, std::size_t cols);
}  // namespace avx2
#endif

// Dispatched entry points. Bound during static initialization; rebind with
// set_backend() (used by the equivalence tests).
extern double (*dot)(const double*, const double*, std::size_t);
extern void (*axpy)(double, const double*, double*, std::size_t);
extern void (*matvec)(const double*, const double*, double*, std::size_t, std::size_t);
extern void (*matvec_add)(const double*, const double*, double*, std::size_t, std::size_t);
extern void (*matvec_t_add)(const double*, const double*, double*, std::size_t, std::size_t);
extern void (*add_outer)(double*, const double*, const double*, std::size_t, std::size_t);

bool avx2_available();
Backend active_backend();
const char* backend_name(Backend b);
void set_backend(Backend b);

}  // namespace gada::kernels
