#include "gada/kernels.hpp"

#include <cstdlib>
#include <cstring>

namespace gada::kernels {

// ============================================================================
// Scalar reference kernels
// ============================================================================

namespace scalar {

double dot(const double* a, const double* b, std::size_t n) {
  double acc = 0.0;
  for (std::size_t i = 0; i < n; ++i) acc += a[i] * b[i];
  return acc;
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
  for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matvec(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] = dot(a + r * cols, x, cols);
}

void matvec_add(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) y[r] += dot(a + r * cols, x, cols);
}

void matvec_t_add(const double* a, const double* x, double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(x[r], a + r * cols, y, cols);
}

void add_outer(double* a, const double* x, const double* y, std::size_t rows, std::size_t cols) {
  for (std::size_t r = 0; r < rows; ++r) axpy(x[r], y, a + r * cols, cols);
}

}  // namespace scalar

// ============================================================================
// Runtime dispatch
// ============================================================================

bool avx2_available() {
#if (defined(__x86_64__) || defined(_M_X64)) && (defined(__GNUC__) || defined(__clang__))
  return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
  return false;
#endif
}

double (*dot)(const double*, const double*, std::size_t) = scalar::dot;
void (*axpy)(double, const double*, double*, std::size_t) = scalar::axpy;
void (*matvec)(const double*, const double*, double*, std::size_t, std::size_t) = scalar::matvec;
void (*matvec_add)(const double*, const double*, double*, std::size_t, std::size_t) = scalar::matvec_add;
void (*matvec_t_add)(const double*, const double*, double*, std::size_t, std::size_t) = scalar::matvec_t_add;
void (*add_outer)(double*, const double*, const double*, std::size_t, std::size_t) = scalar::add_outer;

namespace {
Backend g_backend = Backend::kScalar;
}

void set_backend(Backend b) {
#if defined(__x86_64__) || defined(_M_X64)
  if (b == Backend::kAvx2 && avx2_available()) {
    dot = avx2::dot;
    axpy = avx2::axpy;
    matvec = avx2::matvec;
    matvec_add = avx2::matvec_add;
    matvec_t_add = avx2::matvec_t_add;
    add_outer = avx2::add_outer;
    g_backend = Backend::kAvx2;
    return;
  }
#endif
  dot = scalar::dot;
  axpy = scalar::axpy;
  matvec = scalar::matvec;
  matvec_add = scalar::matvec_add;
  matvec_t_add = scalar::matvec_t_add;
  add_outer = scalar::add_outer;
  g_backend = Backend::kScalar;
}

Backend active_backend() { return g_backend; }

const char* backend_name(Backend b) {
  return b == Backend::kAvx2 ? "avx2" : "scalar";
}

namespace {

struct DispatchInit {
  DispatchInit() {
    Backend pick = avx2_available() ? Backend::kAvx2 : Backend::kScalar;
    if (const char* env = std::getenv("GADA_KERNELS")) {
      if (std::strcmp(env, "scalar") == 0) pick = Backend::kScalar;
      if (std::strcmp(env, "avx2") == 0) pick = Backend::kAvx2;
    }
    set_backend(pick);
  }
};

const DispatchInit g_dispatch_init;

}  // namespace

}  // namespace gada::kernels
