#pragma once

#include <cstddef>
#include <string>

// Dense arithmetic kernels behind the network and score hot loops.
//
// Every kernel has a scalar reference implementation and (on x86) an AVX2/FMA
// variant. The active backend is picked once at startup from CPUID and can be
// forced with force_backend() or the HINF_KERNELS environment variable
// ("scalar" / "avx2"). Variants are equivalence-tested against the scalar
// reference; they may differ by FMA rounding, so comparisons are tolerance
// based, not bitwise. Within one process the selection is fixed, which keeps
// seeded runs reproducible.

namespace hinf::kernels {

enum class Backend { scalar, avx2 };

Backend active_backend();
const char* backend_name();

// Force a backend (throws if unsupported on this CPU). Intended for tests.
void force_backend(Backend b);

// y . x over n entries.
double dot(const double* a, const double* b, std::size_t n);

// y += alpha * x.
void axpy(double alpha, const double* x, double* y, std::size_t n);

// y = A x, A row-major rows x cols.
void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);

// y += A^T x, A row-major rows x cols, y has cols entries.
void matvec_t_acc(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);

// A += alpha * x y^T, A row-major rows x cols.
void ger(double* a, std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y);

// out[i] = max(z[i], 0).
void relu_forward(const double* z, double* out, std::size_t n);

// grad_z[i] = grad_a[i] * (z[i] > 0); derivative at exactly 0 is taken as 0.
void relu_backward(const double* z, const double* grad_a, double* grad_z, std::size_t n);

namespace detail {
double dot_scalar(const double* a, const double* b, std::size_t n);
void axpy_scalar(double alpha, const double* x, double* y, std::size_t n);
void matvec_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void matvec_t_acc_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void ger_scalar(double* a, std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y);
void relu_forward_scalar(const double* z, double* out, std::size_t n);
void relu_backward_scalar(const double* z, const double* grad_a, double* grad_z, std::size_t n);

#if defined(__x86_64__) || defined(_M_X64)
double dot_avx2(const double* a, const double* b, std::size_t n);
void axpy_avx2(double alpha, const double* x, double* y, std::size_t n);
void matvec_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void matvec_t_acc_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y);
void ger_avx2(double* a, std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y);
void relu_forward_avx2(const double* z, double* out, std::size_t n);
void relu_backward_avx2(const double* z, const double* grad_a, double* grad_z, std::size_t n);
#endif
}  // namespace detail

}  // namespace hinf::kernels
