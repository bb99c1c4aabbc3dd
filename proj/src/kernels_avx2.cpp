// AVX2/FMA variants. This translation unit is compiled with -mavx2 -mfma;
// callers must gate on the runtime CPUID check in kernels.cpp.

#include "hinf/kernels.hpp"

#if defined(__x86_64__) || defined(_M_X64)

#include <immintrin.h>

namespace hinf::kernels::detail {

static inline double hsum256(__m256d v) {
    __m128d lo = _mm256_castpd256_pd128(v);
    __m128d hi = _mm256_extractf128_pd(v, 1);
    lo = _mm_add_pd(lo, hi);
    __m128d sh = _mm_unpackhi_pd(lo, lo);
    return _mm_cvtsd_f64(_mm_add_sd(lo, sh));
}

double dot_avx2(const double* a, const double* b, std::size_t n) {
    __m256d acc0 = _mm256_setzero_pd();
    __m256d acc1 = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 8 <= n; i += 8) {
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
        acc1 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i + 4), _mm256_loadu_pd(b + i + 4), acc1);
    }
    for (; i + 4 <= n; i += 4)
        acc0 = _mm256_fmadd_pd(_mm256_loadu_pd(a + i), _mm256_loadu_pd(b + i), acc0);
    double s = hsum256(_mm256_add_pd(acc0, acc1));
    for (; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_avx2(double alpha, const double* x, double* y, std::size_t n) {
    const __m256d va = _mm256_set1_pd(alpha);
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d vy = _mm256_loadu_pd(y + i);
        vy = _mm256_fmadd_pd(va, _mm256_loadu_pd(x + i), vy);
        _mm256_storeu_pd(y + i, vy);
    }
    for (; i < n; ++i) y[i] += alpha * x[i];
}

void matvec_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot_avx2(a + r * cols, x, cols);
}

void matvec_t_acc_avx2(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(x[r], a + r * cols, y, cols);
}

void ger_avx2(double* a, std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy_avx2(alpha * x[r], y, a + r * cols, cols);
}

void relu_forward_avx2(const double* z, double* out, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4)
        _mm256_storeu_pd(out + i, _mm256_max_pd(_mm256_loadu_pd(z + i), zero));
    for (; i < n; ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void relu_backward_avx2(const double* z, const double* grad_a, double* grad_z, std::size_t n) {
    const __m256d zero = _mm256_setzero_pd();
    std::size_t i = 0;
    for (; i + 4 <= n; i += 4) {
        __m256d mask = _mm256_cmp_pd(_mm256_loadu_pd(z + i), zero, _CMP_GT_OQ);
        _mm256_storeu_pd(grad_z + i, _mm256_and_pd(mask, _mm256_loadu_pd(grad_a + i)));
    }
    for (; i < n; ++i) grad_z[i] = z[i] > 0.0 ? grad_a[i] : 0.0;
}

}  // namespace hinf::kernels::detail

#endif  // x86_64
