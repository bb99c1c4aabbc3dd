#include "hinf/kernels.hpp"

namespace hinf::kernels::detail {

double dot_scalar(const double* a, const double* b, std::size_t n) {
    double s = 0.0;
    for (std::size_t i = 0; i < n; ++i) s += a[i] * b[i];
    return s;
}

void axpy_scalar(double alpha, const double* x, double* y, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) y[i] += alpha * x[i];
}

void matvec_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) y[r] = dot_scalar(a + r * cols, x, cols);
}

void matvec_t_acc_scalar(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(x[r], a + r * cols, y, cols);
}

void ger_scalar(double* a, std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y) {
    for (std::size_t r = 0; r < rows; ++r) axpy_scalar(alpha * x[r], y, a + r * cols, cols);
}

void relu_forward_scalar(const double* z, double* out, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) out[i] = z[i] > 0.0 ? z[i] : 0.0;
}

void relu_backward_scalar(const double* z, const double* grad_a, double* grad_z, std::size_t n) {
    for (std::size_t i = 0; i < n; ++i) grad_z[i] = z[i] > 0.0 ? grad_a[i] : 0.0;
}

}  // namespace hinf::kernels::detail
