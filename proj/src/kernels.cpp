#include "hinf/kernels.hpp"

#include <cstdlib>
#include <cstring>
#include <mutex>
#include <stdexcept>

namespace hinf::kernels {

namespace {

struct Vtable {
    double (*dot)(const double*, const double*, std::size_t);
    void (*axpy)(double, const double*, double*, std::size_t);
    void (*matvec)(const double*, std::size_t, std::size_t, const double*, double*);
    void (*matvec_t_acc)(const double*, std::size_t, std::size_t, const double*, double*);
    void (*ger)(double*, std::size_t, std::size_t, double, const double*, const double*);
    void (*relu_forward)(const double*, double*, std::size_t);
    void (*relu_backward)(const double*, const double*, double*, std::size_t);
};

constexpr Vtable kScalar = {
    detail::dot_scalar,          detail::axpy_scalar, detail::matvec_scalar,
    detail::matvec_t_acc_scalar, detail::ger_scalar,  detail::relu_forward_scalar,
    detail::relu_backward_scalar,
};

#if defined(__x86_64__) || defined(_M_X64)
constexpr Vtable kAvx2 = {
    detail::dot_avx2,          detail::axpy_avx2, detail::matvec_avx2,
    detail::matvec_t_acc_avx2, detail::ger_avx2,  detail::relu_forward_avx2,
    detail::relu_backward_avx2,
};
#endif

bool cpu_has_avx2() {
#if defined(__x86_64__) || defined(_M_X64)
    return __builtin_cpu_supports("avx2") && __builtin_cpu_supports("fma");
#else
    return false;
#endif
}

Backend g_backend = Backend::scalar;
const Vtable* g_vt = &kScalar;
std::once_flag g_init;

void apply(Backend b) {
    switch (b) {
        case Backend::scalar:
            g_vt = &kScalar;
            break;
        case Backend::avx2:
#if defined(__x86_64__) || defined(_M_X64)
            if (!cpu_has_avx2()) throw std::runtime_error("avx2 backend not supported on this CPU");
            g_vt = &kAvx2;
            break;
#else
            throw std::runtime_error("avx2 backend not available in this build");
#endif
    }
    g_backend = b;
}

void init_once() {
    std::call_once(g_init, [] {
        Backend b = cpu_has_avx2() ? Backend::avx2 : Backend::scalar;
        if (const char* env = std::getenv("HINF_KERNELS")) {
            if (std::strcmp(env, "scalar") == 0) b = Backend::scalar;
            else if (std::strcmp(env, "avx2") == 0 && cpu_has_avx2()) b = Backend::avx2;
        }
        apply(b);
    });
}

}  // namespace

Backend active_backend() {
    init_once();
    return g_backend;
}

const char* backend_name() {
    init_once();
    return g_backend == Backend::avx2 ? "avx2" : "scalar";
}

void force_backend(Backend b) {
    init_once();
    apply(b);
}

double dot(const double* a, const double* b, std::size_t n) {
    init_once();
    return g_vt->dot(a, b, n);
}

void axpy(double alpha, const double* x, double* y, std::size_t n) {
    init_once();
    g_vt->axpy(alpha, x, y, n);
}

void matvec(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    init_once();
    g_vt->matvec(a, rows, cols, x, y);
}

void matvec_t_acc(const double* a, std::size_t rows, std::size_t cols, const double* x, double* y) {
    init_once();
    g_vt->matvec_t_acc(a, rows, cols, x, y);
}

void ger(double* a, std::size_t rows, std::size_t cols, double alpha, const double* x, const double* y) {
    init_once();
    g_vt->ger(a, rows, cols, alpha, x, y);
}

void relu_forward(const double* z, double* out, std::size_t n) {
    init_once();
    g_vt->relu_forward(z, out, n);
}

void relu_backward(const double* z, const double* grad_a, double* grad_z, std::size_t n) {
    init_once();
    g_vt->relu_backward(z, grad_a, grad_z, n);
}

}  // namespace hinf::kernels
