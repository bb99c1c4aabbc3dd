#pragma once

#include <cmath>
#include <vector>

#include "hinf/common.hpp"
#include "hinf/normal.hpp"

// Forward-mode differentiation.
//
// Dual carries a value and a block of directional derivatives, one per seed
// direction, so a single evaluation of a function of theta yields the full
// Jacobian row against all seeded directions. Dual2 additionally carries the
// dense Hessian block, updated with exact product/chain rules, which is what
// the custom-loss path uses for second derivatives.
//
// ReLU's derivative at exactly 0 is defined as 0 (one-sided), matching the
// convention used throughout the network code.

namespace hinf {

// double overloads so generic functor code works unchanged with plain values.
inline double relu(double x) { return x > 0.0 ? x : 0.0; }
inline double logistic(double x) { return 1.0 / (1.0 + std::exp(-x)); }
inline double softplus(double x) { return x > 30.0 ? x : std::log1p(std::exp(x)); }
inline double reciprocal(double x) { return 1.0 / x; }

struct Dual {
    double v = 0.0;
    std::vector<double> t;  // one tangent per seed direction

    Dual() = default;
    Dual(double value, std::size_t ndir) : v(value), t(ndir, 0.0) {}
    static Dual constant(double value, std::size_t ndir) { return Dual(value, ndir); }
    static Dual seeded(double value, std::size_t ndir, std::size_t dir, double scale = 1.0) {
        Dual d(value, ndir);
        d.t[dir] = scale;
        return d;
    }
    std::size_t ndir() const { return t.size(); }
};

namespace detail {
inline void chk(const Dual& a, const Dual& b) {
    require(a.t.size() == b.t.size(), errc::internal, "DimMismatch", "Dual tangent counts differ");
}
}  // namespace detail

inline Dual operator+(const Dual& a, const Dual& b) {
    detail::chk(a, b);
    Dual r(a.v + b.v, a.ndir());
    for (std::size_t i = 0; i < r.ndir(); ++i) r.t[i] = a.t[i] + b.t[i];
    return r;
}
inline Dual operator-(const Dual& a, const Dual& b) {
    detail::chk(a, b);
    Dual r(a.v - b.v, a.ndir());
    for (std::size_t i = 0; i < r.ndir(); ++i) r.t[i] = a.t[i] - b.t[i];
    return r;
}
inline Dual operator-(const Dual& a) {
    Dual r(-a.v, a.ndir());
    for (std::size_t i = 0; i < r.ndir(); ++i) r.t[i] = -a.t[i];
    return r;
}
inline Dual operator*(const Dual& a, const Dual& b) {
    detail::chk(a, b);
    Dual r(a.v * b.v, a.ndir());
    for (std::size_t i = 0; i < r.ndir(); ++i) r.t[i] = a.t[i] * b.v + a.v * b.t[i];
    return r;
}
inline Dual operator+(const Dual& a, double c) {
    Dual r = a;
    r.v += c;
    return r;
}
inline Dual operator+(double c, const Dual& a) { return a + c; }
inline Dual operator-(const Dual& a, double c) { return a + (-c); }
inline Dual operator-(double c, const Dual& a) { return (-a) + c; }
inline Dual operator*(const Dual& a, double c) {
    Dual r(a.v * c, a.ndir());
    for (std::size_t i = 0; i < r.ndir(); ++i) r.t[i] = a.t[i] * c;
    return r;
}
inline Dual operator*(double c, const Dual& a) { return a * c; }

/// Apply unary f with derivative f1 at a.v.
inline Dual unary(const Dual& a, double fv, double f1) {
    Dual r(fv, a.ndir());
    for (std::size_t i = 0; i < r.ndir(); ++i) r.t[i] = f1 * a.t[i];
    return r;
}

inline Dual reciprocal(const Dual& a) { return unary(a, 1.0 / a.v, -1.0 / (a.v * a.v)); }
inline Dual operator/(const Dual& a, const Dual& b) { return a * reciprocal(b); }
inline Dual operator/(const Dual& a, double c) { return a * (1.0 / c); }
inline Dual operator/(double c, const Dual& a) { return c * reciprocal(a); }

inline Dual exp(const Dual& a) {
    double e = std::exp(a.v);
    return unary(a, e, e);
}
inline Dual log(const Dual& a) { return unary(a, std::log(a.v), 1.0 / a.v); }
inline Dual sqrt(const Dual& a) {
    double s = std::sqrt(a.v);
    return unary(a, s, 0.5 / s);
}
inline Dual tanh(const Dual& a) {
    double th = std::tanh(a.v);
    return unary(a, th, 1.0 - th * th);
}
inline Dual relu(const Dual& a) { return a.v > 0.0 ? a : unary(a, 0.0, 0.0); }
inline Dual logistic(const Dual& a) {
    double g = 1.0 / (1.0 + std::exp(-a.v));
    return unary(a, g, g * (1.0 - g));
}
inline Dual softplus(const Dual& a) {
    double sp = a.v > 30.0 ? a.v : std::log1p(std::exp(a.v));
    double g = 1.0 / (1.0 + std::exp(-a.v));
    return unary(a, sp, g);
}
inline Dual norm_cdf(const Dual& a) { return unary(a, norm_cdf(a.v), norm_pdf(a.v)); }
inline Dual norm_pdf(const Dual& a) {
    double p = norm_pdf(a.v);
    return unary(a, p, -a.v * p);
}

// ---------------------------------------------------------------------------

struct Dual2 {
    double v = 0.0;
    std::vector<double> g;  // gradient, n entries
    std::vector<double> h;  // Hessian, row-major n x n, kept symmetric
    std::size_t n = 0;

    Dual2() = default;
    Dual2(double value, std::size_t nvars) : v(value), g(nvars, 0.0), h(nvars * nvars, 0.0), n(nvars) {}
    static Dual2 constant(double value, std::size_t nvars) { return Dual2(value, nvars); }
    static Dual2 var(double value, std::size_t nvars, std::size_t i) {
        Dual2 d(value, nvars);
        d.g[i] = 1.0;
        return d;
    }
};

inline Dual2 operator+(const Dual2& a, const Dual2& b) {
    Dual2 r(a.v + b.v, a.n);
    for (std::size_t i = 0; i < a.n; ++i) r.g[i] = a.g[i] + b.g[i];
    for (std::size_t i = 0; i < a.n * a.n; ++i) r.h[i] = a.h[i] + b.h[i];
    return r;
}
inline Dual2 operator-(const Dual2& a, const Dual2& b) {
    Dual2 r(a.v - b.v, a.n);
    for (std::size_t i = 0; i < a.n; ++i) r.g[i] = a.g[i] - b.g[i];
    for (std::size_t i = 0; i < a.n * a.n; ++i) r.h[i] = a.h[i] - b.h[i];
    return r;
}
inline Dual2 operator-(const Dual2& a) {
    Dual2 r(-a.v, a.n);
    for (std::size_t i = 0; i < a.n; ++i) r.g[i] = -a.g[i];
    for (std::size_t i = 0; i < a.n * a.n; ++i) r.h[i] = -a.h[i];
    return r;
}
inline Dual2 operator*(const Dual2& a, const Dual2& b) {
    Dual2 r(a.v * b.v, a.n);
    for (std::size_t i = 0; i < a.n; ++i) r.g[i] = a.g[i] * b.v + a.v * b.g[i];
    for (std::size_t i = 0; i < a.n; ++i)
        for (std::size_t j = 0; j < a.n; ++j)
            r.h[i * a.n + j] = a.h[i * a.n + j] * b.v + a.v * b.h[i * a.n + j] +
                               a.g[i] * b.g[j] + b.g[i] * a.g[j];
    return r;
}
inline Dual2 operator+(const Dual2& a, double c) {
    Dual2 r = a;
    r.v += c;
    return r;
}
inline Dual2 operator+(double c, const Dual2& a) { return a + c; }
inline Dual2 operator-(const Dual2& a, double c) { return a + (-c); }
inline Dual2 operator-(double c, const Dual2& a) { return (-a) + c; }
inline Dual2 operator*(const Dual2& a, double c) {
    Dual2 r(a.v * c, a.n);
    for (std::size_t i = 0; i < a.n; ++i) r.g[i] = a.g[i] * c;
    for (std::size_t i = 0; i < a.n * a.n; ++i) r.h[i] = a.h[i] * c;
    return r;
}
inline Dual2 operator*(double c, const Dual2& a) { return a * c; }

/// Chain rule for unary f: grad = f1 g, hess = f1 H + f2 g g^T.
inline Dual2 unary(const Dual2& a, double fv, double f1, double f2) {
    Dual2 r(fv, a.n);
    for (std::size_t i = 0; i < a.n; ++i) r.g[i] = f1 * a.g[i];
    for (std::size_t i = 0; i < a.n; ++i)
        for (std::size_t j = 0; j < a.n; ++j)
            r.h[i * a.n + j] = f1 * a.h[i * a.n + j] + f2 * a.g[i] * a.g[j];
    return r;
}

inline Dual2 reciprocal(const Dual2& a) {
    double iv = 1.0 / a.v;
    return unary(a, iv, -iv * iv, 2.0 * iv * iv * iv);
}
inline Dual2 operator/(const Dual2& a, const Dual2& b) { return a * reciprocal(b); }
inline Dual2 operator/(const Dual2& a, double c) { return a * (1.0 / c); }
inline Dual2 operator/(double c, const Dual2& a) { return c * reciprocal(a); }

inline Dual2 exp(const Dual2& a) {
    double e = std::exp(a.v);
    return unary(a, e, e, e);
}
inline Dual2 log(const Dual2& a) {
    double iv = 1.0 / a.v;
    return unary(a, std::log(a.v), iv, -iv * iv);
}
inline Dual2 sqrt(const Dual2& a) {
    double s = std::sqrt(a.v);
    return unary(a, s, 0.5 / s, -0.25 / (s * a.v));
}
inline Dual2 tanh(const Dual2& a) {
    double th = std::tanh(a.v);
    double d = 1.0 - th * th;
    return unary(a, th, d, -2.0 * th * d);
}
inline Dual2 relu(const Dual2& a) {
    return a.v > 0.0 ? a : unary(a, 0.0, 0.0, 0.0);
}
inline Dual2 logistic(const Dual2& a) {
    double g = 1.0 / (1.0 + std::exp(-a.v));
    double d = g * (1.0 - g);
    return unary(a, g, d, d * (1.0 - 2.0 * g));
}
inline Dual2 softplus(const Dual2& a) {
    double sp = a.v > 30.0 ? a.v : std::log1p(std::exp(a.v));
    double g = 1.0 / (1.0 + std::exp(-a.v));
    return unary(a, sp, g, g * (1.0 - g));
}
inline Dual2 norm_cdf(const Dual2& a) {
    double p = norm_pdf(a.v);
    return unary(a, norm_cdf(a.v), p, -a.v * p);
}
inline Dual2 norm_pdf(const Dual2& a) {
    double p = norm_pdf(a.v);
    return unary(a, p, -a.v * p, (a.v * a.v - 1.0) * p);
}

}  // namespace hinf
