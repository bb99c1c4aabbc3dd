#pragma once

#include <cmath>
#include <vector>

#include "hinf/linalg.hpp"
#include "hinf/rng.hpp"

namespace hinf::testing {

/// Random orthogonal matrix via Gram-Schmidt on a Gaussian matrix.
inline Mat random_orthogonal(std::size_t n, Rng& rng) {
    Mat q(n, n);
    for (std::size_t c = 0; c < n; ++c) {
        std::vector<double> v(n);
        for (auto& x : v) x = rng.normal();
        for (std::size_t prev = 0; prev < c; ++prev) {
            double proj = 0.0;
            for (std::size_t r = 0; r < n; ++r) proj += v[r] * q(r, prev);
            for (std::size_t r = 0; r < n; ++r) v[r] -= proj * q(r, prev);
        }
        double nrm = 0.0;
        for (double x : v) nrm += x * x;
        nrm = std::sqrt(nrm);
        for (std::size_t r = 0; r < n; ++r) q(r, c) = v[r] / nrm;
    }
    return q;
}

/// Random SPD matrix with eigenvalues log-uniform in [1/cond, 1] * scale.
inline Mat random_spd(std::size_t n, double cond, Rng& rng, double scale = 1.0) {
    Mat q = random_orthogonal(n, rng);
    std::vector<double> eig(n);
    eig[0] = scale;
    if (n > 1) eig[n - 1] = scale / cond;
    for (std::size_t i = 1; i + 1 < n; ++i)
        eig[i] = scale * std::exp(-std::log(cond) * rng.uniform());
    Mat a(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = 0; j < n; ++j) {
            double s = 0.0;
            for (std::size_t k = 0; k < n; ++k) s += q(i, k) * eig[k] * q(j, k);
            a(i, j) = s;
        }
    // Exact symmetry (the accumulation above is symmetric only to rounding).
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = 0.5 * (a(i, j) + a(j, i));
            a(i, j) = a(j, i) = v;
        }
    return a;
}

inline Vec random_vec(std::size_t n, Rng& rng, double lo = -1.0, double hi = 1.0) {
    std::vector<double> v(n);
    for (auto& x : v) x = rng.uniform(lo, hi);
    return Vec::from(std::move(v));
}

}  // namespace hinf::testing
