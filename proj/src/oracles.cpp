#include "hinf/oracles.hpp"

#include <cmath>

namespace hinf::oracles {

double aipw(double y, double t, double theta1, double theta2, double p) {
    require(p > 0.0 && p < 1.0, errc::numeric, "DegenerateDesign",
            "aipw needs a propensity strictly inside (0,1)");
    const double resid_full = y - theta1 - theta2 * t;
    return theta2 + t * resid_full / p - (1.0 - t) * (y - theta1) / (1.0 - p);
}

namespace {

// Plain Gauss-Jordan inverse; small matrices only, kept local on purpose.
Mat invert_dense(const Mat& a) {
    const std::size_t n = a.rows();
    Mat work = a;
    Mat inv = Mat::identity(n);
    for (std::size_t col = 0; col < n; ++col) {
        std::size_t piv = col;
        for (std::size_t r = col + 1; r < n; ++r)
            if (std::fabs(work(r, col)) > std::fabs(work(piv, col))) piv = r;
        require(std::fabs(work(piv, col)) > 1e-12, errc::numeric, "DegenerateDesign",
                "singular conditional variance matrix");
        if (piv != col)
            for (std::size_t c = 0; c < n; ++c) {
                std::swap(work(piv, c), work(col, c));
                std::swap(inv(piv, c), inv(col, c));
            }
        const double d = work(col, col);
        for (std::size_t c = 0; c < n; ++c) {
            work(col, c) /= d;
            inv(col, c) /= d;
        }
        for (std::size_t r = 0; r < n; ++r) {
            if (r == col) continue;
            const double f = work(r, col);
            if (f == 0.0) continue;
            for (std::size_t c = 0; c < n; ++c) {
                work(r, c) -= f * work(col, c);
                inv(r, c) -= f * inv(col, c);
            }
        }
    }
    return inv;
}

}  // namespace

Vec graham_pinto(double y, cspan t, double theta1, cspan theta2, cspan e, const Mat& v) {
    const std::size_t q = t.size();
    require(theta2.size() == q && e.size() == q && v.rows() == q && v.cols() == q, errc::numeric,
            "DimMismatch", "graham_pinto slope dimensions disagree");
    double resid = y - theta1;
    for (std::size_t k = 0; k < q; ++k) resid -= theta2[k] * t[k];
    Mat vinv = invert_dense(v);
    std::vector<double> out(q);
    for (std::size_t i = 0; i < q; ++i) {
        double corr = 0.0;
        for (std::size_t j = 0; j < q; ++j) corr += vinv(i, j) * (t[j] - e[j]);
        out[i] = theta2[i] + corr * resid;
    }
    return Vec::from(std::move(out));
}

double grid_fixed_point(cspan theta, double delta0, double delta_r, double r_max, cspan tstar,
                        std::size_t rate, double step) {
    auto gap = [&](double r) {
        double u = theta[rate] * r;
        for (std::size_t j = 0; j < theta.size(); ++j)
            if (j != rate) u += theta[j] * tstar[j];
        const double g = 1.0 / (1.0 + std::exp(-u));
        const double d = 1.0 / (1.0 + std::exp(-(delta0 + delta_r * r)));
        return r - (1.0 + r * (1.0 - g) * theta[rate]) / (d * delta_r);
    };
    double prev = gap(step);
    for (double r = 2.0 * step; r <= r_max + 0.5 * step; r += step) {
        const double cur = gap(r);
        if (prev < 0.0 && cur >= 0.0) return r - 0.5 * step;
        prev = cur;
    }
    return -1.0;
}

}  // namespace hinf::oracles
