#include "hinf/finite_diff.hpp"

#include <cmath>

namespace hinf {

Vec finite_diff_grad(const ScalarFn& f, const Vec& point) {
    const std::size_t n = point.len();
    std::vector<double> x(point.data(), point.data() + n);
    std::vector<double> g(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double h = 1e-6 * (1.0 + std::fabs(x[i]));
        const double xi = x[i];
        x[i] = xi + h;
        const double fp = f(cspan(x.data(), n));
        x[i] = xi - h;
        const double fm = f(cspan(x.data(), n));
        x[i] = xi;
        require(std::isfinite(fp) && std::isfinite(fm), errc::numeric, "NonFinite",
                "function evaluation returned NaN/Inf in finite_diff");
        g[i] = (fp - fm) / (2.0 * h);
    }
    return Vec::from(std::move(g));
}

double finite_diff_check(const ScalarFn& f, const Vec& point, const Vec& analytic) {
    require(analytic.len() == point.len(), errc::numeric, "DimMismatch",
            "finite_diff_check analytic gradient length");
    const Vec fd = finite_diff_grad(f, point);
    double worst = 0.0;
    for (std::size_t i = 0; i < point.len(); ++i) {
        const double denom = std::max(1.0, std::fabs(analytic[i]));
        worst = std::max(worst, std::fabs(fd[i] - analytic[i]) / denom);
    }
    return worst;
}

}  // namespace hinf
