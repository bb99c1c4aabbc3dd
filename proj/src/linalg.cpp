#include "hinf/linalg.hpp"

#include <cmath>
#include <limits>

#include "hinf/kernels.hpp"

namespace hinf {

namespace {
void check_finite(const std::vector<double>& d, const char* what) {
    for (double v : d)
        require(std::isfinite(v), errc::numeric, "NonFinite",
                std::string(what) + " entry is NaN or Inf");
}
}  // namespace

Vec::Vec(std::size_t len, double fill) : d_(len, fill) {
    require(len > 0, errc::internal, "EmptyVec", "Vec length must be positive");
    validate();
}

Vec::Vec(std::initializer_list<double> vals) : d_(vals) {
    require(!d_.empty(), errc::internal, "EmptyVec", "Vec length must be positive");
    validate();
}

Vec Vec::from(std::vector<double> vals) {
    Vec v;
    v.d_ = std::move(vals);
    require(!v.d_.empty(), errc::internal, "EmptyVec", "Vec length must be positive");
    v.validate();
    return v;
}

void Vec::validate() const { check_finite(d_, "Vec"); }

double Vec::inf_norm() const noexcept {
    double m = 0.0;
    for (double v : d_) m = std::max(m, std::fabs(v));
    return m;
}

Mat::Mat(std::size_t rows, std::size_t cols, double fill)
    : rows_(rows), cols_(cols), d_(rows * cols, fill) {
    require(rows > 0 && cols > 0, errc::internal, "EmptyMat", "Mat dims must be positive");
    validate();
}

Mat Mat::from(std::size_t rows, std::size_t cols, std::vector<double> vals) {
    require(rows > 0 && cols > 0, errc::internal, "EmptyMat", "Mat dims must be positive");
    require(vals.size() == rows * cols, errc::internal, "DimMismatch",
            "Mat::from data length does not equal rows*cols");
    Mat m;
    m.rows_ = rows;
    m.cols_ = cols;
    m.d_ = std::move(vals);
    m.validate();
    return m;
}

Mat Mat::identity(std::size_t n) {
    Mat m(n, n, 0.0);
    for (std::size_t i = 0; i < n; ++i) m(i, i) = 1.0;
    return m;
}

void Mat::validate() const { check_finite(d_, "Mat"); }

Vec Mat::matvec(const Vec& x) const {
    require(x.len() == cols_, errc::numeric, "DimMismatch", "matvec dims");
    std::vector<double> y(rows_);
    kernels::matvec(d_.data(), rows_, cols_, x.data(), y.data());
    return Vec::from(std::move(y));
}

Vec Mat::matvec_t(const Vec& x) const {
    require(x.len() == rows_, errc::numeric, "DimMismatch", "matvec_t dims");
    std::vector<double> y(cols_, 0.0);
    kernels::matvec_t_acc(d_.data(), rows_, cols_, x.data(), y.data());
    return Vec::from(std::move(y));
}

double Mat::max_abs() const noexcept {
    double m = 0.0;
    for (double v : d_) m = std::max(m, std::fabs(v));
    return m;
}

double Mat::max_asymmetry() const noexcept {
    double m = 0.0;
    for (std::size_t i = 0; i < rows_; ++i)
        for (std::size_t j = i + 1; j < cols_; ++j)
            m = std::max(m, std::fabs((*this)(i, j) - (*this)(j, i)));
    return m;
}

Vec operator+(const Vec& a, const Vec& b) {
    require(a.len() == b.len(), errc::numeric, "DimMismatch", "Vec +");
    std::vector<double> r(a.len());
    for (std::size_t i = 0; i < a.len(); ++i) r[i] = a[i] + b[i];
    return Vec::from(std::move(r));
}

Vec operator-(const Vec& a, const Vec& b) {
    require(a.len() == b.len(), errc::numeric, "DimMismatch", "Vec -");
    std::vector<double> r(a.len());
    for (std::size_t i = 0; i < a.len(); ++i) r[i] = a[i] - b[i];
    return Vec::from(std::move(r));
}

Vec operator*(double s, const Vec& a) {
    std::vector<double> r(a.len());
    for (std::size_t i = 0; i < a.len(); ++i) r[i] = s * a[i];
    return Vec::from(std::move(r));
}

double dot(const Vec& a, const Vec& b) {
    require(a.len() == b.len(), errc::numeric, "DimMismatch", "dot");
    return kernels::dot(a.data(), b.data(), a.len());
}

Mat outer(const Vec& a, const Vec& b) {
    Mat m(a.len(), b.len());
    for (std::size_t i = 0; i < a.len(); ++i)
        for (std::size_t j = 0; j < b.len(); ++j) m(i, j) = a[i] * b[j];
    return m;
}

Vec solve_spd(const Mat& a, const Vec& b) {
    const std::size_t n = a.rows();
    require(a.cols() == n && b.len() == n, errc::numeric, "DimMismatch", "solve_spd dims");
    require(a.max_asymmetry() <= 1e-8 * (1.0 + a.max_abs()), errc::numeric, "NotSymmetric",
            "solve_spd requires a symmetric matrix");

    double max_diag = 0.0;
    for (std::size_t i = 0; i < n; ++i) max_diag = std::max(max_diag, std::fabs(a(i, i)));
    const double pivot_floor = 1e-12 * max_diag;

    // Lower-triangular Cholesky factor, in place on a copy.
    Mat l(n, n, 0.0);
    for (std::size_t j = 0; j < n; ++j) {
        double d = a(j, j) - kernels::dot(l.row(j), l.row(j), j);
        if (d <= pivot_floor)
            fail(errc::numeric, "NotSPD",
                 "Cholesky pivot " + std::to_string(d) + " at index " + std::to_string(j) +
                     " (floor " + std::to_string(pivot_floor) + ")");
        const double ljj = std::sqrt(d);
        l(j, j) = ljj;
        for (std::size_t i = j + 1; i < n; ++i)
            l(i, j) = (a(i, j) - kernels::dot(l.row(i), l.row(j), j)) / ljj;
    }

    // Forward then back substitution.
    std::vector<double> y(n), x(n);
    for (std::size_t i = 0; i < n; ++i)
        y[i] = (b[i] - kernels::dot(l.row(i), y.data(), i)) / l(i, i);
    for (std::size_t ii = n; ii-- > 0;) {
        double s = y[ii];
        for (std::size_t j = ii + 1; j < n; ++j) s -= l(j, ii) * x[j];
        x[ii] = s / l(ii, ii);
    }
    return Vec::from(std::move(x));
}

EigenSym eigen_sym(const Mat& a) {
    const std::size_t n = a.rows();
    require(a.cols() == n, errc::numeric, "DimMismatch", "eigen_sym requires square matrix");
    Mat m = a;
    // Symmetrize up front so tiny asymmetries cannot stall the sweep.
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j) {
            double v = 0.5 * (m(i, j) + m(j, i));
            m(i, j) = m(j, i) = v;
        }
    Mat v = Mat::identity(n);

    const int max_sweeps = 64;
    for (int sweep = 0; sweep < max_sweeps; ++sweep) {
        double off = 0.0;
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) off += m(i, j) * m(i, j);
        if (off <= 1e-30 * (1.0 + m.max_abs() * m.max_abs())) break;

        for (std::size_t p = 0; p < n; ++p)
            for (std::size_t q = p + 1; q < n; ++q) {
                const double apq = m(p, q);
                if (apq == 0.0) continue;
                const double app = m(p, p), aqq = m(q, q);
                const double tau = (aqq - app) / (2.0 * apq);
                const double t = (tau >= 0.0 ? 1.0 : -1.0) /
                                 (std::fabs(tau) + std::sqrt(1.0 + tau * tau));
                const double c = 1.0 / std::sqrt(1.0 + t * t);
                const double s = t * c;
                for (std::size_t k = 0; k < n; ++k) {
                    const double mkp = m(k, p), mkq = m(k, q);
                    m(k, p) = c * mkp - s * mkq;
                    m(k, q) = s * mkp + c * mkq;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double mpk = m(p, k), mqk = m(q, k);
                    m(p, k) = c * mpk - s * mqk;
                    m(q, k) = s * mpk + c * mqk;
                }
                for (std::size_t k = 0; k < n; ++k) {
                    const double vkp = v(k, p), vkq = v(k, q);
                    v(k, p) = c * vkp - s * vkq;
                    v(k, q) = s * vkp + c * vkq;
                }
            }
    }

    // Sort ascending by eigenvalue, permuting vector columns to match.
    std::vector<std::size_t> idx(n);
    for (std::size_t i = 0; i < n; ++i) idx[i] = i;
    for (std::size_t i = 0; i < n; ++i)
        for (std::size_t j = i + 1; j < n; ++j)
            if (m(idx[j], idx[j]) < m(idx[i], idx[i])) std::swap(idx[i], idx[j]);

    EigenSym out{Vec(n), Mat(n, n)};
    for (std::size_t c = 0; c < n; ++c) {
        out.values[c] = m(idx[c], idx[c]);
        for (std::size_t r = 0; r < n; ++r) out.vectors(r, c) = v(r, idx[c]);
    }
    return out;
}

double cond_sym(const Mat& a) {
    EigenSym e = eigen_sym(a);
    double lo = std::numeric_limits<double>::infinity(), hi = 0.0;
    for (std::size_t i = 0; i < e.values.len(); ++i) {
        const double m = std::fabs(e.values[i]);
        lo = std::min(lo, m);
        hi = std::max(hi, m);
    }
    if (lo == 0.0) return std::numeric_limits<double>::infinity();
    return hi / lo;
}

}  // namespace hinf
