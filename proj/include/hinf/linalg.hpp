#pragma once

#include <cstddef>
#include <initializer_list>
#include <vector>

#include "hinf/common.hpp"

namespace hinf {

// Dense, always-finite vector. Dimensions here are small by design (d_theta
// and d_t stay in the tens), so everything is plain row-major storage with no
// sparsity or blocking.
class Vec {
public:
    Vec() = default;
    explicit Vec(std::size_t len, double fill = 0.0);
    Vec(std::initializer_list<double> vals);
    static Vec from(std::vector<double> vals);

    std::size_t len() const noexcept { return d_.size(); }
    double operator[](std::size_t i) const noexcept { return d_[i]; }
    double& operator[](std::size_t i) noexcept { return d_[i]; }
    const double* data() const noexcept { return d_.data(); }
    double* data() noexcept { return d_.data(); }
    cspan span() const noexcept { return {d_.data(), d_.size()}; }

    double inf_norm() const noexcept;

private:
    void validate() const;
    std::vector<double> d_;
};

class Mat {
public:
    Mat() = default;
    Mat(std::size_t rows, std::size_t cols, double fill = 0.0);
    static Mat from(std::size_t rows, std::size_t cols, std::vector<double> vals);
    static Mat identity(std::size_t n);

    std::size_t rows() const noexcept { return rows_; }
    std::size_t cols() const noexcept { return cols_; }
    double operator()(std::size_t r, std::size_t c) const noexcept { return d_[r * cols_ + c]; }
    double& operator()(std::size_t r, std::size_t c) noexcept { return d_[r * cols_ + c]; }
    const double* data() const noexcept { return d_.data(); }
    double* data() noexcept { return d_.data(); }
    const double* row(std::size_t r) const noexcept { return d_.data() + r * cols_; }
    double* row(std::size_t r) noexcept { return d_.data() + r * cols_; }

    Vec matvec(const Vec& x) const;        // A x
    Vec matvec_t(const Vec& x) const;      // A^T x
    double max_abs() const noexcept;
    double max_asymmetry() const noexcept;  // max |A_ij - A_ji| (square only)

private:
    void validate() const;
    std::size_t rows_ = 0, cols_ = 0;
    std::vector<double> d_;
};

Vec operator+(const Vec& a, const Vec& b);
Vec operator-(const Vec& a, const Vec& b);
Vec operator*(double s, const Vec& a);
double dot(const Vec& a, const Vec& b);
Mat outer(const Vec& a, const Vec& b);

// Solve A x = b for symmetric positive definite A via Cholesky.
//
// Throws Error("NotSymmetric") if max |A_ij - A_ji| > 1e-8 * (1 + max|A|),
// and Error("NotSPD") when a pivot falls at or below 1e-12 * max diagonal,
// which downstream code treats as the conditional-Hessian near-singularity
// signal. The residual satisfies ||A x - b||_inf <= 1e-8 * (1 + ||b||_inf)
// for the conditioning this library targets (kappa <= 1e6 or so).
Vec solve_spd(const Mat& a, const Vec& b);

struct EigenSym {
    Vec values;   // ascending
    Mat vectors;  // columns are eigenvectors
};

// Cyclic Jacobi eigendecomposition for symmetric matrices. Fine for the
// small dimensions used here; not meant for large n.
EigenSym eigen_sym(const Mat& a);

// max |eig| / min |eig| from the symmetric eigendecomposition; +inf when the
// smallest eigenvalue magnitude underflows to zero.
double cond_sym(const Mat& a);

}  // namespace hinf
