#include <doctest.h>

#include <cmath>

#include "hinf/linalg.hpp"
#include "hinf/normal.hpp"
#include "test_helpers.hpp"

using namespace hinf;
using hinf::testing::random_spd;
using hinf::testing::random_vec;

TEST_CASE("vec and mat reject non-finite entries") {
    CHECK_THROWS_AS(Vec{std::nan("")}, Error);
    CHECK_THROWS_AS(Vec{std::numeric_limits<double>::infinity()}, Error);
    CHECK_THROWS_AS(Mat::from(1, 1, {std::nan("")}), Error);
    CHECK_NOTHROW(Vec{0.0});
}

TEST_CASE("solve_spd identity and diagonal cases") {
    Mat i2 = Mat::identity(2);
    Vec x = solve_spd(i2, Vec{3.0, -1.0});
    CHECK(x[0] == doctest::Approx(3.0));
    CHECK(x[1] == doctest::Approx(-1.0));

    Mat d = Mat::from(2, 2, {4, 0, 0, 9});
    Vec y = solve_spd(d, Vec{8.0, 27.0});
    CHECK(y[0] == doctest::Approx(2.0));
    CHECK(y[1] == doctest::Approx(3.0));
}

TEST_CASE("solve_spd 2x2 verified by multiplying back") {
    Mat a = Mat::from(2, 2, {2, 1, 1, 2});
    Vec b{3.0, 3.0};
    Vec x = solve_spd(a, b);
    Vec back = a.matvec(x);
    CHECK(std::fabs(back[0] - b[0]) <= 1e-8 * (1 + b.inf_norm()));
    CHECK(std::fabs(back[1] - b[1]) <= 1e-8 * (1 + b.inf_norm()));
    CHECK(x[0] == doctest::Approx(1.0));
    CHECK(x[1] == doctest::Approx(1.0));
}

TEST_CASE("solve_spd recovers x for random SPD up to cond 1e6") {
    Rng rng(424242);
    for (int rep = 0; rep < 50; ++rep) {
        const std::size_t n = 1 + rng.index(12);
        const double cond = std::exp(std::log(1e6) * rng.uniform());
        Mat a = random_spd(n, cond, rng);
        Vec x = random_vec(n, rng);
        Vec b = a.matvec(x);
        Vec got = solve_spd(a, b);
        for (std::size_t i = 0; i < n; ++i)
            CHECK(std::fabs(got[i] - x[i]) <= 1e-8 * (1.0 + std::fabs(x[i])) * cond * 1e-4 + 1e-8);
    }
}

TEST_CASE("solve_spd flags asymmetry and non-SPD input") {
    Mat bad = Mat::from(2, 2, {1, 0.5, 0.2, 1});
    CHECK_THROWS_WITH_AS(solve_spd(bad, Vec{1.0, 1.0}), doctest::Contains("NotSymmetric"), Error);

    Mat rank1 = Mat::from(2, 2, {1, 1, 1, 1});
    try {
        solve_spd(rank1, Vec{1.0, 1.0});
        CHECK(false);
    } catch (const Error& e) {
        CHECK(e.kind() == "NotSPD");
        CHECK(e.cls() == errc::numeric);
    }
}

TEST_CASE("jacobi eigensolver reproduces known spectra") {
    Mat a = Mat::from(2, 2, {2, 1, 1, 2});
    EigenSym e = eigen_sym(a);
    CHECK(e.values[0] == doctest::Approx(1.0));
    CHECK(e.values[1] == doctest::Approx(3.0));

    Rng rng(7);
    Mat s = random_spd(6, 1e4, rng);
    EigenSym es = eigen_sym(s);
    // Reconstruct and compare entrywise.
    for (std::size_t i = 0; i < 6; ++i)
        for (std::size_t j = 0; j < 6; ++j) {
            double r = 0.0;
            for (std::size_t k = 0; k < 6; ++k) r += es.vectors(i, k) * es.values[k] * es.vectors(j, k);
            CHECK(r == doctest::Approx(s(i, j)).epsilon(1e-9));
        }
}

TEST_CASE("normal quantile matches cdf round trip") {
    for (double p : {1e-10, 1e-4, 0.025, 0.25, 0.5, 0.6745, 0.975, 1 - 1e-6}) {
        double z = norm_quantile(p);
        CHECK(norm_cdf(z) == doctest::Approx(p).epsilon(1e-12));
    }
    CHECK(norm_quantile(0.975) == doctest::Approx(1.959963984540054).epsilon(1e-12));
    CHECK(norm_quantile(0.75) == doctest::Approx(0.6744897501960817).epsilon(1e-12));
    CHECK(norm_cdf(0.0) == doctest::Approx(0.5));
    CHECK(norm_pdf(0.0) == doctest::Approx(kInvSqrt2Pi));
}
