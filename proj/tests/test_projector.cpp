#include <doctest.h>

#include <cmath>

#include "hinf/projector.hpp"
#include "test_helpers.hpp"

using namespace hinf;

TEST_CASE("regularize: ridge and eigenvalue floor") {
    Mat a = Mat::from(2, 2, {2.0, 0.0, 0.0, 1e-15});

    RegScheme none = RegScheme::parse("reg:ridge:0");
    Mat same = regularize(a, none);
    CHECK(same(1, 1) == doctest::Approx(1e-15));

    RegScheme floor = RegScheme::parse("reg:eig_floor:1e-6");
    Mat fl = regularize(a, floor);
    CHECK(fl(0, 0) == doctest::Approx(2.0));
    CHECK(fl(1, 1) == doctest::Approx(1e-6));

    CHECK_THROWS_AS(RegScheme::parse("reg:banana"), Error);
}

TEST_CASE("ridge shifts every eigenvalue by exactly lambda") {
    Rng rng(11);
    for (int rep = 0; rep < 20; ++rep) {
        Mat a = testing::random_spd(4, 100.0, rng);
        const double lam = rng.uniform(0.01, 1.0);
        RegScheme ridge{RegScheme::Kind::ridge, lam};
        Mat shifted = regularize(a, ridge);
        EigenSym ea = eigen_sym(a);
        EigenSym es = eigen_sym(shifted);
        for (std::size_t i = 0; i < 4; ++i)
            CHECK(es.values[i] == doctest::Approx(ea.values[i] + lam).epsilon(1e-10));
    }
}

TEST_CASE("compute_randomized: linear link gives E[T T'] regardless of theta") {
    auto loss = linear_sq(2);
    Mat support = Mat::from(3, 2, {1, 0, 1, 1, 1, 2});
    std::vector<double> probs{0.5, 0.3, 0.2};
    auto dist = TreatmentDistribution::discrete_support(support, probs);

    Mat expected(2, 2, 0.0);
    for (std::size_t r = 0; r < 3; ++r)
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                expected(i, j) += probs[r] * support(r, i) * support(r, j);

    Vec x{0.3};
    for (double c : {-1.0, 0.0, 2.5}) {
        ThetaFn theta = [c](cspan) { return Vec{c, -c}; };
        Mat got = compute_randomized(dist, theta, loss, x.span());
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                CHECK(got(i, j) == doctest::Approx(expected(i, j)).epsilon(1e-14));
    }
}

TEST_CASE("compute_randomized: logit at theta=0 over {(1,0),(1,1)}") {
    auto loss = logit_nll(2);
    auto dist = TreatmentDistribution::discrete_support(Mat::from(2, 2, {1, 0, 1, 1}),
                                                        {0.5, 0.5});
    ThetaFn theta = [](cspan) { return Vec{0.0, 0.0}; };
    Vec x{0.0};
    Mat got = compute_randomized(dist, theta, loss, x.span());
    CHECK(got(0, 0) == doctest::Approx(0.25));
    CHECK(got(0, 1) == doctest::Approx(0.125));
    CHECK(got(1, 0) == doctest::Approx(0.125));
    CHECK(got(1, 1) == doctest::Approx(0.125));
}

TEST_CASE("binary-treatment L has determinant p(1-p)") {
    // L(x) = [[1, p], [p, p]] for a linear loss with scalar binary treatment.
    auto loss = linear_sq(2);
    ThetaFn theta = [](cspan) { return Vec{0.3, -0.2}; };
    Vec x{0.0};
    for (double p : {0.1, 0.37, 0.5, 0.82}) {
        auto dist = TreatmentDistribution::discrete_support(Mat::from(2, 2, {1, 0, 1, 1}),
                                                            {1.0 - p, p});
        Mat l = compute_randomized(dist, theta, loss, x.span());
        CHECK(l(0, 0) == doctest::Approx(1.0));
        CHECK(l(0, 1) == doctest::Approx(p));
        CHECK(l(1, 1) == doctest::Approx(p));
        const double det = l(0, 0) * l(1, 1) - l(0, 1) * l(1, 0);
        CHECK(det == doctest::Approx(p * (1.0 - p)).epsilon(1e-12));
    }
}

TEST_CASE("compute_randomized matches brute-force enumeration for nontrivial theta") {
    auto loss = logit_nll(2);
    Mat support = Mat::from(3, 2, {1, -1, 1, 0.5, 1, 2});
    std::vector<double> probs{0.2, 0.5, 0.3};
    auto dist = TreatmentDistribution::discrete_support(support, probs);
    ThetaFn theta = [](cspan x) { return Vec{0.4 + x[0], -0.8}; };

    Rng rng(3);
    for (int rep = 0; rep < 10; ++rep) {
        Vec x{rng.uniform(-1, 1)};
        Mat got = compute_randomized(dist, theta, loss, x.span());
        Vec th = theta(x.span());
        Mat expect(2, 2, 0.0);
        for (std::size_t r = 0; r < 3; ++r) {
            const double u = th[0] * support(r, 0) + th[1] * support(r, 1);
            const double g = 1.0 / (1.0 + std::exp(-u));
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t j = 0; j < 2; ++j)
                    expect(i, j) += probs[r] * g * (1 - g) * support(r, i) * support(r, j);
        }
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                CHECK(std::fabs(got(i, j) - expect(i, j)) < 1e-12);
    }
}

TEST_CASE("compute_randomized rejects y-dependent Hessians") {
    auto loss = tobit1_nll(2);
    auto dist = TreatmentDistribution::discrete_support(Mat::from(1, 2, {1, 0}), {1.0});
    ThetaFn theta = [](cspan) { return Vec{0.0, 0.0, 1.0}; };
    Vec x{0.0};
    CHECK_THROWS_WITH_AS(compute_randomized(dist, theta, loss, x.span()),
                         doctest::Contains("FlagViolation"), Error);
}

TEST_CASE("treatment distribution validation") {
    auto bad_probs = TreatmentDistribution::discrete_support(Mat::from(2, 2, {1, 0, 1, 1}),
                                                             {0.6, 0.5});
    CHECK_THROWS_WITH_AS(bad_probs.validate(2, true), doctest::Contains("BadDistribution"),
                         Error);

    auto no_intercept = TreatmentDistribution::discrete_support(Mat::from(1, 2, {0, 1}), {1.0});
    CHECK_THROWS_WITH_AS(no_intercept.validate(2, true), doctest::Contains("BadDistribution"),
                         Error);
    CHECK_NOTHROW(no_intercept.validate(2, false));
}

namespace {

// Smooth randomized design: t = (1, t2) with t2 | x uniform around 0.5 x1.
Dataset smooth_design(std::size_t n, Rng& rng) {
    Dataset d;
    d.n = n;
    d.y = Mat(n, 1);
    d.t = Mat(n, 2);
    d.x = Mat(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        d.x(i, 0) = rng.uniform(-1, 1);
        d.t(i, 0) = 1.0;
        d.t(i, 1) = 0.5 * d.x(i, 0) + rng.uniform(-0.5, 0.5);
        d.y(i, 0) = 1.0 + d.t(i, 1) + 0.1 * rng.normal();
    }
    return d;
}

NetConfig aux_cfg(std::uint64_t seed) {
    NetConfig c;
    c.input_dim = 1;
    c.hidden = {16};
    c.dtheta = 1;  // overwritten by the projector
    c.seed = seed;
    return c;
}

TrainConfig aux_tc() {
    TrainConfig t;
    t.epochs = 80;
    t.batch_size = 128;
    t.learning_rate = 1e-2;
    t.patience = 15;
    t.shuffle_seed = 77;
    return t;
}

}  // namespace

TEST_CASE("fit_regression recovers the conditional second-moment matrix on a smooth design") {
    Rng rng(2024);
    Dataset d = smooth_design(8000, rng);
    auto loss = linear_sq(2);
    ThetaFn theta = [](cspan) { return Vec{1.0, 1.0}; };  // linear loss: hess is theta-free

    RegScheme reg = RegScheme::parse("reg:none");
    ProjectedHessian lhat = fit_regression(d, theta, loss, aux_cfg(5), aux_tc(), reg);

    // Truth: E[t t' | x] = [[1, m], [m, m^2 + v]], m = 0.5 x, v = (1/12).
    const double v = 1.0 / 12.0;
    double sq_sum = 0.0;
    int count = 0;
    for (double xv = -0.9; xv <= 0.9; xv += 0.1) {
        Vec x{xv};
        Mat l = lhat.eval(x.span());
        const double m = 0.5 * xv;
        sq_sum += (l(0, 0) - 1.0) * (l(0, 0) - 1.0);
        sq_sum += 2.0 * (l(0, 1) - m) * (l(0, 1) - m);
        sq_sum += (l(1, 1) - (m * m + v)) * (l(1, 1) - (m * m + v));
        count += 4;
        CHECK(l.max_asymmetry() < 1e-10);
    }
    CHECK(std::sqrt(sq_sum / count) < 0.05);
}

TEST_CASE("glm linear closed form and generic regression share the estimator path") {
    Rng rng(9);
    Dataset d = smooth_design(600, rng);
    auto loss = linear_sq(2);
    ThetaFn theta = [](cspan) { return Vec{0.0, 0.0}; };
    RegScheme reg = RegScheme::parse("reg:none");

    TrainConfig tc = aux_tc();
    tc.epochs = 10;
    ProjectedHessian a = fit_regression(d, theta, loss, aux_cfg(3), tc, reg);
    ProjectedHessian b = glm_closed_form(d, theta, loss, aux_cfg(3), tc, reg);
    for (double xv : {-0.5, 0.0, 0.7}) {
        Vec x{xv};
        Mat la = a.eval(x.span());
        Mat lb = b.eval(x.span());
        for (std::size_t i = 0; i < 2; ++i)
            for (std::size_t j = 0; j < 2; ++j)
                CHECK(std::fabs(la(i, j) - lb(i, j)) < 1e-10);
    }
}

TEST_CASE("constant-hessian design: regression is flat near the sample mean oracle") {
    Rng rng(31);
    const std::size_t n = 8000;
    Dataset d;
    d.n = n;
    d.y = Mat(n, 1);
    d.t = Mat(n, 2);
    d.x = Mat(n, 1);
    Mat mean_tt(2, 2, 0.0);
    for (std::size_t i = 0; i < n; ++i) {
        d.x(i, 0) = rng.uniform(-1, 1);
        d.t(i, 0) = 1.0;
        d.t(i, 1) = rng.bernoulli(0.4) ? 1.0 : 0.0;  // independent of x
        d.y(i, 0) = rng.normal();
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = 0; b < 2; ++b) mean_tt(a, b) += d.t(i, a) * d.t(i, b) / n;
    }
    auto loss = linear_sq(2);
    ThetaFn theta = [](cspan) { return Vec{0.0, 0.0}; };
    ProjectedHessian lhat =
        fit_regression(d, theta, loss, aux_cfg(8), aux_tc(), RegScheme::parse("reg:none"));
    for (double xv : {-0.8, -0.2, 0.3, 0.9}) {
        Vec x{xv};
        Mat l = lhat.eval(x.span());
        for (std::size_t a = 0; a < 2; ++a)
            for (std::size_t b = 0; b < 2; ++b)
                CHECK(std::fabs(l(a, b) - mean_tt(a, b)) < 0.05);
    }
}

TEST_CASE("scalar dtheta regression path") {
    Rng rng(12);
    const std::size_t n = 1500;
    Dataset d;
    d.n = n;
    d.y = Mat(n, 1);
    d.t = Mat(n, 1);
    d.x = Mat(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        d.x(i, 0) = rng.uniform(-1, 1);
        d.t(i, 0) = 1.0 + 0.3 * d.x(i, 0);
        d.y(i, 0) = rng.normal();
    }
    auto loss = linear_sq(1);
    ThetaFn theta = [](cspan) { return Vec{0.0}; };
    TrainConfig tc = aux_tc();
    tc.epochs = 60;
    ProjectedHessian lhat =
        fit_regression(d, theta, loss, aux_cfg(2), tc, RegScheme::parse("reg:none"));
    Vec x{0.5};
    Mat l = lhat.eval(x.span());
    CHECK(l.rows() == 1);
    // hess = t^2 = (1 + 0.3 x)^2, deterministic given x.
    CHECK(l(0, 0) == doctest::Approx((1.0 + 0.15) * (1.0 + 0.15)).epsilon(0.05));
}

TEST_CASE("eig_floor keeps the minimum eigenvalue at or above the floor") {
    Rng rng(13);
    ProjectedHessian ph;
    ph.dtheta = 2;
    ph.reg = RegScheme{RegScheme::Kind::eig_floor, 1e-4};
    ph.raw = [](cspan) { return Mat::from(2, 2, {1.0, 1.0, 1.0, 1.0}); };  // rank 1
    Vec x{0.0};
    Mat l = ph.eval(x.span());
    EigenSym e = eigen_sym(l);
    CHECK(e.values[0] >= 1e-4 - 1e-12);
    CHECK(e.values[1] == doctest::Approx(2.0));
}
