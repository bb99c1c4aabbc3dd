#include <doctest.h>

#include <cmath>
#include <vector>

#include "hinf/dual.hpp"
#include "hinf/finite_diff.hpp"
#include "hinf/tape.hpp"
#include "test_helpers.hpp"

using namespace hinf;

TEST_CASE("tape product rule") {
    Tape t;
    auto a = tvar(t, t.leaf(2.0));
    auto b = tvar(t, t.leaf(3.0));
    auto f = a * b;
    auto g = t.grad_reverse(f.node);
    CHECK(g[0] == doctest::Approx(3.0));
    CHECK(g[1] == doctest::Approx(2.0));
}

TEST_CASE("tape relu kink convention: subgradient 0 at 0") {
    {
        Tape t;
        auto a = t.leaf(-1.0);
        auto g = t.grad_reverse(t.relu_(a));
        CHECK(g[0] == 0.0);
    }
    {
        Tape t;
        auto a = t.leaf(2.0);
        auto g = t.grad_reverse(t.relu_(a));
        CHECK(g[0] == 1.0);
    }
    {
        Tape t;
        auto a = t.leaf(0.0);
        auto g = t.grad_reverse(t.relu_(a));
        CHECK(g[0] == 0.0);
    }
}

namespace {

// Small 3-layer composition used for both tape and dual checks: inputs x[0..3],
// h1 = tanh(W x), h2 = relu/logistic mix, out = sum of products.
template <class S>
S composition(const std::vector<S>& x) {
    S h0 = tanh(x[0] * 1.3 + x[1] * (-0.7) + 0.2);
    S h1 = logistic(x[1] * 0.9 + x[2] * 0.4 - 0.1);
    S h2 = relu(x[2] * 1.1 + x[3] * 0.6 + 0.05);
    S g0 = exp(h0 * 0.5 + h1 * 0.25);
    S g1 = log(h1 + h2 + 1.5);
    return g0 * g1 + h2 * h0;
}

double composition_plain(cspan x) {
    struct Plain {
        double v;
    };
    // Evaluate with doubles through the same expression.
    std::vector<double> xs(x.begin(), x.end());
    double h0 = std::tanh(xs[0] * 1.3 - xs[1] * 0.7 + 0.2);
    double h1 = 1.0 / (1.0 + std::exp(-(xs[1] * 0.9 + xs[2] * 0.4 - 0.1)));
    double z2 = xs[2] * 1.1 + xs[3] * 0.6 + 0.05;
    double h2 = z2 > 0 ? z2 : 0.0;
    double g0 = std::exp(h0 * 0.5 + h1 * 0.25);
    double g1 = std::log(h1 + h2 + 1.5);
    return g0 * g1 + h2 * h0;
}

}  // namespace

TEST_CASE("tape gradient of random composition matches finite differences") {
    Rng rng(99);
    for (int rep = 0; rep < 20; ++rep) {
        Vec point = testing::random_vec(4, rng);
        Tape t;
        std::vector<TVar> x;
        for (std::size_t i = 0; i < 4; ++i) x.push_back(tvar(t, t.leaf(point[i])));
        TVar out = composition(x);
        auto g = t.grad_reverse(out.node);
        double err = finite_diff_check([](cspan p) { return composition_plain(p); }, point,
                                       Vec::from({g[0], g[1], g[2], g[3]}));
        CHECK(err < 1e-5);
    }
}

TEST_CASE("forward duals agree with reverse tape to 1e-10 relative") {
    Rng rng(123);
    for (int rep = 0; rep < 50; ++rep) {
        Vec point = testing::random_vec(4, rng);
        Tape t;
        std::vector<TVar> xv;
        for (std::size_t i = 0; i < 4; ++i) xv.push_back(tvar(t, t.leaf(point[i])));
        auto g_rev = t.grad_reverse(composition(xv).node);

        std::vector<Dual> xd;
        for (std::size_t i = 0; i < 4; ++i) xd.push_back(Dual::seeded(point[i], 4, i));
        Dual out = composition(xd);

        for (std::size_t i = 0; i < 4; ++i) {
            double denom = std::max(1.0, std::fabs(g_rev[i]));
            CHECK(std::fabs(out.t[i] - g_rev[i]) / denom < 1e-10);
        }
    }
}

TEST_CASE("dual primitives satisfy chain rule against finite differences") {
    Rng rng(5150);
    auto check1 = [&](auto fd_fn, auto dual_fn, double lo, double hi) {
        for (int rep = 0; rep < 30; ++rep) {
            double x0 = rng.uniform(lo, hi);
            Dual d = dual_fn(Dual::seeded(x0, 1, 0));
            double err = finite_diff_check(
                [&](cspan p) { return dual_fn(Dual::seeded(p[0], 1, 0)).v; }, Vec{x0},
                Vec{d.t[0]});
            (void)fd_fn;
            CHECK(err < 1e-5);
        }
    };
    check1(0, [](const Dual& d) { return exp(d); }, -2.0, 2.0);
    check1(0, [](const Dual& d) { return log(d + 3.0); }, -2.0, 2.0);
    check1(0, [](const Dual& d) { return tanh(d); }, -2.0, 2.0);
    check1(0, [](const Dual& d) { return relu(d); }, 0.1, 2.0);
    check1(0, [](const Dual& d) { return reciprocal(d + 3.0); }, -1.0, 1.0);
    check1(0, [](const Dual& d) { return norm_cdf(d); }, -2.0, 2.0);
    check1(0, [](const Dual& d) { return norm_pdf(d); }, -2.0, 2.0);
    check1(0, [](const Dual& d) { return logistic(d * 2.0 + 0.3); }, -2.0, 2.0);
    check1(0, [](const Dual& d) { return softplus(d); }, -2.0, 2.0);
}

TEST_CASE("dual2 hessian matches finite differences of the gradient") {
    Rng rng(31337);
    auto f2 = [](const std::vector<Dual2>& x) {
        return exp(x[0] * 0.3) * logistic(x[1] - x[0] * 0.5) + x[1] * x[1] * 0.5 +
               norm_cdf(x[0] * x[1]);
    };
    auto grad_at = [&](cspan p, std::size_t k) {
        std::vector<Dual2> x{Dual2::var(p[0], 2, 0), Dual2::var(p[1], 2, 1)};
        return f2(x).g[k];
    };
    for (int rep = 0; rep < 20; ++rep) {
        Vec point = testing::random_vec(2, rng);
        std::vector<Dual2> x{Dual2::var(point[0], 2, 0), Dual2::var(point[1], 2, 1)};
        Dual2 out = f2(x);
        CHECK(out.h[1] == doctest::Approx(out.h[2]).epsilon(1e-12));  // symmetry
        for (std::size_t k = 0; k < 2; ++k) {
            Vec analytic{out.h[k * 2 + 0], out.h[k * 2 + 1]};
            double err = finite_diff_check([&](cspan p) { return grad_at(p, k); }, point, analytic);
            CHECK(err < 1e-5);
        }
    }
}

TEST_CASE("finite_diff_check trivial oracles") {
    double err = finite_diff_check(
        [](cspan p) { return p[0] * p[0] + p[1] * p[1]; }, Vec{1.0, 2.0}, Vec{2.0, 4.0});
    CHECK(err < 1e-8);

    err = finite_diff_check([](cspan p) { return std::exp(p[0]); }, Vec{0.0}, Vec{1.0});
    CHECK(err < 1e-9);

    CHECK_THROWS_AS(
        finite_diff_check([](cspan) { return std::nan(""); }, Vec{0.0}, Vec{0.0}), Error);
}
