#include <doctest.h>

#include <cmath>
#include <vector>

#include "hinf/finite_diff.hpp"
#include "hinf/loss.hpp"
#include "hinf/normal.hpp"
#include "test_helpers.hpp"

using namespace hinf;

namespace {

// Finite-difference agreement of grad with value and of each hess row with
// the corresponding grad component, reporting the worst relative error.
double grad_hess_fd_error(const LossModel& m, cspan y, cspan t, const Vec& theta) {
    auto value_of = [&](cspan th) { return m.value(y, t, th); };
    double worst = finite_diff_check(value_of, theta, m.grad(y, t, theta.span()));
    Mat h = m.hess(y, t, theta.span());
    for (std::size_t k = 0; k < m.dtheta; ++k) {
        auto grad_k = [&](cspan th) { return m.grad(y, t, th)[k]; };
        Vec row(m.dtheta);
        for (std::size_t j = 0; j < m.dtheta; ++j) row[j] = h(k, j);
        worst = std::max(worst, finite_diff_check(grad_k, theta, row));
    }
    return worst;
}

}  // namespace

TEST_CASE("linear_sq closed forms") {
    auto m = linear_sq(2);
    double y[] = {0.0};
    double t[] = {1.0, 3.0};
    Vec th{1.0, 2.0};
    Vec g = m.grad(cspan(y, 1), cspan(t, 2), th.span());
    CHECK(g[0] == doctest::Approx(7.0));
    CHECK(g[1] == doctest::Approx(21.0));
    Mat h = m.hess(cspan(y, 1), cspan(t, 2), th.span());
    CHECK(h(0, 0) == doctest::Approx(1.0));
    CHECK(h(0, 1) == doctest::Approx(3.0));
    CHECK(h(1, 1) == doctest::Approx(9.0));

    double y2[] = {7.0};  // y = theta't exactly
    Vec g2 = m.grad(cspan(y2, 1), cspan(t, 2), th.span());
    CHECK(g2[0] == doctest::Approx(0.0));
    CHECK(g2[1] == doctest::Approx(0.0));
}

TEST_CASE("linear_sq matches finite differences tightly") {
    Rng rng(1);
    auto m = linear_sq(3);
    for (int rep = 0; rep < 100; ++rep) {
        double y[] = {rng.normal()};
        Vec t = testing::random_vec(3, rng, -2, 2);
        Vec th = testing::random_vec(3, rng, -2, 2);
        CHECK(grad_hess_fd_error(m, cspan(y, 1), t.span(), th) < 1e-8);
    }
}

TEST_CASE("logit_nll closed forms and saturation") {
    auto m = logit_nll(2);
    double y1[] = {1.0};
    double t[] = {1.0, 1.0};
    Vec th0{0.0, 0.0};
    Vec g = m.grad(cspan(y1, 1), cspan(t, 2), th0.span());
    CHECK(g[0] == doctest::Approx(-0.5));
    CHECK(g[1] == doctest::Approx(-0.5));
    Mat h = m.hess(cspan(y1, 1), cspan(t, 2), th0.span());
    for (std::size_t i = 0; i < 2; ++i)
        for (std::size_t j = 0; j < 2; ++j) CHECK(h(i, j) == doctest::Approx(0.25));

    // Saturated: y = 1 with a huge positive index.
    Vec thbig{60.0, 0.0};
    CHECK(m.value(cspan(y1, 1), cspan(t, 2), thbig.span()) == doctest::Approx(0.0).epsilon(1e-12));
    Vec gbig = m.grad(cspan(y1, 1), cspan(t, 2), thbig.span());
    CHECK(std::fabs(gbig[0]) < 1e-12);

    double ybad[] = {0.5};
    CHECK_THROWS_AS(m.value(cspan(ybad, 1), cspan(t, 2), th0.span()), Error);
}

TEST_CASE("logit_nll / fractional_qmle match finite differences") {
    Rng rng(2);
    auto ml = logit_nll(3);
    auto mf = fractional_qmle(3);
    for (int rep = 0; rep < 100; ++rep) {
        Vec t = testing::random_vec(3, rng, -2, 2);
        Vec th = testing::random_vec(3, rng, -1.5, 1.5);
        double yl[] = {rng.bernoulli(0.5) ? 1.0 : 0.0};
        double yf[] = {rng.uniform()};
        CHECK(grad_hess_fd_error(ml, cspan(yl, 1), t.span(), th) < 1e-6);
        CHECK(grad_hess_fd_error(mf, cspan(yf, 1), t.span(), th) < 1e-6);
    }
}

TEST_CASE("fractional_qmle exact-fit cases") {
    auto m = fractional_qmle(1);
    double t[] = {1.0};
    Vec th{0.0};
    double y[] = {0.5};
    Vec g = m.grad(cspan(y, 1), cspan(t, 1), th.span());
    CHECK(g[0] == doctest::Approx(0.0));

    Vec th2{0.7};
    double yfit[] = {logistic_fn(0.7)};
    Vec g2 = m.grad(cspan(yfit, 1), cspan(t, 1), th2.span());
    CHECK(g2[0] == doctest::Approx(0.0).epsilon(1e-14));

    double ybad[] = {1.2};
    CHECK_THROWS_AS(m.value(cspan(ybad, 1), cspan(t, 1), th.span()), Error);
}

TEST_CASE("multinomial uniform softmax value and vanishing outside-option limit") {
    auto m = multinomial_nll(2, 1);
    std::vector<double> y{1.0, 0.0};
    std::vector<double> t{0.3, -0.4};
    Vec th0{0.0, 0.0, 0.0};
    // All utilities zero regardless of t when theta = 0.
    CHECK(m.value(cspan(y), cspan(t), th0.span()) == doctest::Approx(std::log(3.0)));

    std::vector<double> yout{0.0, 0.0};
    Vec thneg{-80.0, -80.0, 0.0};
    CHECK(m.value(cspan(yout), cspan(t), thneg.span()) == doctest::Approx(0.0).epsilon(1e-12));

    std::vector<double> ybad{1.0, 1.0};
    CHECK_THROWS_WITH_AS(m.value(cspan(ybad), cspan(t), th0.span()),
                         doctest::Contains("MultipleChoicesSet"), Error);
}

TEST_CASE("multinomial grad/hess match dual-number oracle") {
    const std::size_t J = 3, dc = 2;
    auto m = multinomial_nll(J, dc);
    // Same value re-expressed through dual primitives.
    auto dual_wrap = custom_loss(
        "multinomial_dual", LossDims{J, J * dc, J + dc},
        [J, dc](cspan y, cspan t, auto th) {
            using S = std::remove_cvref_t<decltype(th[0])>;
            std::vector<S> u;
            for (std::size_t j = 0; j < J; ++j) {
                S uj = th[j];
                for (std::size_t k = 0; k < dc; ++k) uj = uj + th[J + k] * t[j * dc + k];
                u.push_back(uj);
            }
            S denom = u[0] * 0.0 + 1.0;
            for (std::size_t j = 0; j < J; ++j) denom = denom + exp(u[j]);
            S v = log(denom);
            for (std::size_t j = 0; j < J; ++j) v = v - y[j] * u[j];
            return v;
        });

    Rng rng(3);
    for (int rep = 0; rep < 50; ++rep) {
        Vec t = testing::random_vec(J * dc, rng, -1, 1);
        Vec th = testing::random_vec(J + dc, rng, -1, 1);
        std::vector<double> y(J, 0.0);
        std::size_t pick = rng.index(J + 1);
        if (pick < J) y[pick] = 1.0;

        Vec ga = m.grad(cspan(y), t.span(), th.span());
        Vec gd = dual_wrap.grad(cspan(y), t.span(), th.span());
        Mat ha = m.hess(cspan(y), t.span(), th.span());
        Mat hd = dual_wrap.hess(cspan(y), t.span(), th.span());
        for (std::size_t i = 0; i < J + dc; ++i) {
            CHECK(ga[i] == doctest::Approx(gd[i]).epsilon(1e-8));
            for (std::size_t j = 0; j < J + dc; ++j)
                CHECK(ha(i, j) == doctest::Approx(hd(i, j)).epsilon(1e-8));
        }
        CHECK(ha.max_asymmetry() < 1e-10);
    }
}

TEST_CASE("tobit1 display values") {
    auto m = tobit1_nll(2);
    double t[] = {1.0, 0.5};

    // Uncensored y = 1, theta2 = 1, theta1't = 0: d value / d theta2 = -1 + 1 = 0.
    double y1[] = {1.0};
    Vec th{0.0, 0.0, 1.0};
    Vec g = m.grad(cspan(y1, 1), cspan(t, 2), th.span());
    CHECK(g[2] == doctest::Approx(0.0));

    // Censored y = 0 at theta1't = 0: gradient is phi(0)/(1-Phi(0)) * t.
    double y0[] = {0.0};
    Vec g0 = m.grad(cspan(y0, 1), cspan(t, 2), th.span());
    const double hazard0 = norm_pdf(0.0) / 0.5;  // 0.7978845608
    CHECK(g0[0] == doctest::Approx(hazard0).epsilon(1e-10));
    CHECK(g0[1] == doctest::Approx(hazard0 * 0.5).epsilon(1e-10));
    CHECK(g0[2] == doctest::Approx(0.0));

    double yneg[] = {-1.0};
    CHECK_THROWS_WITH_AS(m.value(cspan(yneg, 1), cspan(t, 2), th.span()),
                         doctest::Contains("NegativeY"), Error);
    Vec thbad{0.0, 0.0, -1.0};
    CHECK_THROWS_WITH_AS(m.value(cspan(y1, 1), cspan(t, 2), thbad.span()),
                         doctest::Contains("NonPositiveScale"), Error);
}

TEST_CASE("tobit1 matches finite differences") {
    Rng rng(4);
    auto m = tobit1_nll(2);
    for (int rep = 0; rep < 100; ++rep) {
        Vec t{1.0, rng.uniform(-1, 1)};
        Vec th{rng.uniform(-1, 1), rng.uniform(-1, 1), rng.uniform(0.5, 2.0)};
        double y[] = {rng.bernoulli(0.4) ? 0.0 : rng.uniform(0.1, 2.0)};
        CHECK(grad_hess_fd_error(m, cspan(y, 1), t.span(), th) < 1e-5);
    }
}

TEST_CASE("tobit1 censored-part curvature condition u - hazard < 0") {
    // The L(x) invertibility argument rests on u - phi/(1-Phi) < 0.
    Rng rng(5);
    for (int rep = 0; rep < 200; ++rep) {
        double u = rng.uniform(-8, 8);
        double hz = norm_pdf(u) / norm_sf(u);
        CHECK(u - hz < 0.0);
    }
}

TEST_CASE("iv_stacked structure") {
    auto m = iv_stacked();
    Rng rng(6);
    for (int rep = 0; rep < 50; ++rep) {
        double z = rng.uniform(-2, 2);
        Vec t{1.0, z};
        Vec th = testing::random_vec(4, rng, -1, 1);

        // Residuals exactly zero: grad vanishes.
        double yfit[] = {th[0] + th[1] * z, th[2] + th[3] * z};
        Vec g = m.grad(cspan(yfit, 2), t.span(), th.span());
        for (std::size_t i = 0; i < 4; ++i) CHECK(g[i] == doctest::Approx(0.0).epsilon(1e-14));

        // Hessian is exactly I2 (x) t t'.
        double y[] = {rng.normal(), rng.normal()};
        Mat h = m.hess(cspan(y, 2), t.span(), th.span());
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t j = 0; j < 2; ++j) {
                    CHECK(h(2 * b + i, 2 * b + j) == t[i] * t[j]);
                    CHECK(h(2 * b + i, 2 * (1 - b) + j) == 0.0);
                }
        CHECK(grad_hess_fd_error(m, cspan(y, 2), t.span(), th) < 1e-8);
    }
}

TEST_CASE("custom_loss reproduces analytic catalogs") {
    auto wrapped_linear = custom_loss("lin2", LossDims{1, 2, 2}, [](cspan y, cspan t, auto th) {
        auto r = th[0] * t[0] + th[1] * t[1] - y[0];
        return r * r * 0.5;
    });
    auto analytic = linear_sq(2);
    Rng rng(7);
    for (int rep = 0; rep < 50; ++rep) {
        double y[] = {rng.normal()};
        Vec t = testing::random_vec(2, rng, -2, 2);
        Vec th = testing::random_vec(2, rng, -2, 2);
        Vec ga = analytic.grad(cspan(y, 1), t.span(), th.span());
        Vec gc = wrapped_linear.grad(cspan(y, 1), t.span(), th.span());
        Mat ha = analytic.hess(cspan(y, 1), t.span(), th.span());
        Mat hc = wrapped_linear.hess(cspan(y, 1), t.span(), th.span());
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(std::fabs(ga[i] - gc[i]) < 1e-12);
            for (std::size_t j = 0; j < 2; ++j) CHECK(std::fabs(ha(i, j) - hc(i, j)) < 1e-12);
        }
    }

    auto wrapped_logit = custom_loss("logit2", LossDims{1, 2, 2}, [](cspan y, cspan t, auto th) {
        auto u = th[0] * t[0] + th[1] * t[1];
        return softplus(u) - y[0] * u;
    });
    auto analytic_logit = logit_nll(2);
    for (int rep = 0; rep < 50; ++rep) {
        double y[] = {rng.bernoulli(0.5) ? 1.0 : 0.0};
        Vec t = testing::random_vec(2, rng, -2, 2);
        Vec th = testing::random_vec(2, rng, -1.5, 1.5);
        Vec ga = analytic_logit.grad(cspan(y, 1), t.span(), th.span());
        Vec gc = wrapped_logit.grad(cspan(y, 1), t.span(), th.span());
        Mat ha = analytic_logit.hess(cspan(y, 1), t.span(), th.span());
        Mat hc = wrapped_logit.hess(cspan(y, 1), t.span(), th.span());
        for (std::size_t i = 0; i < 2; ++i) {
            CHECK(std::fabs(ga[i] - gc[i]) < 1e-10);
            for (std::size_t j = 0; j < 2; ++j) CHECK(std::fabs(ha(i, j) - hc(i, j)) < 1e-10);
        }
    }

}

TEST_CASE("custom_loss with theta-independent value has zero derivatives") {
    auto m = custom_loss("indep", LossDims{1, 1, 2}, [](cspan y, cspan t, auto th) {
        // Multiply by zero so the expression stays in the dual algebra.
        return th[0] * 0.0 + y[0] * t[0];
    });
    double y[] = {2.0};
    double t[] = {3.0};
    Vec th{1.0, -1.0};
    CHECK(m.value(cspan(y, 1), cspan(t, 1), th.span()) == doctest::Approx(6.0));
    Vec g = m.grad(cspan(y, 1), cspan(t, 1), th.span());
    CHECK(g[0] == 0.0);
    CHECK(g[1] == 0.0);
    Mat h = m.hess(cspan(y, 1), cspan(t, 1), th.span());
    CHECK(h.max_abs() == 0.0);
}

TEST_CASE("glm losses have hess = Gdot t t' exactly") {
    Rng rng(8);
    auto m = logit_nll(3);
    for (int rep = 0; rep < 50; ++rep) {
        Vec t = testing::random_vec(3, rng, -2, 2);
        Vec th = testing::random_vec(3, rng, -1, 1);
        double y[] = {1.0};
        double u = t[0] * th[0] + t[1] * th[1] + t[2] * th[2];
        double g = 1.0 / (1.0 + std::exp(-u));
        Mat h = m.hess(cspan(y, 1), t.span(), th.span());
        for (std::size_t i = 0; i < 3; ++i)
            for (std::size_t j = 0; j < 3; ++j)
                CHECK(h(i, j) == doctest::Approx(g * (1 - g) * t[i] * t[j]).epsilon(1e-12));
    }
}

TEST_CASE("conditional mean-zero score simulation for every catalog loss") {
    // Simulate y | (t, theta) from each model and verify the Monte Carlo mean
    // of the gradient is within 4 standard errors of zero, coordinatewise.
    const int n_draws = 100000;
    Rng rng(20260808);

    auto run_check = [&](const LossModel& m, auto sampler, cspan t, const Vec& th) {
        std::vector<double> mean(m.dtheta, 0.0), m2(m.dtheta, 0.0);
        std::vector<double> y(m.dy);
        for (int d = 0; d < n_draws; ++d) {
            sampler(y);
            Vec g = m.grad(cspan(y.data(), y.size()), t, th.span());
            for (std::size_t k = 0; k < m.dtheta; ++k) {
                const double delta = g[k] - mean[k];
                mean[k] += delta / (d + 1);
                m2[k] += delta * (g[k] - mean[k]);
            }
        }
        for (std::size_t k = 0; k < m.dtheta; ++k) {
            const double se = std::sqrt(m2[k] / (n_draws - 1.0) / n_draws);
            CHECK(std::fabs(mean[k]) < 4.0 * se + 1e-12);
        }
    };

    {
        auto m = linear_sq(2);
        Vec t{1.0, 0.7}, th{0.5, -1.0};
        const double mu = t[0] * th[0] + t[1] * th[1];
        run_check(m, [&](std::vector<double>& y) { y[0] = mu + rng.normal(); }, t.span(), th);
    }
    {
        auto m = logit_nll(2);
        Vec t{1.0, -0.4}, th{0.3, 0.8};
        const double g = logistic_fn(t[0] * th[0] + t[1] * th[1]);
        run_check(m, [&](std::vector<double>& y) { y[0] = rng.bernoulli(g) ? 1.0 : 0.0; },
                  t.span(), th);
    }
    {
        auto m = fractional_qmle(2);
        Vec t{1.0, 0.25}, th{-0.2, 0.5};
        const double g = logistic_fn(t[0] * th[0] + t[1] * th[1]);
        run_check(m, [&](std::vector<double>& y) { y[0] = rng.bernoulli(g) ? 1.0 : 0.0; },
                  t.span(), th);
    }
    {
        const std::size_t J = 2, dc = 1;
        auto m = multinomial_nll(J, dc);
        Vec t{0.4, -0.6}, th{0.2, -0.1, 0.7};
        std::vector<double> u(J), p(J + 1);
        double denom = 1.0;
        for (std::size_t j = 0; j < J; ++j) {
            u[j] = th[j] + th[J] * t[j];
            denom += std::exp(u[j]);
        }
        p[0] = 1.0 / denom;
        for (std::size_t j = 0; j < J; ++j) p[j + 1] = std::exp(u[j]) / denom;
        run_check(m,
                  [&](std::vector<double>& y) {
                      std::fill(y.begin(), y.end(), 0.0);
                      std::size_t pick = rng.categorical(p);
                      if (pick > 0) y[pick - 1] = 1.0;
                  },
                  t.span(), th);
    }
    {
        auto m = tobit1_nll(2);
        Vec t{1.0, 0.5}, th{0.4, -0.3, 1.3};
        const double u = t[0] * th[0] + t[1] * th[1];
        run_check(m,
                  [&](std::vector<double>& y) {
                      const double ystar = (u + rng.normal()) / th[2];
                      y[0] = std::max(0.0, ystar);
                  },
                  t.span(), th);
    }
    {
        auto m = iv_stacked();
        const double z = 0.8;
        Vec t{1.0, z}, th{0.2, 0.5, -0.1, 0.9};
        run_check(m,
                  [&](std::vector<double>& y) {
                      y[0] = th[0] + th[1] * z + rng.normal();
                      y[1] = th[2] + th[3] * z + 0.5 * rng.normal();
                  },
                  t.span(), th);
    }
}

TEST_CASE("loss_by_key resolves catalog and rejects unknown") {
    CHECK(loss_by_key("linear", 3).name == "linear");
    CHECK(loss_by_key("logit", 2).link == LinkKind::logit);
    CHECK(loss_by_key("multinomial:3,2", 0).dtheta == 5);
    CHECK_THROWS_AS(loss_by_key("quantile", 2), Error);
    CHECK_THROWS_AS(loss_by_key("custom", 2), Error);
}
