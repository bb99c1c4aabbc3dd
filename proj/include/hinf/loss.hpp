#pragma once

#include <algorithm>
#include <cmath>
#include <functional>
#include <string>
#include <vector>

#include "hinf/dual.hpp"
#include "hinf/linalg.hpp"

namespace hinf {

// Catalog of per-observation structural losses ell(y, t, theta) with analytic
// value / gradient / Hessian, plus a dual-number fallback for user-defined
// losses. All likelihood-based entries are stored as negative log-likelihoods
// so that every model is a minimization problem.
//
// Numerical guards: linear indices are clamped at +-700 before exp and log
// arguments floored at 1e-300, which leaves values in the feasible region
// untouched but keeps training robust.

enum class LinkKind { none, linear, logit };

struct LossModel {
    std::string name;
    std::size_t dy = 1, dt = 1, dtheta = 1;

    // The Hessian does not involve y, so under randomized T the projected
    // Hessian L(x) can be computed by integrating over the T distribution
    // instead of being estimated.
    bool hessian_free_of_y = false;

    // Loss is of conditional-mean form with gradient t * (G(theta't) - y).
    LinkKind link = LinkKind::none;

    // Ingestion prepends a constant-1 column to t for models whose index
    // includes an intercept.
    bool expects_intercept = false;

    // Parameter coordinates constrained positive (trained through softplus).
    std::vector<std::size_t> positive_params;

    std::function<double(cspan y, cspan t, cspan theta)> value;
    std::function<Vec(cspan y, cspan t, cspan theta)> grad;
    std::function<Mat(cspan y, cspan t, cspan theta)> hess;
};

/// Squared-error loss (y - theta't)^2 / 2; grad t(theta't - y), hess t t'.
LossModel linear_sq(std::size_t dt);

/// Binary logit negative log-likelihood; y in {0,1}.
LossModel logit_nll(std::size_t dt);

/// Logistic quasi-likelihood for fractional y in [0,1]; same formulas as
/// logit with real-valued y.
LossModel fractional_qmle(std::size_t dt);

/// McFadden multinomial choice with outside option u0 = 0. y is a one-hot
/// vector over the J inside options (all zeros = outside option picked).
/// t stacks per-choice characteristics (J blocks of dt_choice entries) and
/// theta packs (theta_11..theta_1J, theta_2) = J intercepts then dt_choice
/// shared slopes.
LossModel multinomial_nll(std::size_t n_choices, std::size_t dt_choice);

/// Type I Tobit in transformed parameters theta = (theta1; theta2) with
/// theta1 = beta/sigma (dt entries) and theta2 = 1/sigma > 0. Censored part
/// -log(1 - Phi(theta1't)) for y = 0; uncensored -log theta2 + (theta2 y -
/// theta1't)^2 / 2.
LossModel tobit1_nll(std::size_t dt);

/// Stacked two-equation least squares for linear IV. The observation packs
/// y = (outcome, endogenous t) and the loss's "t" slot carries the
/// intercepted instrument z = (1, z). theta = (alpha, beta, zeta1, zeta2).
/// Hessian is I_2 (x) z z'.
LossModel iv_stacked();

struct LossDims {
    std::size_t dy, dt, dtheta;
};

/// Wrap a user scalar loss into a LossModel, differentiating with forward
/// duals: gradient from dtheta seed directions, Hessian from second-order
/// duals. Flags are conservatively false. F must be callable as
/// f(cspan y, cspan t, std::span<const S> theta) -> S for S in
/// {double, Dual, Dual2}.
template <class F>
LossModel custom_loss(const std::string& name, LossDims dims, F f) {
    LossModel m;
    m.name = name;
    m.dy = dims.dy;
    m.dt = dims.dt;
    m.dtheta = dims.dtheta;
    m.hessian_free_of_y = false;
    m.link = LinkKind::none;
    const std::size_t p = dims.dtheta;

    m.value = [f, p](cspan y, cspan t, cspan theta) -> double {
        require(theta.size() == p, errc::numeric, "DimMismatch", "custom loss theta length");
        return f(y, t, std::span<const double>(theta));
    };
    m.grad = [f, p](cspan y, cspan t, cspan theta) -> Vec {
        require(theta.size() == p, errc::numeric, "DimMismatch", "custom loss theta length");
        std::vector<Dual> th;
        th.reserve(p);
        for (std::size_t i = 0; i < p; ++i) th.push_back(Dual::seeded(theta[i], p, i));
        Dual out = f(y, t, std::span<const Dual>(th));
        for (double d : out.t)
            require(std::isfinite(d), errc::numeric, "UnsupportedPrimitive",
                    "custom loss produced non-finite derivative");
        return Vec::from(std::move(out.t));
    };
    m.hess = [f, p](cspan y, cspan t, cspan theta) -> Mat {
        require(theta.size() == p, errc::numeric, "DimMismatch", "custom loss theta length");
        std::vector<Dual2> th;
        th.reserve(p);
        for (std::size_t i = 0; i < p; ++i) th.push_back(Dual2::var(theta[i], p, i));
        Dual2 out = f(y, t, std::span<const Dual2>(th));
        for (double d : out.h)
            require(std::isfinite(d), errc::numeric, "UnsupportedPrimitive",
                    "custom loss produced non-finite second derivative");
        return Mat::from(p, p, std::move(out.h));
    };
    return m;
}

/// Lookup by external key: "linear", "logit", "fractional", "multinomial:J,dtc",
/// "tobit1", "iv". "custom" is a library-level extension point and is rejected
/// here with a config error.
LossModel loss_by_key(const std::string& key, std::size_t dt);

// Guards shared with the loss implementations.
inline double safe_exp(double u) { return std::exp(std::clamp(u, -700.0, 700.0)); }
inline double safe_log(double v) { return std::log(std::max(v, 1e-300)); }
inline double logistic_fn(double u) { return 1.0 / (1.0 + safe_exp(-u)); }

}  // namespace hinf
