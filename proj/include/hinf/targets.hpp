#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hinf/dual.hpp"
#include "hinf/linalg.hpp"
#include "hinf/loss.hpp"

namespace hinf {

// Target functionals H(x, theta; t*) and their Jacobians H_theta, feeding
// mu0 = E[H(X, theta0(X); t*)]. Index conventions: theta coordinates are
// 0-based in this API; the external string keys (see target_by_key) use the
// 1-based convention of the structural-model notation, where theta_1 is the
// coefficient on the intercept column.

struct TargetFunctional {
    std::string name;
    std::size_t dmu = 1;
    std::size_t dtheta = 0;
    LinkKind required_link = LinkKind::none;  // none = usable with any loss

    std::function<Vec(cspan x, cspan theta, cspan tstar)> eval;
    std::function<Mat(cspan x, cspan theta, cspan tstar)> jac;  // dmu x dtheta
};

/// H = theta_k; jac = unit row. Throws IndexOutOfRange if k >= dtheta.
TargetFunctional target_coefficient(std::size_t k, std::size_t dtheta);

/// Vector of coordinates H = (theta_{k1}, ..., theta_{km}).
TargetFunctional target_coefficient_block(std::vector<std::size_t> ks, std::size_t dtheta);

/// Average marginal effect of the t coordinate `rate` at t*. Logit link:
/// H = G(theta't*)(1 - G(theta't*)) theta_rate; linear link reduces to
/// the plain coefficient.
TargetFunctional target_ame_glm(LinkKind link, std::size_t rate, std::size_t dtheta);

/// Average change in the marginal effect (second derivative in t_rate) for
/// logistic-link models: H = theta_rate^2 G*(1-G*)(1-2G*).
TargetFunctional target_acme_fractional(std::size_t rate, std::size_t dtheta);

/// Price/rate elasticity at t*: H = (1 - G(theta't*)) * theta_rate * t*_rate.
TargetFunctional target_elasticity(std::size_t rate, std::size_t dtheta);

/// Willingness to pay: H = theta_rate / theta_0 (theta_0 multiplies the
/// intercept column). Throws DivideByZeroIntercept when |theta_0| < 1e-8.
TargetFunctional target_wtp(std::size_t rate, std::size_t dtheta);

// ---------------------------------------------------------------------------
// Fixed-point targets for the personalized-rate problem.

// Auxiliary default model P[D=1|r] = logistic(delta0 + delta_r * r). The
// (delta0, delta_r) pair is taken as a user input; delta_r > 0 is required by
// the monotonicity argument behind uniqueness of the fixed point. Rates are
// quoted in `rate_unit` (display metadata only); r_max bounds the bracket.
struct DefaultSpec {
    double delta0 = 0.0;
    double delta_r = 1.0;
    double r_max = 200.0;  // generous bracket for rates quoted in percent
    bool allow_boundary = false;  // accept theta_rate == 0
    std::string rate_unit = "percent";
};

/// Optimal rate r* solving r = (1 + r (1 - G(r)) theta_rate) / (D(r) delta_r)
/// by bracketing + bisection on (0, r_max]; the fixed point is unique for
/// theta_rate < 0, delta_r > 0 but not necessarily a contraction, so naive
/// iteration is not used. The returned root has |r - RHS(r)| < 1e-10.
/// Throws SignConditionViolated (theta_rate >= 0 unless allow_boundary and
/// == 0, or delta_r <= 0) and NoBracket when g keeps one sign on (0, r_max].
double optimal_rate(cspan theta, const DefaultSpec& defaults, cspan tstar, std::size_t rate);

/// H = r*(theta). Jacobian by implicit differentiation of g(r, theta) = 0:
/// dr*/dtheta = -g_theta / g_r, from one dual-number evaluation of g.
TargetFunctional target_optimal_rate(const DefaultSpec& defaults, std::size_t rate,
                                     std::size_t dtheta);

/// H = pi(r*(theta)) with pi(r) = loan * [r G(r)] * [1 - D(r)]. The default
/// Jacobian differentiates pi in theta holding r* fixed (envelope theorem;
/// d pi / d r vanishes at the optimum). envelope=false adds the
/// (d pi/d r) * (d r*/d theta) term explicitly, which is what the
/// finite-difference oracle checks the shortcut against.
TargetFunctional target_profit_at_optimum(const DefaultSpec& defaults, double loan,
                                          std::size_t rate, std::size_t dtheta,
                                          bool envelope = true);

/// Wrap a user eval into a target; Jacobian via forward duals. F must be
/// callable as f(cspan x, std::span<const S> theta, cspan tstar) ->
/// std::vector<S> of length dmu, for S in {double, Dual}.
template <class F>
TargetFunctional custom_target(const std::string& name, std::size_t dmu, std::size_t dtheta,
                               F f) {
    TargetFunctional t;
    t.name = name;
    t.dmu = dmu;
    t.dtheta = dtheta;
    t.eval = [f, dmu, dtheta](cspan x, cspan theta, cspan tstar) -> Vec {
        require(theta.size() == dtheta, errc::numeric, "DimMismatch", "custom target theta");
        std::vector<double> out = f(x, std::span<const double>(theta), tstar);
        require(out.size() == dmu, errc::numeric, "DimMismatch", "custom target output length");
        return Vec::from(std::move(out));
    };
    t.jac = [f, dmu, dtheta](cspan x, cspan theta, cspan tstar) -> Mat {
        require(theta.size() == dtheta, errc::numeric, "DimMismatch", "custom target theta");
        std::vector<Dual> th;
        th.reserve(dtheta);
        for (std::size_t i = 0; i < dtheta; ++i) th.push_back(Dual::seeded(theta[i], dtheta, i));
        std::vector<Dual> out = f(x, std::span<const Dual>(th), tstar);
        require(out.size() == dmu, errc::numeric, "DimMismatch", "custom target output length");
        Mat j(dmu, dtheta);
        for (std::size_t h = 0; h < dmu; ++h)
            for (std::size_t k = 0; k < dtheta; ++k) {
                require(std::isfinite(out[h].t[k]), errc::numeric, "UnsupportedPrimitive",
                        "custom target produced non-finite derivative");
                j(h, k) = out[h].t[k];
            }
        return j;
    };
    return t;
}

/// Resolve an external key. Indices in keys are 1-based: "coef:2" selects the
/// second theta coordinate, "coef:1,2" a block; "ame:r", "acme:r",
/// "elasticity:r", "wtp:r" name the rate coordinate; "opt_rate" and
/// "profit_at_opt" default the rate to the last coordinate.
TargetFunctional target_by_key(const std::string& key, std::size_t dtheta, LinkKind loss_link,
                               const DefaultSpec& defaults, double loan);

}  // namespace hinf
