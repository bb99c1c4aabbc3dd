#include "hinf/targets.hpp"

#include <cmath>

#include "hinf/kernels.hpp"

namespace hinf {

namespace {

void check_theta(std::size_t expect, cspan theta, const char* who) {
    require(theta.size() == expect, errc::numeric, "DimMismatch",
            std::string(who) + ": theta length " + std::to_string(theta.size()) +
                " != " + std::to_string(expect));
}

double index_at(cspan theta, cspan tstar) {
    require(tstar.size() == theta.size(), errc::numeric, "DimMismatch",
            "t* length must match theta");
    return kernels::dot(theta.data(), tstar.data(), theta.size());
}

}  // namespace

TargetFunctional target_coefficient(std::size_t k, std::size_t dtheta) {
    require(k < dtheta, errc::config, "IndexOutOfRange",
            "coefficient index " + std::to_string(k) + " out of range for dtheta=" +
                std::to_string(dtheta));
    return target_coefficient_block({k}, dtheta);
}

TargetFunctional target_coefficient_block(std::vector<std::size_t> ks, std::size_t dtheta) {
    require(!ks.empty(), errc::config, "IndexOutOfRange", "empty coefficient block");
    for (std::size_t k : ks)
        require(k < dtheta, errc::config, "IndexOutOfRange",
                "coefficient index " + std::to_string(k) + " out of range");
    TargetFunctional t;
    t.name = "coef";
    t.dmu = ks.size();
    t.dtheta = dtheta;
    t.eval = [ks, dtheta](cspan, cspan theta, cspan) {
        check_theta(dtheta, theta, "coef");
        std::vector<double> out(ks.size());
        for (std::size_t h = 0; h < ks.size(); ++h) out[h] = theta[ks[h]];
        return Vec::from(std::move(out));
    };
    t.jac = [ks, dtheta](cspan, cspan theta, cspan) {
        check_theta(dtheta, theta, "coef");
        Mat j(ks.size(), dtheta, 0.0);
        for (std::size_t h = 0; h < ks.size(); ++h) j(h, ks[h]) = 1.0;
        return j;
    };
    return t;
}

TargetFunctional target_ame_glm(LinkKind link, std::size_t rate, std::size_t dtheta) {
    require(link == LinkKind::linear || link == LinkKind::logit, errc::config, "LinkMismatch",
            "ame target needs a glm-form loss (linear or logit link)");
    require(rate < dtheta, errc::config, "IndexOutOfRange", "ame rate index out of range");
    if (link == LinkKind::linear) {
        TargetFunctional t = target_coefficient(rate, dtheta);
        t.name = "ame";
        t.required_link = LinkKind::linear;
        return t;
    }
    TargetFunctional t;
    t.name = "ame";
    t.dmu = 1;
    t.dtheta = dtheta;
    t.required_link = LinkKind::logit;
    t.eval = [rate, dtheta](cspan, cspan theta, cspan tstar) {
        check_theta(dtheta, theta, "ame");
        const double g = logistic_fn(index_at(theta, tstar));
        return Vec{g * (1.0 - g) * theta[rate]};
    };
    t.jac = [rate, dtheta](cspan, cspan theta, cspan tstar) {
        check_theta(dtheta, theta, "ame");
        const double g = logistic_fn(index_at(theta, tstar));
        const double gdot = g * (1.0 - g);
        Mat j(1, dtheta);
        for (std::size_t k = 0; k < dtheta; ++k)
            j(0, k) = gdot * (1.0 - 2.0 * g) * tstar[k] * theta[rate] +
                      (k == rate ? gdot : 0.0);
        return j;
    };
    return t;
}

TargetFunctional target_acme_fractional(std::size_t rate, std::size_t dtheta) {
    require(rate < dtheta, errc::config, "IndexOutOfRange", "acme rate index out of range");
    TargetFunctional t;
    t.name = "acme";
    t.dmu = 1;
    t.dtheta = dtheta;
    t.required_link = LinkKind::logit;
    t.eval = [rate, dtheta](cspan, cspan theta, cspan tstar) {
        check_theta(dtheta, theta, "acme");
        const double g = logistic_fn(index_at(theta, tstar));
        return Vec{theta[rate] * theta[rate] * g * (1.0 - g) * (1.0 - 2.0 * g)};
    };
    t.jac = [rate, dtheta](cspan, cspan theta, cspan tstar) {
        check_theta(dtheta, theta, "acme");
        const double g = logistic_fn(index_at(theta, tstar));
        const double w = g * (1.0 - g) * (1.0 - 2.0 * g);
        const double wprime = (1.0 - 6.0 * g + 6.0 * g * g) * g * (1.0 - g);  // dw/du
        const double th_r = theta[rate];
        Mat j(1, dtheta);
        for (std::size_t k = 0; k < dtheta; ++k)
            j(0, k) = th_r * th_r * wprime * tstar[k] + (k == rate ? 2.0 * th_r * w : 0.0);
        return j;
    };
    return t;
}

TargetFunctional target_elasticity(std::size_t rate, std::size_t dtheta) {
    require(rate < dtheta, errc::config, "IndexOutOfRange", "elasticity rate index out of range");
    TargetFunctional t;
    t.name = "elasticity";
    t.dmu = 1;
    t.dtheta = dtheta;
    t.required_link = LinkKind::logit;
    t.eval = [rate, dtheta](cspan, cspan theta, cspan tstar) {
        check_theta(dtheta, theta, "elasticity");
        const double g = logistic_fn(index_at(theta, tstar));
        return Vec{(1.0 - g) * theta[rate] * tstar[rate]};
    };
    t.jac = [rate, dtheta](cspan, cspan theta, cspan tstar) {
        check_theta(dtheta, theta, "elasticity");
        const double g = logistic_fn(index_at(theta, tstar));
        const double gdot = g * (1.0 - g);
        Mat j(1, dtheta);
        for (std::size_t k = 0; k < dtheta; ++k)
            j(0, k) = -gdot * tstar[k] * theta[rate] * tstar[rate] +
                      (k == rate ? (1.0 - g) * tstar[rate] : 0.0);
        return j;
    };
    return t;
}

TargetFunctional target_wtp(std::size_t rate, std::size_t dtheta) {
    require(rate < dtheta && rate != 0, errc::config, "IndexOutOfRange",
            "wtp rate index must be a non-intercept coordinate");
    TargetFunctional t;
    t.name = "wtp";
    t.dmu = 1;
    t.dtheta = dtheta;
    t.required_link = LinkKind::logit;
    t.eval = [rate, dtheta](cspan, cspan theta, cspan) {
        check_theta(dtheta, theta, "wtp");
        require(std::fabs(theta[0]) >= 1e-8, errc::numeric, "DivideByZeroIntercept",
                "wtp undefined: |intercept| < 1e-8");
        return Vec{theta[rate] / theta[0]};
    };
    t.jac = [rate, dtheta](cspan, cspan theta, cspan) {
        check_theta(dtheta, theta, "wtp");
        require(std::fabs(theta[0]) >= 1e-8, errc::numeric, "DivideByZeroIntercept",
                "wtp undefined: |intercept| < 1e-8");
        Mat j(1, dtheta, 0.0);
        j(0, rate) = 1.0 / theta[0];
        j(0, 0) = -theta[rate] / (theta[0] * theta[0]);
        return j;
    };
    return t;
}

// ---------------------------------------------------------------------------

namespace {

// g(r, theta) = r - (1 + r (1 - G(u(r))) theta_rate) / (D(r) delta_r), whose
// root in r is the optimal rate. Written once over a generic scalar so the
// same expression serves the double bisection path and the dual-number
// implicit-derivative path.
template <class S>
S rate_gap(const S& r, std::span<const S> theta, const DefaultSpec& d, cspan tstar,
           std::size_t rate) {
    S u = theta[rate] * r;
    for (std::size_t j = 0; j < theta.size(); ++j)
        if (j != rate) u = u + theta[j] * tstar[j];
    S g_take = logistic(u);
    S d_def = logistic(r * d.delta_r + d.delta0);
    S numer = (1.0 - g_take) * theta[rate] * r + 1.0;
    return r - numer / (d_def * d.delta_r);
}

void check_sign_conditions(cspan theta, const DefaultSpec& d, std::size_t rate) {
    require(d.delta_r > 0.0, errc::numeric, "SignConditionViolated",
            "optimal_rate requires delta_r > 0");
    if (d.allow_boundary)
        require(theta[rate] <= 0.0, errc::numeric, "SignConditionViolated",
                "optimal_rate requires theta_rate <= 0");
    else
        require(theta[rate] < 0.0, errc::numeric, "SignConditionViolated",
                "optimal_rate requires theta_rate < 0");
}

}  // namespace

double optimal_rate(cspan theta, const DefaultSpec& defaults, cspan tstar, std::size_t rate) {
    require(rate < theta.size(), errc::config, "IndexOutOfRange", "rate index out of range");
    check_sign_conditions(theta, defaults, rate);

    auto g = [&](double r) {
        return rate_gap<double>(r, std::span<const double>(theta), defaults, tstar, rate);
    };

    double lo = 1e-9, hi = defaults.r_max;
    double glo = g(lo), ghi = g(hi);
    require(glo < 0.0 && ghi > 0.0, errc::numeric, "NoBracket",
            "rate gap does not change sign on (0, r_max]");
    double mid = 0.5 * (lo + hi), gm = g(mid);
    for (int iter = 0; iter < 2000 && std::fabs(gm) >= 1e-12; ++iter) {
        if (gm < 0.0)
            lo = mid;
        else
            hi = mid;
        mid = 0.5 * (lo + hi);
        gm = g(mid);
    }

    // Newton polish sharpens the root to machine precision, which keeps
    // finite differences of r*(theta) clean downstream.
    const std::size_t p = theta.size();
    for (int polish = 0; polish < 3; ++polish) {
        std::vector<Dual> th;
        for (std::size_t j = 0; j < p; ++j) th.push_back(Dual::constant(theta[j], 1));
        Dual rd = Dual::seeded(mid, 1, 0);
        Dual gd = rate_gap<Dual>(rd, std::span<const Dual>(th), defaults, tstar, rate);
        if (std::fabs(gd.t[0]) < 1e-14) break;
        const double step = gd.v / gd.t[0];
        const double next = mid - step;
        if (next <= 0.0 || next > defaults.r_max) break;
        mid = next;
    }
    require(std::fabs(g(mid)) < 1e-10, errc::numeric, "NoBracket",
            "bisection failed to drive the fixed-point residual below 1e-10");
    return mid;
}

namespace {

// dr*/dtheta = -g_theta / g_r from one dual evaluation at (r*, theta).
Vec optimal_rate_jac(double rstar, cspan theta, const DefaultSpec& d, cspan tstar,
                     std::size_t rate) {
    const std::size_t p = theta.size();
    std::vector<Dual> th;
    for (std::size_t j = 0; j < p; ++j) th.push_back(Dual::seeded(theta[j], p + 1, j));
    Dual r = Dual::seeded(rstar, p + 1, p);
    Dual gd = rate_gap<Dual>(r, std::span<const Dual>(th), d, tstar, rate);
    const double g_r = gd.t[p];
    require(std::fabs(g_r) > 1e-14, errc::numeric, "NoBracket",
            "degenerate fixed point: dg/dr vanishes");
    std::vector<double> out(p);
    for (std::size_t j = 0; j < p; ++j) out[j] = -gd.t[j] / g_r;
    return Vec::from(std::move(out));
}

template <class S>
S profit_at(const S& r, std::span<const S> theta, const DefaultSpec& d, cspan tstar,
            std::size_t rate, double loan) {
    S u = theta[rate] * r;
    for (std::size_t j = 0; j < theta.size(); ++j)
        if (j != rate) u = u + theta[j] * tstar[j];
    S g_take = logistic(u);
    S d_def = logistic(r * d.delta_r + d.delta0);
    return loan * r * g_take * (1.0 - d_def);
}

}  // namespace

TargetFunctional target_optimal_rate(const DefaultSpec& defaults, std::size_t rate,
                                     std::size_t dtheta) {
    require(rate < dtheta, errc::config, "IndexOutOfRange", "rate index out of range");
    TargetFunctional t;
    t.name = "opt_rate";
    t.dmu = 1;
    t.dtheta = dtheta;
    t.required_link = LinkKind::logit;
    t.eval = [defaults, rate, dtheta](cspan, cspan theta, cspan tstar) {
        check_theta(dtheta, theta, "opt_rate");
        return Vec{optimal_rate(theta, defaults, tstar, rate)};
    };
    t.jac = [defaults, rate, dtheta](cspan, cspan theta, cspan tstar) {
        check_theta(dtheta, theta, "opt_rate");
        const double rstar = optimal_rate(theta, defaults, tstar, rate);
        Vec dr = optimal_rate_jac(rstar, theta, defaults, tstar, rate);
        Mat j(1, dtheta);
        for (std::size_t k = 0; k < dtheta; ++k) j(0, k) = dr[k];
        return j;
    };
    return t;
}

TargetFunctional target_profit_at_optimum(const DefaultSpec& defaults, double loan,
                                          std::size_t rate, std::size_t dtheta, bool envelope) {
    require(rate < dtheta, errc::config, "IndexOutOfRange", "rate index out of range");
    TargetFunctional t;
    t.name = "profit_at_opt";
    t.dmu = 1;
    t.dtheta = dtheta;
    t.required_link = LinkKind::logit;
    t.eval = [defaults, loan, rate, dtheta](cspan, cspan theta, cspan tstar) {
        check_theta(dtheta, theta, "profit_at_opt");
        const double rstar = optimal_rate(theta, defaults, tstar, rate);
        return Vec{profit_at<double>(rstar, std::span<const double>(theta), defaults, tstar,
                                     rate, loan)};
    };
    t.jac = [defaults, loan, rate, dtheta, envelope](cspan, cspan theta, cspan tstar) {
        check_theta(dtheta, theta, "profit_at_opt");
        const std::size_t p = dtheta;
        const double rstar = optimal_rate(theta, defaults, tstar, rate);

        // d pi / d theta holding r* fixed (duals seeded on theta only for the
        // envelope default; r carries an extra direction when the full chain
        // term is requested).
        std::vector<Dual> th;
        for (std::size_t j = 0; j < p; ++j) th.push_back(Dual::seeded(theta[j], p + 1, j));
        Dual r = Dual::seeded(rstar, p + 1, p);
        Dual pi = profit_at<Dual>(r, std::span<const Dual>(th), defaults, tstar, rate, loan);

        Mat j(1, dtheta);
        if (envelope) {
            for (std::size_t k = 0; k < p; ++k) j(0, k) = pi.t[k];
        } else {
            const double dpi_dr = pi.t[p];  // ~0 at the optimum
            Vec dr = optimal_rate_jac(rstar, theta, defaults, tstar, rate);
            for (std::size_t k = 0; k < p; ++k) j(0, k) = pi.t[k] + dpi_dr * dr[k];
        }
        return j;
    };
    return t;
}

// ---------------------------------------------------------------------------

namespace {

std::vector<std::size_t> parse_indices_1based(const std::string& s, std::size_t dtheta,
                                              const std::string& key) {
    std::vector<std::size_t> out;
    std::size_t pos = 0;
    while (pos <= s.size()) {
        const std::size_t comma = std::min(s.find(',', pos), s.size());
        const std::string tok = s.substr(pos, comma - pos);
        std::size_t v = 0;
        try {
            v = std::stoul(tok);
        } catch (const std::exception&) {
            fail(errc::config, "BadTargetKey", "cannot parse index '" + tok + "' in " + key);
        }
        require(v >= 1 && v <= dtheta, errc::config, "IndexOutOfRange",
                "index " + tok + " out of 1.." + std::to_string(dtheta) + " in " + key);
        out.push_back(v - 1);
        pos = comma + 1;
        if (comma == s.size()) break;
    }
    return out;
}

}  // namespace

TargetFunctional target_by_key(const std::string& key, std::size_t dtheta, LinkKind loss_link,
                               const DefaultSpec& defaults, double loan) {
    auto one_index = [&](const std::string& args) {
        auto ks = parse_indices_1based(args, dtheta, key);
        require(ks.size() == 1, errc::config, "BadTargetKey", key + " takes a single index");
        return ks[0];
    };
    TargetFunctional t;
    if (key.rfind("coef:", 0) == 0) {
        t = target_coefficient_block(parse_indices_1based(key.substr(5), dtheta, key), dtheta);
    } else if (key.rfind("ame:", 0) == 0) {
        t = target_ame_glm(loss_link, one_index(key.substr(4)), dtheta);
    } else if (key.rfind("acme:", 0) == 0) {
        t = target_acme_fractional(one_index(key.substr(5)), dtheta);
    } else if (key.rfind("elasticity:", 0) == 0) {
        t = target_elasticity(one_index(key.substr(11)), dtheta);
    } else if (key.rfind("wtp:", 0) == 0) {
        t = target_wtp(one_index(key.substr(4)), dtheta);
    } else if (key == "opt_rate" || key.rfind("opt_rate:", 0) == 0) {
        const std::size_t rate = key == "opt_rate" ? dtheta - 1 : one_index(key.substr(9));
        t = target_optimal_rate(defaults, rate, dtheta);
    } else if (key == "profit_at_opt" || key.rfind("profit_at_opt:", 0) == 0) {
        const std::size_t rate = key == "profit_at_opt" ? dtheta - 1 : one_index(key.substr(14));
        t = target_profit_at_optimum(defaults, loan, rate, dtheta);
    } else if (key == "custom") {
        fail(errc::config, "BadTargetKey",
             "custom targets are a library extension point; see custom_target() in targets.hpp");
    } else {
        fail(errc::config, "BadTargetKey", "unknown target '" + key + "'");
    }
    require(t.required_link == LinkKind::none || t.required_link == loss_link, errc::config,
            "LinkMismatch", "target '" + key + "' requires a different loss link");
    return t;
}

}  // namespace hinf
