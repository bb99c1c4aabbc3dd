#include "hinf/loss.hpp"

#include <cmath>

#include "hinf/kernels.hpp"
#include "hinf/normal.hpp"

namespace hinf {

namespace {

void check_dims(const LossModel& m, cspan y, cspan t, cspan theta) {
    require(y.size() == m.dy && t.size() == m.dt && theta.size() == m.dtheta, errc::numeric,
            "DimMismatch",
            m.name + " loss expects dy=" + std::to_string(m.dy) + " dt=" + std::to_string(m.dt) +
                " dtheta=" + std::to_string(m.dtheta));
}

double index_of(cspan t, cspan theta) { return kernels::dot(t.data(), theta.data(), t.size()); }

// log(1 + exp(u)) without overflow.
double softplus_stable(double u) {
    if (u > 0.0) return u + std::log1p(safe_exp(-u));
    return std::log1p(safe_exp(u));
}

Mat scaled_ttt(cspan t, double w) {
    Mat h(t.size(), t.size());
    for (std::size_t i = 0; i < t.size(); ++i)
        for (std::size_t j = 0; j < t.size(); ++j) h(i, j) = w * t[i] * t[j];
    return h;
}

Vec scaled_t(cspan t, double w) {
    std::vector<double> g(t.size());
    for (std::size_t i = 0; i < t.size(); ++i) g[i] = w * t[i];
    return Vec::from(std::move(g));
}

// phi(u) / (1 - Phi(u)), the Gaussian hazard, with the asymptotic expansion
// taking over in the far right tail where 1 - Phi underflows.
double gauss_hazard(double u) {
    if (u > 30.0) return u + 1.0 / u;
    return norm_pdf(u) / std::max(norm_sf(u), 1e-300);
}

}  // namespace

LossModel linear_sq(std::size_t dt) {
    LossModel m;
    m.name = "linear";
    m.dy = 1;
    m.dt = dt;
    m.dtheta = dt;
    m.hessian_free_of_y = true;
    m.link = LinkKind::linear;
    m.expects_intercept = true;
    m.value = [m](cspan y, cspan t, cspan th) {
        check_dims(m, y, t, th);
        const double r = index_of(t, th) - y[0];
        return 0.5 * r * r;
    };
    m.grad = [m](cspan y, cspan t, cspan th) {
        check_dims(m, y, t, th);
        return scaled_t(t, index_of(t, th) - y[0]);
    };
    m.hess = [m](cspan y, cspan t, cspan th) {
        check_dims(m, y, t, th);
        return scaled_ttt(t, 1.0);
    };
    return m;
}

namespace {
LossModel logistic_family(std::string name, std::size_t dt, bool binary_y) {
    LossModel m;
    m.name = std::move(name);
    m.dy = 1;
    m.dt = dt;
    m.dtheta = dt;
    m.hessian_free_of_y = true;
    m.link = LinkKind::logit;
    m.expects_intercept = true;
    auto check_y = [binary_y, nm = m.name](double y) {
        if (binary_y)
            require(y == 0.0 || y == 1.0, errc::data, "YOutOfRange", nm + " requires y in {0,1}");
        else
            require(y >= 0.0 && y <= 1.0, errc::data, "YOutOfRange", nm + " requires y in [0,1]");
    };
    m.value = [m, check_y](cspan y, cspan t, cspan th) {
        check_dims(m, y, t, th);
        check_y(y[0]);
        const double u = index_of(t, th);
        return softplus_stable(u) - y[0] * u;
    };
    m.grad = [m, check_y](cspan y, cspan t, cspan th) {
        check_dims(m, y, t, th);
        check_y(y[0]);
        return scaled_t(t, logistic_fn(index_of(t, th)) - y[0]);
    };
    m.hess = [m, check_y](cspan y, cspan t, cspan th) {
        check_dims(m, y, t, th);
        check_y(y[0]);
        const double g = logistic_fn(index_of(t, th));
        return scaled_ttt(t, g * (1.0 - g));
    };
    return m;
}
}  // namespace

LossModel logit_nll(std::size_t dt) { return logistic_family("logit", dt, true); }

LossModel fractional_qmle(std::size_t dt) { return logistic_family("fractional", dt, false); }

LossModel multinomial_nll(std::size_t n_choices, std::size_t dt_choice) {
    LossModel m;
    const std::size_t J = n_choices, dc = dt_choice;
    m.name = "multinomial";
    m.dy = J;
    m.dt = J * dc;
    m.dtheta = J + dc;
    m.hessian_free_of_y = true;
    m.link = LinkKind::none;
    m.expects_intercept = false;  // intercepts live in theta, not t

    // Softmax with outside option u0 = 0: probabilities over {0, 1..J}.
    auto choice_probs = [J, dc](cspan t, cspan th, std::vector<double>& u,
                                std::vector<double>& g) {
        double umax = 0.0;
        u.resize(J);
        for (std::size_t j = 0; j < J; ++j) {
            u[j] = th[j] + kernels::dot(th.data() + J, t.data() + j * dc, dc);
            umax = std::max(umax, u[j]);
        }
        double denom = safe_exp(-umax);
        g.resize(J);
        for (std::size_t j = 0; j < J; ++j) {
            g[j] = safe_exp(u[j] - umax);
            denom += g[j];
        }
        for (std::size_t j = 0; j < J; ++j) g[j] /= denom;
        return umax + safe_log(denom);  // log(1 + sum exp(u_j))
    };
    auto check_y = [J](cspan y) {
        double sum = 0.0;
        for (std::size_t j = 0; j < J; ++j) {
            require(y[j] == 0.0 || y[j] == 1.0, errc::data, "YOutOfRange",
                    "multinomial requires one-hot y");
            sum += y[j];
        }
        require(sum <= 1.0, errc::data, "MultipleChoicesSet",
                "multinomial y has more than one choice set");
    };

    m.value = [m, choice_probs, check_y, J](cspan y, cspan t, cspan th) {
        check_dims(m, y, t, th);
        check_y(y);
        std::vector<double> u, g;
        double logsum = choice_probs(t, th, u, g);
        double v = logsum;
        for (std::size_t j = 0; j < J; ++j) v -= y[j] * u[j];
        return v;
    };
    m.grad = [m, choice_probs, check_y, J, dc](cspan y, cspan t, cspan th) {
        check_dims(m, y, t, th);
        check_y(y);
        std::vector<double> u, g;
        choice_probs(t, th, u, g);
        std::vector<double> out(J + dc, 0.0);
        for (std::size_t j = 0; j < J; ++j) {
            const double r = g[j] - y[j];
            out[j] = r;
            for (std::size_t k = 0; k < dc; ++k) out[J + k] += r * t[j * dc + k];
        }
        return Vec::from(std::move(out));
    };
    m.hess = [m, choice_probs, check_y, J, dc](cspan y, cspan t, cspan th) {
        check_dims(m, y, t, th);
        check_y(y);
        std::vector<double> u, g;
        choice_probs(t, th, u, g);
        // tbar = sum_j g_j t_j, the probability-weighted characteristics.
        std::vector<double> tbar(dc, 0.0);
        for (std::size_t j = 0; j < J; ++j)
            for (std::size_t k = 0; k < dc; ++k) tbar[k] += g[j] * t[j * dc + k];
        Mat h(J + dc, J + dc, 0.0);
        for (std::size_t j = 0; j < J; ++j)
            for (std::size_t l = 0; l < J; ++l)
                h(j, l) = g[j] * ((j == l ? 1.0 : 0.0) - g[l]);
        for (std::size_t j = 0; j < J; ++j)
            for (std::size_t k = 0; k < dc; ++k) {
                const double v = g[j] * (t[j * dc + k] - tbar[k]);
                h(j, J + k) = v;
                h(J + k, j) = v;
            }
        for (std::size_t k1 = 0; k1 < dc; ++k1)
            for (std::size_t k2 = 0; k2 < dc; ++k2) {
                double s = 0.0;
                for (std::size_t j = 0; j < J; ++j) s += g[j] * t[j * dc + k1] * t[j * dc + k2];
                h(J + k1, J + k2) = s - tbar[k1] * tbar[k2];
            }
        return h;
    };
    return m;
}

LossModel tobit1_nll(std::size_t dt) {
    LossModel m;
    m.name = "tobit1";
    m.dy = 1;
    m.dt = dt;
    m.dtheta = dt + 1;
    m.hessian_free_of_y = false;
    m.link = LinkKind::none;
    m.expects_intercept = true;
    m.positive_params = {dt};  // theta2 = 1/sigma

    auto check = [m, dt](cspan y, cspan t, cspan th) {
        check_dims(m, y, t, th);
        require(y[0] >= 0.0, errc::data, "NegativeY", "tobit1 requires y >= 0");
        require(th[dt] > 0.0, errc::numeric, "NonPositiveScale", "tobit1 requires theta2 > 0");
    };

    m.value = [check, dt](cspan y, cspan t, cspan th) {
        check(y, t, th);
        const double u = index_of(t, th.first(dt));
        if (y[0] == 0.0) return -safe_log(norm_sf(u));
        const double r = th[dt] * y[0] - u;
        return -safe_log(th[dt]) + 0.5 * r * r;
    };
    m.grad = [check, dt](cspan y, cspan t, cspan th) {
        check(y, t, th);
        const double u = index_of(t, th.first(dt));
        std::vector<double> g(dt + 1, 0.0);
        if (y[0] == 0.0) {
            const double hz = gauss_hazard(u);
            for (std::size_t i = 0; i < dt; ++i) g[i] = hz * t[i];
        } else {
            const double r = th[dt] * y[0] - u;
            for (std::size_t i = 0; i < dt; ++i) g[i] = -r * t[i];
            g[dt] = -1.0 / th[dt] + r * y[0];
        }
        return Vec::from(std::move(g));
    };
    m.hess = [check, dt](cspan y, cspan t, cspan th) {
        check(y, t, th);
        const double u = index_of(t, th.first(dt));
        Mat h(dt + 1, dt + 1, 0.0);
        if (y[0] == 0.0) {
            const double hz = gauss_hazard(u);
            const double w = hz * (hz - u);  // positive for all u
            for (std::size_t i = 0; i < dt; ++i)
                for (std::size_t j = 0; j < dt; ++j) h(i, j) = w * t[i] * t[j];
        } else {
            for (std::size_t i = 0; i < dt; ++i) {
                for (std::size_t j = 0; j < dt; ++j) h(i, j) = t[i] * t[j];
                h(i, dt) = h(dt, i) = -y[0] * t[i];
            }
            h(dt, dt) = 1.0 / (th[dt] * th[dt]) + y[0] * y[0];
        }
        return h;
    };
    return m;
}

LossModel iv_stacked() {
    LossModel m;
    m.name = "iv";
    m.dy = 2;  // (outcome, endogenous treatment)
    m.dt = 2;  // intercepted instrument (1, z)
    m.dtheta = 4;
    m.hessian_free_of_y = true;
    m.link = LinkKind::none;
    m.expects_intercept = true;
    m.value = [m](cspan y, cspan t, cspan th) {
        check_dims(m, y, t, th);
        const double r1 = y[0] - th[0] - th[1] * t[1];
        const double r2 = y[1] - th[2] - th[3] * t[1];
        return 0.5 * (r1 * r1 + r2 * r2);
    };
    m.grad = [m](cspan y, cspan t, cspan th) {
        check_dims(m, y, t, th);
        const double r1 = y[0] - th[0] - th[1] * t[1];
        const double r2 = y[1] - th[2] - th[3] * t[1];
        return Vec{-r1 * t[0], -r1 * t[1], -r2 * t[0], -r2 * t[1]};
    };
    m.hess = [m](cspan y, cspan t, cspan th) {
        check_dims(m, y, t, th);
        Mat h(4, 4, 0.0);
        for (std::size_t b = 0; b < 2; ++b)
            for (std::size_t i = 0; i < 2; ++i)
                for (std::size_t j = 0; j < 2; ++j) h(2 * b + i, 2 * b + j) = t[i] * t[j];
        return h;
    };
    return m;
}

LossModel loss_by_key(const std::string& key, std::size_t dt) {
    if (key == "linear") return linear_sq(dt);
    if (key == "logit") return logit_nll(dt);
    if (key == "fractional") return fractional_qmle(dt);
    if (key == "tobit1") return tobit1_nll(dt);
    if (key == "iv") return iv_stacked();
    if (key.rfind("multinomial:", 0) == 0) {
        const std::string args = key.substr(12);
        const auto comma = args.find(',');
        require(comma != std::string::npos, errc::config, "BadLossKey",
                "multinomial key must be multinomial:J,dt_choice");
        try {
            const std::size_t J = std::stoul(args.substr(0, comma));
            const std::size_t dc = std::stoul(args.substr(comma + 1));
            return multinomial_nll(J, dc);
        } catch (const std::exception&) {
            fail(errc::config, "BadLossKey", "cannot parse multinomial dims in '" + key + "'");
        }
    }
    if (key == "custom")
        fail(errc::config, "BadLossKey",
             "custom losses are a library extension point; see custom_loss() in loss.hpp");
    fail(errc::config, "BadLossKey", "unknown loss '" + key + "'");
}

}  // namespace hinf
