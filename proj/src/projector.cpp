#include "hinf/projector.hpp"

#include <cmath>
#include <memory>

#include "hinf/rng.hpp"

namespace hinf {

namespace {

// Distinct entries of a symmetric dtheta x dtheta matrix, upper triangle in
// row-major order.
std::vector<std::pair<std::size_t, std::size_t>> entry_pairs(std::size_t p) {
    std::vector<std::pair<std::size_t, std::size_t>> pairs;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i; j < p; ++j) pairs.emplace_back(i, j);
    return pairs;
}

Mat unpack_symmetric(cspan entries, std::size_t p) {
    Mat l(p, p);
    std::size_t e = 0;
    for (std::size_t i = 0; i < p; ++i)
        for (std::size_t j = i; j < p; ++j) {
            l(i, j) = entries[e];
            l(j, i) = entries[e];
            ++e;
        }
    return l;
}

// Multi-output squared loss for the auxiliary entry regressions: the
// parameter layer is the conditional mean of each entry.
LossModel mse_multi(std::size_t n_out) {
    LossModel m;
    m.name = "mse_multi";
    m.dy = n_out;
    m.dt = 1;
    m.dtheta = n_out;
    m.hessian_free_of_y = true;
    m.link = LinkKind::none;
    m.expects_intercept = true;
    m.value = [n_out](cspan y, cspan, cspan th) {
        double s = 0.0;
        for (std::size_t k = 0; k < n_out; ++k) {
            const double r = th[k] - y[k];
            s += r * r;
        }
        return 0.5 * s;
    };
    m.grad = [n_out](cspan y, cspan, cspan th) {
        std::vector<double> g(n_out);
        for (std::size_t k = 0; k < n_out; ++k) g[k] = th[k] - y[k];
        return Vec::from(std::move(g));
    };
    m.hess = [n_out](cspan, cspan, cspan) { return Mat::identity(n_out); };
    return m;
}

// Shared estimator path for fit_regression and glm_closed_form: regress the
// [entries_of(i)] rows on x_i and unpack symmetrically at eval time.
ProjectedHessian regress_entries(const Dataset& data, std::size_t dtheta,
                                 const std::function<Vec(std::size_t)>& entries_of,
                                 const NetConfig& aux_net, const TrainConfig& aux_train,
                                 const RegScheme& reg, std::string provenance) {
    const auto pairs = entry_pairs(dtheta);
    const std::size_t n_ent = pairs.size();

    Dataset aux;
    aux.n = data.n;
    aux.y = Mat(data.n, n_ent);
    aux.t = Mat(data.n, 1, 1.0);
    aux.x = data.x;
    for (std::size_t i = 0; i < data.n; ++i) {
        Vec e = entries_of(i);
        for (std::size_t k = 0; k < n_ent; ++k) aux.y(i, k) = e[k];
    }

    NetConfig cfg = aux_net;
    cfg.input_dim = data.dx();
    cfg.dtheta = n_ent;
    cfg.bound = std::numeric_limits<double>::infinity();  // entries are unconstrained reals
    cfg.head_partition.clear();
    cfg.positive_params.clear();

    StructuredNet fitted = train(StructuredNet(cfg), aux, mse_multi(n_ent), aux_train);

    ProjectedHessian out;
    out.provenance = std::move(provenance);
    out.reg = reg;
    out.dtheta = dtheta;
    out.raw = [fitted, dtheta](cspan x) {
        Vec entries = fitted.theta_forward(x);
        return unpack_symmetric(entries.span(), dtheta);
    };
    return out;
}

}  // namespace

void TreatmentDistribution::validate(std::size_t dt, bool expects_intercept) const {
    switch (kind) {
        case Kind::empirical:
            require(support.rows() > 0 && support.cols() == dt, errc::config, "BadDistribution",
                    "empirical sample must be non-empty with dt columns");
            break;
        case Kind::discrete: {
            require(support.rows() == probs.size() && support.cols() == dt, errc::config,
                    "BadDistribution", "discrete support and probabilities disagree");
            double s = 0.0;
            for (double p : probs) {
                require(p >= 0.0, errc::config, "BadDistribution", "negative probability");
                s += p;
            }
            require(std::fabs(s - 1.0) <= 1e-12, errc::config, "BadDistribution",
                    "probabilities must sum to 1 within 1e-12");
            break;
        }
        case Kind::product:
            require(marginals.size() == dt, errc::config, "BadDistribution",
                    "product distribution needs one marginal per t coordinate");
            break;
    }
    if (expects_intercept) {
        // First coordinate must be the constant 1 the model expects.
        if (kind == Kind::product) {
            require(marginals[0].kind == Marginal::Kind::constant && marginals[0].a == 1.0,
                    errc::config, "BadDistribution",
                    "first marginal must be the constant intercept 1");
        } else {
            for (std::size_t r = 0; r < support.rows(); ++r)
                require(support(r, 0) == 1.0, errc::config, "BadDistribution",
                        "support rows must carry the intercept coordinate 1");
        }
    }
}

TreatmentDistribution TreatmentDistribution::discrete_support(Mat support,
                                                              std::vector<double> probs) {
    TreatmentDistribution d;
    d.kind = Kind::discrete;
    d.support = std::move(support);
    d.probs = std::move(probs);
    return d;
}

TreatmentDistribution TreatmentDistribution::empirical(Mat sample) {
    TreatmentDistribution d;
    d.kind = Kind::empirical;
    d.support = std::move(sample);
    return d;
}

RegScheme RegScheme::parse(const std::string& key) {
    RegScheme r;
    if (key == "reg:none") {
        r.kind = Kind::none;
        r.lambda = 0.0;
        return r;
    }
    auto parse_lambda = [&](const std::string& s) {
        try {
            return std::stod(s);
        } catch (const std::exception&) {
            fail(errc::config, "BadRegScheme", "cannot parse lambda in '" + key + "'");
        }
    };
    if (key.rfind("reg:ridge:", 0) == 0) {
        r.kind = Kind::ridge;
        r.lambda = parse_lambda(key.substr(10));
        return r;
    }
    if (key.rfind("reg:eig_floor:", 0) == 0) {
        r.kind = Kind::eig_floor;
        r.lambda = parse_lambda(key.substr(14));
        return r;
    }
    fail(errc::config, "BadRegScheme", "unknown regularization '" + key + "'");
}

std::string RegScheme::key() const {
    switch (kind) {
        case Kind::none: return "reg:none";
        case Kind::ridge: return "reg:ridge:" + std::to_string(lambda);
        case Kind::eig_floor: return "reg:eig_floor:" + std::to_string(lambda);
    }
    return "reg:none";
}

Mat regularize(const Mat& l, const RegScheme& scheme) {
    require(l.rows() == l.cols(), errc::numeric, "DimMismatch", "regularize needs square input");
    switch (scheme.kind) {
        case RegScheme::Kind::none:
            return l;
        case RegScheme::Kind::ridge: {
            Mat out = l;
            for (std::size_t i = 0; i < l.rows(); ++i) out(i, i) += scheme.lambda;
            return out;
        }
        case RegScheme::Kind::eig_floor: {
            EigenSym e = eigen_sym(l);
            bool touched = false;
            for (std::size_t i = 0; i < e.values.len(); ++i)
                if (e.values[i] < scheme.lambda) {
                    e.values[i] = scheme.lambda;
                    touched = true;
                }
            if (!touched) return l;
            const std::size_t p = l.rows();
            Mat out(p, p, 0.0);
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = i; j < p; ++j) {
                    double s = 0.0;
                    for (std::size_t k = 0; k < p; ++k)
                        s += e.vectors(i, k) * e.values[k] * e.vectors(j, k);
                    out(i, j) = out(j, i) = s;
                }
            return out;
        }
    }
    return l;
}

Mat ProjectedHessian::eval(cspan x) const {
    Mat l = raw(x);
    // Exact symmetry before regularization; strategies emit symmetric output
    // but accumulated rounding is cleaned up here.
    for (std::size_t i = 0; i < l.rows(); ++i)
        for (std::size_t j = i + 1; j < l.cols(); ++j) {
            const double v = 0.5 * (l(i, j) + l(j, i));
            l(i, j) = l(j, i) = v;
        }
    return regularize(l, reg);
}

Mat ProjectedHessian::se(cspan x) const {
    if (raw_se) return raw_se(x);
    return Mat(dtheta, dtheta, 0.0);
}

ProjectedHessian fit_regression(const Dataset& data, const ThetaFn& theta_hat,
                                const LossModel& loss, const NetConfig& aux_net,
                                const TrainConfig& aux_train, const RegScheme& reg) {
    require(static_cast<bool>(theta_hat), errc::config, "BadProjector",
            "fit_regression needs theta_hat from a disjoint sample");
    auto entries_of = [&data, &theta_hat, &loss](std::size_t i) {
        Vec theta = theta_hat(data.x_row(i));
        Mat h = loss.hess(data.y_row(i), data.t_row(i), theta.span());
        const auto pairs = entry_pairs(loss.dtheta);
        std::vector<double> e(pairs.size());
        for (std::size_t k = 0; k < pairs.size(); ++k) e[k] = h(pairs[k].first, pairs[k].second);
        return Vec::from(std::move(e));
    };
    return regress_entries(data, loss.dtheta, entries_of, aux_net, aux_train, reg,
                           "L:regression on n=" + std::to_string(data.n));
}

namespace {

struct MaterializedT {
    Mat rows;                    // draws or support
    std::vector<double> weights; // sums to 1
    bool exact = false;
};

MaterializedT materialize(const TreatmentDistribution& dist, std::size_t dt) {
    MaterializedT m;
    switch (dist.kind) {
        case TreatmentDistribution::Kind::discrete:
            m.rows = dist.support;
            m.weights = dist.probs;
            m.exact = true;
            return m;
        case TreatmentDistribution::Kind::empirical:
            m.rows = dist.support;
            m.weights.assign(dist.support.rows(), 1.0 / dist.support.rows());
            m.exact = true;  // exact average over the provided sample
            return m;
        case TreatmentDistribution::Kind::product: {
            using MK = TreatmentDistribution::Marginal::Kind;
            bool all_discrete = true;
            std::size_t combos = 1;
            for (const auto& mg : dist.marginals) {
                if (mg.kind == MK::uniform || mg.kind == MK::normal) all_discrete = false;
                if (mg.kind == MK::bernoulli) combos *= 2;
            }
            if (all_discrete && combos <= 4096) {
                // Exact enumeration of the product support.
                std::vector<std::vector<double>> rows{{}};
                std::vector<double> w{1.0};
                for (const auto& mg : dist.marginals) {
                    std::vector<std::vector<double>> next_rows;
                    std::vector<double> next_w;
                    for (std::size_t r = 0; r < rows.size(); ++r) {
                        if (mg.kind == MK::constant) {
                            auto row = rows[r];
                            row.push_back(mg.a);
                            next_rows.push_back(std::move(row));
                            next_w.push_back(w[r]);
                        } else {  // bernoulli with P(1) = a
                            auto row1 = rows[r];
                            row1.push_back(1.0);
                            next_rows.push_back(std::move(row1));
                            next_w.push_back(w[r] * mg.a);
                            auto row0 = rows[r];
                            row0.push_back(0.0);
                            next_rows.push_back(std::move(row0));
                            next_w.push_back(w[r] * (1.0 - mg.a));
                        }
                    }
                    rows = std::move(next_rows);
                    w = std::move(next_w);
                }
                m.rows = Mat(rows.size(), dt);
                for (std::size_t r = 0; r < rows.size(); ++r)
                    for (std::size_t c = 0; c < dt; ++c) m.rows(r, c) = rows[r][c];
                m.weights = std::move(w);
                m.exact = true;
                return m;
            }
            // Monte Carlo with common draws reused at every x.
            Rng rng(dist.mc_seed);
            m.rows = Mat(dist.mc_draws, dt);
            for (std::size_t r = 0; r < dist.mc_draws; ++r)
                for (std::size_t c = 0; c < dt; ++c) {
                    const auto& mg = dist.marginals[c];
                    switch (mg.kind) {
                        case MK::constant: m.rows(r, c) = mg.a; break;
                        case MK::bernoulli: m.rows(r, c) = rng.bernoulli(mg.a) ? 1.0 : 0.0; break;
                        case MK::uniform: m.rows(r, c) = rng.uniform(mg.a, mg.b); break;
                        case MK::normal: m.rows(r, c) = rng.normal(mg.a, mg.b); break;
                    }
                }
            m.weights.assign(dist.mc_draws, 1.0 / dist.mc_draws);
            m.exact = false;
            return m;
        }
    }
    fail(errc::internal, "BadDistribution", "unreachable distribution kind");
}

}  // namespace

namespace {

Mat randomized_from_sample(const MaterializedT& m, const ThetaFn& theta_hat,
                           const LossModel& loss, cspan x, Mat* se_out) {
    Vec theta = theta_hat(x);
    const std::vector<double> y0(loss.dy, 0.0);
    const std::size_t p = loss.dtheta;
    Mat mean(p, p, 0.0), msq(p, p, 0.0);
    for (std::size_t r = 0; r < m.rows.rows(); ++r) {
        Mat h = loss.hess(cspan(y0.data(), y0.size()), cspan(m.rows.row(r), loss.dt),
                          theta.span());
        const double w = m.weights[r];
        for (std::size_t i = 0; i < p; ++i)
            for (std::size_t j = 0; j < p; ++j) {
                mean(i, j) += w * h(i, j);
                msq(i, j) += w * h(i, j) * h(i, j);
            }
    }
    if (se_out) {
        *se_out = Mat(p, p, 0.0);
        if (!m.exact) {
            const double n = static_cast<double>(m.rows.rows());
            for (std::size_t i = 0; i < p; ++i)
                for (std::size_t j = 0; j < p; ++j) {
                    const double var = std::max(0.0, msq(i, j) - mean(i, j) * mean(i, j));
                    (*se_out)(i, j) = std::sqrt(var / n);
                }
        }
    }
    return mean;
}

}  // namespace

Mat compute_randomized(const TreatmentDistribution& dist, const ThetaFn& theta_hat,
                       const LossModel& loss, cspan x, Mat* se_out) {
    require(loss.hessian_free_of_y, errc::config, "FlagViolation",
            "computed L(x) requires a Hessian free of y");
    dist.validate(loss.dt, loss.expects_intercept);
    const MaterializedT m = materialize(dist, loss.dt);
    return randomized_from_sample(m, theta_hat, loss, x, se_out);
}

ProjectedHessian computed_randomized(const TreatmentDistribution& dist, const ThetaFn& theta_hat,
                                     const LossModel& loss, const RegScheme& reg) {
    require(static_cast<bool>(theta_hat), errc::config, "BadProjector",
            "randomized L needs theta_hat");
    require(loss.hessian_free_of_y, errc::config, "FlagViolation",
            "computed L(x) requires a Hessian free of y");
    dist.validate(loss.dt, loss.expects_intercept);
    // Materialize the T sample once; the same draws serve every x.
    auto sample = std::make_shared<MaterializedT>(materialize(dist, loss.dt));
    ProjectedHessian out;
    out.provenance = "L:randomized";
    out.reg = reg;
    out.dtheta = loss.dtheta;
    out.raw = [sample, theta_hat, loss](cspan x) {
        return randomized_from_sample(*sample, theta_hat, loss, x, nullptr);
    };
    out.raw_se = [sample, theta_hat, loss](cspan x) {
        Mat se;
        randomized_from_sample(*sample, theta_hat, loss, x, &se);
        return se;
    };
    return out;
}

ProjectedHessian glm_closed_form(const Dataset& data, const ThetaFn& theta_hat,
                                 const LossModel& loss, const NetConfig& aux_net,
                                 const TrainConfig& aux_train, const RegScheme& reg) {
    require(loss.link == LinkKind::linear || loss.link == LinkKind::logit, errc::config,
            "LinkMismatch", "glm closed form needs a glm-form loss");
    const std::size_t p = loss.dtheta;
    const auto pairs = entry_pairs(p);
    std::function<Vec(std::size_t)> entries_of;
    if (loss.link == LinkKind::linear) {
        // Gdot == 1: regress t t' entries; theta_hat not needed. No three-way
        // splitting required in this case.
        entries_of = [&data, pairs](std::size_t i) {
            cspan t = data.t_row(i);
            std::vector<double> e(pairs.size());
            for (std::size_t k = 0; k < pairs.size(); ++k)
                e[k] = t[pairs[k].first] * t[pairs[k].second];
            return Vec::from(std::move(e));
        };
    } else {
        require(static_cast<bool>(theta_hat), errc::config, "BadProjector",
                "glm closed form with logit link needs theta_hat (three-way split)");
        entries_of = [&data, &theta_hat, pairs](std::size_t i) {
            cspan t = data.t_row(i);
            Vec theta = theta_hat(data.x_row(i));
            double u = 0.0;
            for (std::size_t c = 0; c < t.size(); ++c) u += t[c] * theta[c];
            const double g = logistic_fn(u);
            const double gdot = g * (1.0 - g);
            std::vector<double> e(pairs.size());
            for (std::size_t k = 0; k < pairs.size(); ++k)
                e[k] = gdot * t[pairs[k].first] * t[pairs[k].second];
            return Vec::from(std::move(e));
        };
    }
    return regress_entries(data, p, entries_of, aux_net, aux_train, reg,
                           std::string("L:glm(") + (loss.link == LinkKind::linear ? "linear" : "logit") +
                               ") on n=" + std::to_string(data.n));
}

ProjectorKind ProjectorStrategy::parse_kind(const std::string& key) {
    if (key == "L:regression") return ProjectorKind::regression;
    if (key == "L:randomized") return ProjectorKind::randomized;
    if (key == "L:glm") return ProjectorKind::glm_closed_form;
    fail(errc::config, "BadProjector", "unknown projector strategy '" + key + "'");
}

ProjectedHessian fit_projector(const ProjectorStrategy& strategy, const Dataset& data,
                               const ThetaFn& theta_hat, const LossModel& loss,
                               const RegScheme& reg) {
    switch (strategy.kind) {
        case ProjectorKind::regression:
            return fit_regression(data, theta_hat, loss, strategy.aux_net, strategy.aux_train,
                                  reg);
        case ProjectorKind::randomized:
            return computed_randomized(strategy.dist, theta_hat, loss, reg);
        case ProjectorKind::glm_closed_form:
            return glm_closed_form(data, theta_hat, loss, strategy.aux_net, strategy.aux_train,
                                   reg);
    }
    fail(errc::internal, "BadProjector", "unreachable projector kind");
}

}  // namespace hinf
