#include "hinf/inference.hpp"

#include <algorithm>
#include <cmath>
#include <memory>

#include <json.hpp>

#include "hinf/normal.hpp"
#include "hinf/rng.hpp"

namespace hinf {

Vec influence_eval(cspan y, cspan t, cspan x, const ThetaFn& theta_fn, const LFn& l_fn,
                   const LossModel& loss, const TargetFunctional& target, cspan tstar) {
    Vec theta = theta_fn(x);
    Vec h = target.eval(x, theta.span(), tstar);
    Mat h_theta = target.jac(x, theta.span(), tstar);
    Vec score = loss.grad(y, t, theta.span());
    Mat l = l_fn(x);
    Vec corr = solve_spd(l, score);          // L(x)^{-1} l_theta
    Vec adj = h_theta.matvec(corr);          // H_theta L^{-1} l_theta
    return h - adj;
}

double influence_eval_univariate(cspan y, cspan t, cspan x, const ThetaFn& theta_fn,
                                 const std::function<double(cspan)>& lambda0,
                                 const std::function<double(cspan)>& lambda1,
                                 const std::function<double(cspan)>& lambda2,
                                 const LossModel& loss, const TargetFunctional& target,
                                 cspan tstar) {
    require(loss.dt == 2 && target.dmu == 1, errc::numeric, "DimMismatch",
            "univariate closed form needs dt = 2 and a scalar target");
    require(loss.link == LinkKind::linear || loss.link == LinkKind::logit, errc::config,
            "LinkMismatch", "univariate closed form needs a glm-form loss");
    Vec theta = theta_fn(x);
    Vec h = target.eval(x, theta.span(), tstar);
    Mat ht = target.jac(x, theta.span(), tstar);
    const double l0 = lambda0(x), l1 = lambda1(x), l2 = lambda2(x);
    const double det = l2 * l0 - l1 * l1;
    require(std::fabs(det) > 1e-12 * std::max(1.0, std::fabs(l0) + std::fabs(l2)), errc::numeric,
            "NotSPD", "lambda moments are degenerate: lambda2 lambda0 - lambda1^2 ~ 0");
    const double u = theta[0] * t[0] + theta[1] * t[1];
    const double g = loss.link == LinkKind::linear ? u : logistic_fn(u);
    const double tt = t[1];
    const double w = (ht(0, 0) * (l2 - l1 * tt) + ht(0, 1) * (l0 * tt - l1)) / det;
    return h[0] + w * (y[0] - g);
}

std::vector<std::pair<double, double>> confidence_interval(const InferenceResult& result,
                                                           double level) {
    require(level > 0.0 && level < 1.0, errc::config, "BadLevel", "level must be in (0,1)");
    const double z = norm_quantile(0.5 + level / 2.0);
    std::vector<std::pair<double, double>> out;
    for (std::size_t h = 0; h < result.mu.len(); ++h) {
        const double half =
            z * std::sqrt(std::max(0.0, result.psi(h, h)) / static_cast<double>(result.n_used));
        out.emplace_back(result.mu[h] - half, result.mu[h] + half);
    }
    return out;
}

namespace {

bool skippable_kind(const std::string& kind) {
    return kind == "SignConditionViolated" || kind == "NoBracket" ||
           kind == "DivideByZeroIntercept";
}

std::string level_key(double level) {
    char buf[32];
    std::snprintf(buf, sizeof buf, "%g", level);
    return buf;
}

}  // namespace

InferenceResult cross_fit(const Dataset& data, const LossModel& loss,
                          const TargetFunctional& target, const Vec& tstar,
                          const NetConfig& net_cfg, const TrainConfig& train_cfg,
                          const ProjectorStrategy& strategy, const RegScheme& reg,
                          const InferenceConfig& cfg) {
    const std::size_t n = data.n, S = cfg.folds;
    require(S >= 2, errc::config, "BadInferenceConfig", "need at least 2 folds");
    require(n >= 10 * S, errc::config, "FoldTooSmall",
            "cross_fit needs n >= 10*S, got n=" + std::to_string(n));
    require(tstar.len() == loss.dtheta, errc::config, "BadTarget",
            "t* length must match dtheta");

    // Seeded permutation; fold id interleaves along the permutation so folds
    // are balanced to within one observation.
    Rng fold_rng(derive_seed(cfg.seed, 0xF01d));
    std::vector<std::size_t> perm(n);
    for (std::size_t i = 0; i < n; ++i) perm[i] = i;
    fold_rng.shuffle(perm);
    std::vector<std::size_t> fold_of(n);
    for (std::size_t pos = 0; pos < n; ++pos) fold_of[perm[pos]] = pos % S;

    InferenceResult res;
    res.fold_of = fold_of;
    res.theta_hat = Mat(n, loss.dtheta);
    const std::size_t dmu = target.dmu;
    res.mu = Vec(dmu, 0.0);
    res.psi = Mat(dmu, dmu, 0.0);

    std::vector<std::size_t> all_idx;
    std::vector<std::vector<Vec>> fold_scores(S);
    std::vector<std::size_t> fold_skipped(S, 0);
    std::shared_ptr<StructuredNet> first_theta;  // kept for the optional
    std::shared_ptr<ProjectedHessian> first_l;   // post-fit diagnostics

    for (std::size_t s = 0; s < S; ++s) {
        // Complement listed in permutation order so the three-way halves are
        // seeded-random but reproducible.
        std::vector<std::size_t> comp;
        comp.reserve(n - n / S);
        for (std::size_t pos = 0; pos < n; ++pos)
            if (fold_of[perm[pos]] != s) comp.push_back(perm[pos]);

        std::vector<std::size_t> theta_rows = comp, l_rows = comp;
        if (cfg.three_way) {
            const std::size_t half = comp.size() / 2;
            theta_rows.assign(comp.begin(), comp.begin() + half);
            l_rows.assign(comp.begin() + half, comp.end());
        }

        NetConfig ncfg = net_cfg;
        ncfg.seed = derive_seed(net_cfg.seed ^ cfg.seed, 101 + s);
        TrainConfig tcfg = train_cfg;
        tcfg.shuffle_seed = derive_seed(train_cfg.shuffle_seed ^ cfg.seed, 201 + s);
        auto theta_net = std::make_shared<StructuredNet>(
            train(StructuredNet(ncfg), data.subset(theta_rows), loss, tcfg));
        ThetaFn theta_fn = [theta_net](cspan x) { return theta_net->theta_forward(x); };

        ProjectorStrategy strat = strategy;
        strat.aux_net.seed = derive_seed(strategy.aux_net.seed ^ cfg.seed, 301 + s);
        strat.aux_train.shuffle_seed =
            derive_seed(strategy.aux_train.shuffle_seed ^ cfg.seed, 401 + s);
        ProjectedHessian l_hat = cfg.plug_in_only
                                     ? ProjectedHessian{}
                                     : fit_projector(strat, data.subset(l_rows), theta_fn,
                                                     loss, reg);
        if (s == 0 && !cfg.plug_in_only) {
            first_theta = theta_net;
            first_l = std::make_shared<ProjectedHessian>(l_hat);
        }

        for (std::size_t i = 0; i < n; ++i) {
            if (fold_of[i] != s) continue;
            Vec theta = theta_fn(data.x_row(i));
            for (std::size_t k = 0; k < loss.dtheta; ++k) res.theta_hat(i, k) = theta[k];
            try {
                Vec psi_i = [&] {
                    if (cfg.plug_in_only)
                        return target.eval(data.x_row(i), theta.span(), tstar.span());
                    Mat l = l_hat.eval(data.x_row(i));
                    res.max_cond_l = std::max(res.max_cond_l, cond_sym(l));
                    LFn l_fn = [&l](cspan) { return l; };
                    return influence_eval(data.y_row(i), data.t_row(i), data.x_row(i),
                                          theta_fn, l_fn, loss, target, tstar.span());
                }();
                fold_scores[s].push_back(std::move(psi_i));
                all_idx.push_back(i);
            } catch (const Error& e) {
                if (cfg.skip_policy == SkipPolicy::skip_and_report && skippable_kind(e.kind()))
                    ++fold_skipped[s];
                else
                    throw;
            }
        }
        require(!fold_scores[s].empty(), errc::numeric, "FoldTooSmall",
                "every observation in fold " + std::to_string(s) + " was skipped");
    }

    // Fold means, then the global mean of fold means.
    std::vector<Vec> fold_mu(S, Vec(dmu, 0.0));
    for (std::size_t s = 0; s < S; ++s) {
        for (const Vec& psi : fold_scores[s])
            for (std::size_t h = 0; h < dmu; ++h) fold_mu[s][h] += psi[h];
        for (std::size_t h = 0; h < dmu; ++h)
            fold_mu[s][h] /= static_cast<double>(fold_scores[s].size());
        for (std::size_t h = 0; h < dmu; ++h) res.mu[h] += fold_mu[s][h] / S;
    }

    // Variance blocks centered at the global mu, exactly as displayed.
    for (std::size_t s = 0; s < S; ++s) {
        FoldResult fr;
        fr.mu = fold_mu[s];
        fr.psi = Mat(dmu, dmu, 0.0);
        for (const Vec& psi : fold_scores[s])
            for (std::size_t a = 0; a < dmu; ++a)
                for (std::size_t b = 0; b < dmu; ++b)
                    fr.psi(a, b) += (psi[a] - res.mu[a]) * (psi[b] - res.mu[b]);
        for (std::size_t a = 0; a < dmu; ++a)
            for (std::size_t b = 0; b < dmu; ++b)
                fr.psi(a, b) /= static_cast<double>(fold_scores[s].size());
        fr.n_used = fold_scores[s].size();
        fr.skipped = fold_skipped[s];
        res.n_used += fr.n_used;
        res.skipped += fr.skipped;
        for (std::size_t a = 0; a < dmu; ++a)
            for (std::size_t b = 0; b < dmu; ++b) res.psi(a, b) += fr.psi(a, b) / S;
        res.folds.push_back(std::move(fr));
    }

    // Scores ascending by original row for deterministic output.
    std::vector<std::size_t> order(all_idx.size());
    for (std::size_t k = 0; k < order.size(); ++k) order[k] = k;
    std::sort(order.begin(), order.end(),
              [&](std::size_t a, std::size_t b) { return all_idx[a] < all_idx[b]; });
    std::vector<Vec> flat;
    flat.reserve(all_idx.size());
    for (std::size_t s = 0; s < S; ++s)
        for (Vec& v : fold_scores[s]) flat.push_back(std::move(v));
    res.scores = Mat(all_idx.size(), dmu);
    res.scored_idx.resize(all_idx.size());
    for (std::size_t k = 0; k < order.size(); ++k) {
        res.scored_idx[k] = all_idx[order[k]];
        for (std::size_t h = 0; h < dmu; ++h) res.scores(k, h) = flat[order[k]][h];
    }

    res.cond_warning = res.max_cond_l > 1e8;
    for (double level : cfg.levels) res.ci[level] = confidence_interval(res, level);

    if (cfg.orthogonality_diag && !cfg.plug_in_only && first_theta && first_l) {
        ThetaFn tf = [net = first_theta](cspan x) { return net->theta_forward(x); };
        LFn lf = [lh = first_l](cspan x) { return lh->eval(x); };
        OrthReport orep =
            orthogonality_diagnostic(data, tf, lf, loss, target, tstar.span(),
                                     builtin_directions(loss.dtheta, data.dx()), {1e-3, 0.2});
        for (const DirectionReport& dr : orep.directions)
            res.orthogonality_slopes.push_back({dr.direction, dr.orth_slope, dr.plug_slope});
    }
    return res;
}

std::string InferenceResult::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["mu"] = std::vector<double>(mu.data(), mu.data() + mu.len());
    std::vector<std::vector<double>> psim;
    for (std::size_t a = 0; a < psi.rows(); ++a)
        psim.emplace_back(psi.row(a), psi.row(a) + psi.cols());
    j["psi_matrix"] = psim;
    j["n"] = n_used;
    j["skipped"] = skipped;
    nlohmann::json jf = nlohmann::json::array();
    for (const FoldResult& f : folds) {
        nlohmann::json e;
        e["mu_s"] = std::vector<double>(f.mu.data(), f.mu.data() + f.mu.len());
        std::vector<std::vector<double>> ps;
        for (std::size_t a = 0; a < f.psi.rows(); ++a)
            ps.emplace_back(f.psi.row(a), f.psi.row(a) + f.psi.cols());
        e["psi_s"] = ps;
        e["n_s"] = f.n_used;
        e["skipped_s"] = f.skipped;
        jf.push_back(e);
    }
    j["folds"] = jf;
    nlohmann::json jci = nlohmann::json::object();
    for (const auto& [level, intervals] : ci) {
        nlohmann::json arr = nlohmann::json::array();
        for (const auto& [lo, hi] : intervals) arr.push_back({lo, hi});
        jci[level_key(level)] = arr;
    }
    j["ci"] = jci;
    nlohmann::json slopes = nlohmann::json::array();
    for (const OrthSlope& s : orthogonality_slopes)
        slopes.push_back({{"direction", s.direction},
                          {"orth_slope", s.orth_slope},
                          {"plug_slope", s.plug_slope}});
    j["diagnostics"] = {{"max_cond_L", max_cond_l},
                        {"cond_warning", cond_warning},
                        {"orthogonality_slopes", slopes}};
    return j.dump(2);
}

std::vector<Direction> builtin_directions(std::size_t dtheta, std::size_t dx) {
    require(dx >= 1, errc::config, "BadDirection", "need at least one covariate");
    std::vector<Direction> out;
    for (std::size_t k = 0; k < dtheta; ++k) {
        out.push_back({"shift:" + std::to_string(k + 1), [k, dtheta](cspan) {
                           Vec d(dtheta, 0.0);
                           d[k] = 1.0;
                           return d;
                       }});
        out.push_back({"bump:" + std::to_string(k + 1), [k, dtheta](cspan x) {
                           Vec d(dtheta, 0.0);
                           d[k] = std::exp(-2.0 * x[0] * x[0]);
                           return d;
                       }});
    }
    return out;
}

OrthReport orthogonality_diagnostic(const Dataset& data, const ThetaFn& theta_fn, const LFn& l_fn,
                                    const LossModel& loss, const TargetFunctional& target,
                                    cspan tstar, const std::vector<Direction>& directions,
                                    const std::vector<double>& eps_grid) {
    require(!eps_grid.empty(), errc::config, "BadDirection", "need a non-empty eps grid");
    std::vector<double> grid = eps_grid;
    std::sort(grid.begin(), grid.end());
    require(grid.front() > 0.0, errc::config, "BadDirection", "eps grid must be positive");

    const std::size_t dmu = target.dmu;
    OrthReport report;
    for (const Direction& dir : directions) {
        auto mean_at = [&](double eps, bool plug_in) {
            ThetaFn shifted = [&](cspan x) {
                Vec th = theta_fn(x);
                Vec d = dir.delta(x);
                for (std::size_t k = 0; k < th.len(); ++k) th[k] += eps * d[k];
                return th;
            };
            Vec acc(dmu, 0.0);
            for (std::size_t i = 0; i < data.n; ++i) {
                Vec psi = plug_in
                              ? target.eval(data.x_row(i), shifted(data.x_row(i)).span(), tstar)
                              : influence_eval(data.y_row(i), data.t_row(i), data.x_row(i),
                                               shifted, l_fn, loss, target, tstar);
                for (std::size_t h = 0; h < dmu; ++h) acc[h] += psi[h];
            }
            for (std::size_t h = 0; h < dmu; ++h) acc[h] /= static_cast<double>(data.n);
            return acc;
        };

        DirectionReport dr;
        dr.direction = dir.name;
        const double e0 = grid.front(), e_hi = grid.back();
        Vec p0 = mean_at(e0, false), m0 = mean_at(-e0, false);
        Vec pp = mean_at(e0, true), pm = mean_at(-e0, true);
        for (std::size_t h = 0; h < dmu; ++h) {
            dr.orth_slope = std::max(dr.orth_slope, std::fabs((p0[h] - m0[h]) / (2 * e0)));
            dr.plug_slope = std::max(dr.plug_slope, std::fabs((pp[h] - pm[h]) / (2 * e0)));
        }
        Vec ph = mean_at(e_hi, false), mh = mean_at(-e_hi, false), z0 = mean_at(0.0, false);
        for (std::size_t h = 0; h < dmu; ++h) {
            dr.curvature = std::max(dr.curvature, std::fabs(ph[h] + mh[h] - 2.0 * z0[h]));
            dr.odd_part = std::max(dr.odd_part, std::fabs(ph[h] - mh[h]));
        }
        report.directions.push_back(std::move(dr));
    }
    return report;
}

}  // namespace hinf
