#include "hinf/dgp.hpp"

#include <atomic>
#include <cmath>
#include <thread>

#include <json.hpp>

#include "hinf/rng.hpp"

namespace hinf {

namespace {
constexpr double kPi = 3.14159265358979323846;
}

double ThetaFormula::eval(cspan x) const {
    switch (kind) {
        case Kind::affine: {
            double v = c0;
            for (std::size_t k = 0; k < coefs.size() && k < x.size(); ++k) v += coefs[k] * x[k];
            return v;
        }
        case Kind::sine:
            return c0 + a * std::sin(w * kPi * x[i]);
        case Kind::bump: {
            const double d = x[i] - center;
            return c0 + a * std::exp(-s * d * d);
        }
        case Kind::interaction:
            return c0 + a * x[i] * x[j];
    }
    fail(errc::internal, "UnknownFormulaKey", "unreachable formula kind");
}

namespace {

nlohmann::json formula_to_json(const ThetaFormula& f) {
    nlohmann::json j;
    switch (f.kind) {
        case ThetaFormula::Kind::affine: j["kind"] = "affine"; break;
        case ThetaFormula::Kind::sine: j["kind"] = "sine"; break;
        case ThetaFormula::Kind::bump: j["kind"] = "bump"; break;
        case ThetaFormula::Kind::interaction: j["kind"] = "interaction"; break;
    }
    j["c0"] = f.c0;
    j["coefs"] = f.coefs;
    j["a"] = f.a;
    j["w"] = f.w;
    j["s"] = f.s;
    j["center"] = f.center;
    j["i"] = f.i;
    j["j"] = f.j;
    return j;
}

ThetaFormula formula_from_json(const nlohmann::json& j) {
    ThetaFormula f;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "affine") f.kind = ThetaFormula::Kind::affine;
    else if (kind == "sine") f.kind = ThetaFormula::Kind::sine;
    else if (kind == "bump") f.kind = ThetaFormula::Kind::bump;
    else if (kind == "interaction") f.kind = ThetaFormula::Kind::interaction;
    else fail(errc::config, "UnknownFormulaKey", "unknown theta formula kind '" + kind + "'");
    f.c0 = j.value("c0", 0.0);
    if (j.contains("coefs")) f.coefs = j.at("coefs").get<std::vector<double>>();
    f.a = j.value("a", 1.0);
    f.w = j.value("w", 1.0);
    f.s = j.value("s", 1.0);
    f.center = j.value("center", 0.0);
    f.i = j.value("i", std::size_t{0});
    f.j = j.value("j", std::size_t{0});
    return f;
}

nlohmann::json dist_to_json(const TreatmentDistribution& d) {
    nlohmann::json j;
    using K = TreatmentDistribution::Kind;
    using MK = TreatmentDistribution::Marginal::Kind;
    if (d.kind == K::discrete || d.kind == K::empirical) {
        j["kind"] = d.kind == K::discrete ? "discrete" : "empirical";
        std::vector<std::vector<double>> rows;
        for (std::size_t r = 0; r < d.support.rows(); ++r)
            rows.emplace_back(d.support.row(r), d.support.row(r) + d.support.cols());
        j["support"] = rows;
        if (d.kind == K::discrete) j["probs"] = d.probs;
    } else {
        j["kind"] = "product";
        nlohmann::json ms = nlohmann::json::array();
        for (const auto& m : d.marginals) {
            nlohmann::json e;
            switch (m.kind) {
                case MK::constant: e["kind"] = "constant"; break;
                case MK::bernoulli: e["kind"] = "bernoulli"; break;
                case MK::uniform: e["kind"] = "uniform"; break;
                case MK::normal: e["kind"] = "normal"; break;
            }
            e["a"] = m.a;
            e["b"] = m.b;
            ms.push_back(e);
        }
        j["marginals"] = ms;
        j["mc_draws"] = d.mc_draws;
        j["mc_seed"] = d.mc_seed;
    }
    return j;
}

TreatmentDistribution dist_from_json(const nlohmann::json& j) {
    TreatmentDistribution d;
    using K = TreatmentDistribution::Kind;
    using MK = TreatmentDistribution::Marginal::Kind;
    const std::string kind = j.at("kind").get<std::string>();
    if (kind == "discrete" || kind == "empirical") {
        d.kind = kind == "discrete" ? K::discrete : K::empirical;
        const auto rows = j.at("support").get<std::vector<std::vector<double>>>();
        require(!rows.empty(), errc::config, "BadDistribution", "empty support");
        d.support = Mat(rows.size(), rows[0].size());
        for (std::size_t r = 0; r < rows.size(); ++r)
            for (std::size_t c = 0; c < rows[0].size(); ++c) d.support(r, c) = rows[r][c];
        if (d.kind == K::discrete) d.probs = j.at("probs").get<std::vector<double>>();
    } else if (kind == "product") {
        d.kind = K::product;
        for (const auto& e : j.at("marginals")) {
            TreatmentDistribution::Marginal m;
            const std::string mk = e.at("kind").get<std::string>();
            if (mk == "constant") m.kind = MK::constant;
            else if (mk == "bernoulli") m.kind = MK::bernoulli;
            else if (mk == "uniform") m.kind = MK::uniform;
            else if (mk == "normal") m.kind = MK::normal;
            else fail(errc::config, "BadDistribution", "unknown marginal kind '" + mk + "'");
            m.a = e.value("a", 1.0);
            m.b = e.value("b", 0.0);
            d.marginals.push_back(m);
        }
        d.mc_draws = j.value("mc_draws", std::size_t{100000});
        d.mc_seed = j.value("mc_seed", std::uint64_t{7777});
    } else {
        fail(errc::config, "BadDistribution", "unknown distribution kind '" + kind + "'");
    }
    return d;
}

double sample_marginal(const TreatmentDistribution::Marginal& m, Rng& rng) {
    using MK = TreatmentDistribution::Marginal::Kind;
    switch (m.kind) {
        case MK::constant: return m.a;
        case MK::bernoulli: return rng.bernoulli(m.a) ? 1.0 : 0.0;
        case MK::uniform: return rng.uniform(m.a, m.b);
        case MK::normal: return rng.normal(m.a, m.b);
    }
    fail(errc::internal, "BadDistribution", "unreachable marginal kind");
}

void sample_t(const TreatmentDistribution& d, Rng& rng, double* out, std::size_t dt) {
    switch (d.kind) {
        case TreatmentDistribution::Kind::discrete: {
            const std::size_t r = rng.categorical(d.probs);
            for (std::size_t c = 0; c < dt; ++c) out[c] = d.support(r, c);
            return;
        }
        case TreatmentDistribution::Kind::empirical: {
            const std::size_t r = rng.index(d.support.rows());
            for (std::size_t c = 0; c < dt; ++c) out[c] = d.support(r, c);
            return;
        }
        case TreatmentDistribution::Kind::product:
            for (std::size_t c = 0; c < dt; ++c) out[c] = sample_marginal(d.marginals[c], rng);
            return;
    }
}

void sample_x(const DGPSpec& spec, Rng& rng, double* out) {
    for (std::size_t c = 0; c < spec.dx; ++c)
        out[c] = c < spec.d_c ? rng.uniform(-1.0, 1.0) : (rng.bernoulli(0.5) ? 1.0 : 0.0);
}

double clamp_propensity(double p) { return std::clamp(p, 0.1, 0.9); }

// Conditional sampler for y | (t, theta) matching each catalog loss.
void sample_y(const std::string& loss_key, cspan t, cspan theta, double noise_sd, Rng& rng,
              double* y_out, std::size_t dy) {
    if (loss_key == "linear") {
        double u = 0.0;
        for (std::size_t c = 0; c < t.size(); ++c) u += t[c] * theta[c];
        y_out[0] = u + noise_sd * rng.normal();
        return;
    }
    if (loss_key == "logit" || loss_key == "fractional") {
        double u = 0.0;
        for (std::size_t c = 0; c < t.size(); ++c) u += t[c] * theta[c];
        y_out[0] = rng.bernoulli(logistic_fn(u)) ? 1.0 : 0.0;
        return;
    }
    if (loss_key == "tobit1") {
        const std::size_t dt = t.size();
        double u = 0.0;
        for (std::size_t c = 0; c < dt; ++c) u += t[c] * theta[c];
        y_out[0] = std::max(0.0, (u + rng.normal()) / theta[dt]);
        return;
    }
    if (loss_key == "iv") {
        // theta = (alpha, beta, zeta1, zeta2) over z = (1, t[1]); errors are
        // correlated so the treatment equation is genuinely endogenous.
        const double z = t[1];
        const double common = rng.normal();
        const double v = 0.6 * common + 0.8 * rng.normal();
        const double u = 0.6 * common + 0.8 * rng.normal();
        y_out[0] = theta[0] + theta[1] * z + noise_sd * v;
        y_out[1] = theta[2] + theta[3] * z + noise_sd * u;
        return;
    }
    if (loss_key.rfind("multinomial", 0) == 0) {
        const std::size_t J = dy;
        const std::size_t dc = t.size() / J;
        std::vector<double> p(J + 1);
        double denom = 1.0;
        for (std::size_t jj = 0; jj < J; ++jj) {
            double u = theta[jj];
            for (std::size_t k = 0; k < dc; ++k) u += theta[J + k] * t[jj * dc + k];
            p[jj + 1] = safe_exp(u);
            denom += p[jj + 1];
        }
        p[0] = 1.0;
        for (auto& v : p) v /= denom;
        std::fill(y_out, y_out + J, 0.0);
        const std::size_t pick = rng.categorical(p);
        if (pick > 0) y_out[pick - 1] = 1.0;
        return;
    }
    fail(errc::config, "BadLossKey", "no conditional sampler for loss '" + loss_key + "'");
}

struct LossShape {
    std::size_t dy, dt, dtheta;
};

LossShape shape_of(const DGPSpec& spec) {
    if (spec.loss_key == "tobit1")
        return {1, spec.theta0.size() - 1, spec.theta0.size()};
    if (spec.loss_key == "iv") return {2, 2, 4};
    if (spec.loss_key.rfind("multinomial:", 0) == 0) {
        LossModel m = loss_by_key(spec.loss_key, 0);
        return {m.dy, m.dt, m.dtheta};
    }
    return {1, spec.theta0.size(), spec.theta0.size()};
}

}  // namespace

std::string treatment_dist_to_json(const TreatmentDistribution& dist) {
    return dist_to_json(dist).dump(2);
}

TreatmentDistribution treatment_dist_from_json(const std::string& text) {
    try {
        return dist_from_json(nlohmann::json::parse(text));
    } catch (const nlohmann::json::exception& e) {
        fail(errc::config, "BadDistribution", std::string("unparsable distribution: ") + e.what());
    }
}

std::string DGPSpec::to_json() const {
    nlohmann::json j;
    j["name"] = name;
    j["dx"] = dx;
    j["d_c"] = d_c;
    nlohmann::json th = nlohmann::json::array();
    for (const auto& f : theta0) th.push_back(formula_to_json(f));
    j["theta0"] = th;
    j["design"] = design == Design::randomized ? "randomized" : "confounded_binary";
    if (design == Design::randomized) j["ft"] = dist_to_json(ft);
    else j["propensity_index"] = formula_to_json(propensity_index);
    j["loss"] = loss_key;
    j["noise_sd"] = noise_sd;
    j["n"] = n;
    j["seed"] = seed;
    return j.dump(2);
}

DGPSpec DGPSpec::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        fail(errc::config, "BadDGPSpec", std::string("unparsable DGP spec: ") + e.what());
    }
    DGPSpec s;
    s.name = j.value("name", std::string("dgp"));
    s.dx = j.at("dx").get<std::size_t>();
    s.d_c = j.value("d_c", s.dx);
    for (const auto& f : j.at("theta0")) s.theta0.push_back(formula_from_json(f));
    const std::string design = j.value("design", std::string("randomized"));
    if (design == "randomized") {
        s.design = Design::randomized;
        s.ft = dist_from_json(j.at("ft"));
    } else if (design == "confounded_binary") {
        s.design = Design::confounded_binary;
        s.propensity_index = formula_from_json(j.at("propensity_index"));
    } else {
        fail(errc::config, "BadDGPSpec", "unknown design '" + design + "'");
    }
    s.loss_key = j.value("loss", std::string("linear"));
    s.noise_sd = j.value("noise_sd", 1.0);
    s.n = j.at("n").get<std::size_t>();
    s.seed = j.value("seed", std::uint64_t{1});
    require(s.d_c <= s.dx && s.dx >= 1, errc::config, "BadDGPSpec", "need 1 <= d_c <= dx");
    require(!s.theta0.empty(), errc::config, "BadDGPSpec", "theta0 formulas missing");
    return s;
}

GeneratedData generate(const DGPSpec& spec) {
    const LossShape shape = shape_of(spec);
    require(spec.theta0.size() == shape.dtheta, errc::config, "BadDGPSpec",
            "theta0 formula count must equal dtheta=" + std::to_string(shape.dtheta));

    GeneratedData out;
    Dataset& d = out.data;
    d.n = spec.n;
    d.y = Mat(spec.n, shape.dy);
    d.t = Mat(spec.n, shape.dt);
    d.x = Mat(spec.n, spec.dx);

    Rng rng(derive_seed(spec.seed, 0xDA7A));
    std::vector<double> theta(shape.dtheta);
    for (std::size_t i = 0; i < spec.n; ++i) {
        sample_x(spec, rng, d.x.row(i));
        for (std::size_t k = 0; k < shape.dtheta; ++k) {
            theta[k] = spec.theta0[k].eval(d.x_row(i));
            require(std::fabs(theta[k]) <= 10.0, errc::config, "BadDGPSpec",
                    "theta0 formula exceeds the bound 10 on the support");
        }
        if (spec.design == DGPSpec::Design::randomized) {
            sample_t(spec.ft, rng, d.t.row(i), shape.dt);
        } else {
            const double p = clamp_propensity(logistic_fn(spec.propensity_index.eval(d.x_row(i))));
            d.t(i, 0) = 1.0;
            d.t(i, 1) = rng.bernoulli(p) ? 1.0 : 0.0;
        }
        sample_y(spec.loss_key, d.t_row(i), cspan(theta.data(), theta.size()), spec.noise_sd,
                 rng, d.y.row(i), shape.dy);
    }

    TruthBundle& truth = out.truth;
    truth.dtheta = shape.dtheta;
    const std::vector<ThetaFormula> formulas = spec.theta0;
    truth.theta0 = [formulas](cspan x) {
        std::vector<double> th(formulas.size());
        for (std::size_t k = 0; k < formulas.size(); ++k) th[k] = formulas[k].eval(x);
        return Vec::from(std::move(th));
    };
    if (spec.design == DGPSpec::Design::confounded_binary) {
        const ThetaFormula pidx = spec.propensity_index;
        truth.propensity = [pidx](cspan x) {
            return clamp_propensity(logistic_fn(pidx.eval(x)));
        };
    } else {
        truth.ft = spec.ft;
    }
    return out;
}

Mu0Result compute_mu0(const DGPSpec& spec, const TargetFunctional& target, const Vec& tstar,
                      std::size_t draws) {
    require(draws >= 1000, errc::config, "BadDGPSpec", "mu0 needs at least 1000 draws");
    Rng rng(derive_seed(spec.seed, 0x300));
    std::vector<double> x(spec.dx), theta(spec.theta0.size());
    Mu0Result res;
    res.mu0 = Vec(target.dmu, 0.0);
    res.mc_se = Vec(target.dmu, 0.0);
    std::vector<double> mean(target.dmu, 0.0), m2(target.dmu, 0.0);
    std::size_t used = 0;
    for (std::size_t d = 0; d < draws; ++d) {
        sample_x(spec, rng, x.data());
        for (std::size_t k = 0; k < theta.size(); ++k)
            theta[k] = spec.theta0[k].eval(cspan(x.data(), x.size()));
        try {
            Vec h = target.eval(cspan(x.data(), x.size()), cspan(theta.data(), theta.size()),
                                tstar.span());
            ++used;
            for (std::size_t c = 0; c < target.dmu; ++c) {
                const double delta = h[c] - mean[c];
                mean[c] += delta / static_cast<double>(used);
                m2[c] += delta * (h[c] - mean[c]);
            }
        } catch (const Error& e) {
            if (e.kind() == "SignConditionViolated" || e.kind() == "NoBracket" ||
                e.kind() == "DivideByZeroIntercept")
                ++res.skipped;
            else
                throw;
        }
    }
    require(used > 0, errc::numeric, "DegenerateDesign", "every mu0 draw was skipped");
    for (std::size_t c = 0; c < target.dmu; ++c) {
        res.mu0[c] = mean[c];
        res.mc_se[c] = std::sqrt(m2[c] / std::max<std::size_t>(1, used - 1) /
                                 static_cast<double>(used));
    }
    res.draws = used;
    return res;
}

// ---------------------------------------------------------------------------

CoverageReport coverage_experiment(const DGPSpec& spec, const PipelineConfig& pipeline,
                                   std::size_t replications, double nominal_level,
                                   std::size_t threads) {
    require(replications >= 1, errc::config, "BadCoverageConfig",
            "coverage needs at least one replication (>= 50 recommended)");
    require(nominal_level > 0.0 && nominal_level < 1.0, errc::config, "BadCoverageConfig",
            "nominal level in (0,1)");

    const LossModel loss = loss_by_key(spec.loss_key, shape_of(spec).dt);
    const TargetFunctional target = target_by_key(pipeline.target_key, loss.dtheta, loss.link,
                                                  pipeline.defaults, pipeline.loan);
    require(target.dmu == 1, errc::config, "BadCoverageConfig",
            "coverage experiments support scalar targets");

    const Mu0Result truth = compute_mu0(spec, target, pipeline.tstar);

    CoverageReport report;
    report.replications = replications;
    report.nominal = nominal_level;
    report.mu0 = truth.mu0[0];
    report.mu0_se = truth.mc_se[0];
    report.records.resize(replications);

    std::atomic<std::size_t> next{0};
    auto worker = [&]() {
        for (;;) {
            const std::size_t r = next.fetch_add(1);
            if (r >= replications) return;
            RepRecord rec;
            rec.rep = r;
            try {
                DGPSpec rep_spec = spec;
                rep_spec.seed = derive_seed(spec.seed, 1000 + r);
                GeneratedData gen = generate(rep_spec);

                InferenceConfig icfg = pipeline.inf;
                icfg.seed = derive_seed(pipeline.inf.seed, 2000 + r);
                icfg.levels = {nominal_level};
                InferenceResult res =
                    cross_fit(gen.data, loss, target, pipeline.tstar, pipeline.net,
                              pipeline.train, pipeline.strategy, pipeline.reg, icfg);
                rec.ok = true;
                rec.mu_hat = res.mu[0];
                const auto ci = res.ci.at(nominal_level);
                rec.lo = ci[0].first;
                rec.hi = ci[0].second;
                rec.covered = rec.lo <= truth.mu0[0] && truth.mu0[0] <= rec.hi;
                rec.ci_length = rec.hi - rec.lo;
                rec.skipped = res.skipped;
            } catch (const Error& e) {
                rec.ok = false;
                rec.error = e.kind();
            } catch (const std::exception& e) {
                rec.ok = false;
                rec.error = std::string("unexpected: ") + e.what();
            }
            report.records[r] = std::move(rec);
        }
    };

    if (threads <= 1) {
        worker();
    } else {
        std::vector<std::thread> pool;
        for (std::size_t w = 0; w < threads; ++w) pool.emplace_back(worker);
        for (auto& th : pool) th.join();
    }

    std::size_t ok = 0, covered = 0;
    double len = 0.0, abs_err = 0.0;
    for (const RepRecord& rec : report.records) {
        if (!rec.ok) {
            ++report.failed;
            continue;
        }
        ++ok;
        covered += rec.covered ? 1 : 0;
        len += rec.ci_length;
        abs_err += std::fabs(rec.mu_hat - truth.mu0[0]);
    }
    require(ok > 0, errc::numeric, "AllReplicationsFailed", "no replication succeeded");
    report.coverage = static_cast<double>(covered) / static_cast<double>(ok);
    report.mean_ci_length = len / static_cast<double>(ok);
    report.mean_abs_error = abs_err / static_cast<double>(ok);
    return report;
}

std::string CoverageReport::to_json() const {
    nlohmann::json j;
    j["schema_version"] = 1;
    j["replications"] = replications;
    j["nominal"] = nominal;
    j["mu0"] = mu0;
    j["mu0_mc_se"] = mu0_se;
    j["coverage"] = coverage;
    j["mean_ci_length"] = mean_ci_length;
    j["mean_abs_error"] = mean_abs_error;
    j["failed"] = failed;
    return j.dump(2);
}

std::string CoverageReport::to_csv() const {
    std::string out = "rep,ok,mu_hat,lo,hi,covered,ci_length,skipped,error\n";
    char buf[256];
    for (const RepRecord& r : records) {
        std::snprintf(buf, sizeof buf, "%zu,%d,%.17g,%.17g,%.17g,%d,%.17g,%zu,%s\n", r.rep,
                      r.ok ? 1 : 0, r.mu_hat, r.lo, r.hi, r.covered ? 1 : 0, r.ci_length,
                      r.skipped, r.error.c_str());
        out += buf;
    }
    return out;
}

}  // namespace hinf
