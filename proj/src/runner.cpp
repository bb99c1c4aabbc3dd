#include "hinf/runner.hpp"

#include <chrono>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "hinf/finite_diff.hpp"
#include "hinf/kernels.hpp"
#include "hinf/oracles.hpp"
#include "hinf/rng.hpp"

namespace hinf {

namespace {

NetConfig net_from_json(const nlohmann::json& j, const NetConfig& base) {
    NetConfig c = base;
    if (j.contains("hidden")) c.hidden = j.at("hidden").get<std::vector<std::size_t>>();
    if (j.contains("bound"))
        c.bound = j.at("bound").is_null() ? std::numeric_limits<double>::infinity()
                                          : j.at("bound").get<double>();
    if (j.contains("seed")) c.seed = j.at("seed").get<std::uint64_t>();
    if (j.contains("head_partition"))
        for (const auto& [k, subset] : j.at("head_partition").items()) {
            // External convention is 1-based for both parameters and inputs.
            const std::size_t param = std::stoul(k);
            require(param >= 1, errc::config, "BadNetConfig", "head_partition keys are 1-based");
            std::vector<std::size_t> zero_based;
            for (std::size_t v : subset.get<std::vector<std::size_t>>()) {
                require(v >= 1, errc::config, "BadNetConfig",
                        "head_partition input indices are 1-based");
                zero_based.push_back(v - 1);
            }
            c.head_partition[param - 1] = zero_based;
        }
    return c;
}

TrainConfig train_from_json(const nlohmann::json& j, const TrainConfig& base) {
    TrainConfig t = base;
    if (j.contains("epochs")) t.epochs = j.at("epochs").get<std::size_t>();
    if (j.contains("batch_size")) t.batch_size = j.at("batch_size").get<std::size_t>();
    if (j.contains("learning_rate")) t.learning_rate = j.at("learning_rate").get<double>();
    if (j.contains("beta1")) t.beta1 = j.at("beta1").get<double>();
    if (j.contains("beta2")) t.beta2 = j.at("beta2").get<double>();
    if (j.contains("eps_adam")) t.eps_adam = j.at("eps_adam").get<double>();
    if (j.contains("patience")) t.patience = j.at("patience").get<std::size_t>();
    if (j.contains("val_fraction")) t.val_fraction = j.at("val_fraction").get<double>();
    if (j.contains("shuffle_seed")) t.shuffle_seed = j.at("shuffle_seed").get<std::uint64_t>();
    return t;
}

std::string join_path(const std::string& dir, const std::string& name) {
    return (std::filesystem::path(dir) / name).string();
}

void write_file(const std::string& path, const std::string& content) {
    std::ofstream f(path, std::ios::binary | std::ios::trunc);
    require(f.good(), errc::data, "FileIO", "cannot open for writing: " + path);
    f.write(content.data(), static_cast<std::streamsize>(content.size()));
    require(f.good(), errc::data, "FileIO", "short write: " + path);
}

std::string fmt(double v) {
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

}  // namespace

RunConfig RunConfig::from_json(const std::string& text) {
    nlohmann::json j;
    try {
        j = nlohmann::json::parse(text);
    } catch (const std::exception& e) {
        fail(errc::config, "BadConfig", std::string("unparsable config: ") + e.what());
    }
    RunConfig c;
    c.command = j.value("command", std::string());
    c.data_path = j.value("data", std::string());
    if (j.contains("columns")) {
        const auto& cols = j.at("columns");
        c.columns.y = cols.value("y", std::vector<std::string>{});
        c.columns.t = cols.value("t", std::vector<std::string>{});
        c.columns.x = cols.value("x", std::vector<std::string>{});
        c.columns.one_hot = cols.value("one_hot", std::vector<std::string>{});
        c.columns.rescale_x = cols.value("rescale_x", true);
    }
    c.loss_key = j.value("loss", std::string("linear"));
    c.target_key = j.value("target", std::string("coef:2"));
    if (j.contains("t_star")) c.tstar_raw = j.at("t_star").get<std::vector<double>>();
    c.projector_key = j.value("projector", std::string("L:glm"));
    c.reg_key = j.value("regularization", std::string("reg:eig_floor:1e-8"));
    if (j.contains("net")) c.net = net_from_json(j.at("net"), c.net);
    if (j.contains("train")) c.train = train_from_json(j.at("train"), c.train);
    c.aux_net = c.net;
    c.aux_train = c.train;
    if (j.contains("aux_net")) {
        c.aux_net = net_from_json(j.at("aux_net"), c.net);
        c.aux_overridden = true;
    }
    if (j.contains("aux_train")) {
        c.aux_train = train_from_json(j.at("aux_train"), c.train);
        c.aux_overridden = true;
    }
    if (j.contains("inference")) {
        const auto& inf = j.at("inference");
        c.inf.folds = inf.value("folds", std::size_t{3});
        c.inf.three_way = inf.value("three_way", false);
        if (inf.contains("levels")) c.inf.levels = inf.at("levels").get<std::vector<double>>();
        c.inf.seed = inf.value("seed", std::uint64_t{0});
        const std::string policy = inf.value("skip_policy", std::string("skip_and_report"));
        if (policy == "skip_and_report") c.inf.skip_policy = SkipPolicy::skip_and_report;
        else if (policy == "abort") c.inf.skip_policy = SkipPolicy::abort;
        else fail(errc::config, "BadConfig", "unknown skip_policy '" + policy + "'");
        c.inf.plug_in_only = inf.value("plug_in_only", false);
        c.inf.orthogonality_diag = inf.value("orthogonality_diag", false);
    }
    if (j.contains("defaults")) {
        const auto& d = j.at("defaults");
        c.defaults.delta0 = d.value("delta0", 0.0);
        c.defaults.delta_r = d.value("delta_r", 1.0);
        c.defaults.r_max = d.value("r_max", 200.0);
        c.defaults.allow_boundary = d.value("allow_boundary", false);
        c.defaults.rate_unit = d.value("rate_unit", std::string("percent"));
    }
    c.loan = j.value("loan", 1.0);
    if (j.contains("ft")) {
        c.ft = treatment_dist_from_json(j.at("ft").dump());
        c.ft_present = true;
    }
    if (j.contains("dgp")) {
        c.dgp = DGPSpec::from_json(j.at("dgp").dump());
        c.dgp_present = true;
    }
    c.replications = j.value("replications", std::size_t{200});
    c.nominal = j.value("nominal", 0.95);
    c.out_dir = j.value("out_dir", std::string("."));
    c.seed = j.value("seed", std::uint64_t{0});
    c.threads = j.value("threads", std::size_t{1});
    return c;
}

RunConfig RunConfig::from_file(const std::string& path) {
    std::ifstream f(path);
    require(f.good(), errc::config, "BadConfig", "cannot open config file: " + path);
    std::string content((std::istreambuf_iterator<char>(f)), std::istreambuf_iterator<char>());
    return RunConfig::from_json(content);
}

namespace {

struct Resolved {
    Dataset data;
    LossModel loss;
    TargetFunctional target;
    Vec tstar;
    ProjectorStrategy strategy;
    RegScheme reg;
    NetConfig net;
};

Resolved resolve_data(const RunConfig& cfg) {
    Resolved r;
    require(!cfg.data_path.empty(), errc::config, "BadConfig", "config is missing 'data'");

    // dt depends on whether the loss expects an intercept column, so resolve
    // the loss key twice: first to learn the flag, then with final dims.
    LossModel probe = loss_by_key(cfg.loss_key, std::max<std::size_t>(1, cfg.columns.t.size()));
    ColumnMapping mapping = cfg.columns;
    mapping.prepend_intercept = probe.expects_intercept;
    r.data = ingest_csv(cfg.data_path, mapping);
    r.loss = loss_by_key(cfg.loss_key, r.data.dt());
    require(r.data.dy() == r.loss.dy && r.data.dt() == r.loss.dt, errc::config, "DimMismatch",
            "mapped columns disagree with loss dims: loss wants dy=" +
                std::to_string(r.loss.dy) + " dt=" + std::to_string(r.loss.dt));

    r.net = cfg.net;
    r.net.input_dim = r.data.dx();
    r.net.dtheta = r.loss.dtheta;
    r.net.positive_params = r.loss.positive_params;
    return r;
}

Resolved resolve_pipeline(const RunConfig& cfg) {
    Resolved r = resolve_data(cfg);
    r.target = target_by_key(cfg.target_key, r.loss.dtheta, r.loss.link, cfg.defaults, cfg.loan);

    std::vector<double> ts = cfg.tstar_raw;
    if (r.loss.expects_intercept && ts.size() + 1 == r.loss.dtheta) ts.insert(ts.begin(), 1.0);
    require(ts.size() == r.loss.dtheta, errc::config, "BadConfig",
            "t_star length " + std::to_string(cfg.tstar_raw.size()) +
                " does not match the model (need " + std::to_string(r.loss.dtheta) +
                " coordinates" + (r.loss.expects_intercept ? " including intercept)" : ")"));
    r.tstar = Vec::from(std::move(ts));

    r.strategy.kind = ProjectorStrategy::parse_kind(cfg.projector_key);
    r.strategy.aux_net = cfg.aux_net;
    r.strategy.aux_train = cfg.aux_train;
    if (r.strategy.kind == ProjectorKind::randomized) {
        require(cfg.ft_present, errc::config, "BadConfig",
                "projector L:randomized needs an 'ft' treatment distribution");
        r.strategy.dist = cfg.ft;
    }
    r.reg = RegScheme::parse(cfg.reg_key);
    return r;
}

std::string trace_csv(const TrainTrace& trace) {
    std::string out = "epoch,train_loss,val_loss\n";
    for (std::size_t e = 0; e < trace.train_loss.size(); ++e) {
        out += std::to_string(e) + "," + fmt(trace.train_loss[e]) + ",";
        out += e < trace.val_loss.size() ? fmt(trace.val_loss[e]) : std::string("");
        out += "\n";
    }
    return out;
}

std::string histogram_csv(const std::vector<std::pair<std::string, std::vector<double>>>& series,
                          std::size_t bins = 40) {
    std::string out = "series,bin_lo,bin_hi,count\n";
    for (const auto& [name, values] : series) {
        if (values.empty()) continue;
        double lo = values[0], hi = values[0];
        for (double v : values) {
            lo = std::min(lo, v);
            hi = std::max(hi, v);
        }
        if (hi == lo) hi = lo + 1.0;
        std::vector<std::size_t> count(bins, 0);
        for (double v : values) {
            std::size_t b = static_cast<std::size_t>((v - lo) / (hi - lo) * bins);
            if (b >= bins) b = bins - 1;
            ++count[b];
        }
        for (std::size_t b = 0; b < bins; ++b) {
            const double blo = lo + (hi - lo) * b / bins;
            const double bhi = lo + (hi - lo) * (b + 1) / bins;
            out += name + "," + fmt(blo) + "," + fmt(bhi) + "," + std::to_string(count[b]) + "\n";
        }
    }
    return out;
}

int run_fit(const RunConfig& cfg) {
    Resolved r = resolve_data(cfg);
    NetConfig nc = r.net;
    if (cfg.seed != 0) nc.seed = derive_seed(cfg.seed, 1);
    TrainConfig tc = cfg.train;
    if (cfg.seed != 0) tc.shuffle_seed = derive_seed(cfg.seed, 2);
    TrainTrace trace;
    StructuredNet fitted = train(StructuredNet(nc), r.data, r.loss, tc, &trace);

    nlohmann::json fp;
    fp["loss"] = cfg.loss_key;
    fp["n"] = r.data.n;
    fp["epochs_run"] = trace.epochs_run;
    fp["best_epoch"] = trace.best_epoch;
    save_net(fitted, join_path(cfg.out_dir, "model.hinf"), fp.dump());
    write_file(join_path(cfg.out_dir, "training_trace.csv"), trace_csv(trace));
    return 0;
}

int run_infer(const RunConfig& cfg) {
    Resolved r = resolve_pipeline(cfg);
    InferenceConfig icfg = cfg.inf;
    if (cfg.seed != 0) icfg.seed = cfg.seed;
    InferenceResult res = cross_fit(r.data, r.loss, r.target, r.tstar, r.net, cfg.train,
                                    r.strategy, r.reg, icfg);

    write_file(join_path(cfg.out_dir, "inference.json"), res.to_json() + "\n");

    // Per-observation off-fold theta estimates.
    std::string theta_csv = "# hinf csv schema 1\nrow,fold";
    for (std::size_t k = 0; k < r.loss.dtheta; ++k)
        theta_csv += ",theta" + std::to_string(k + 1);
    theta_csv += "\n";
    for (std::size_t i = 0; i < r.data.n; ++i) {
        theta_csv += std::to_string(i) + "," + std::to_string(res.fold_of[i]);
        for (std::size_t k = 0; k < r.loss.dtheta; ++k)
            theta_csv += "," + fmt(res.theta_hat(i, k));
        theta_csv += "\n";
    }
    write_file(join_path(cfg.out_dir, "theta_hat.csv"), theta_csv);

    std::string score_csv = "# hinf csv schema 1\nrow";
    for (std::size_t h = 0; h < r.target.dmu; ++h) score_csv += ",psi" + std::to_string(h + 1);
    score_csv += "\n";
    for (std::size_t k = 0; k < res.scored_idx.size(); ++k) {
        score_csv += std::to_string(res.scored_idx[k]);
        for (std::size_t h = 0; h < r.target.dmu; ++h) score_csv += "," + fmt(res.scores(k, h));
        score_csv += "\n";
    }
    write_file(join_path(cfg.out_dir, "scores.csv"), score_csv);

    // Plot-ready density data: binned theta_k and psi histograms.
    std::vector<std::pair<std::string, std::vector<double>>> series;
    for (std::size_t k = 0; k < r.loss.dtheta; ++k) {
        std::vector<double> col(r.data.n);
        for (std::size_t i = 0; i < r.data.n; ++i) col[i] = res.theta_hat(i, k);
        series.emplace_back("theta" + std::to_string(k + 1), std::move(col));
    }
    for (std::size_t h = 0; h < r.target.dmu; ++h) {
        std::vector<double> col(res.scored_idx.size());
        for (std::size_t k = 0; k < res.scored_idx.size(); ++k) col[k] = res.scores(k, h);
        series.emplace_back("psi" + std::to_string(h + 1), std::move(col));
    }
    write_file(join_path(cfg.out_dir, "density_data.csv"),
               "# hinf csv schema 1\n" + histogram_csv(series));
    return 0;
}

int run_simulate(const RunConfig& cfg) {
    require(cfg.dgp_present, errc::config, "BadConfig", "simulate needs a 'dgp' block");
    DGPSpec spec = cfg.dgp;
    if (cfg.seed != 0) spec.seed = cfg.seed;
    GeneratedData gen = generate(spec);

    std::string csv = "# hinf csv schema 1\n";
    for (std::size_t c = 0; c < gen.data.dy(); ++c) csv += (c ? "," : "") + ("y" + std::to_string(c + 1));
    for (std::size_t c = 0; c < gen.data.dt(); ++c) csv += ",t" + std::to_string(c + 1);
    for (std::size_t c = 0; c < gen.data.dx(); ++c) csv += ",x" + std::to_string(c + 1);
    csv += "\n";
    for (std::size_t i = 0; i < gen.data.n; ++i) {
        for (std::size_t c = 0; c < gen.data.dy(); ++c)
            csv += (c ? "," : "") + fmt(gen.data.y(i, c));
        for (std::size_t c = 0; c < gen.data.dt(); ++c) csv += "," + fmt(gen.data.t(i, c));
        for (std::size_t c = 0; c < gen.data.dx(); ++c) csv += "," + fmt(gen.data.x(i, c));
        csv += "\n";
    }
    write_file(join_path(cfg.out_dir, "simulated.csv"), csv);

    // Truth bundle for the configured target.
    LossModel loss = loss_by_key(spec.loss_key, gen.data.dt());
    TargetFunctional target =
        target_by_key(cfg.target_key, loss.dtheta, loss.link, cfg.defaults, cfg.loan);
    std::vector<double> ts = cfg.tstar_raw;
    if (loss.expects_intercept && ts.size() + 1 == loss.dtheta) ts.insert(ts.begin(), 1.0);
    require(ts.size() == loss.dtheta, errc::config, "BadConfig", "t_star length mismatch");
    Mu0Result mu0 = compute_mu0(spec, target, Vec::from(std::move(ts)));

    nlohmann::json truth;
    truth["schema_version"] = 1;
    truth["target"] = cfg.target_key;
    truth["mu0"] = std::vector<double>(mu0.mu0.data(), mu0.mu0.data() + mu0.mu0.len());
    truth["mu0_mc_se"] = std::vector<double>(mu0.mc_se.data(), mu0.mc_se.data() + mu0.mc_se.len());
    truth["mc_draws"] = mu0.draws;
    truth["skipped"] = mu0.skipped;
    write_file(join_path(cfg.out_dir, "truth.json"), truth.dump(2) + "\n");
    return 0;
}

int run_coverage(const RunConfig& cfg) {
    require(cfg.dgp_present, errc::config, "BadConfig", "coverage needs a 'dgp' block");
    PipelineConfig pipe;
    pipe.net = cfg.net;
    pipe.train = cfg.train;
    pipe.strategy.kind = ProjectorStrategy::parse_kind(cfg.projector_key);
    pipe.strategy.aux_net = cfg.aux_net;
    pipe.strategy.aux_train = cfg.aux_train;
    if (pipe.strategy.kind == ProjectorKind::randomized) {
        require(cfg.dgp.design == DGPSpec::Design::randomized, errc::config, "BadConfig",
                "L:randomized needs a randomized DGP");
        pipe.strategy.dist = cfg.dgp.ft;
    }
    pipe.reg = RegScheme::parse(cfg.reg_key);
    pipe.inf = cfg.inf;
    if (cfg.seed != 0) pipe.inf.seed = cfg.seed;
    pipe.target_key = cfg.target_key;
    pipe.defaults = cfg.defaults;
    pipe.loan = cfg.loan;

    LossModel probe = loss_by_key(cfg.dgp.loss_key, 2);
    std::vector<double> ts = cfg.tstar_raw;
    const std::size_t dtheta = cfg.dgp.theta0.size();
    if (probe.expects_intercept && ts.size() + 1 == dtheta) ts.insert(ts.begin(), 1.0);
    require(ts.size() == dtheta, errc::config, "BadConfig", "t_star length mismatch");
    pipe.tstar = Vec::from(std::move(ts));

    // The net dims come from the DGP.
    pipe.net.input_dim = cfg.dgp.dx;
    pipe.net.dtheta = dtheta;
    pipe.strategy.aux_net.input_dim = cfg.dgp.dx;

    CoverageReport rep =
        coverage_experiment(cfg.dgp, pipe, cfg.replications, cfg.nominal, cfg.threads);
    write_file(join_path(cfg.out_dir, "coverage.json"), rep.to_json() + "\n");
    write_file(join_path(cfg.out_dir, "coverage_records.csv"),
               "# hinf csv schema 1\n" + rep.to_csv());
    return 0;
}

}  // namespace

int run(const RunConfig& cfg) {
    std::filesystem::create_directories(cfg.out_dir);

    // Timestamps are segregated here so every other artifact is byte-stable.
    {
        std::ofstream log(join_path(cfg.out_dir, "run_log.txt"), std::ios::app);
        const auto now = std::chrono::system_clock::now();
        log << "command=" << cfg.command << " unix_time="
            << std::chrono::duration_cast<std::chrono::seconds>(now.time_since_epoch()).count()
            << " kernels=" << kernels::backend_name() << "\n";
    }

    if (cfg.command == "fit") return run_fit(cfg);
    if (cfg.command == "infer") return run_infer(cfg);
    if (cfg.command == "simulate") return run_simulate(cfg);
    if (cfg.command == "coverage") return run_coverage(cfg);
    if (cfg.command == "check") return run_selfcheck(std::cout) == 0 ? 0 : 1;
    fail(errc::config, "BadConfig", "unknown command '" + cfg.command + "'");
}

// ---------------------------------------------------------------------------
// Self-check suites: quick, deterministic versions of the oracle checks.

namespace {

struct CheckScope {
    std::ostream& out;
    int failures = 0;
    void report(const std::string& name, bool ok, const std::string& detail = "") {
        out << (ok ? "PASS " : "FAIL ") << name;
        if (!ok && !detail.empty()) out << "  (" << detail << ")";
        out << "\n";
        if (!ok) ++failures;
    }
};

bool check_losses_fd(std::string* detail) {
    Rng rng(101);
    struct Case {
        LossModel model;
        double tol;
    };
    std::vector<Case> cases;
    cases.push_back({linear_sq(3), 1e-8});
    cases.push_back({logit_nll(3), 1e-6});
    cases.push_back({fractional_qmle(2), 1e-6});
    cases.push_back({multinomial_nll(3, 2), 1e-6});
    cases.push_back({tobit1_nll(2), 1e-5});
    cases.push_back({iv_stacked(), 1e-8});
    for (const Case& c : cases) {
        const LossModel& m = c.model;
        for (int rep = 0; rep < 100; ++rep) {
            std::vector<double> y(m.dy, 0.0), t(m.dt);
            std::vector<double> th(m.dtheta);
            for (auto& v : t) v = rng.uniform(-1, 1);
            if (m.expects_intercept) t[0] = 1.0;
            for (auto& v : th) v = rng.uniform(-1, 1);
            if (m.name == "tobit1") th[m.dtheta - 1] = rng.uniform(0.5, 2.0);
            if (m.name == "logit") y[0] = rng.bernoulli(0.5) ? 1 : 0;
            else if (m.name == "fractional") y[0] = rng.uniform();
            else if (m.name == "tobit1") y[0] = rng.bernoulli(0.3) ? 0.0 : rng.uniform(0.1, 2.0);
            else if (m.name == "multinomial") {
                const std::size_t pick = rng.index(m.dy + 1);
                if (pick < m.dy) y[pick] = 1.0;
            } else
                for (auto& v : y) v = rng.normal();

            Vec theta = Vec::from(th);
            auto value_of = [&](cspan p) { return m.value(cspan(y), cspan(t), p); };
            const double err =
                finite_diff_check(value_of, theta, m.grad(cspan(y), cspan(t), theta.span()));
            if (err > c.tol) {
                *detail = m.name + " gradient error " + fmt(err);
                return false;
            }
        }
    }
    return true;
}

bool check_specializations(std::string* detail) {
    Rng rng(102);
    auto loss = linear_sq(2);
    auto target = target_coefficient(1, 2);
    Vec tstar{1.0, 0.0};
    for (int rep = 0; rep < 200; ++rep) {
        const double p = rng.uniform(0.05, 0.95);
        Vec th{rng.uniform(-1, 1), rng.uniform(-1, 1)};
        const double tv = rng.bernoulli(p) ? 1.0 : 0.0;
        const double yv = rng.normal();
        ThetaFn theta = [th](cspan) { return th; };
        LFn l = [p](cspan) { return Mat::from(2, 2, {1.0, p, p, p}); };
        double y[] = {yv};
        Vec t{1.0, tv};
        Vec x{0.0};
        Vec psi =
            influence_eval(cspan(y, 1), t.span(), x.span(), theta, l, loss, target, tstar.span());
        const double want = oracles::aipw(yv, tv, th[0], th[1], p);
        if (std::fabs(psi[0] - want) > 1e-10) {
            *detail = "AIPW mismatch " + fmt(psi[0] - want);
            return false;
        }
        double uni = influence_eval_univariate(
            cspan(y, 1), t.span(), x.span(), theta, [](cspan) { return 1.0; },
            [p](cspan) { return p; }, [p](cspan) { return p; }, loss, target, tstar.span());
        if (std::fabs(psi[0] - uni) > 1e-10) {
            *detail = "univariate mismatch " + fmt(psi[0] - uni);
            return false;
        }
    }
    return true;
}

bool check_fixed_point(std::string* detail) {
    DefaultSpec d;
    d.delta0 = -3.0;
    d.delta_r = 0.05;
    Rng rng(103);
    for (int rep = 0; rep < 10; ++rep) {
        Vec theta{rng.uniform(-0.5, 0.5), rng.uniform(-0.35, -0.05)};
        Vec tstar{1.0, 0.0};
        const double r = optimal_rate(theta.span(), d, tstar.span(), 1);
        const double grid = oracles::grid_fixed_point(theta.span(), d.delta0, d.delta_r, d.r_max,
                                                      tstar.span(), 1, 1e-3);
        if (grid < 0.0 || std::fabs(r - grid) > 2e-3) {
            *detail = "grid disagreement at theta_R=" + fmt(theta[1]);
            return false;
        }
    }
    return true;
}

bool check_solver(std::string* detail) {
    Rng rng(104);
    for (int rep = 0; rep < 30; ++rep) {
        const std::size_t n = 1 + rng.index(8);
        Mat a(n, n, 0.0);
        for (std::size_t i = 0; i < n; ++i) a(i, i) = rng.uniform(0.5, 3.0);
        for (std::size_t i = 0; i < n; ++i)
            for (std::size_t j = i + 1; j < n; ++j) {
                const double v = rng.uniform(-0.2, 0.2);
                a(i, j) = a(j, i) = v;
            }
        std::vector<double> xs(n);
        for (auto& v : xs) v = rng.uniform(-2, 2);
        Vec x = Vec::from(xs);
        Vec b = a.matvec(x);
        Vec got = solve_spd(a, b);
        for (std::size_t i = 0; i < n; ++i)
            if (std::fabs(got[i] - x[i]) > 1e-8 * (1.0 + std::fabs(x[i]))) {
                *detail = "solve_spd recovery error";
                return false;
            }
    }
    return true;
}

bool check_determinism(std::string* detail) {
    Rng rng(105);
    const std::size_t n = 240;
    Dataset d;
    d.n = n;
    d.y = Mat(n, 1);
    d.t = Mat(n, 2);
    d.x = Mat(n, 1);
    for (std::size_t i = 0; i < n; ++i) {
        d.x(i, 0) = rng.uniform(-1, 1);
        d.t(i, 0) = 1.0;
        d.t(i, 1) = rng.bernoulli(0.5) ? 1.0 : 0.0;
        d.y(i, 0) = 1.0 + d.t(i, 1) + 0.3 * rng.normal();
    }
    auto loss = linear_sq(2);
    auto target = target_coefficient(1, 2);
    NetConfig nc;
    nc.input_dim = 1;
    nc.hidden = {6};
    nc.dtheta = 2;
    TrainConfig tc;
    tc.epochs = 10;
    tc.batch_size = 32;
    ProjectorStrategy strat;
    strat.kind = ProjectorKind::glm_closed_form;
    strat.aux_net = nc;
    strat.aux_train = tc;
    InferenceConfig icfg;
    icfg.folds = 2;
    icfg.seed = 7;
    auto once = [&] {
        return cross_fit(d, loss, target, Vec{1.0, 0.0}, nc, tc, strat,
                         RegScheme::parse("reg:eig_floor:1e-8"), icfg)
            .to_json();
    };
    if (once() != once()) {
        *detail = "repeated cross_fit produced different JSON";
        return false;
    }
    return true;
}

}  // namespace

int run_selfcheck(std::ostream& out) {
    CheckScope scope{out};
    std::string detail;

    {
        // Kernel variants against the scalar reference.
        Rng rng(100);
        bool ok = true;
        std::vector<double> a(97), b(97);
        for (auto& v : a) v = rng.uniform(-1, 1);
        for (auto& v : b) v = rng.uniform(-1, 1);
        const double ds = kernels::detail::dot_scalar(a.data(), b.data(), a.size());
        const double dd = kernels::dot(a.data(), b.data(), a.size());
        ok = std::fabs(ds - dd) <= 1e-12 * (1.0 + std::fabs(ds));
        scope.report(std::string("kernels (") + kernels::backend_name() + ") vs scalar", ok);
    }
    scope.report("solve_spd recovery", check_solver(&detail), detail);
    scope.report("loss gradients vs finite differences", check_losses_fd(&detail), detail);
    scope.report("score specializations (AIPW, univariate)", check_specializations(&detail),
                 detail);
    scope.report("fixed point vs grid oracle", check_fixed_point(&detail), detail);
    scope.report("cross_fit determinism", check_determinism(&detail), detail);
    return scope.failures;
}

int run_cli(int argc, char** argv) {
    CLI::App app{"hinf: heterogeneous parameter functions with automatic inference"};
    app.require_subcommand(1);

    std::string config_path, out_dir;
    std::uint64_t seed = 0;
    std::size_t threads = 0;
    int verbosity = 0;

    auto add_common = [&](CLI::App* sub, bool config_required) {
        sub->add_option("--config", config_path, "JSON run configuration")
            ->required(config_required);
        sub->add_option("--seed", seed, "override the config seed");
        sub->add_option("--threads", threads, "cap worker threads");
        sub->add_option("--out", out_dir, "output directory override");
        sub->add_flag("-v", verbosity, "verbose");
    };
    add_common(app.add_subcommand("fit", "train a structured net on a dataset"), true);
    add_common(app.add_subcommand("infer", "cross-fitted orthogonal-score inference"), true);
    add_common(app.add_subcommand("simulate", "draw a synthetic dataset with known truth"), true);
    add_common(app.add_subcommand("coverage", "replicate the pipeline against known truth"),
               true);
    add_common(app.add_subcommand("check", "run the oracle/diagnostic self-checks"), false);

    try {
        app.parse(argc, argv);
    } catch (const CLI::ParseError& e) {
        const int code = app.exit(e);
        return code == 0 ? 0 : 2;
    }

    try {
        RunConfig cfg;
        if (!config_path.empty()) cfg = RunConfig::from_file(config_path);
        cfg.command = app.get_subcommands().front()->get_name();
        if (seed != 0) cfg.seed = seed;
        if (threads != 0) cfg.threads = threads;
        if (!out_dir.empty()) cfg.out_dir = out_dir;
        cfg.verbosity = verbosity;
        return run(cfg);
    } catch (const Error& e) {
        std::cerr << "error: " << e.what() << "\n";
        return static_cast<int>(e.cls());
    } catch (const std::exception& e) {
        std::cerr << "internal error: " << e.what() << "\n";
        return 5;
    }
}

}  // namespace hinf
