#pragma once

#include <functional>
#include <optional>
#include <string>
#include <vector>

#include "hinf/dataset.hpp"
#include "hinf/inference.hpp"
#include "hinf/projector.hpp"
#include "hinf/targets.hpp"

namespace hinf {

// Synthetic data generators with known theta0(x) and oracle-computed mu0,
// plus the replication harness for coverage experiments. The formula library
// is closed (no user expressions) so truth bundles stay verifiable.

struct ThetaFormula {
    enum class Kind { affine, sine, bump, interaction };
    Kind kind = Kind::affine;
    double c0 = 0.0;                // additive constant (all kinds)
    std::vector<double> coefs;      // affine: c0 + coefs . x
    double a = 1.0;                 // amplitude (sine/bump/interaction)
    double w = 1.0;                 // sine frequency: a sin(w pi x_i)
    double s = 1.0;                 // bump sharpness: a exp(-s |x - c|^2)
    double center = 0.0;            // bump center (per coordinate i)
    std::size_t i = 0, j = 0;       // coordinate indices

    double eval(cspan x) const;
};

struct DGPSpec {
    enum class Design { randomized, confounded_binary };

    std::string name = "dgp";
    std::size_t dx = 1;
    std::size_t d_c = 1;  // leading d_c coordinates are continuous U[-1,1];
                          // the rest are Bernoulli(1/2) in {0,1}
    std::vector<ThetaFormula> theta0;
    Design design = Design::randomized;
    TreatmentDistribution ft;        // randomized designs
    ThetaFormula propensity_index;   // confounded: p(x)=clamp(logistic(.),0.1,0.9)
    std::string loss_key = "linear";
    double noise_sd = 1.0;           // linear-loss noise
    std::size_t n = 1000;
    std::uint64_t seed = 1;

    std::string to_json() const;
    static DGPSpec from_json(const std::string& text);
};

struct TruthBundle {
    std::function<Vec(cspan x)> theta0;
    std::function<double(cspan x)> propensity;  // confounded designs only
    TreatmentDistribution ft;
    std::size_t dtheta = 0;
};

struct GeneratedData {
    Dataset data;
    TruthBundle truth;
};

/// Draw a dataset from a DGP description; bit-reproducible from (spec, seed).
GeneratedData generate(const DGPSpec& spec);

/// JSON (de)serialization of treatment distributions, shared by DGP specs
/// and run configs.
std::string treatment_dist_to_json(const TreatmentDistribution& dist);
TreatmentDistribution treatment_dist_from_json(const std::string& text);

struct Mu0Result {
    Vec mu0;
    Vec mc_se;          // Monte Carlo standard error of each component
    std::size_t draws = 0;
    std::size_t skipped = 0;
};

/// mu0 = E[H(X, theta0(X); t*)] by averaging over an independent draw of x's
/// (1e6 by default) with the Monte Carlo standard error reported. Skippable
/// per-observation target errors are counted, not fatal.
Mu0Result compute_mu0(const DGPSpec& spec, const TargetFunctional& target, const Vec& tstar,
                      std::size_t draws = 1000000);

// ---------------------------------------------------------------------------

struct PipelineConfig {
    NetConfig net;
    TrainConfig train;
    ProjectorStrategy strategy;
    RegScheme reg;
    InferenceConfig inf;
    std::string target_key = "coef:2";
    Vec tstar;
    DefaultSpec defaults;
    double loan = 1.0;
};

struct RepRecord {
    std::size_t rep = 0;
    bool ok = false;
    double mu_hat = 0.0;
    double lo = 0.0, hi = 0.0;
    bool covered = false;
    double ci_length = 0.0;
    std::size_t skipped = 0;
    std::string error;  // error kind when ok is false
};

struct CoverageReport {
    std::size_t replications = 0;
    double nominal = 0.95;
    double mu0 = 0.0;
    double mu0_se = 0.0;
    double coverage = 0.0;        // over successful replications
    double mean_ci_length = 0.0;
    double mean_abs_error = 0.0;
    std::size_t failed = 0;
    std::vector<RepRecord> records;

    std::string to_json() const;
    std::string to_csv() const;  // one row per replication
};

/// Run the full cross-fitting pipeline once per replication with derived,
/// disjoint seed streams, in parallel across `threads` workers, and report
/// empirical coverage of the nominal CI against the truth-bundle mu0. A
/// failed replication is quarantined into its record, not fatal. Scalar
/// targets only.
CoverageReport coverage_experiment(const DGPSpec& spec, const PipelineConfig& pipeline,
                                   std::size_t replications, double nominal_level,
                                   std::size_t threads = 1);

}  // namespace hinf
