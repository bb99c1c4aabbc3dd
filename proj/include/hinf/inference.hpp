#pragma once

#include <functional>
#include <map>
#include <string>
#include <vector>

#include "hinf/dataset.hpp"
#include "hinf/linalg.hpp"
#include "hinf/loss.hpp"
#include "hinf/net.hpp"
#include "hinf/projector.hpp"
#include "hinf/targets.hpp"

namespace hinf {

// Orthogonal-score engine: evaluate
//   psi(w) = H(x, theta(x); t*) - H_theta(x, theta(x); t*) L(x)^{-1} l_theta(y, t, theta(x))
// per observation, orchestrate S-fold cross-fitting with optional three-way
// splits, and aggregate point estimates, the variance matrix, and normal
// confidence intervals.

using LFn = std::function<Mat(cspan x)>;

/// One orthogonal-score evaluation. L(x) is applied through a Cholesky solve;
/// NotSPD propagates (the caller decides whether that aborts the run).
Vec influence_eval(cspan y, cspan t, cspan x, const ThetaFn& theta_fn, const LFn& l_fn,
                   const LossModel& loss, const TargetFunctional& target, cspan tstar);

/// Scalar-treatment closed form with L(x) inverted by hand through the
/// weighted moments lambda_k(x) = E[Gdot T^k | X=x]. Exists as an independent
/// cross-check of the matrix path; requires dt = 2 (intercept + scalar
/// treatment), dmu = 1, and a glm-form loss.
double influence_eval_univariate(cspan y, cspan t, cspan x, const ThetaFn& theta_fn,
                                 const std::function<double(cspan)>& lambda0,
                                 const std::function<double(cspan)>& lambda1,
                                 const std::function<double(cspan)>& lambda2,
                                 const LossModel& loss, const TargetFunctional& target,
                                 cspan tstar);

enum class SkipPolicy { skip_and_report, abort };

struct InferenceConfig {
    std::size_t folds = 3;      // S
    bool three_way = false;     // split S_s^c 50/50 between theta and L stages
    std::vector<double> levels = {0.95};
    std::uint64_t seed = 0;
    SkipPolicy skip_policy = SkipPolicy::skip_and_report;

    // Debug switch: delete the correction term so psi = H (plug-in). Used by
    // the coverage-contrast experiments; never the default.
    bool plug_in_only = false;

    // Run the orthogonality diagnostic after cross-fitting (built-in
    // directions, first fold's nuisance estimates over the full sample) and
    // attach the slopes to the result.
    bool orthogonality_diag = false;
};

struct FoldResult {
    Vec mu;
    Mat psi;
    std::size_t n_used = 0;
    std::size_t skipped = 0;
};

struct InferenceResult {
    Vec mu;        // (1/S) sum of fold means
    Mat psi;       // (1/S) sum of fold variance blocks, centered at the global mu
    std::size_t n_used = 0;
    std::size_t skipped = 0;
    std::vector<FoldResult> folds;
    std::map<double, std::vector<std::pair<double, double>>> ci;  // level -> per-component

    Mat scores;                           // n_used x dmu, ascending data order
    std::vector<std::size_t> scored_idx;  // original row of each score row
    Mat theta_hat;                        // n x dtheta, off-fold estimates
    std::vector<std::size_t> fold_of;     // fold assignment per original row
    double max_cond_l = 0.0;              // max over evaluations of cond(L(x))
    bool cond_warning = false;            // max_cond_l > 1e8

    struct OrthSlope {
        std::string direction;
        double orth_slope = 0.0;
        double plug_slope = 0.0;
    };
    std::vector<OrthSlope> orthogonality_slopes;  // filled when requested

    /// Deterministic, schema-versioned JSON (excludes bulky score/theta
    /// blocks, which ship separately as CSV).
    std::string to_json() const;
};

/// Cross-fitting: for each fold s, train theta on the complement (or its
/// first half under three_way, with L fit on the second half), evaluate the
/// score on the fold, and average. Deterministic given seeds: per-fold
/// training seeds derive from (config seed, fold index).
///
/// Asymptotic validity additionally assumes moment and smoothness conditions
/// that have no runtime counterpart; the diagnostics cover what is checkable
/// (conditioning of L(x), orthogonality slopes), nothing more.
InferenceResult cross_fit(const Dataset& data, const LossModel& loss,
                          const TargetFunctional& target, const Vec& tstar,
                          const NetConfig& net_cfg, const TrainConfig& train_cfg,
                          const ProjectorStrategy& strategy, const RegScheme& reg,
                          const InferenceConfig& cfg);

/// Per-component z interval at `level`: mu_h +- z_{1-a/2} sqrt(psi_hh / n).
std::vector<std::pair<double, double>> confidence_interval(const InferenceResult& result,
                                                           double level);

// ---------------------------------------------------------------------------
// Orthogonality diagnostics.

struct Direction {
    std::string name;
    std::function<Vec(cspan x)> delta;  // bounded R^dtheta-valued function of x
};

/// Constant shifts e_k and single-coordinate bumps e_k exp(-2 x_1^2), for
/// every theta coordinate.
std::vector<Direction> builtin_directions(std::size_t dtheta, std::size_t dx);

struct DirectionReport {
    std::string direction;
    double orth_slope = 0.0;      // max over components, central difference at 0
    double plug_slope = 0.0;      // same for the uncorrected plug-in H
    double curvature = 0.0;       // |m(e) + m(-e) - 2 m(0)| at the largest eps
    double odd_part = 0.0;        // |m(e) - m(-e)| at the largest eps
};

struct OrthReport {
    std::vector<DirectionReport> directions;
};

/// m(eps) = mean over the data of psi evaluated at theta + eps * delta, with
/// L held fixed; reports the central-difference slope at 0 next to the same
/// slope for the naive plug-in path. On well-specified models the orthogonal
/// slope is an order of magnitude below the plug-in slope.
OrthReport orthogonality_diagnostic(const Dataset& data, const ThetaFn& theta_fn, const LFn& l_fn,
                                    const LossModel& loss, const TargetFunctional& target,
                                    cspan tstar, const std::vector<Direction>& directions,
                                    const std::vector<double>& eps_grid);

}  // namespace hinf
