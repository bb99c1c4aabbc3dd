#pragma once

#include <functional>
#include <string>
#include <vector>

#include "hinf/dataset.hpp"
#include "hinf/linalg.hpp"
#include "hinf/loss.hpp"
#include "hinf/net.hpp"

namespace hinf {

// Produce L(x) = E[ell_thetatheta(Y, T, theta(x)) | X = x] by one of three
// strategies, with regularization and invertibility diagnostics:
//   regression       regress the distinct Hessian entries on x with an
//                    auxiliary network (squared loss, linear output layer);
//                    theta_hat must come from a sample disjoint from the
//                    regression data (three-way splitting).
//   randomized       T independent of X and the Hessian free of y: integrate
//                    the Hessian over the known T distribution instead of
//                    estimating anything.
//   glm_closed_form  glm losses: linear link regresses t t' entries on x
//                    (no theta_hat needed); logit regresses Gdot(theta't) t t'
//                    entries, which is the same estimator path as
//                    `regression` restricted to the closed form.

using ThetaFn = std::function<Vec(cspan x)>;

enum class ProjectorKind { regression, randomized, glm_closed_form };

struct TreatmentDistribution {
    struct Marginal {
        enum class Kind { constant, bernoulli, uniform, normal };
        Kind kind = Kind::constant;
        // constant: value a; bernoulli: P(t=1) = a; uniform: U(a,b); normal: N(a, sd=b)
        double a = 1.0, b = 0.0;
    };

    enum class Kind { empirical, discrete, product };
    Kind kind = Kind::discrete;

    Mat support;                     // empirical sample rows or discrete support rows
    std::vector<double> probs;       // discrete only; sums to 1 within 1e-12
    std::vector<Marginal> marginals; // product only, one per t coordinate

    std::size_t mc_draws = 100000;   // used when a product has continuous marginals
    std::uint64_t mc_seed = 7777;

    void validate(std::size_t dt, bool expects_intercept) const;

    static TreatmentDistribution discrete_support(Mat support, std::vector<double> probs);
    static TreatmentDistribution empirical(Mat sample);
};

struct RegScheme {
    enum class Kind { none, ridge, eig_floor };
    Kind kind = Kind::eig_floor;   // default guards NotSPD aborts while moving
    double lambda = 1e-8;          // well-conditioned cases by <= 1e-8

    /// Keys: "reg:none", "reg:ridge:LAMBDA", "reg:eig_floor:LAMBDA".
    static RegScheme parse(const std::string& key);
    std::string key() const;
};

/// Apply a regularization scheme to a symmetric matrix: ridge adds lambda*I,
/// eig_floor clips eigenvalues below lambda up to lambda, none passes through.
Mat regularize(const Mat& l, const RegScheme& scheme);

struct ProjectedHessian {
    std::string provenance;
    RegScheme reg;
    std::size_t dtheta = 0;

    /// Symmetric, regularized L(x).
    Mat eval(cspan x) const;

    /// Entrywise Monte Carlo standard error of the randomized computation;
    /// zero for exact-sum and regression paths.
    Mat se(cspan x) const;

    std::function<Mat(cspan x)> raw;     // strategy output before regularization
    std::function<Mat(cspan x)> raw_se;  // may be null
};

struct ProjectorStrategy {
    ProjectorKind kind = ProjectorKind::glm_closed_form;
    NetConfig aux_net;        // regression paths; dtheta/bound are overwritten
    TrainConfig aux_train;
    TreatmentDistribution dist;  // randomized path

    /// Keys: "L:regression", "L:randomized", "L:glm".
    static ProjectorKind parse_kind(const std::string& key);
};

/// Regress each distinct Hessian entry ell_thetatheta(y_i, t_i, theta(x_i))
/// on x_i with a shared-trunk auxiliary net and squared loss; output is
/// symmetrized by construction.
ProjectedHessian fit_regression(const Dataset& data, const ThetaFn& theta_hat,
                                const LossModel& loss, const NetConfig& aux_net,
                                const TrainConfig& aux_train, const RegScheme& reg);

/// L(x) = integral of the Hessian over F_T at theta(x). Exact for discrete
/// support; Monte Carlo for continuous product marginals, with common draws
/// across x and a reported standard error. Requires hessian_free_of_y.
ProjectedHessian computed_randomized(const TreatmentDistribution& dist, const ThetaFn& theta_hat,
                                     const LossModel& loss, const RegScheme& reg);

/// Single-point randomized computation; the ProjectedHessian above wraps
/// this per x with the treatment sample materialized once.
Mat compute_randomized(const TreatmentDistribution& dist, const ThetaFn& theta_hat,
                       const LossModel& loss, cspan x, Mat* se_out = nullptr);

/// glm closed form: linear link regresses t t' on x without theta_hat;
/// logit regresses Gdot * t t'. Same estimator path as fit_regression.
ProjectedHessian glm_closed_form(const Dataset& data, const ThetaFn& theta_hat,
                                 const LossModel& loss, const NetConfig& aux_net,
                                 const TrainConfig& aux_train, const RegScheme& reg);

/// Dispatch on strategy kind.
ProjectedHessian fit_projector(const ProjectorStrategy& strategy, const Dataset& data,
                               const ThetaFn& theta_hat, const LossModel& loss,
                               const RegScheme& reg);

}  // namespace hinf
