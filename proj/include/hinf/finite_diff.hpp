#pragma once

#include <functional>

#include "hinf/linalg.hpp"

namespace hinf {

// Central-difference gradient checker used as the oracle across test suites.
//
// Step per coordinate is h_i = 1e-6 * (1 + |x_i|); the relative error uses
// denominator max(1, |analytic_i|). Fixed like this so the oracle suite is
// deterministic. Throws Error("NonFinite") if any evaluation returns NaN/Inf.

using ScalarFn = std::function<double(cspan)>;

/// Central-difference gradient of f at `point`.
Vec finite_diff_grad(const ScalarFn& f, const Vec& point);

/// Max relative error between finite differences of f and `analytic`.
double finite_diff_check(const ScalarFn& f, const Vec& point, const Vec& analytic);

}  // namespace hinf
