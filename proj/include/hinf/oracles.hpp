#pragma once

#include "hinf/linalg.hpp"

// Reference oracles: literal transcriptions of the classical closed forms the
// generic score must reproduce, plus a grid-scan root finder. Deliberately
// self-contained — no calls into the inference engine, the targets module, or
// solve_spd — so agreement checks are genuinely two-sided.

namespace hinf::oracles {

/// Doubly robust ATE score for a binary treatment:
/// theta2 + t (y - theta1 - theta2 t) / p - (1 - t) (y - theta1) / (1 - p).
/// Throws DegenerateDesign when p is 0 or 1.
double aipw(double y, double t, double theta1, double theta2, double p);

/// Average-partial-effect score for vector continuous treatments:
/// theta2 + V(x)^{-1} (t - E(x)) (y - theta1 - theta2't).
/// t, theta2, e have the slope dimension; v is the conditional variance of T.
/// Throws DegenerateDesign when v is singular.
Vec graham_pinto(double y, cspan t, double theta1, cspan theta2, cspan e, const Mat& v);

/// Scan g(r) = r - (1 + r (1 - G(r)) theta_rate) / (D(r) delta_r) on a grid of
/// the given step over (0, r_max] and return the midpoint of the first cell
/// where the sign changes; -1 when no sign change is found.
double grid_fixed_point(cspan theta, double delta0, double delta_r, double r_max, cspan tstar,
                        std::size_t rate, double step);

}  // namespace hinf::oracles
