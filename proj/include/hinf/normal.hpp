#pragma once

#include <cmath>

namespace hinf {

inline constexpr double kInvSqrt2Pi = 0.3989422804014326779;  // 1/sqrt(2*pi)
inline constexpr double kInvSqrt2 = 0.7071067811865475244;    // 1/sqrt(2)

/// Standard normal density.
inline double norm_pdf(double x) { return kInvSqrt2Pi * std::exp(-0.5 * x * x); }

/// Standard normal CDF via erfc; absolute error well under 1e-12 everywhere,
/// and accurate in the far tails where 1 - Phi would cancel.
inline double norm_cdf(double x) { return 0.5 * std::erfc(-x * kInvSqrt2); }

/// Upper tail 1 - Phi(x), computed without cancellation.
inline double norm_sf(double x) { return 0.5 * std::erfc(x * kInvSqrt2); }

/// Inverse standard normal CDF. Rational initial guess (Acklam) polished with
/// one Halley step against norm_cdf, giving near machine precision on (0,1).
double norm_quantile(double p);

}  // namespace hinf
