#pragma once

#include <span>

namespace nnep {

inline constexpr double kLog2Pi = 1.8378770664093454836;
inline constexpr double kSqrt2 = 1.4142135623730950488;
inline constexpr double kPi = 3.1415926535897932385;

// exp(x^2) * erfc(x), accurate for large positive x
double erfcx(double x);

// standard normal cdf and its logarithm (stable in the far left tail)
double norm_cdf(double z);
double log_norm_cdf(double z);

// phi(z) / Phi(z) without underflow
double inv_mills(double z);

double log_normal_pdf(double x, double mean, double var);

double logsumexp(std::span<const double> values);
double log_add(double a, double b);

}  // namespace nnep
