#include "nnep/special.hpp"

#include <algorithm>
#include <cmath>
#include <limits>

namespace nnep {

namespace {

// continued fraction for erfc, modified Lentz; good for x >= 4
double erfcx_continued_fraction(double x) {
  constexpr double tiny = 1e-300;
  double f = x;
  double c = x;
  double d = 0.0;
  for (int k = 1; k < 200; ++k) {
    const double a = 0.5 * k;
    d = x + a * d;
    c = x + a / c;
    if (std::abs(d) < tiny) d = tiny;
    if (std::abs(c) < tiny) c = tiny;
    d = 1.0 / d;
    const double delta = c * d;
    f *= delta;
    if (std::abs(delta - 1.0) < 1e-16) break;
  }
  return 1.0 / (std::sqrt(kPi) * f);
}

}  // namespace

double erfcx(double x) {
  if (std::isnan(x)) return x;
  if (x < 0.0) {
    if (x < -26.0) return std::numeric_limits<double>::infinity();
    return 2.0 * std::exp(x * x) - erfcx(-x);
  }
  if (x < 4.0) return std::exp(x * x) * std::erfc(x);
  return erfcx_continued_fraction(x);
}

double norm_cdf(double z) { return 0.5 * std::erfc(-z / kSqrt2); }

double log_norm_cdf(double z) {
  if (z > 5.0) return std::log1p(-0.5 * std::erfc(z / kSqrt2));
  if (z > -5.0) return std::log(0.5 * std::erfc(-z / kSqrt2));
  return std::log(0.5 * erfcx(-z / kSqrt2)) - 0.5 * z * z;
}

double inv_mills(double z) {
  return std::sqrt(2.0 / kPi) / erfcx(-z / kSqrt2);
}

double log_normal_pdf(double x, double mean, double var) {
  const double r = x - mean;
  return -0.5 * (kLog2Pi + std::log(var) + r * r / var);
}

double logsumexp(std::span<const double> values) {
  if (values.empty()) return -std::numeric_limits<double>::infinity();
  const double mx = *std::max_element(values.begin(), values.end());
  if (!std::isfinite(mx)) return mx;
  double s = 0.0;
  for (double v : values) s += std::exp(v - mx);
  return mx + std::log(s);
}

double log_add(double a, double b) {
  if (a < b) std::swap(a, b);
  if (a == -std::numeric_limits<double>::infinity()) return a;
  return a + std::log1p(std::exp(b - a));
}

}  // namespace nnep
