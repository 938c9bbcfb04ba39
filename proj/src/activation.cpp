#include "nnep/activation.hpp"

#include <algorithm>
#include <cmath>
#include <stdexcept>

#include "nnep/numerics.hpp"
#include "nnep/special.hpp"

namespace nnep {

namespace {

double unit_mean(double m, double V) { return std::erf(m / std::sqrt(2.0 * (1.0 + V))); }

double unit_var(double m, double V, int nodes) {
  if (!(V > 0.0)) return 0.0;
  const double rho = std::clamp(V / (1.0 + V), 0.0, 1.0);
  const double upper = std::asin(rho);
  const double c = m * m / (1.0 + V);
  const GaussLegendre& gl = gauss_legendre(nodes);
  const double half = 0.5 * upper;
  double s = 0.0;
  for (size_t j = 0; j < gl.nodes.size(); ++j) {
    const double x = half * (gl.nodes[j] + 1.0);
    s += gl.weights[j] * std::exp(-c / (1.0 + std::sin(x)));
  }
  return 2.0 / kPi * half * s;
}

void check_units(int K) {
  if (K < 1) throw std::invalid_argument("hidden unit count must be positive");
}

}  // namespace

double g(double x, int K) {
  check_units(K);
  return std::erf(x / kSqrt2) / std::sqrt(static_cast<double>(K));
}

double mean_g(double m, double V, int K) {
  check_units(K);
  return unit_mean(m, V) / std::sqrt(static_cast<double>(K));
}

double var_g(double m, double V, int K, int nodes) {
  check_units(K);
  return unit_var(m, V, nodes) / K;
}

ActivationMoments activation_moments(double m, double V, int K, int nodes) {
  check_units(K);
  const double scale = 1.0 / std::sqrt(static_cast<double>(K));
  return {unit_mean(m, V) * scale, unit_var(m, V, nodes) / K};
}

}  // namespace nnep
