#pragma once

namespace nnep {

struct ActivationMoments {
  double meanG = 0.0;
  double varG = 0.0;
};

// hidden-unit nonlinearity K^{-1/2} erf(x / sqrt(2))
double g(double x, int K);

// moments of g(h) for h ~ N(m, V)
double mean_g(double m, double V, int K);
double var_g(double m, double V, int K, int nodes = 100);
ActivationMoments activation_moments(double m, double V, int K, int nodes = 100);

}  // namespace nnep
