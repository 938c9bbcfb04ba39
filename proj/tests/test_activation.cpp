#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <boost/math/special_functions/erf.hpp>
#include <cmath>
#include <random>

#include "nnep/activation.hpp"

using namespace nnep;

namespace {

// E[g(h)^p] for h ~ N(m, V) by adaptive quadrature
double moment(double m, double V, int K, int p) {
  const double sd = std::sqrt(V);
  auto f = [&](double z) {
    const double gv = boost::math::erf((m + sd * z) / std::sqrt(2.0)) / std::sqrt(double(K));
    return std::pow(gv, p) * std::exp(-0.5 * z * z) / std::sqrt(2.0 * M_PI);
  };
  return boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, -12.0, 12.0, 15, 1e-14);
}

}  // namespace

TEST(Activation, Examples) {
  EXPECT_EQ(g(0.0, 3), 0.0);
  EXPECT_NEAR(g(1.0, 1), 0.6826894921, 1e-9);
  EXPECT_NEAR(g(40.0, 4), 0.5, 1e-15);
  EXPECT_NEAR(g(-1.3, 2), -g(1.3, 2), 1e-15);
}

TEST(Activation, MeanExamples) {
  EXPECT_EQ(mean_g(0.0, 2.5, 3), 0.0);
  EXPECT_NEAR(mean_g(1.0, 0.0, 1), g(1.0, 1), 1e-14);
  EXPECT_NEAR(mean_g(1.0, 1.0, 1), boost::math::erf(0.5), 1e-12);
}

TEST(Activation, VarianceExamples) {
  EXPECT_NEAR(var_g(0.7, 0.0, 1), 0.0, 1e-15);
  EXPECT_NEAR(var_g(0.0, 1e8, 1), 1.0, 1e-3);
}

TEST(Activation, MomentsMatchQuadrature) {
  for (int K : {1, 3})
    for (double m : {-2.0, -0.4, 0.0, 1.1})
      for (double V : {0.01, 0.5, 2.0, 9.0}) {
        const double e1 = moment(m, V, K, 1);
        EXPECT_NEAR(mean_g(m, V, K), e1, 1e-12) << m << " " << V;
        EXPECT_NEAR(var_g(m, V, K), moment(m, V, K, 2) - e1 * e1, 1e-9) << m << " " << V;
        const ActivationMoments am = activation_moments(m, V, K);
        EXPECT_DOUBLE_EQ(am.meanG, mean_g(m, V, K));
      }
}

TEST(Activation, MonteCarloSpotCheck) {
  std::mt19937_64 rng(11);
  std::normal_distribution<double> n01;
  const int N = 200000;
  double s1 = 0.0, s2 = 0.0;
  for (int i = 0; i < N; ++i) {
    const double v = g(0.5 + std::sqrt(2.0) * n01(rng), 1);
    s1 += v;
    s2 += v * v;
  }
  const double mean = s1 / N;
  const double var = s2 / N - mean * mean;
  EXPECT_NEAR(mean_g(0.5, 2.0, 1), mean, 4.0 * std::sqrt(var / N));
  EXPECT_NEAR(var_g(0.5, 2.0, 1), var, 5e-3);
}

TEST(Activation, VarianceBounded) {
  for (double V : {0.1, 1.0, 100.0}) {
    const double v = var_g(0.3, V, 2);
    EXPECT_GE(v, 0.0);
    EXPECT_LE(v, 0.5);
  }
}
