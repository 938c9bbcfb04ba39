#include <gtest/gtest.h>

#include <boost/math/quadrature/gauss_kronrod.hpp>
#include <cmath>
#include <random>

#include "nnep/errors.hpp"
#include "nnep/prior_ep.hpp"
#include "nnep/special.hpp"
#include "oracles.hpp"

using namespace nnep;

namespace {

double laplace_log_density(double w, double phi) {
  const double lambda = std::sqrt(std::exp(phi) / 2.0);
  return -std::log(2.0 * lambda) - std::abs(w) / lambda;
}

// integrals of N(w | cav) p(w | phi)^eta times 1, w, w^2, split at the kink
std::array<double, 3> laplace_integrals(Gaussian1D cav, double phi, double eta) {
  std::array<double, 3> out{};
  for (int p = 0; p < 3; ++p) {
    auto f = [&](double w) {
      return std::pow(w, p) * std::exp(log_normal_pdf(w, cav.mean, cav.var) + eta * laplace_log_density(w, phi));
    };
    const double lo = cav.mean - 30.0 * std::sqrt(cav.var), hi = cav.mean + 30.0 * std::sqrt(cav.var);
    out[p] = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, lo, 0.0, 15, 1e-14) +
             boost::math::quadrature::gauss_kronrod<double, 61>::integrate(f, 0.0, hi, 15, 1e-14);
  }
  return out;
}

}  // namespace

TEST(ConditionalMoments, GaussianArdExample) {
  const ConditionalMoments c = partial_Z_and_conditionals(PriorFamily::GaussianArd, {0.0, 1.0}, 0.0, 1.0);
  EXPECT_NEAR(c.logZ, log_normal_pdf(0.0, 0.0, 2.0), 1e-14);
  EXPECT_NEAR(c.Ew, 0.0, 1e-15);
  EXPECT_NEAR(c.Ew2, 0.5, 1e-14);
}

TEST(ConditionalMoments, LaplaceMatchesAdaptiveQuadrature) {
  for (const Gaussian1D cav : {Gaussian1D{2.0, 0.5}, Gaussian1D{-0.3, 0.02}, Gaussian1D{0.1, 4.0}}) {
    for (const double eta : {0.8, 1.0}) {
      const double phi = std::log(0.5);
      const ConditionalMoments c = partial_Z_and_conditionals(PriorFamily::Laplace, cav, phi, eta);
      const auto I = laplace_integrals(cav, phi, eta);
      EXPECT_NEAR(c.logZ, std::log(I[0]), 1e-10);
      EXPECT_NEAR(c.Ew, I[1] / I[0], 1e-10);
      EXPECT_NEAR(c.Ew2, I[2] / I[0], 1e-10);
    }
  }
}

TEST(ConditionalMoments, LaplaceNarrowCavityLimit) {
  const double m = 0.7, phi = std::log(0.3), eta = 0.8;
  const ConditionalMoments c = partial_Z_and_conditionals(PriorFamily::Laplace, {m, 1e-10}, phi, eta);
  EXPECT_NEAR(c.logZ, eta * laplace_log_density(m, phi), 1e-4);
  EXPECT_NEAR(c.Ew, m, 1e-8);
}

TEST(ConditionalMoments, LaplaceFarTailStaysFinite) {
  const ConditionalMoments c = partial_Z_and_conditionals(PriorFamily::Laplace, {40.0, 0.01}, std::log(1e-4), 1.0);
  EXPECT_TRUE(std::isfinite(c.logZ));
  EXPECT_TRUE(std::isfinite(c.Ew));
  EXPECT_GT(c.Ew2 - c.Ew * c.Ew, 0.0);
}

TEST(TiltedWPhi, PointMassScaleReducesToConditional) {
  const Gaussian1D cav{0.4, 0.3};
  const double phi = std::log(0.2);
  for (const PriorFamily fam : {PriorFamily::Laplace, PriorFamily::GaussianArd}) {
    const WPhiTilt t = tilted_w_phi(cav, {phi, 1e-12}, fam, 0.8);
    const ConditionalMoments c = partial_Z_and_conditionals(fam, cav, phi, 0.8);
    EXPECT_NEAR(t.logZhat, c.logZ, 1e-6);
    EXPECT_NEAR(t.wMean, c.Ew, 1e-6);
    EXPECT_NEAR(t.wVar, c.Ew2 - c.Ew * c.Ew, 1e-6);
  }
}

TEST(TiltedWPhi, SymmetricCavityGivesZeroMean) {
  for (const PriorFamily fam : {PriorFamily::Laplace, PriorFamily::GaussianArd}) {
    const WPhiTilt t = tilted_w_phi({0.0, 0.7}, {-1.0, 2.0}, fam, 0.8);
    EXPECT_NEAR(t.wMean, 0.0, 1e-12);
    EXPECT_GT(t.wVar, 0.0);
    EXPECT_GT(t.phiVar, 0.0);
  }
}

TEST(TiltedWPhi, MatchesJointOracle) {
  std::mt19937_64 rng(12);
  std::uniform_real_distribution<double> u(0.0, 1.0);
  for (const PriorFamily fam : {PriorFamily::Laplace, PriorFamily::GaussianArd}) {
    for (int c = 0; c < 4; ++c) {
      const Gaussian1D wCav{2.0 * u(rng) - 1.0, 0.05 + u(rng)};
      const Gaussian1D phiCav{-3.0 + 2.0 * u(rng), 0.2 + 2.0 * u(rng)};
      const WPhiTilt t = tilted_w_phi(wCav, phiCav, fam, 0.8);
      const WPhiTilt ref = oracle::w_phi_tilt(wCav, phiCav, fam, 0.8, 1201);
      EXPECT_NEAR(t.logZhat, ref.logZhat, 1e-6);
      EXPECT_NEAR(t.wMean, ref.wMean, 1e-6);
      EXPECT_NEAR(t.wVar, ref.wVar, 1e-6);
      EXPECT_NEAR(t.phiMean, ref.phiMean, 1e-6);
      EXPECT_NEAR(t.phiVar, ref.phiVar, 1e-6);
    }
  }
}

TEST(TruncatedT, VanishingPowerGivesTruncatedNormal) {
  for (const Gaussian1D cav : {Gaussian1D{0.0, 1.0}, Gaussian1D{-0.5, 0.3}, Gaussian1D{1.5, 2.0}}) {
    const Tilt1D t = tilted_truncated_t(cav, 4.0, 1.0, 1e-9);
    const double s = std::sqrt(cav.var), a = cav.mean / s;
    const double lam = inv_mills(a);
    EXPECT_NEAR(t.logZhat, log_norm_cdf(a), 1e-7);
    EXPECT_NEAR(t.mean, cav.mean + s * lam, 1e-7);
    EXPECT_NEAR(t.var, cav.var * (1.0 - lam * (lam + a)), 1e-7);
  }
}

TEST(TruncatedT, Examples) {
  const Tilt1D centred = tilted_truncated_t({0.0, 1.0}, 4.0, 1.0, 0.8);
  EXPECT_GT(centred.mean, 0.0);
  const Tilt1D narrow = tilted_truncated_t({5.0, 0.01}, 4.0, 1.0, 0.8);
  EXPECT_NEAR(narrow.mean, 5.0, 0.25);
  EXPECT_LT(std::abs(narrow.var / 0.01 - 1.0), 0.05);
  EXPECT_THROW(tilted_truncated_t({0.0, 0.0}, 4.0, 1.0, 0.8), CavityCollapse);
}

TEST(TruncatedT, MatchesSimpsonGrid) {
  for (const Gaussian1D cav : {Gaussian1D{0.3, 0.5}, Gaussian1D{-1.0, 2.0}, Gaussian1D{2.0, 0.1}}) {
    const Tilt1D t = tilted_truncated_t(cav, 4.0, 1.0, 0.8);
    const oracle::GridMoments ref = oracle::truncated_t_grid(cav, 4.0, 1.0, 0.8, 4000);
    EXPECT_NEAR(t.logZhat, ref.logZ, 1e-8);
    EXPECT_NEAR(t.mean, ref.mean, 1e-8);
    EXPECT_NEAR(t.var, ref.var, 1e-8);
  }
}

TEST(HalfStudentT, IntegratesToOne) {
  auto f = [](double v) { return std::exp(log_half_student_t(v, 4.0, 1.5)); };
  const double z = boost::math::quadrature::gauss_kronrod<double, 61>::integrate(
      f, 0.0, std::numeric_limits<double>::infinity(), 15, 1e-13);
  EXPECT_NEAR(z, 1.0, 1e-10);
}

TEST(Groups, DefaultLayouts) {
  const std::vector<int> shared = default_groups(Grouping::Shared, 2, 3);
  EXPECT_EQ(shared, (std::vector<int>{1, 1, 0, 1, 1, 0}));
  const std::vector<int> ard = default_groups(Grouping::Ard, 2, 3);
  EXPECT_EQ(ard, (std::vector<int>{1, 2, 0, 1, 2, 0}));
  PriorConfig cfg;
  cfg.groupIndex = ard;
  EXPECT_EQ(cfg.num_groups(), 2);
}

TEST(MomentResidual, Examples) {
  EXPECT_DOUBLE_EQ(moment_residual({0.3, 2.0}, {0.3, 2.0}), 0.0);
  EXPECT_NEAR(moment_residual({1.0, 4.0}, {0.0, 4.0}), 0.5, 1e-15);
  EXPECT_NEAR(moment_residual({0.0, 1.0}, {0.0, std::exp(1.0)}), 1.0, 1e-15);
}

TEST(AssemblePhi, PriorOnlyAndSiteSum) {
  PriorConfig cfg;
  cfg.groupIndex = {1, 1, 0};
  WeightPriorSites sites;
  sites.w.assign(3, {});
  sites.phi.assign(3, {});
  const Gaussian1D p0 = assemble_phi(cfg, sites, 1);
  EXPECT_NEAR(p0.mean, cfg.muPhi0, 1e-14);
  EXPECT_NEAR(p0.var, cfg.sigmaPhi0Sq, 1e-14);
  sites.phi[0] = {0.5, 0.1};
  sites.phi[1] = {0.5, -0.3};
  sites.phi[2] = {100.0, 100.0};
  const Gaussian1D p = assemble_phi(cfg, sites, 1);
  const double tau = 1.0 / cfg.sigmaPhi0Sq + 1.0;
  EXPECT_NEAR(p.var, 1.0 / tau, 1e-14);
  EXPECT_NEAR(p.mean, (cfg.muPhi0 / cfg.sigmaPhi0Sq - 0.2) / tau, 1e-14);
}

TEST(PriorSweepV, SingleFactorConvergesToExactMoments) {
  PriorConfig cfg;
  cfg.etaPrior = 1.0;
  GaussianDense qv(VectorXd::Zero(2), MatrixXd::Identity(2, 2));
  OutputPriorSites sites;
  sites.v.assign(2, {});
  PriorSweepOptions opt;
  opt.delta = 1.0;
  opt.tol = 1e-10;
  opt.maxIters = 50;
  const PriorSweepStats stats = prior_sweep_v(qv, sites, cfg, opt);
  EXPECT_LT(stats.lastResidual, 1e-10);
  const oracle::GridMoments ref = oracle::truncated_t_grid({0.0, 1.0}, cfg.nuV, cfg.sigmaV0Sq, 1.0, 4000);
  EXPECT_NEAR(qv.mean()(0), ref.mean, 1e-8);
  EXPECT_NEAR(qv.cov()(0, 0), ref.var, 1e-8);
  // the bias coordinate is never touched
  EXPECT_DOUBLE_EQ(qv.mean()(1), 0.0);
  EXPECT_DOUBLE_EQ(qv.cov()(1, 1), 1.0);
}

TEST(PriorSweepW, NoScaleGroupsLeavesWeightsUnchanged) {
  const int K = 1, d = 2, n = 5;
  MatrixXd X(n, d);
  X.col(0) = VectorXd::LinSpaced(n, -1.0, 1.0);
  X.col(1).setOnes();
  LikelihoodSites lik = LikelihoodSites::zeros(n, K);
  lik.tauw.setConstant(0.5);
  PriorConfig cfg;
  cfg.groupIndex = {0, 0};
  WeightPriorSites sites;
  sites.w.assign(2, {1.0, 0.0});
  sites.phi.assign(2, {});
  std::vector<GaussianDense> qw = assemble_qw(X, lik, sites, K);
  const MatrixXd before = qw[0].cov();
  std::vector<Gaussian1D> qphi;
  const PriorSweepStats stats = prior_sweep_w(qw, qphi, sites, cfg, X, lik, PriorSweepOptions{});
  EXPECT_EQ(stats.skips, 0);
  EXPECT_LT((qw[0].cov() - before).cwiseAbs().maxCoeff(), 1e-14);
}
