#include <cmath>

#include "nnep/engine.hpp"
#include "nnep/errors.hpp"

namespace nnep {

namespace {

Gaussian1D project(const GaussianDense& q, const Eigen::Ref<const VectorXd>& x) {
  return {x.dot(q.mean()), x.dot(q.cov() * x)};
}

}  // namespace

double marginal_likelihood(const MatrixXd& X, const VectorXd& y, const AllSites& sites, const FitConfig& cfg) {
  const PosteriorState q = assemble_state(X, sites, cfg);
  const PriorConfig pc = resolved_priors(cfg, X.cols());
  const Eigen::Index d = X.cols();
  const int K = cfg.K;
  const std::optional<double> thetaFixed = fixed_theta(cfg, sites);
  const QuadratureRule grid = uniform_grid_rule(cfg.quad.tiltNodes, cfg.quad.tiltHalfWidth);
  const QuadratureRule phiGrid = uniform_grid_rule(cfg.quad.phiNodes, cfg.quad.phiHalfWidth);

  // log partitions of the approximate posterior blocks
  double total = log_partition(q.qv.mean(), q.qv.cov());
  for (const GaussianDense& w : q.qw) total += log_partition(w.mean(), w.cov());
  if (!thetaFixed) total += log_partition(q.qtheta) - log_partition(Gaussian1D{cfg.muTheta0, cfg.sigmaTheta0Sq});

  // input-weight priors
  const double etaP = pc.etaPrior;
  for (size_t j = 0; j < sites.wprior.w.size(); ++j) {
    const int l = pc.groupIndex[j];
    const NaturalSite1D s = sites.wprior.w[j];
    if (!sites.wPriorActive || l <= 0) {
      total -= log_partition(to_moments(s));
      continue;
    }
    const int k = static_cast<int>(j / d);
    const Eigen::Index c = static_cast<Eigen::Index>(j % d);
    const Gaussian1D wMarg = q.qw[k].marginal(c);
    const Gaussian1D phiMarg = q.qphi[l - 1];
    const Gaussian1D wCav = cavity_scalar(wMarg, s, etaP);
    const Gaussian1D phiCav = cavity_scalar(phiMarg, sites.wprior.phi[j], etaP);
    const WPhiTilt t = tilted_w_phi(wCav, phiCav, pc.family, etaP, phiGrid, cfg.quad.massFloor);
    total += (t.logZhat + log_partition(wCav) - log_partition(wMarg) + log_partition(phiCav) -
              log_partition(phiMarg)) /
             etaP;
  }
  if (sites.wPriorActive)
    for (const Gaussian1D& phi : q.qphi)
      total += log_partition(phi) - log_partition(Gaussian1D{pc.muPhi0, pc.sigmaPhi0Sq});

  // output-weight priors; the bias prior is always a plain Gaussian
  for (int k = 0; k <= K; ++k) {
    const NaturalSite1D s = sites.vprior.v[k];
    if (!sites.vPriorActive || k == K) {
      total -= log_partition(to_moments(s));
      continue;
    }
    const Gaussian1D marg = q.qv.marginal(k);
    const Gaussian1D cav = cavity_scalar(marg, s, etaP);
    const Tilt1D t = tilted_truncated_t(cav, pc.nuV, pc.sigmaV0Sq, etaP, 20, 20, cfg.quad.massFloor);
    total += (t.logZhat + log_partition(cav) - log_partition(marg)) / etaP;
  }

  // likelihood sites
  const double eta = cfg.eta;
  const double psiV = log_partition(q.qv.mean(), q.qv.cov());
  for (Eigen::Index i = 0; i < X.rows(); ++i) {
    double term = 0.0;
    std::vector<Gaussian1D> hCav(K);
    for (int k = 0; k < K; ++k) {
      const Gaussian1D marg = project(q.qw[k], X.row(i).transpose());
      hCav[k] = cavity_scalar(marg, {sites.lik.tauw(i, k), sites.lik.nuw(i, k)}, eta);
      term += log_partition(hCav[k]) - log_partition(marg);
    }
    const GaussianDense vCav =
        cavity_v(q.qv, sites.lik.alpha.row(i).transpose(), sites.lik.nuv.row(i).transpose(), eta);
    term += log_partition(vCav.mean(), vCav.cov()) - psiV;
    VectorXd mG, vG;
    activation_vectors(hCav, K, cfg.quad.activationNodes, mG, vG);
    const FMoments f = predictive_f_moments(vCav, mG, vG);
    if (thetaFixed) {
      term += tilted_theta_fixed(f.mF, f.vF, y(i), *thetaFixed, eta).logZhat;
    } else {
      const Gaussian1D thCav = cavity_scalar(q.qtheta, sites.lik.theta[i], eta);
      term += tilted_theta(f.mF, f.vF, y(i), thCav, eta, grid, cfg.quad.massFloor).logZhat;
      term += log_partition(thCav) - log_partition(q.qtheta);
    }
    total += term / eta;
  }
  return total;
}

}  // namespace nnep
