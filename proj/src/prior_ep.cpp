#include "nnep/prior_ep.hpp"

#include <algorithm>
#include <cmath>

#include "nnep/errors.hpp"
#include "nnep/special.hpp"

namespace nnep {

int PriorConfig::num_groups() const {
  int L = 0;
  for (int l : groupIndex) L = std::max(L, l);
  return L;
}

std::vector<int> default_groups(Grouping grouping, int K, int d) {
  std::vector<int> groups(static_cast<size_t>(K) * d, 0);
  for (int k = 0; k < K; ++k)
    for (int c = 0; c + 1 < d; ++c) groups[static_cast<size_t>(k) * d + c] = grouping == Grouping::Shared ? 1 : c + 1;
  return groups;
}

namespace {

ConditionalMoments laplace_conditionals(Gaussian1D wCav, double phi, double eta) {
  const double m = wCav.mean;
  const double v = wCav.var;
  const double s = std::sqrt(v);
  const double lambda = std::exp(0.5 * phi) / kSqrt2;
  const double b = eta / lambda;

  // the tilted density splits into two truncated normals around zero
  const double muPos = m - b * v;
  const double muNeg = m + b * v;
  const double zPos = muPos / s;
  const double zNeg = -muNeg / s;
  const double lPos = -b * m + 0.5 * b * b * v + log_norm_cdf(zPos);
  const double lNeg = b * m + 0.5 * b * b * v + log_norm_cdf(zNeg);
  const double lTot = log_add(lPos, lNeg);
  const double pPos = std::exp(lPos - lTot);
  const double pNeg = std::exp(lNeg - lTot);

  const double rPos = inv_mills(zPos);
  const double rNeg = inv_mills(zNeg);
  const double e1Pos = muPos + s * rPos;
  const double e2Pos = v + muPos * muPos + muPos * s * rPos;
  const double e1Neg = muNeg - s * rNeg;
  const double e2Neg = v + muNeg * muNeg - muNeg * s * rNeg;

  ConditionalMoments out;
  out.logZ = -eta * std::log(2.0 * lambda) + lTot;
  out.Ew = pPos * e1Pos + pNeg * e1Neg;
  out.Ew2 = pPos * e2Pos + pNeg * e2Neg;
  return out;
}

ConditionalMoments gaussian_conditionals(Gaussian1D wCav, double phi, double eta) {
  const double pv = std::exp(phi) / eta;
  ConditionalMoments out;
  out.logZ = 0.5 * (1.0 - eta) * (kLog2Pi + phi) - 0.5 * std::log(eta) + log_normal_pdf(wCav.mean, 0.0, wCav.var + pv);
  const double prec = 1.0 / wCav.var + 1.0 / pv;
  const double var = 1.0 / prec;
  out.Ew = var * wCav.mean / wCav.var;
  out.Ew2 = var + out.Ew * out.Ew;
  return out;
}

}  // namespace

ConditionalMoments partial_Z_and_conditionals(PriorFamily family, Gaussian1D wCav, double phi, double eta) {
  if (!(wCav.var > 0.0)) throw CavityCollapse("weight cavity variance must be positive");
  return family == PriorFamily::Laplace ? laplace_conditionals(wCav, phi, eta) : gaussian_conditionals(wCav, phi, eta);
}

WPhiTilt tilted_w_phi(Gaussian1D wCav, Gaussian1D phiCav, PriorFamily family, double eta,
                      const QuadratureRule& phiGrid, double floor) {
  if (!(wCav.var > 0.0) || !(phiCav.var > 0.0)) throw CavityCollapse("prior cavity variance must be positive");
  const size_t n = phiGrid.nodes.size();
  const double sd = std::sqrt(phiCav.var);
  std::vector<double> phi(n), logw(n);
  std::vector<ConditionalMoments> cond(n);
  for (size_t j = 0; j < n; ++j) {
    phi[j] = phiCav.mean + sd * phiGrid.nodes[j];
    cond[j] = partial_Z_and_conditionals(family, wCav, phi[j], eta);
    logw[j] = std::log(phiGrid.weights[j]) + cond[j].logZ;
  }
  const double lz = logsumexp(logw);
  if (!(lz > std::log(floor)) || !std::isfinite(lz)) throw DegenerateMass("scale tilt mass below floor");
  double p1 = 0.0, w1 = 0.0, w2 = 0.0;
  std::vector<double> p(n);
  for (size_t j = 0; j < n; ++j) {
    p[j] = std::exp(logw[j] - lz);
    p1 += p[j] * phi[j];
    w1 += p[j] * cond[j].Ew;
    w2 += p[j] * cond[j].Ew2;
  }
  double p2 = 0.0;
  for (size_t j = 0; j < n; ++j) p2 += p[j] * (phi[j] - p1) * (phi[j] - p1);
  WPhiTilt out;
  out.logZhat = lz;
  out.phiMean = p1;
  out.phiVar = std::max(p2, kVarianceFloor);
  out.wMean = w1;
  out.wVar = std::max(w2 - w1 * w1, kVarianceFloor);
  return out;
}

WPhiTilt tilted_w_phi(Gaussian1D wCav, Gaussian1D phiCav, PriorFamily family, double eta) {
  static const QuadratureRule grid = uniform_grid_rule(300, 8.0);
  return tilted_w_phi(wCav, phiCav, family, eta, grid);
}

double log_half_student_t(double v, double nuV, double sigmaV0Sq) {
  const double c = std::lgamma(0.5 * (nuV + 1.0)) - std::lgamma(0.5 * nuV) - 0.5 * std::log(nuV * kPi * sigmaV0Sq);
  return std::log(2.0) + c - 0.5 * (nuV + 1.0) * std::log1p(v * v / (nuV * sigmaV0Sq));
}

Tilt1D tilted_truncated_t(Gaussian1D vCav, double nuV, double sigmaV0Sq, double eta, int panels, int nodesPerPanel,
                          double floor) {
  if (!(vCav.var > 0.0)) throw CavityCollapse("output-weight cavity variance must be positive");
  const double m = vCav.mean;
  const double s = std::sqrt(vCav.var);
  double lo = std::max(0.0, m - 10.0 * s);
  double hi = m + 10.0 * s;
  if (m < 0.0) {
    lo = 0.0;
    hi = std::min(10.0 * s, 40.0 * vCav.var / -m);
  }
  const GaussLegendre& gl = gauss_legendre(nodesPerPanel);
  const double width = (hi - lo) / panels;
  std::vector<double> x, logw;
  x.reserve(static_cast<size_t>(panels) * nodesPerPanel);
  logw.reserve(x.capacity());
  for (int p = 0; p < panels; ++p) {
    const double a = lo + p * width;
    for (size_t j = 0; j < gl.nodes.size(); ++j) {
      const double v = a + 0.5 * width * (gl.nodes[j] + 1.0);
      x.push_back(v);
      logw.push_back(std::log(0.5 * width * gl.weights[j]) + log_normal_pdf(v, m, vCav.var) +
                     eta * log_half_student_t(v, nuV, sigmaV0Sq));
    }
  }
  const double lz = logsumexp(logw);
  if (!(lz > std::log(floor)) || !std::isfinite(lz)) throw DegenerateMass("truncated tilt mass below floor");
  double e1 = 0.0;
  std::vector<double> p(x.size());
  for (size_t j = 0; j < x.size(); ++j) {
    p[j] = std::exp(logw[j] - lz);
    e1 += p[j] * x[j];
  }
  double e2 = 0.0;
  for (size_t j = 0; j < x.size(); ++j) e2 += p[j] * (x[j] - e1) * (x[j] - e1);
  return {lz, e1, std::max(e2, kVarianceFloor)};
}

double moment_residual(Gaussian1D tilted, Gaussian1D marg) {
  return std::max(std::abs(tilted.mean - marg.mean) / std::sqrt(marg.var), std::abs(std::log(tilted.var / marg.var)));
}

Gaussian1D assemble_phi(const PriorConfig& cfg, const WeightPriorSites& sites, int group) {
  double tau = 1.0 / cfg.sigmaPhi0Sq;
  double nu = cfg.muPhi0 / cfg.sigmaPhi0Sq;
  for (size_t j = 0; j < cfg.groupIndex.size(); ++j) {
    if (cfg.groupIndex[j] != group) continue;
    tau += sites.phi[j].tau;
    nu += sites.phi[j].nu;
  }
  if (!(tau > 0.0)) throw NotPositiveDefinite("scale posterior has non-positive precision");
  return {nu / tau, 1.0 / tau};
}

std::vector<Gaussian1D> assemble_phis(const PriorConfig& cfg, const WeightPriorSites& sites) {
  std::vector<Gaussian1D> out;
  for (int l = 1; l <= cfg.num_groups(); ++l) out.push_back(assemble_phi(cfg, sites, l));
  return out;
}

std::vector<GaussianDense> assemble_qw(const MatrixXd& X, const LikelihoodSites& lik, const WeightPriorSites& prior,
                                       int K) {
  const Eigen::Index d = X.cols();
  std::vector<GaussianDense> qw;
  qw.reserve(K);
  VectorXd tau(d), nu(d);
  for (int k = 0; k < K; ++k) {
    for (Eigen::Index c = 0; c < d; ++c) {
      tau(c) = prior.w[k * d + c].tau;
      nu(c) = prior.w[k * d + c].nu;
    }
    qw.push_back(assemble_posterior_w(X, lik.tauw.col(k), lik.nuw.col(k), tau, nu));
  }
  return qw;
}

PriorSweepStats prior_sweep_w(std::vector<GaussianDense>& qw, std::vector<Gaussian1D>& qphi, WeightPriorSites& sites,
                              const PriorConfig& cfg, const MatrixXd& X, const LikelihoodSites& lik,
                              const PriorSweepOptions& opt) {
  const int K = static_cast<int>(qw.size());
  const Eigen::Index d = X.cols();
  const double eta = cfg.etaPrior;
  PriorSweepStats stats;
  for (int it = 0; it < opt.maxIters; ++it) {
    double maxRes = 0.0;
    for (size_t j = 0; j < cfg.groupIndex.size(); ++j) {
      const int l = cfg.groupIndex[j];
      if (l <= 0) continue;
      const int k = static_cast<int>(j / d);
      const Eigen::Index c = static_cast<Eigen::Index>(j % d);
      const Gaussian1D wMarg = qw[k].marginal(c);
      const Gaussian1D phiMarg = qphi[l - 1];
      try {
        const Gaussian1D wCav = cavity_scalar(wMarg, sites.w[j], eta);
        const Gaussian1D phiCav = cavity_scalar(phiMarg, sites.phi[j], eta);
        const WPhiTilt t = tilted_w_phi(wCav, phiCav, cfg.family, eta, opt.phiGrid, opt.massFloor);
        const Gaussian1D wTilt{t.wMean, t.wVar};
        const Gaussian1D phiTilt{t.phiMean, t.phiVar};
        maxRes = std::max({maxRes, moment_residual(wTilt, wMarg), moment_residual(phiTilt, phiMarg)});

        const VectorXd tauCol = lik.tauw.col(k);
        const VectorXd oldVar = projected_variances(X, qw[k].cov());
        VectorXd e = VectorXd::Zero(d);
        e(c) = 1.0;
        double delta = opt.delta;
        bool accepted = false;
        // halve the step until no likelihood cavity of this unit collapses
        for (int attempt = 0; attempt < 4 && !accepted; ++attempt, delta *= 0.5) {
          const NaturalSite1D wNew = site_update_scalar(wTilt, wMarg, sites.w[j], eta, delta);
          const NaturalSite1D phiNew = site_update_scalar(phiTilt, phiMarg, sites.phi[j], eta, delta);
          const double phiPrec = 1.0 / phiMarg.var + phiNew.tau - sites.phi[j].tau;
          if (!(phiPrec > 0.0)) continue;
          GaussianDense updated;
          try {
            updated = rank_one_update(qw[k], e, wNew.tau - sites.w[j].tau, wNew.nu - sites.w[j].nu);
          } catch (const DowndateViolation&) {
            continue;
          }
          if (!keeps_cavities(oldVar, projected_variances(X, updated.cov()), tauCol, tauCol, opt.likelihoodEta))
            continue;
          qw[k] = std::move(updated);
          const double phiShift = phiMarg.mean / phiMarg.var + phiNew.nu - sites.phi[j].nu;
          qphi[l - 1] = {phiShift / phiPrec, 1.0 / phiPrec};
          sites.w[j] = wNew;
          sites.phi[j] = phiNew;
          accepted = true;
        }
        if (!accepted) ++stats.skips;
      } catch (const CavityCollapse&) {
        ++stats.skips;
      } catch (const DegenerateMass&) {
        ++stats.skips;
      } catch (const DowndateViolation&) {
        ++stats.skips;
      }
    }
    qphi = assemble_phis(cfg, sites);
    qw = assemble_qw(X, lik, sites, K);
    if (it == 0) stats.firstResidual = maxRes;
    stats.lastResidual = maxRes;
    stats.iterations = it + 1;
    if (maxRes < opt.tol) break;
  }
  return stats;
}

PriorSweepStats prior_sweep_v(GaussianDense& qv, OutputPriorSites& sites, const PriorConfig& cfg,
                              const PriorSweepOptions& opt) {
  const Eigen::Index p = qv.dim();
  const double eta = cfg.etaPrior;
  PriorSweepStats stats;
  for (int it = 0; it < opt.maxIters; ++it) {
    double maxRes = 0.0;
    for (Eigen::Index k = 0; k + 1 < p; ++k) {
      const Gaussian1D marg = qv.marginal(k);
      try {
        const Gaussian1D cav = cavity_scalar(marg, sites.v[k], eta);
        const Tilt1D t = tilted_truncated_t(cav, cfg.nuV, cfg.sigmaV0Sq, eta, 20, 20, opt.massFloor);
        const Gaussian1D tilted{t.mean, t.var};
        maxRes = std::max(maxRes, moment_residual(tilted, marg));
        const NaturalSite1D updated = site_update_scalar(tilted, marg, sites.v[k], eta, opt.delta);
        VectorXd e = VectorXd::Zero(p);
        e(k) = 1.0;
        qv = rank_one_update(qv, e, updated.tau - sites.v[k].tau, updated.nu - sites.v[k].nu);
        sites.v[k] = updated;
      } catch (const CavityCollapse&) {
        ++stats.skips;
      } catch (const DegenerateMass&) {
        ++stats.skips;
      } catch (const DowndateViolation&) {
        ++stats.skips;
      }
    }
    if (it == 0) stats.firstResidual = maxRes;
    stats.lastResidual = maxRes;
    stats.iterations = it + 1;
    if (maxRes < opt.tol) break;
  }
  qv.factorize();
  return stats;
}

}  // namespace nnep
