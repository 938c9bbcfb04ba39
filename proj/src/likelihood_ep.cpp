#include "nnep/likelihood_ep.hpp"

#include <cmath>

#include "nnep/activation.hpp"
#include "nnep/errors.hpp"
#include "nnep/special.hpp"

namespace nnep {

LikelihoodSites LikelihoodSites::zeros(Eigen::Index n, int K) {
  LikelihoodSites s;
  s.tauw = MatrixXd::Zero(n, K);
  s.nuw = MatrixXd::Zero(n, K);
  s.alpha = MatrixXd::Zero(n, K + 1);
  s.nuv = MatrixXd::Zero(n, K + 1);
  s.theta.assign(static_cast<size_t>(n), NaturalSite1D{});
  return s;
}

Gaussian1D cavity_scalar(Gaussian1D marg, NaturalSite1D site, double eta) {
  const double prec = 1.0 / marg.var - eta * site.tau;
  if (!(prec > 0.0) || !std::isfinite(prec)) throw CavityCollapse("scalar cavity has non-positive precision");
  const double var = 1.0 / prec;
  return {var * (marg.mean / marg.var - eta * site.nu), var};
}

VectorXd projected_variances(const MatrixXd& X, const MatrixXd& cov) {
  return (X * cov).cwiseProduct(X).rowwise().sum();
}

bool keeps_cavities(const VectorXd& oldVar, const VectorXd& newVar, const VectorXd& oldTau, const VectorXd& newTau,
                    double eta) {
  for (Eigen::Index j = 0; j < newVar.size(); ++j) {
    const bool before = oldVar(j) > 0.0 && 1.0 / oldVar(j) - eta * oldTau(j) > 0.0;
    const bool after = newVar(j) > 0.0 && 1.0 / newVar(j) - eta * newTau(j) > 0.0;
    if (before && !after) return false;
  }
  return true;
}

GaussianDense cavity_v(const GaussianDense& q, const VectorXd& alpha, const VectorXd& nuv, double eta) {
  const MatrixXd& S = q.cov();
  const VectorXd sa = S * alpha;
  const double s = 1.0 / eta - alpha.dot(sa);
  if (!(s > 0.0)) throw CavityCollapse("output-weight cavity is not positive definite");
  const VectorXd a = q.mean() - eta * (S * nuv);
  VectorXd mean = a + sa * (alpha.dot(a) / s);
  MatrixXd cov = S + sa * sa.transpose() / s;
  symmetrize(cov);
  return GaussianDense(std::move(mean), std::move(cov));
}

void activation_vectors(const std::vector<Gaussian1D>& hCav, int K, int nodes, VectorXd& mG, VectorXd& vG) {
  mG.resize(K + 1);
  vG.resize(K + 1);
  for (int k = 0; k < K; ++k) {
    const ActivationMoments am = activation_moments(hCav[k].mean, hCav[k].var, K, nodes);
    mG(k) = am.meanG;
    vG(k) = am.varG;
  }
  mG(K) = 1.0;
  vG(K) = 0.0;
}

FMoments predictive_f_moments(const GaussianDense& vCav, const VectorXd& mG, const VectorXd& vG) {
  FMoments f;
  const VectorXd& m = vCav.mean();
  const MatrixXd& S = vCav.cov();
  f.cross = S * mG;
  f.mF = m.dot(mG);
  f.vF = mG.dot(f.cross) + vG.dot((S.diagonal().array() + m.array().square()).matrix());
  return f;
}

double log_fraction_normalizer(double theta, double eta) {
  return 0.5 * (1.0 - eta) * (kLog2Pi + theta) - 0.5 * std::log(eta);
}

ThetaTilt tilted_theta(double mF, double vF, double y, Gaussian1D thetaCav, double eta,
                       const QuadratureRule& grid, double floor) {
  const TiltedSample t = tilt(
      [&](double th) { return log_fraction_normalizer(th, eta) + log_normal_pdf(y, mF, vF + std::exp(th) / eta); },
      thetaCav.mean, thetaCav.var, grid, floor);
  ThetaTilt out;
  out.logZhat = t.log_z;
  out.mean = t.mean();
  out.var = std::max(t.var(), kVarianceFloor);
  const double e1 = t.expect([&](double th, size_t) { return 1.0 / (vF + std::exp(th) / eta); });
  const double e2 = t.expect([&](double th, size_t) {
    const double p = 1.0 / (vF + std::exp(th) / eta);
    return (p - e1) * (p - e1);
  });
  const double r = y - mF;
  out.bHat = e1;
  out.aHat = e1 - r * r * e2;
  return out;
}

ThetaTilt tilted_theta_fixed(double mF, double vF, double y, double theta, double eta) {
  const double vy = vF + std::exp(theta) / eta;
  ThetaTilt out;
  out.logZhat = log_fraction_normalizer(theta, eta) + log_normal_pdf(y, mF, vy);
  out.mean = theta;
  out.var = 0.0;
  out.aHat = out.bHat = 1.0 / vy;
  return out;
}

void tilted_v(const GaussianDense& vCav, const FMoments& f, double y, double aHat, double bHat, VectorXd& vMean,
              MatrixXd& vCov) {
  vMean = vCav.mean() + f.cross * (bHat * (y - f.mF));
  vCov = vCav.cov() - aHat * f.cross * f.cross.transpose();
  symmetrize(vCov);
}

Gaussian1D tilted_h(int k, Gaussian1D hCav, const GaussianDense& vCav, const VectorXd& mG, const VectorXd& vG,
                    const FMoments& f, double y, double thetaPlugin, double eta, int K, const QuadratureRule& grid,
                    double floor) {
  const double mk = vCav.mean()(k);
  const double skk = vCav.cov()(k, k);
  const double ck = f.cross(k);
  const double base = f.vF - vG(k) * (skk + mk * mk);
  const double noise = std::exp(thetaPlugin) / eta;
  const double scale = 1.0 / std::sqrt(static_cast<double>(K));
  const TiltedSample t = tilt(
      [&](double h) {
        const double d = scale * std::erf(h / kSqrt2) - mG(k);
        const double m = f.mF + mk * d;
        const double v = std::max(base + 2.0 * d * ck + d * d * skk, 0.0) + noise;
        return log_normal_pdf(y, m, v);
      },
      hCav.mean, hCav.var, grid, floor);
  return {t.mean(), std::max(t.var(), kVarianceFloor)};
}

TiltedSummary tilted_moments(const CavityBundle& cav, double y, int K, const TiltOptions& opt) {
  TiltedSummary s;
  activation_vectors(cav.h, K, opt.activationNodes, s.mG, s.vG);
  FMoments f = predictive_f_moments(cav.v, s.mG, s.vG);
  s.mF = f.mF;
  s.vF = f.vF;
  ThetaTilt th = opt.fixedTheta ? tilted_theta_fixed(f.mF, f.vF, y, *opt.fixedTheta, opt.eta)
                                : tilted_theta(f.mF, f.vF, y, cav.theta, opt.eta, opt.grid, opt.massFloor);
  s.logZhat = th.logZhat;
  s.thetaMean = th.mean;
  s.thetaVar = th.var;
  s.aHat = th.aHat;
  s.bHat = th.bHat;
  tilted_v(cav.v, f, y, th.aHat, th.bHat, s.vMean, s.vCov);
  s.hMean.resize(K);
  s.hVar.resize(K);
  for (int k = 0; k < K; ++k) {
    const Gaussian1D h = tilted_h(k, cav.h[k], cav.v, s.mG, s.vG, f, y, th.mean, opt.eta, K, opt.grid, opt.massFloor);
    s.hMean[k] = h.mean;
    s.hVar[k] = h.var;
  }
  s.cross = std::move(f.cross);
  return s;
}

NaturalSite1D site_update_scalar(Gaussian1D tilted, Gaussian1D marg, NaturalSite1D site, double eta, double delta) {
  const double tv = std::max(tilted.var, kVarianceFloor);
  site.tau += delta / eta * (1.0 / tv - 1.0 / marg.var);
  site.nu += delta / eta * (tilted.mean / tv - marg.mean / marg.var);
  return site;
}

VSite site_v_target(const GaussianDense& vCav, const VectorXd& mG, double aHat, double bHat, double residual,
                    double eta) {
  const double a = std::max(aHat, 0.0);
  const double q = mG.dot(vCav.cov() * mG);
  const double denom = (1.0 - a * q) * eta;
  if (!(denom > 0.0)) throw SkippedUpdate("output-weight site precision would be negative");
  VSite s;
  s.alpha = mG * std::sqrt(a / denom);
  s.nuv = mG * ((a * mG.dot(vCav.mean()) + bHat * residual) / denom);
  return s;
}

VSite eigen_damp(const GaussianDense& vCav, const VSite& oldSite, const VSite& newSite, double eta, double delta) {
  if (delta >= 1.0) return newSite;
  const Eigen::Index p = newSite.alpha.size();
  MatrixXd A(p, 2);
  A.col(0) = std::sqrt(1.0 - delta) * oldSite.alpha;
  A.col(1) = std::sqrt(delta) * newSite.alpha;
  const VectorXd b = (1.0 - delta) * oldSite.nuv + delta * newSite.nuv;

  const Eigen::Matrix2d gram = A.transpose() * A;
  Eigen::SelfAdjointEigenSolver<Eigen::Matrix2d> es(gram);
  Eigen::Vector2d v1 = es.eigenvectors().col(1);
  if (v1(0) < 0.0 || (v1(0) == 0.0 && v1(1) < 0.0)) v1 = -v1;

  VSite out;
  out.alpha = A * v1;
  const MatrixXd& S = vCav.cov();
  Eigen::Matrix2d inner = A.transpose() * S * A;
  inner.diagonal().array() += 1.0 / eta;
  const Eigen::Vector2d rhs = A.transpose() * (vCav.mean() + eta * (S * b));
  const Eigen::Vector2d sol = inner.ldlt().solve(rhs);
  const Eigen::Matrix2d proj = v1 * v1.transpose() - Eigen::Matrix2d::Identity();
  out.nuv = b + A * (proj * sol) / eta;
  return out;
}

VSite site_update_v(const GaussianDense& vCav, const VectorXd& mG, double aHat, double bHat, double y, double mF,
                    const VSite& oldSite, double eta, double delta) {
  const VSite target = site_v_target(vCav, mG, aHat, bHat, y - mF, eta);
  return eigen_damp(vCav, oldSite, target, eta, delta);
}

}  // namespace nnep
