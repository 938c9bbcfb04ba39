#include "nnep/numerics.hpp"

#include <cmath>
#include <map>
#include <mutex>

#include "nnep/errors.hpp"
#include "nnep/special.hpp"

namespace nnep {

GaussianDense::GaussianDense(VectorXd mean, MatrixXd cov) : mean_(std::move(mean)), cov_(std::move(cov)) {
  if (cov_.rows() != mean_.size() || cov_.cols() != mean_.size())
    throw DimensionMismatch("GaussianDense: covariance shape does not match mean");
}

void GaussianDense::factorize() {
  Eigen::LLT<MatrixXd> llt(cov_);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("covariance is not positive definite");
  chol_ = MatrixXd(llt.matrixL());
}

const MatrixXd& GaussianDense::chol() const {
  if (!chol_) throw std::logic_error("GaussianDense::chol called before factorize");
  return *chol_;
}

void symmetrize(MatrixXd& m) { m = 0.5 * (m + m.transpose()).eval(); }

namespace {

GaussianDense from_precision(const MatrixXd& precision, const VectorXd& shift) {
  Eigen::LLT<MatrixXd> llt(precision);
  if (llt.info() != Eigen::Success || !precision.allFinite())
    throw NotPositiveDefinite("posterior precision is not positive definite");
  MatrixXd cov = llt.solve(MatrixXd::Identity(precision.rows(), precision.cols()));
  symmetrize(cov);
  VectorXd mean = llt.solve(shift);
  GaussianDense g(std::move(mean), std::move(cov));
  g.factorize();
  return g;
}

}  // namespace

GaussianDense assemble_posterior_w(const MatrixXd& X, const VectorXd& tauw, const VectorXd& nuw,
                                   const VectorXd& priorTau, const VectorXd& priorNu) {
  if (X.rows() != tauw.size() || X.rows() != nuw.size() || X.cols() != priorTau.size() ||
      X.cols() != priorNu.size())
    throw DimensionMismatch("assemble_posterior_w: inconsistent dimensions");
  MatrixXd precision = X.transpose() * tauw.asDiagonal() * X;
  precision.diagonal() += priorTau;
  VectorXd shift = X.transpose() * nuw + priorNu;
  return from_precision(precision, shift);
}

GaussianDense assemble_posterior_v(const MatrixXd& alphas, const MatrixXd& nuvs,
                                   const VectorXd& priorTau, const VectorXd& priorNu) {
  const Eigen::Index p = priorTau.size();
  if (priorNu.size() != p || (alphas.rows() > 0 && alphas.cols() != p) || alphas.rows() != nuvs.rows() ||
      (nuvs.rows() > 0 && nuvs.cols() != p))
    throw DimensionMismatch("assemble_posterior_v: inconsistent dimensions");
  MatrixXd precision = MatrixXd::Zero(p, p);
  if (alphas.rows() > 0) precision.noalias() = alphas.transpose() * alphas;
  precision.diagonal() += priorTau;
  VectorXd shift = priorNu;
  if (nuvs.rows() > 0) shift += nuvs.colwise().sum().transpose();
  return from_precision(precision, shift);
}

GaussianDense rank_one_update(const GaussianDense& g, const VectorXd& x, double dtau, double dnu) {
  const VectorXd sx = g.cov() * x;
  const double q = x.dot(sx);
  const double denom = 1.0 + dtau * q;
  if (!(denom > 0.0)) throw DowndateViolation("rank-one update would make the precision indefinite");
  MatrixXd cov = g.cov() - (dtau / denom) * sx * sx.transpose();
  symmetrize(cov);
  VectorXd mean = g.mean() + sx * ((dnu - dtau * x.dot(g.mean())) / denom);
  return GaussianDense(std::move(mean), std::move(cov));
}

double log_partition(const VectorXd& mean, const MatrixXd& cov) {
  Eigen::LLT<MatrixXd> llt(cov);
  if (llt.info() != Eigen::Success) throw NotPositiveDefinite("log_partition: covariance not positive definite");
  const MatrixXd L = llt.matrixL();
  const VectorXd z = L.triangularView<Eigen::Lower>().solve(mean);
  return 0.5 * z.squaredNorm() + L.diagonal().array().log().sum() + 0.5 * mean.size() * kLog2Pi;
}

double log_partition(Gaussian1D g) {
  if (!(g.var > 0.0)) throw NotPositiveDefinite("log_partition: variance not positive");
  return 0.5 * g.mean * g.mean / g.var + 0.5 * std::log(g.var) + 0.5 * kLog2Pi;
}

QuadratureRule gauss_hermite_rule(int n) {
  if (n < 1) throw std::invalid_argument("gauss_hermite_rule: n must be positive");
  // Golub-Welsch for the probabilists' Hermite polynomials
  MatrixXd J = MatrixXd::Zero(n, n);
  for (int k = 1; k < n; ++k) J(k, k - 1) = J(k - 1, k) = std::sqrt(static_cast<double>(k));
  Eigen::SelfAdjointEigenSolver<MatrixXd> es(J);
  QuadratureRule rule;
  rule.kind = QuadratureKind::GaussHermite;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  double total = 0.0;
  for (int k = 0; k < n; ++k) {
    rule.nodes[k] = es.eigenvalues()(k);
    rule.weights[k] = es.eigenvectors()(0, k) * es.eigenvectors()(0, k);
    total += rule.weights[k];
  }
  // symmetric by construction; enforce it to kill eigensolver noise
  for (int k = 0; k < n / 2; ++k) {
    const double x = 0.5 * (rule.nodes[n - 1 - k] - rule.nodes[k]);
    const double w = 0.5 * (rule.weights[k] + rule.weights[n - 1 - k]);
    rule.nodes[k] = -x;
    rule.nodes[n - 1 - k] = x;
    rule.weights[k] = rule.weights[n - 1 - k] = w;
  }
  if (n % 2 == 1) rule.nodes[n / 2] = 0.0;
  total = 0.0;
  for (double w : rule.weights) total += w;
  for (double& w : rule.weights) w /= total;
  return rule;
}

QuadratureRule uniform_grid_rule(int n, double halfWidth) {
  if (n < 2 || !(halfWidth > 0.0)) throw std::invalid_argument("uniform_grid_rule: bad arguments");
  QuadratureRule rule;
  rule.kind = QuadratureKind::UniformGrid;
  rule.nodes.resize(n);
  rule.weights.resize(n);
  const double step = 2.0 * halfWidth / (n - 1);
  double total = 0.0;
  for (int j = 0; j < n; ++j) {
    const double z = -halfWidth + j * step;
    rule.nodes[j] = z;
    const double end = (j == 0 || j == n - 1) ? 0.5 : 1.0;
    rule.weights[j] = end * std::exp(-0.5 * z * z);
    total += rule.weights[j];
  }
  for (double& w : rule.weights) w /= total;
  return rule;
}

namespace {

GaussLegendre compute_gauss_legendre(int n) {
  GaussLegendre gl;
  gl.nodes.resize(n);
  gl.weights.resize(n);
  for (int i = 0; i < (n + 1) / 2; ++i) {
    double x = std::cos(kPi * (i + 0.75) / (n + 0.5));
    double dp = 0.0;
    for (int it = 0; it < 100; ++it) {
      double p0 = 1.0, p1 = x;
      for (int k = 2; k <= n; ++k) {
        const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
        p0 = p1;
        p1 = p2;
      }
      if (n == 1) p0 = 1.0;
      dp = n * (x * p1 - p0) / (x * x - 1.0);
      const double dx = p1 / dp;
      x -= dx;
      if (std::abs(dx) < 1e-16) break;
    }
    double p0 = 1.0, p1 = x;
    for (int k = 2; k <= n; ++k) {
      const double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
      p0 = p1;
      p1 = p2;
    }
    dp = n * (x * p1 - p0) / (x * x - 1.0);
    const double w = 2.0 / ((1.0 - x * x) * dp * dp);
    gl.nodes[i] = -x;
    gl.nodes[n - 1 - i] = x;
    gl.weights[i] = gl.weights[n - 1 - i] = w;
  }
  if (n % 2 == 1) gl.nodes[n / 2] = 0.0;
  return gl;
}

}  // namespace

const GaussLegendre& gauss_legendre(int n) {
  if (n < 1) throw std::invalid_argument("gauss_legendre: n must be positive");
  static std::mutex mu;
  static std::map<int, GaussLegendre> cache;
  std::lock_guard<std::mutex> lock(mu);
  auto it = cache.find(n);
  if (it == cache.end()) it = cache.emplace(n, compute_gauss_legendre(n)).first;
  return it->second;
}

double TiltedSample::mean() const {
  double s = 0.0;
  for (size_t j = 0; j < x.size(); ++j) s += p[j] * x[j];
  return s;
}

double TiltedSample::var() const {
  const double m = mean();
  double s = 0.0;
  for (size_t j = 0; j < x.size(); ++j) s += p[j] * (x[j] - m) * (x[j] - m);
  return s;
}

TiltedSample tilt(const std::function<double(double)>& logf, double mu, double sigma2,
                  const QuadratureRule& rule, double floor) {
  if (!(sigma2 > 0.0)) throw CavityCollapse("tilt: base variance must be positive");
  const double sd = std::sqrt(sigma2);
  const size_t n = rule.nodes.size();
  TiltedSample out;
  out.x.resize(n);
  out.p.resize(n);
  std::vector<double> logw(n);
  for (size_t j = 0; j < n; ++j) {
    out.x[j] = mu + sd * rule.nodes[j];
    const double lf = logf(out.x[j]);
    if (std::isnan(lf)) throw DegenerateMass("tilt: integrand is NaN");
    logw[j] = std::log(rule.weights[j]) + lf;
  }
  out.log_z = logsumexp(logw);
  if (!(out.log_z > std::log(floor)) || !std::isfinite(out.log_z))
    throw DegenerateMass("tilt: tilted mass below floor");
  for (size_t j = 0; j < n; ++j) out.p[j] = std::exp(logw[j] - out.log_z);
  return out;
}

QuadMoments quad_moments_log(const std::function<double(double)>& logf, double mu, double sigma2,
                             const QuadratureRule& rule, double floor) {
  const TiltedSample t = tilt(logf, mu, sigma2, rule, floor);
  QuadMoments m;
  m.log_z = t.log_z;
  m.z = std::exp(t.log_z);
  m.mean = t.mean();
  m.var = t.var();
  return m;
}

QuadMoments quad_moments(const std::function<double(double)>& f, double mu, double sigma2,
                         const QuadratureRule& rule, double floor) {
  return quad_moments_log([&](double x) { return std::log(f(x)); }, mu, sigma2, rule, floor);
}

}  // namespace nnep
