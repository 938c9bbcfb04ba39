#pragma once

#include <Eigen/Dense>
#include <functional>
#include <optional>
#include <vector>

namespace nnep {

using Eigen::MatrixXd;
using Eigen::VectorXd;

struct Gaussian1D {
  double mean = 0.0;
  double var = 1.0;
};

// unnormalized Gaussian site exp(-tau x^2 / 2 + nu x)
struct NaturalSite1D {
  double tau = 0.0;
  double nu = 0.0;
};

inline Gaussian1D to_moments(NaturalSite1D s) { return {s.nu / s.tau, 1.0 / s.tau}; }
inline NaturalSite1D to_natural(Gaussian1D g) { return {1.0 / g.var, g.mean / g.var}; }

class GaussianDense {
 public:
  GaussianDense() = default;
  GaussianDense(VectorXd mean, MatrixXd cov);

  const VectorXd& mean() const { return mean_; }
  const MatrixXd& cov() const { return cov_; }
  Eigen::Index dim() const { return mean_.size(); }
  Gaussian1D marginal(Eigen::Index i) const { return {mean_(i), cov_(i, i)}; }

  // Cholesky factor of cov; throws NotPositiveDefinite
  void factorize();
  bool has_chol() const { return chol_.has_value(); }
  const MatrixXd& chol() const;

 private:
  VectorXd mean_;
  MatrixXd cov_;
  std::optional<MatrixXd> chol_;
};

void symmetrize(MatrixXd& m);

GaussianDense assemble_posterior_w(const MatrixXd& X, const VectorXd& tauw, const VectorXd& nuw,
                                   const VectorXd& priorTau, const VectorXd& priorNu);

// rows of alphas / nuvs hold the per-observation output-weight sites
GaussianDense assemble_posterior_v(const MatrixXd& alphas, const MatrixXd& nuvs,
                                   const VectorXd& priorTau, const VectorXd& priorNu);

GaussianDense rank_one_update(const GaussianDense& g, const VectorXd& x, double dtau, double dnu);

double log_partition(const VectorXd& mean, const MatrixXd& cov);
double log_partition(Gaussian1D g);

enum class QuadratureKind { GaussHermite, UniformGrid };

// nodes are standardized: a Gaussian N(mu, s2) is integrated at mu + sqrt(s2) * node
struct QuadratureRule {
  std::vector<double> nodes;
  std::vector<double> weights;
  QuadratureKind kind = QuadratureKind::GaussHermite;
};

QuadratureRule gauss_hermite_rule(int n);
// trapezoid grid on [-halfWidth, halfWidth] weighted by the standard normal density
QuadratureRule uniform_grid_rule(int n, double halfWidth);

struct GaussLegendre {
  std::vector<double> nodes;    // on [-1, 1]
  std::vector<double> weights;
};
const GaussLegendre& gauss_legendre(int n);

inline constexpr double kMassFloor = 1e-300;
inline constexpr double kVarianceFloor = 1e-10;

// A Gaussian reweighted by exp(logf) and normalized on the nodes of a rule.
struct TiltedSample {
  std::vector<double> x;
  std::vector<double> p;  // normalized probabilities
  double log_z = 0.0;

  double mean() const;
  double var() const;
  template <class F>
  double expect(F&& f) const {
    double s = 0.0;
    for (size_t j = 0; j < x.size(); ++j)
      if (p[j] > 0.0) s += p[j] * f(x[j], j);
    return s;
  }
};

// throws DegenerateMass when the total mass falls below floor
TiltedSample tilt(const std::function<double(double)>& logf, double mu, double sigma2,
                  const QuadratureRule& rule, double floor = kMassFloor);

struct QuadMoments {
  double z = 0.0;
  double log_z = 0.0;
  double mean = 0.0;
  double var = 0.0;
};

QuadMoments quad_moments(const std::function<double(double)>& f, double mu, double sigma2,
                         const QuadratureRule& rule, double floor = kMassFloor);
QuadMoments quad_moments_log(const std::function<double(double)>& logf, double mu, double sigma2,
                             const QuadratureRule& rule, double floor = kMassFloor);

}  // namespace nnep
