#pragma once

#include <optional>
#include <vector>

#include "nnep/numerics.hpp"

namespace nnep {

// Per-observation sites. Row i of alpha holds the scale vector of the
// rank-one output-weight site precision alpha_i alpha_i^T.
struct LikelihoodSites {
  MatrixXd tauw;  // n x K
  MatrixXd nuw;   // n x K
  MatrixXd alpha; // n x (K+1)
  MatrixXd nuv;   // n x (K+1)
  std::vector<NaturalSite1D> theta;

  static LikelihoodSites zeros(Eigen::Index n, int K);
  Eigen::Index size() const { return tauw.rows(); }
};

struct CavityBundle {
  std::vector<Gaussian1D> h;
  GaussianDense v;
  Gaussian1D theta;
};

struct FMoments {
  double mF = 0.0;
  double vF = 0.0;
  VectorXd cross;
};

struct ThetaTilt {
  double logZhat = 0.0;
  double mean = 0.0;
  double var = 0.0;
  double aHat = 0.0;
  double bHat = 0.0;
};

struct TiltedSummary {
  double logZhat = 0.0;
  VectorXd vMean;
  MatrixXd vCov;
  std::vector<double> hMean;
  std::vector<double> hVar;
  double thetaMean = 0.0;
  double thetaVar = 0.0;
  double aHat = 0.0;
  double bHat = 0.0;
  VectorXd mG;
  VectorXd vG;
  double mF = 0.0;
  double vF = 0.0;
  VectorXd cross;
};

struct TiltOptions {
  double eta = 0.95;
  QuadratureRule grid = uniform_grid_rule(400, 8.0);
  int activationNodes = 100;
  double massFloor = kMassFloor;
  std::optional<double> fixedTheta;
};

Gaussian1D cavity_scalar(Gaussian1D marg, NaturalSite1D site, double eta);
GaussianDense cavity_v(const GaussianDense& q, const VectorXd& alpha, const VectorXd& nuv, double eta);

// activation mean/variance vectors with the output bias appended as (1, 0)
void activation_vectors(const std::vector<Gaussian1D>& hCav, int K, int nodes, VectorXd& mG, VectorXd& vG);

FMoments predictive_f_moments(const GaussianDense& vCav, const VectorXd& mG, const VectorXd& vG);

double log_fraction_normalizer(double theta, double eta);

ThetaTilt tilted_theta(double mF, double vF, double y, Gaussian1D thetaCav, double eta,
                       const QuadratureRule& grid, double floor = kMassFloor);
ThetaTilt tilted_theta_fixed(double mF, double vF, double y, double theta, double eta);

void tilted_v(const GaussianDense& vCav, const FMoments& f, double y, double aHat, double bHat,
              VectorXd& vMean, MatrixXd& vCov);

Gaussian1D tilted_h(int k, Gaussian1D hCav, const GaussianDense& vCav, const VectorXd& mG, const VectorXd& vG,
                    const FMoments& f, double y, double thetaPlugin, double eta, int K,
                    const QuadratureRule& grid, double floor = kMassFloor);

// all tilted quantities for one observation from its cavities
TiltedSummary tilted_moments(const CavityBundle& cav, double y, int K, const TiltOptions& opt);

NaturalSite1D site_update_scalar(Gaussian1D tilted, Gaussian1D marg, NaturalSite1D site, double eta, double delta);

// projected variances x_j' S x_j for every row of X
VectorXd projected_variances(const MatrixXd& X, const MatrixXd& cov);

// true when no cavity that was valid under the old variances loses positive precision under the new ones
bool keeps_cavities(const VectorXd& oldVar, const VectorXd& newVar, const VectorXd& oldTau, const VectorXd& newTau,
                    double eta);

struct VSite {
  VectorXd alpha;
  VectorXd nuv;
};

// undamped output-weight site matching the tilted moments; throws SkippedUpdate
VSite site_v_target(const GaussianDense& vCav, const VectorXd& mG, double aHat, double bHat, double residual,
                    double eta);

// collapses the rank-two damped site onto its dominant direction, keeping the posterior mean
VSite eigen_damp(const GaussianDense& vCav, const VSite& oldSite, const VSite& newSite, double eta, double delta);

VSite site_update_v(const GaussianDense& vCav, const VectorXd& mG, double aHat, double bHat, double y, double mF,
                    const VSite& oldSite, double eta, double delta);

}  // namespace nnep
