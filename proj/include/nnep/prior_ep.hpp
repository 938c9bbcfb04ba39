#pragma once

#include <vector>

#include "nnep/likelihood_ep.hpp"
#include "nnep/numerics.hpp"

namespace nnep {

enum class PriorFamily { Laplace, GaussianArd };

struct PriorConfig {
  PriorFamily family = PriorFamily::Laplace;
  // one entry per input weight, index k * d + c; 0 keeps the weight under its
  // fixed Gaussian prior, l >= 1 ties it to the scale parameter phi_l
  std::vector<int> groupIndex;
  double muPhi0 = -9.210340371976184;  // 2 log(0.01)
  double sigmaPhi0Sq = 6.25;
  double nuV = 4.0;
  double sigmaV0Sq = 1.0;
  double sigmaBias0Sq = 1.0;
  double etaPrior = 0.8;

  int num_groups() const;
};

enum class Grouping { Shared, Ard };

// every non-bias weight in one group, or one group per non-bias input column
std::vector<int> default_groups(Grouping grouping, int K, int d);

struct WeightPriorSites {
  std::vector<NaturalSite1D> w;
  std::vector<NaturalSite1D> phi;
};

struct OutputPriorSites {
  std::vector<NaturalSite1D> v;  // last entry is the fixed bias prior
};

struct ConditionalMoments {
  double logZ = 0.0;
  double Ew = 0.0;
  double Ew2 = 0.0;
};

// integral of N(w | cavity) p(w | phi)^eta and the first two moments of the normalized product
ConditionalMoments partial_Z_and_conditionals(PriorFamily family, Gaussian1D wCav, double phi, double eta);

struct WPhiTilt {
  double logZhat = 0.0;
  double wMean = 0.0;
  double wVar = 0.0;
  double phiMean = 0.0;
  double phiVar = 0.0;
};

WPhiTilt tilted_w_phi(Gaussian1D wCav, Gaussian1D phiCav, PriorFamily family, double eta,
                      const QuadratureRule& phiGrid, double floor = kMassFloor);
WPhiTilt tilted_w_phi(Gaussian1D wCav, Gaussian1D phiCav, PriorFamily family, double eta);

struct Tilt1D {
  double logZhat = 0.0;
  double mean = 0.0;
  double var = 0.0;
};

double log_half_student_t(double v, double nuV, double sigmaV0Sq);

Tilt1D tilted_truncated_t(Gaussian1D vCav, double nuV, double sigmaV0Sq, double eta, int panels = 20,
                          int nodesPerPanel = 20, double floor = kMassFloor);

// moment residual: max of |mean shift| in marginal sds and |log variance ratio|
double moment_residual(Gaussian1D tilted, Gaussian1D marg);

Gaussian1D assemble_phi(const PriorConfig& cfg, const WeightPriorSites& sites, int group);
std::vector<Gaussian1D> assemble_phis(const PriorConfig& cfg, const WeightPriorSites& sites);

// rebuilds every q(w_k) from the likelihood and prior sites
std::vector<GaussianDense> assemble_qw(const MatrixXd& X, const LikelihoodSites& lik, const WeightPriorSites& prior,
                                       int K);

struct PriorSweepStats {
  int iterations = 0;
  int skips = 0;
  double firstResidual = 0.0;
  double lastResidual = 0.0;
};

struct PriorSweepOptions {
  double delta = 0.6;
  double tol = 1e-3;
  int maxIters = 40;
  QuadratureRule phiGrid = uniform_grid_rule(300, 8.0);
  double massFloor = kMassFloor;
  double likelihoodEta = 1.0;  // fraction used by the likelihood cavities guarded during w updates
};

// maxIters = 1 gives a single inner pass
PriorSweepStats prior_sweep_w(std::vector<GaussianDense>& qw, std::vector<Gaussian1D>& qphi, WeightPriorSites& sites,
                              const PriorConfig& cfg, const MatrixXd& X, const LikelihoodSites& lik,
                              const PriorSweepOptions& opt);

PriorSweepStats prior_sweep_v(GaussianDense& qv, OutputPriorSites& sites, const PriorConfig& cfg,
                              const PriorSweepOptions& opt);

}  // namespace nnep
