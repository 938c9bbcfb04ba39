#pragma once

#include <cstdint>
#include <optional>
#include <string>
#include <vector>

#include "nnep/likelihood_ep.hpp"
#include "nnep/numerics.hpp"
#include "nnep/prior_ep.hpp"

namespace nnep {

enum class UpdateMode { Sequential, Parallel };
enum class OutputPrior { TruncatedT, FixedGaussian };
enum class InputPrior { Hierarchical, Fixed };
enum class PriorSchedule { RunOnce, InnerIteration };

struct InitConfig {
  double wPriorVar = 0.5;
  double wBiasPriorVar = 4.0;
  double vMeanLo = 1.0;
  double vMeanHi = 2.0;
  double vPriorVar = 0.04;
  double thetaInit = -2.4079456086518722;  // log(0.3^2)
  // optional per-weight Gaussian prior (length K * d, index k * d + c)
  std::optional<VectorXd> wPriorMean;
  std::optional<VectorXd> wPriorVariance;
};

struct QuadratureConfig {
  int tiltNodes = 400;
  double tiltHalfWidth = 8.0;
  int phiNodes = 300;
  double phiHalfWidth = 8.0;
  int activationNodes = 100;
  int predictiveNodes = 61;
  double massFloor = kMassFloor;
};

struct FitConfig {
  int K = 10;
  double eta = 0.95;
  double etaPrior = 0.8;
  double deltaW = 0.6;
  double deltaV = 0.2;
  double deltaPrior = 0.6;
  UpdateMode updateMode = UpdateMode::Sequential;
  int maxOuterIters = 200;
  double tolMomentMatch = 1e-3;
  int initIters = 15;
  std::optional<double> thetaKnown;
  std::uint64_t rngSeed = 0;
  bool shuffleSites = false;

  PriorConfig priors;
  Grouping grouping = Grouping::Shared;  // used when priors.groupIndex is empty
  double muTheta0 = -9.210340371976184;  // 2 log(0.01)
  double sigmaTheta0Sq = 4.0;

  OutputPrior outputPrior = OutputPrior::TruncatedT;
  InputPrior inputPrior = InputPrior::Hierarchical;
  PriorSchedule priorSchedule = PriorSchedule::RunOnce;
  int priorMaxIters = 40;
  int outputPriorMaxIters = 50;

  bool incrementalUnits = false;
  int unitsEvery = 3;
  int reassembleEvery = 10;
  double minDelta = 0.05;
  double skipFraction = 0.1;

  InitConfig init;
  QuadratureConfig quad;

  // throws ConfigError; d counts the bias column
  void validate(Eigen::Index d) const;
};

// groupIndex filled in for a d-column design
PriorConfig resolved_priors(const FitConfig& cfg, Eigen::Index d);

struct PosteriorState {
  std::vector<GaussianDense> qw;
  GaussianDense qv;
  Gaussian1D qtheta;  // variance 0 marks a fixed noise level
  std::vector<Gaussian1D> qphi;
};

struct AllSites {
  LikelihoodSites lik;
  WeightPriorSites wprior;
  OutputPriorSites vprior;
  bool thetaActive = false;
  bool wPriorActive = false;
  bool vPriorActive = false;
};

struct FitReport {
  std::vector<double> logZEP;
  std::vector<double> logZLOO;
  std::vector<double> maxMomentResidual;
  std::vector<int> skipCounts;
  bool converged = false;
  int iterations = 0;
  double finalDeltaW = 0.0;
  double finalDeltaV = 0.0;
  std::string stopReason;
};

struct FitResult {
  PosteriorState state;
  AllSites sites;
  FitReport report;
};

struct SweepDiagnostics {
  double maxResidual = 0.0;
  int skips = 0;
  std::vector<double> logZhat;
};

// noise level used while theta sites are inactive
std::optional<double> fixed_theta(const FitConfig& cfg, const AllSites& sites);

FitResult initialize(const MatrixXd& X, const VectorXd& y, const FitConfig& cfg);

PosteriorState assemble_state(const MatrixXd& X, const AllSites& sites, const FitConfig& cfg);

struct SweepControl {
  double deltaW = 0.6;
  double deltaV = 0.2;
  bool thetaOnly = false;
  int activeUnits = -1;  // -1 updates every unit
  int sweepIndex = 0;
};

SweepDiagnostics sweep_likelihood(const MatrixXd& X, const VectorXd& y, PosteriorState& state, AllSites& sites,
                                  const FitConfig& cfg, const SweepControl& control);

FitResult fit(const MatrixXd& X, const VectorXd& y, const FitConfig& cfg);

// per-observation log normalizers recomputed from the current sites
std::vector<double> site_log_zhats(const MatrixXd& X, const VectorXd& y, const AllSites& sites, const FitConfig& cfg);

double marginal_likelihood(const MatrixXd& X, const VectorXd& y, const AllSites& sites, const FitConfig& cfg);

double loo_density(const std::vector<double>& logZhats);

}  // namespace nnep
