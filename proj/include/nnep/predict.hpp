#pragma once

#include <vector>

#include "nnep/engine.hpp"

namespace nnep {

struct PredictiveMoments {
  double fMean = 0.0;
  double fVar = 0.0;
  double yVar = 0.0;
  Gaussian1D theta;
  int nodes = 61;

  // log p(y | x) integrating the noise level over q(theta)
  double log_density(double y) const;
};

PredictiveMoments predict(const PosteriorState& state, const VectorXd& xStar, int thetaNodes = 61,
                          int activationNodes = 100);

struct MetricSummary {
  double lpdMean = 0.0;
  double lpdStd = 0.0;
  double lpdP1 = 0.0;
  double seMean = 0.0;
  double seStd = 0.0;
  double seP99 = 0.0;
};

struct Evaluation {
  std::vector<double> lpd;  // original target units
  std::vector<double> se;
  std::vector<double> lpdNormalized;
  std::vector<double> seNormalized;
  MetricSummary summary;
  MetricSummary summaryNormalized;
};

// linear interpolation between order statistics at position p (n - 1)
double percentile(std::vector<double> values, double p);
double sample_std(const std::vector<double>& values);

// X normalized with the bias column; y in original units; yMean / yStd undo the target scaling
Evaluation evaluate(const PosteriorState& state, const MatrixXd& X, const VectorXd& y, double yMean, double yStd,
                    int thetaNodes = 61);

}  // namespace nnep
